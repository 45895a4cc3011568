#pragma once

/**
 * Deterministic CSV emission: '.' decimal point, ',' separator, LF line
 * endings, header row, 17 significant digits so doubles roundtrip exactly.
 * Files are written to a temporary sibling and renamed into place, so a
 * crashed run never leaves a half-written table behind.
 */

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "ripc/grid.hpp"

namespace ripc {

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace csv_detail {

inline void format_cell(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace csv_detail

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::string body;
    for (size_t c = 0; c < header.size(); ++c) {
        if (c) body += ',';
        body += header[c];
    }
    body += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw CsvError("write_csv: row width differs from header in " + path);
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) body += ',';
            csv_detail::format_cell(body, row[c]);
        }
        body += '\n';
    }

    std::string tmp = path + ".tmp";
    std::FILE* fp = std::fopen(tmp.c_str(), "wb");
    if (!fp) throw CsvError("write_csv: cannot open " + tmp);
    bool ok = std::fwrite(body.data(), 1, body.size(), fp) == body.size();
    ok = (std::fclose(fp) == 0) && ok;
    if (!ok || std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw CsvError("write_csv: failed writing " + path);
    }
}

/// Two-column (x, value) dump of a grid function.
inline void write_gridfn_csv(const std::string& path, const GridFn& g,
                             const std::string& value_name = "value") {
    std::vector<std::vector<double>> rows;
    rows.reserve(g.grid.n);
    for (int i = 0; i < g.grid.n; ++i) rows.push_back({g.grid.x(i), g.v[i]});
    write_csv(path, {"x", value_name}, rows);
}

}  // namespace ripc
