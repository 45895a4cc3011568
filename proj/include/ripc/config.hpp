#pragma once

/**
 * Flat INI-style run configuration.
 *
 * Sections map one-to-one onto the module configs: [model], [lambda],
 * [grid], [sim], [train], [output], [run]. Every key has a benchmark
 * default, so an empty file is a valid benchmark run; unknown sections
 * or keys are rejected rather than ignored, since a silently dropped
 * key is the usual way an experiment goes wrong.
 */

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ripc/grid.hpp"
#include "ripc/model.hpp"
#include "ripc/nonlocal.hpp"
#include "ripc/sde.hpp"
#include "ripc/td.hpp"

namespace ripc {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

inline double to_real(const std::string& key, const std::string& s) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: bad number for " + key + ": '" + s + "'");
    }
}

inline long long to_int(const std::string& key, const std::string& s) {
    try {
        size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: bad integer for " + key + ": '" + s + "'");
    }
}

inline uint64_t to_u64(const std::string& key, const std::string& s) {
    try {
        if (s.find('-') != std::string::npos) throw std::invalid_argument("negative");
        size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: bad seed for " + key + ": '" + s + "'");
    }
}

/// Coefficient grammar: "const C" | "affine INTERCEPT SLOPE" |
/// "vee NEG_SLOPE POS_SLOPE" | "points x0 y0 x1 y1 ...".
inline Pwl to_pwl(const std::string& key, const std::string& s) {
    std::vector<std::string> t = tokens(s);
    if (t.empty()) throw ParseError("config: empty coefficient for " + key);
    auto num = [&](size_t i) { return to_real(key, t[i]); };
    try {
        if (t[0] == "const" && t.size() == 2) return Pwl::constant(num(1));
        if (t[0] == "affine" && t.size() == 3) return Pwl::affine(num(1), num(2));
        if (t[0] == "vee" && t.size() == 3) return Pwl::vee(num(1), num(2));
        if (t[0] == "points" && t.size() >= 5 && t.size() % 2 == 1) {
            std::vector<double> kx, ky;
            for (size_t i = 1; i < t.size(); i += 2) {
                kx.push_back(num(i));
                ky.push_back(num(i + 1));
            }
            return Pwl::points(std::move(kx), std::move(ky));
        }
    } catch (const InvalidSpec& e) {
        throw ParseError(std::string("config: ") + e.what() + " for " + key);
    }
    throw ParseError("config: bad coefficient for " + key + ": '" + s + "'");
}

}  // namespace config_detail

struct RunConfig {
    ModelSpec spec = benchmark_default();
    LambdaPair lambda{0.5, 0.5};
    Grid1D grid = Grid1D::make(-8.0, 8.0, 1601);
    SimConfig sim;
    TrainConfig train;
    std::string out_dir = ".";
    uint64_t seed = 12345;
};

/// Parse INI text. Full-line and trailing comments start with '#' or ';'.
inline RunConfig parse_config(std::istream& in) {
    using namespace config_detail;
    RunConfig rc;
    double x_min = rc.grid.x_min, x_max = rc.grid.x_max;
    long long n_points = rc.grid.n;

    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t cut = line.find_first_of("#;");
        if (cut != std::string::npos) line.resize(cut);
        line = trim(line);
        if (line.empty()) continue;
        auto fail = [&](const std::string& why) {
            throw ParseError("config line " + std::to_string(lineno) + ": " + why);
        };
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "lambda" && section != "grid" &&
                section != "sim" && section != "train" && section != "output" &&
                section != "run")
                fail("unknown section [" + section + "]");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) fail("expected key = value");
        std::string qual = section + "." + key;

        if (section == "model") {
            ImpulseCost& jc = rc.spec.jump_cost;
            if (key == "drift") rc.spec.drift = to_pwl(qual, val);
            else if (key == "volatility") rc.spec.volatility = to_pwl(qual, val);
            else if (key == "sigma0") rc.spec.sigma0 = to_real(qual, val);
            else if (key == "r") rc.spec.r = to_real(qual, val);
            else if (key == "running_cost") rc.spec.running_cost = to_pwl(qual, val);
            else if (key == "K_plus") jc.Kp = to_real(qual, val);
            else if (key == "K_minus") jc.Km = to_real(qual, val);
            else if (key == "k_plus") jc.kp = to_real(qual, val);
            else if (key == "k_minus") jc.km = to_real(qual, val);
            else fail("unknown key " + qual);
        } else if (section == "lambda") {
            if (key == "lambda1") rc.lambda.lambda1 = to_real(qual, val);
            else if (key == "lambda2") rc.lambda.lambda2 = to_real(qual, val);
            else fail("unknown key " + qual);
        } else if (section == "grid") {
            if (key == "x_min") x_min = to_real(qual, val);
            else if (key == "x_max") x_max = to_real(qual, val);
            else if (key == "n_points") n_points = to_int(qual, val);
            else fail("unknown key " + qual);
        } else if (section == "sim") {
            if (key == "dt") rc.sim.dt = to_real(qual, val);
            else if (key == "horizon") rc.sim.horizon = to_real(qual, val);
            else if (key == "batch") rc.sim.batch = static_cast<int>(to_int(qual, val));
            else if (key == "x0") {
                std::vector<std::string> t = tokens(val);
                if (t.size() == 2 && t[0] == "point")
                    rc.sim.x0 = X0Sampler::point(to_real(qual, t[1]));
                else if (t.size() == 3 && t[0] == "uniform")
                    rc.sim.x0 = X0Sampler::uniform(to_real(qual, t[1]), to_real(qual, t[2]));
                else fail("x0 must be 'point V' or 'uniform A B'");
            } else fail("unknown key " + qual);
        } else if (section == "train") {
            TrainConfig& tc = rc.train;
            if (key == "outer_iters") tc.outer = static_cast<int>(to_int(qual, val));
            else if (key == "inner_steps") tc.inner = static_cast<int>(to_int(qual, val));
            else if (key == "batch_paths") tc.batch_paths = static_cast<int>(to_int(qual, val));
            else if (key == "minibatch") tc.minibatch = static_cast<int>(to_int(qual, val));
            else if (key == "mc_jump_samples")
                tc.mc_jump_samples = static_cast<int>(to_int(qual, val));
            else if (key == "pi_max") tc.pi_max = to_real(qual, val);
            else if (key == "lr") tc.lr = to_real(qual, val);
            else if (key == "weight_decay") tc.weight_decay = to_real(qual, val);
            else if (key == "net_hidden") {
                std::vector<int> sizes{1};
                for (const std::string& t : tokens(val))
                    sizes.push_back(static_cast<int>(to_int(qual, t)));
                sizes.push_back(1);
                tc.net_sizes = std::move(sizes);
            } else fail("unknown key " + qual);
        } else if (section == "output") {
            if (key == "dir") rc.out_dir = val;
            else fail("unknown key " + qual);
        } else if (section == "run") {
            if (key == "seed") rc.seed = to_u64(qual, val);
            else fail("unknown key " + qual);
        } else {
            fail("key " + key + " outside any section");
        }
    }

    if (n_points < 2 || n_points > (1 << 24))
        throw ParseError("config: grid.n_points out of range");
    if (!(x_min < x_max)) throw ParseError("config: grid.x_min must be below grid.x_max");
    rc.grid = Grid1D::make(x_min, x_max, static_cast<int>(n_points));
    return rc;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open " + path);
    return parse_config(in);
}

}  // namespace ripc
