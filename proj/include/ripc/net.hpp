#pragma once

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

#include "ripc/rng.hpp"

namespace ripc {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace net_detail {

/**
 * Minimal over-aligning allocator. Parameter and gradient vectors are mapped
 * into Eigen expressions, and some vectorized kernels round differently
 * depending on where the data sits relative to a SIMD lane boundary. Pinning
 * the buffers to one alignment keeps evaluation bit-reproducible no matter
 * what the heap has handed out before.
 */
template <class T, size_t Align>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    template <class U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    T* allocate(size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
    }
    void deallocate(T* p, size_t) noexcept { ::operator delete(p, std::align_val_t(Align)); }
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
    friend bool operator!=(const AlignedAllocator&, const AlignedAllocator&) { return false; }
};

} // namespace net_detail

/// Flat parameter or gradient vector, over-aligned for reproducible kernels.
using ParamVec = std::vector<double, net_detail::AlignedAllocator<double, 64>>;

inline double softplus(double y) { return y > 30.0 ? y : std::log1p(std::exp(y)); }

inline double sigmoid(double y) {
    return y >= 0.0 ? 1.0 / (1.0 + std::exp(-y)) : std::exp(y) / (1.0 + std::exp(y));
}

/**
 * Fully connected scalar network: linear layers with tanh hidden activations
 * and a softplus output map, so the value is nonnegative everywhere. All
 * parameters live in one flat vector (column-major weights, then biases,
 * layer by layer), which optimizers update in place.
 */
class ValueNet {
  public:
    using Mat = Eigen::MatrixXd;

    explicit ValueNet(std::vector<int> sizes = {1, 64, 64, 64, 1})
        : sizes_(std::move(sizes)) {
        if (sizes_.size() < 2 || sizes_.front() != 1 || sizes_.back() != 1)
            throw std::invalid_argument("ValueNet: sizes must run from 1 to 1");
        for (int s : sizes_)
            if (s < 1) throw std::invalid_argument("ValueNet: layer sizes must be positive");
        size_t off = 0;
        for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
            w_off_.push_back(off);
            off += static_cast<size_t>(sizes_[l + 1]) * sizes_[l];
            b_off_.push_back(off);
            off += static_cast<size_t>(sizes_[l + 1]);
        }
        theta_.assign(off, 0.0);
    }

    int param_count() const { return static_cast<int>(theta_.size()); }
    ParamVec& params() { return theta_; }
    const ParamVec& params() const { return theta_; }
    const std::vector<int>& sizes() const { return sizes_; }
    int layers() const { return static_cast<int>(sizes_.size()) - 1; }

    /// Glorot-uniform weights, zero biases.
    void init_params(RngStream& rs) {
        for (int l = 0; l < layers(); ++l) {
            double bound = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
            size_t n = static_cast<size_t>(sizes_[l + 1]) * sizes_[l];
            for (size_t k = 0; k < n; ++k) theta_[w_off_[l] + k] = rs.uniform(-bound, bound);
            for (int k = 0; k < sizes_[l + 1]; ++k) theta_[b_off_[l] + k] = 0.0;
        }
    }

    bool params_finite() const {
        for (double p : theta_)
            if (!std::isfinite(p)) return false;
        return true;
    }

    struct Forward {
        std::vector<Mat> acts;     // acts[0] input row, acts[l] tanh output of layer l-1
        Eigen::RowVectorXd y;      // final preactivation
        Eigen::RowVectorXd value;  // softplus(y)
    };

    void forward(const double* xs, int n, Forward& f) const {
        int depth = layers();
        f.acts.resize(depth);
        f.acts[0] = Eigen::Map<const Eigen::RowVectorXd>(xs, n);
        for (int l = 0; l + 1 < depth; ++l) {
            f.acts[l + 1].noalias() = w(l) * f.acts[l];
            f.acts[l + 1].colwise() += b(l);
            f.acts[l + 1] = f.acts[l + 1].array().tanh();
        }
        f.y.noalias() = (w(depth - 1) * f.acts[depth - 1]).row(0);
        f.y.array() += theta_[b_off_[depth - 1]];
        f.value = f.y.unaryExpr([](double v) { return softplus(v); });
    }

    void forward(const std::vector<double>& xs, Forward& f) const {
        forward(xs.data(), static_cast<int>(xs.size()), f);
    }

    double value(double x) const {
        thread_local Forward f;
        forward(&x, 1, f);
        return f.value(0);
    }

    double operator()(double x) const { return value(x); }

    /// Gradient of sum_i upstream_i * value_i with respect to the flat
    /// parameters, written into grad (resized and overwritten).
    void backward(const Forward& f, const Eigen::RowVectorXd& upstream,
                  ParamVec& grad) const {
        int depth = layers();
        grad.assign(theta_.size(), 0.0);
        Mat dz = (upstream.array() *
                  f.y.unaryExpr([](double v) { return sigmoid(v); }).array())
                     .matrix();
        for (int l = depth - 1; l >= 0; --l) {
            Eigen::Map<Mat> dw(grad.data() + w_off_[l], sizes_[l + 1], sizes_[l]);
            Eigen::Map<Eigen::VectorXd> db(grad.data() + b_off_[l], sizes_[l + 1]);
            dw.noalias() = dz * f.acts[l].transpose();
            db = dz.rowwise().sum();
            if (l > 0) {
                Mat da = w(l).transpose() * dz;
                dz = (da.array() * (1.0 - f.acts[l].array().square())).matrix();
            }
        }
    }

  private:
    Eigen::Map<const Mat> w(int l) const {
        return {theta_.data() + w_off_[l], sizes_[l + 1], sizes_[l]};
    }
    Eigen::Map<const Eigen::VectorXd> b(int l) const {
        return {theta_.data() + b_off_[l], sizes_[l + 1]};
    }

    std::vector<int> sizes_;
    ParamVec theta_;
    std::vector<size_t> w_off_, b_off_;

    friend void save_checkpoint(const ValueNet&, const std::string&);
};

inline double net_forward(const ValueNet& net, double x) { return net.value(x); }

inline ParamVec net_backward(const ValueNet& net, double x, double upstream) {
    ValueNet::Forward f;
    net.forward(&x, 1, f);
    Eigen::RowVectorXd u(1);
    u(0) = upstream;
    ParamVec grad;
    net.backward(f, u, grad);
    return grad;
}

// Checkpoint layout: magic, layer count, layer sizes, then the flat
// parameter vector; all little-endian, doubles verbatim.
static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline void save_checkpoint(const ValueNet& net, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw CheckpointError("save_checkpoint: cannot open " + path);
    const char magic[8] = {'R', 'I', 'P', 'C', 'N', 'E', 'T', '\x01'};
    uint32_t nl = static_cast<uint32_t>(net.sizes().size());
    bool ok = std::fwrite(magic, 1, 8, fp) == 8 && std::fwrite(&nl, 4, 1, fp) == 1;
    for (int s : net.sizes()) {
        uint32_t u = static_cast<uint32_t>(s);
        ok = ok && std::fwrite(&u, 4, 1, fp) == 1;
    }
    ok = ok && std::fwrite(net.params().data(), 8, net.params().size(), fp) ==
                   net.params().size();
    ok = (std::fclose(fp) == 0) && ok;
    if (!ok) throw CheckpointError("save_checkpoint: short write to " + path);
}

inline ValueNet load_checkpoint(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw CheckpointError("load_checkpoint: cannot open " + path);
    auto fail = [&](const char* why) {
        std::fclose(fp);
        throw CheckpointError(std::string("load_checkpoint: ") + why);
    };
    char magic[8];
    if (std::fread(magic, 1, 8, fp) != 8 ||
        std::string(magic, 7) != "RIPCNET" || magic[7] != '\x01')
        fail("bad magic or version");
    uint32_t nl = 0;
    if (std::fread(&nl, 4, 1, fp) != 1 || nl < 2 || nl > 64) fail("bad layer count");
    std::vector<int> sizes(nl);
    for (uint32_t i = 0; i < nl; ++i) {
        uint32_t u = 0;
        if (std::fread(&u, 4, 1, fp) != 1 || u == 0 || u > (1u << 20)) fail("bad layer size");
        sizes[i] = static_cast<int>(u);
    }
    ValueNet net(sizes);
    if (std::fread(net.params().data(), 8, net.params().size(), fp) != net.params().size())
        fail("truncated parameter vector");
    char extra;
    if (std::fread(&extra, 1, 1, fp) != 0) fail("trailing bytes");
    std::fclose(fp);
    if (!net.params_finite()) throw CheckpointError("load_checkpoint: non-finite parameters");
    return net;
}

} // namespace ripc
