#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ripc {

namespace rng_detail {

constexpr uint32_t philox_m0 = 0xD2511F53u;
constexpr uint32_t philox_m1 = 0xCD9E8D57u;
constexpr uint32_t philox_w0 = 0x9E3779B9u;
constexpr uint32_t philox_w1 = 0xBB67AE85u;

/// One 128-bit block of Philox4x32 with 10 rounds.
inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> x,
                                             std::array<uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        uint64_t p0 = static_cast<uint64_t>(philox_m0) * x[0];
        uint64_t p1 = static_cast<uint64_t>(philox_m1) * x[2];
        uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
        uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
        x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
        k[0] += philox_w0;
        k[1] += philox_w1;
    }
    return x;
}

} // namespace rng_detail

/**
 * Counter-based stream: key = seed, counter = (block index, stream id).
 * Distinct stream ids under the same seed are statistically independent,
 * and a given (seed, stream id) replays the same sequence no matter how
 * other streams are consumed. Draw order within a block is x[0..3].
 */
class RngStream {
  public:
    RngStream(uint64_t seed, uint64_t stream_id)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          stream_(stream_id) {}

    uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    uint64_t next_u64() {
        uint64_t lo = next_u32();
        uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    /// Uniform strictly inside (0, 1) with 53 significant bits.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    /// Standard normal via Box-Muller; the sine mate is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double rad = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * std::numbers::pi * u2;
        spare_ = rad * std::sin(ang);
        have_spare_ = true;
        return rad * std::cos(ang);
    }

    uint64_t blocks_consumed() const { return block_; }

  private:
    void refill() {
        buf_ = rng_detail::philox4x32_10(
            {static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
             static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)},
            key_);
        ++block_;
        pos_ = 0;
    }

    std::array<uint32_t, 2> key_;
    uint64_t stream_ = 0;
    uint64_t block_ = 0;
    std::array<uint32_t, 4> buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace ripc
