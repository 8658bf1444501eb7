#pragma once

// Counter-based random numbers with a documented bit-exact output.
//
// Philox4x32-10 (Salmon et al., Random123) maps a 128-bit counter and a 64-bit
// key to 128 pseudo-random bits. Seeds are organised hierarchically:
// master seed -> per-trial seed (trial_seed) -> Philox key; the counter
// encodes what is being drawn (e.g. the lattice site), so the value at a given
// site never depends on evaluation order or worker count.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mpal::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b);
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

constexpr Counter philox_round(const Counter& c, const Key& k) {
    std::uint32_t hi0 = 0, lo0 = 0, hi1 = 0, lo1 = 0;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

} // namespace detail

/// Philox4x32 with 10 rounds.
constexpr Counter philox4x32(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += detail::kPhiloxW0;
            key[1] += detail::kPhiloxW1;
        }
        ctr = detail::philox_round(ctr, key);
    }
    return ctr;
}

/// SplitMix64 finaliser; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Per-trial seed: mix64(master + (trial + 1) * golden). Distinct for distinct
/// trials under one master seed since both steps are injective.
constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
    return mix64(master + (trial + 1) * 0x9E3779B97F4A7C15ull);
}

/// Derive an independent sub-stream seed (e.g. one per experiment point).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ull));
}

constexpr Key key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// 53-bit double in [0, 1) from two 32-bit words.
constexpr double to_unit_closed_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
}

/// 53-bit double in (0, 1] from two 32-bit words.
constexpr double to_unit_open_closed(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return static_cast<double>(bits + 1) * 0x1.0p-53;
}

/// Standard normal deviate from one Philox block (Box-Muller, cosine branch).
inline double normal_from_block(const Counter& block) {
    const double u1 = to_unit_open_closed(block[0], block[1]);
    const double u2 = to_unit_closed_open(block[2], block[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential stream over Philox blocks, for consumers that just need a
/// reproducible sequence (bootstrap resampling, random test instances).
/// Satisfies UniformRandomBitGenerator.
class PhiloxStream {
public:
    using result_type = std::uint32_t;

    explicit PhiloxStream(std::uint64_t seed, std::uint32_t stream = 0) : key_(key_from_seed(seed)), stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xFFFFFFFFu; }

    result_type operator()() {
        if (pos_ == 4) refill();
        return block_[pos_++];
    }

    /// Uniform double in [0, 1).
    double uniform() {
        const std::uint32_t hi = (*this)();
        const std::uint32_t lo = (*this)();
        return to_unit_closed_open(hi, lo);
    }

    /// Uniform double in (0, 1].
    double uniform_open_closed() {
        const std::uint32_t hi = (*this)();
        const std::uint32_t lo = (*this)();
        return to_unit_open_closed(hi, lo);
    }

    double normal() {
        const double u1 = uniform_open_closed();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n) by rejection (n > 0).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
        while (true) {
            const std::uint64_t v = (static_cast<std::uint64_t>((*this)()) << 32) | (*this)();
            if (v < limit) return v % n;
        }
    }

private:
    void refill() {
        block_ = philox4x32({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), stream_, 0u},
                            key_);
        ++counter_;
        pos_ = 0;
    }

    Key key_;
    std::uint32_t stream_;
    std::uint64_t counter_ = 0;
    Counter block_{};
    int pos_ = 4;
};

} // namespace mpal::rng
