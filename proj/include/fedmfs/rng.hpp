#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace fedmfs {

namespace detail {

inline std::uint64_t splitmix64_step(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Derives an independent stream seed from a base seed and up to three tags.
/// Same inputs always produce the same output, on every platform.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag0,
                                 std::uint64_t tag1 = 0, std::uint64_t tag2 = 0) {
    std::uint64_t s = base;
    s = detail::splitmix64_step(s) ^ (tag0 * 0xD6E8FEB86659FD93ULL);
    s = detail::splitmix64_step(s) ^ (tag1 * 0xA5CB3B1A7B2F9D61ULL);
    s = detail::splitmix64_step(s) ^ (tag2 * 0xC2B2AE3D27D4EB4FULL);
    return detail::splitmix64_step(s);
}

/// Deterministic generator with a fully specified output sequence.
/// std::mt19937 plus the standard distributions would be implementation
/// defined, which breaks bit-exact checkpoints across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return detail::splitmix64_step(state_); }

    /// Unbiased integer in [0, n). n must be > 0.
    std::uint64_t uniform_below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t t = -n % n;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices from [0, n), in draw order. Requires k <= n.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(uniform_below(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fedmfs
