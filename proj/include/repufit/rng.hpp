#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "repufit/common.hpp"

namespace repufit {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Derive an independent stream seed from a root seed, a stream name
/// ("init", "noise", "mc", "shift", ...) and an index. All randomness in
/// the library flows through this splitter so components can be re-seeded
/// independently of each other.
inline std::uint64_t seed_stream(std::uint64_t root, std::string_view name,
                                 std::uint64_t index = 0) {
    std::uint64_t s = root ^ detail::fnv1a(name);
    (void)detail::splitmix64(s);
    s ^= 0x632be59bd9b4e019ULL + index * 0x9e3779b97f4a7c15ULL;
    return detail::splitmix64(s);
}

/// Deterministic generator with hand-rolled distributions so that seeded
/// results are identical across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x5851f42d4c957f2dULL) {
        // warm up so that nearby seeds decorrelate
        (void)next_u64();
        (void)next_u64();
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Standard normal via Box-Muller (one draw per call, deterministic).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Uniform direction on the unit sphere in R^d.
    std::vector<double> unit_sphere(int d) {
        std::vector<double> w(static_cast<std::size_t>(d));
        for (;;) {
            double norm_sq = 0.0;
            for (auto& c : w) {
                c = normal();
                norm_sq += c * c;
            }
            if (norm_sq > 1e-24) {
                double inv = 1.0 / std::sqrt(norm_sq);
                for (auto& c : w) c *= inv;
                return w;
            }
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace repufit
