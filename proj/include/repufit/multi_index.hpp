#pragma once

#include <numeric>
#include <span>
#include <vector>

#include "repufit/common.hpp"

namespace repufit {

/// d-tuple of non-negative derivative orders.
struct MultiIndex {
    std::vector<int> orders;

    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> o) : orders(std::move(o)) {}
    static MultiIndex zeros(int d) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(d), 0)); }
    static MultiIndex unit(int d, int axis) {
        MultiIndex a = zeros(d);
        a.orders[static_cast<std::size_t>(axis)] = 1;
        return a;
    }

    int dim() const { return static_cast<int>(orders.size()); }

    /// |alpha| = sum of orders.
    int total() const { return std::accumulate(orders.begin(), orders.end(), 0); }

    bool operator==(const MultiIndex& other) const { return orders == other.orders; }
};

/// w^alpha = prod_i w_i^{alpha_i}; 0^0 = 1.
inline double pow_multi(std::span<const double> w, const MultiIndex& alpha) {
    double p = 1.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        for (int r = 0; r < alpha.orders[i]; ++r) p *= w[i];
    }
    return p;
}

/// k!/(k-s)! as an exact double (s <= k).
inline double falling_factorial(int k, int s) {
    double p = 1.0;
    for (int i = 0; i < s; ++i) p *= static_cast<double>(k - i);
    return p;
}

/// Binomial coefficient as a double via the multiplicative form.
inline double binomial(int n, int r) {
    if (r < 0 || r > n) return 0.0;
    r = std::min(r, n - r);
    double p = 1.0;
    for (int i = 1; i <= r; ++i) p = p * static_cast<double>(n - r + i) / static_cast<double>(i);
    // values used here are exact integers well below 2^53; round away drift
    return std::round(p);
}

/// Number of multi-indices of dimension d with |alpha| = s.
inline double count_multi_indices(int d, int s) { return binomial(s + d - 1, s); }

namespace detail {

inline void enumerate_rec(int d, int axis, int remaining, std::vector<int>& scratch,
                          std::vector<MultiIndex>& out) {
    if (axis == d - 1) {
        scratch[static_cast<std::size_t>(axis)] = remaining;
        out.emplace_back(scratch);
        return;
    }
    for (int v = 0; v <= remaining; ++v) {
        scratch[static_cast<std::size_t>(axis)] = v;
        enumerate_rec(d, axis + 1, remaining - v, scratch, out);
    }
}

}  // namespace detail

/// All multi-indices with |alpha| <= m, graded (by total order) then lexicographic.
inline std::vector<MultiIndex> multi_indices_up_to(int d, int m) {
    std::vector<MultiIndex> out;
    std::vector<int> scratch(static_cast<std::size_t>(d), 0);
    for (int s = 0; s <= m; ++s) detail::enumerate_rec(d, 0, s, scratch, out);
    return out;
}

/// All multi-indices with |alpha| = s exactly.
inline std::vector<MultiIndex> multi_indices_exact(int d, int s) {
    std::vector<MultiIndex> out;
    std::vector<int> scratch(static_cast<std::size_t>(d), 0);
    detail::enumerate_rec(d, 0, s, scratch, out);
    return out;
}

}  // namespace repufit
