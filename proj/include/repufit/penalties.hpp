#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "repufit/common.hpp"
#include "repufit/network.hpp"

namespace repufit {

/// The three penalty regimes of the Tikhonov schemes.
///   ExtendedBarron: (1/n) sum |a_i| (||w_i||_1 + |b_i|)^k on MeanField nets.
///   Variation:      sum |a_i| on Sum nets with ||w_i||_2 = 1, |b_i| <= sqrt(d).
///   RadonBV:        sum |a_i| on Sum nets with the same dictionary constraints
///                   and a polynomial tail (degree <= k) that is penalty-free.
enum class PenaltyKind { ExtendedBarron, Variation, RadonBV };

inline const char* to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::ExtendedBarron: return "extended_barron";
        case PenaltyKind::Variation: return "variation";
        case PenaltyKind::RadonBV: return "radon_bv";
    }
    return "?";
}

inline PenaltyKind penalty_kind_from_string(const std::string& s) {
    if (s == "extended_barron") return PenaltyKind::ExtendedBarron;
    if (s == "variation") return PenaltyKind::Variation;
    if (s == "radon_bv") return PenaltyKind::RadonBV;
    throw ConfigError("unknown penalty '" + s +
                      "' (expected extended_barron, variation or radon_bv)");
}

/// Dictionary bias bound: -c1 = c2 = sqrt(d).
inline double dictionary_bias_bound(int d) { return std::sqrt(static_cast<double>(d)); }

inline constexpr double kUnitSphereTolerance = 1e-9;

namespace detail {

inline double l1_norm(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += std::abs(c);
    return s;
}

inline double l2_norm_sq(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return s;
}

inline double int_pow(double z, int k) {
    double p = 1.0;
    for (int i = 0; i < k; ++i) p *= z;
    return p;
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Throws ConstraintError unless `net` satisfies the constraints of `kind`.
inline void check_feasible(const RepuNetwork& net, PenaltyKind kind) {
    net.validate();
    if (kind == PenaltyKind::ExtendedBarron) {
        if (net.scaling != Scaling::MeanField)
            throw ConstraintError("extended_barron penalty requires mean_field scaling");
        if (net.poly_tail)
            throw ConstraintError("extended_barron penalty admits no polynomial tail");
        return;
    }
    if (net.scaling != Scaling::Sum)
        throw ConstraintError(std::string(to_string(kind)) + " penalty requires sum scaling");
    if (net.a0 != 0.0)
        throw ConstraintError(std::string(to_string(kind)) +
                              " penalty requires a0 = 0 (constants belong to the dictionary "
                              "resp. the polynomial tail)");
    if (kind == PenaltyKind::Variation && net.poly_tail)
        throw ConstraintError("variation penalty admits no polynomial tail");
    if (kind == PenaltyKind::RadonBV && !net.poly_tail)
        throw ConstraintError("radon_bv penalty requires a polynomial tail (possibly zero)");
    const double bmax = dictionary_bias_bound(net.d);
    for (std::size_t i = 0; i < net.neurons.size(); ++i) {
        const auto& nr = net.neurons[i];
        const double norm = std::sqrt(detail::l2_norm_sq(nr.w));
        if (std::abs(norm - 1.0) > kUnitSphereTolerance)
            throw ConstraintError("neuron " + std::to_string(i) + ": ||w||_2 = " +
                                  std::to_string(norm) + " is not 1 within 1e-9");
        if (std::abs(nr.b) > bmax + kUnitSphereTolerance)
            throw ConstraintError("neuron " + std::to_string(i) + ": |b| exceeds sqrt(d)");
    }
}

/// Penalty functional of the regime (unsquared; the Tikhonov objective
/// squares it). Terms are summed in sorted order so the value is bit-exact
/// under neuron permutations.
inline double penalty_value(const RepuNetwork& net, PenaltyKind kind) {
    check_feasible(net, kind);
    std::vector<double> terms;
    terms.reserve(net.neurons.size());
    if (kind == PenaltyKind::ExtendedBarron) {
        for (const auto& nr : net.neurons)
            terms.push_back(std::abs(nr.a) *
                            detail::int_pow(detail::l1_norm(nr.w) + std::abs(nr.b), net.k));
    } else {
        for (const auto& nr : net.neurons) terms.push_back(std::abs(nr.a));
    }
    std::sort(terms.begin(), terms.end());
    const double total = pairwise_sum(terms);
    return (kind == PenaltyKind::ExtendedBarron) ? net.scale() * total : total;
}

/// A subgradient of penalty_value in the flat parameter layout.
/// sign(0) := 0 (minimal-norm element); the polynomial tail and a0 never
/// contribute (null space resp. unpenalized bias).
inline std::vector<double> penalty_subgradient(const RepuNetwork& net, PenaltyKind kind) {
    check_feasible(net, kind);
    const ParamLayout lay = layout_of(net);
    std::vector<double> g(lay.size(), 0.0);
    if (kind == PenaltyKind::ExtendedBarron) {
        const double s = net.scale();
        for (int i = 0; i < lay.n; ++i) {
            const auto& nr = net.neurons[static_cast<std::size_t>(i)];
            const double base = detail::l1_norm(nr.w) + std::abs(nr.b);
            const double base_km1 = detail::int_pow(base, net.k - 1);
            g[lay.a(i)] = s * detail::sign0(nr.a) * base_km1 * base;
            const double c = s * std::abs(nr.a) * static_cast<double>(net.k) * base_km1;
            for (int j = 0; j < lay.d; ++j)
                g[lay.w(i, j)] = c * detail::sign0(nr.w[static_cast<std::size_t>(j)]);
            g[lay.b(i)] = c * detail::sign0(nr.b);
        }
    } else {
        for (int i = 0; i < lay.n; ++i)
            g[lay.a(i)] = detail::sign0(net.neurons[static_cast<std::size_t>(i)].a);
    }
    return g;
}

/// Project onto the dictionary constraints of Variation/RadonBV: w_i is
/// normalized to the unit sphere with a_i rescaled by ||w_i||^k (positive
/// homogeneity keeps eval unchanged), b_i clamped to [-sqrt(d), sqrt(d)].
/// Throws DegenerateNeuronError when some w_i vanishes.
inline RepuNetwork project_constraints(RepuNetwork net, PenaltyKind kind) {
    if (kind == PenaltyKind::ExtendedBarron)
        throw ConfigError("project_constraints applies to variation/radon_bv only");
    const double bmax = dictionary_bias_bound(net.d);
    for (std::size_t i = 0; i < net.neurons.size(); ++i) {
        auto& nr = net.neurons[i];
        const double norm = std::sqrt(detail::l2_norm_sq(nr.w));
        if (!(norm > 1e-12))
            throw DegenerateNeuronError(i, "neuron " + std::to_string(i) +
                                               " has (near-)zero inner weights");
        // leave already-feasible weights untouched so projection is idempotent
        if (std::abs(norm - 1.0) > kUnitSphereTolerance) {
            // sigma_k(w.x + b) = ||w||^k sigma_k(w/||w||.x + b/||w||)
            const double inv = 1.0 / norm;
            for (auto& c : nr.w) c *= inv;
            nr.b *= inv;
            nr.a *= detail::int_pow(norm, net.k);
        }
        nr.b = std::clamp(nr.b, -bmax, bmax);
    }
    return net;
}

}  // namespace repufit
