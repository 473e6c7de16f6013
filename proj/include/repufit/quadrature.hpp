#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "repufit/common.hpp"
#include "repufit/multi_index.hpp"
#include "repufit/network.hpp"
#include "repufit/rng.hpp"

namespace repufit {

/// Node/weight set on (0,1)^d; weights sum to 1 (unit Lebesgue measure).
struct QuadratureRule {
    enum class Kind { TensorGaussLegendre, Lattice };

    Kind kind = Kind::TensorGaussLegendre;
    int d = 1;
    int q = 0;             // points per axis (tensor)
    std::size_t n = 0;     // node count (lattice)
    std::uint64_t seed = 0;  // shift seed (lattice)
    std::vector<double> nodes;    // size() * d, row-major
    std::vector<double> weights;  // size()

    std::size_t size() const { return weights.size(); }
    std::span<const double> node(std::size_t i) const {
        return {nodes.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
    }
};

namespace detail {

/// Gauss-Legendre nodes/weights on (0,1): Newton iteration on the Legendre
/// recurrence from the Chebyshev initial guess, then the affine map from
/// [-1,1]. Weights sum to 1.
inline void gauss_legendre_01(int q, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(static_cast<std::size_t>(q), 0.0);
    weights.assign(static_cast<std::size_t>(q), 0.0);
    const double pi = 3.14159265358979323846;
    const int half = (q + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(q) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= q; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / static_cast<double>(j);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(q) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        {  // one clean-up pass keeps |P_q(x)| at rounding level
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= q; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / static_cast<double>(j);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(q) * (x * p1 - p0) / (x * x - 1.0);
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);  // x descending -> node ascending
        nodes[static_cast<std::size_t>(q - 1 - i)] = 0.5 * (1.0 + x);
        weights[static_cast<std::size_t>(i)] = 0.5 * w;
        weights[static_cast<std::size_t>(q - 1 - i)] = 0.5 * w;
    }
}

}  // namespace detail

inline QuadratureRule build_tensor_gauss_legendre(int q, int d) {
    if (q < 1 || d < 1) throw ConfigError("tensor rule: q and d must be >= 1");
    double budget = 1.0;
    for (int j = 0; j < d; ++j) {
        budget *= static_cast<double>(q);
        if (budget > 1e7)
            throw SizeError("tensor rule: q^d exceeds the 1e7 node budget (q=" +
                            std::to_string(q) + ", d=" + std::to_string(d) + ")");
    }
    std::vector<double> x1, w1;
    detail::gauss_legendre_01(q, x1, w1);
    const std::size_t total = static_cast<std::size_t>(budget);
    QuadratureRule rule;
    rule.kind = QuadratureRule::Kind::TensorGaussLegendre;
    rule.d = d;
    rule.q = q;
    rule.nodes.resize(total * static_cast<std::size_t>(d));
    rule.weights.resize(total);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t i = 0; i < total; ++i) {
        double w = 1.0;
        for (int j = 0; j < d; ++j) {
            const int ij = idx[static_cast<std::size_t>(j)];
            rule.nodes[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] =
                x1[static_cast<std::size_t>(ij)];
            w *= w1[static_cast<std::size_t>(ij)];
        }
        rule.weights[i] = w;
        for (int j = d - 1; j >= 0; --j) {  // odometer
            if (++idx[static_cast<std::size_t>(j)] < q) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
    return rule;
}

/// Shifted rank-1 Korobov lattice with N = 2^m nodes and uniform weights.
/// The multiplier is the odd integer nearest the golden section of N; the
/// random shift (from `seed`) makes repeated rules unbiased and keeps nodes
/// off the sigma_k kink sets almost surely.
inline QuadratureRule build_lattice(std::size_t n_points, int d, std::uint64_t seed) {
    if (d < 1) throw ConfigError("lattice rule: d must be >= 1");
    if (n_points == 0 || (n_points & (n_points - 1)) != 0)
        throw SizeError("lattice rule: node count must be a power of 2, got " +
                        std::to_string(n_points));
    QuadratureRule rule;
    rule.kind = QuadratureRule::Kind::Lattice;
    rule.d = d;
    rule.n = n_points;
    rule.seed = seed;
    rule.nodes.resize(n_points * static_cast<std::size_t>(d));
    rule.weights.assign(n_points, 1.0 / static_cast<double>(n_points));

    std::uint64_t a = static_cast<std::uint64_t>(0.6180339887498949 * static_cast<double>(n_points));
    a |= 1;  // odd => coprime with 2^m
    std::vector<std::uint64_t> gen(static_cast<std::size_t>(d));
    gen[0] = 1;
    for (int j = 1; j < d; ++j) gen[static_cast<std::size_t>(j)] = (gen[static_cast<std::size_t>(j - 1)] * a) % n_points;

    Rng rng(seed_stream(seed, "shift"));
    std::vector<double> shift(static_cast<std::size_t>(d));
    for (auto& s : shift) s = rng.uniform();

    for (std::size_t i = 0; i < n_points; ++i) {
        for (int j = 0; j < d; ++j) {
            double u = static_cast<double>((i * gen[static_cast<std::size_t>(j)]) % n_points) /
                           static_cast<double>(n_points) +
                       shift[static_cast<std::size_t>(j)];
            u -= std::floor(u);
            if (u <= 0.0) u = 0.5 / static_cast<double>(n_points);  // keep strictly interior
            rule.nodes[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] = u;
        }
    }
    return rule;
}

namespace detail {

template <class F>
double field_value(const F& f, std::span<const double> x) {
    if constexpr (requires { f.value(x); }) {
        return f.value(x);
    } else {
        return f(x);
    }
}

}  // namespace detail

/// Integral of f over (0,1)^d by the rule, pairwise-reduced.
template <class F>
double integrate(const QuadratureRule& rule, const F& f) {
    if (rule.size() == 0) throw SizeError("integrate: empty quadrature rule");
    return pairwise_sum(rule.size(), [&](std::size_t i) {
        return rule.weights[i] * detail::field_value(f, rule.node(i));
    });
}

template <class F>
double l2_norm(const F& f, const QuadratureRule& rule) {
    const double v = integrate(rule, [&](std::span<const double> x) {
        const double fx = detail::field_value(f, x);
        return fx * fx;
    });
    return std::sqrt(std::max(0.0, v));
}

/// sqrt( sum_i w_i (f(x_i) - g(x_i))^2 ).
template <class F, class G>
double l2_distance(const F& f, const G& g, const QuadratureRule& rule) {
    const double v = integrate(rule, [&](std::span<const double> x) {
        const double r = detail::field_value(f, x) - detail::field_value(g, x);
        return r * r;
    });
    return std::sqrt(std::max(0.0, v));
}

/// Quadrature H^m norms for m' = 0..m in one pass; entry m' is the H^{m'}
/// norm, so the sequence is non-decreasing by construction.
template <class F>
std::vector<double> sobolev_norms_up_to(const F& f, int m, const QuadratureRule& rule) {
    if (m < 0) throw DomainError("sobolev_norm: m must be >= 0");
    std::vector<double> norms;
    norms.reserve(static_cast<std::size_t>(m) + 1);
    double acc = 0.0;
    for (int s = 0; s <= m; ++s) {
        for (const auto& alpha : multi_indices_exact(rule.d, s)) {
            const double term = integrate(rule, [&](std::span<const double> x) {
                const double v = f.derivative(alpha, x);
                return v * v;
            });
            acc += term;
        }
        norms.push_back(std::sqrt(std::max(0.0, acc)));
    }
    return norms;
}

template <class F>
double sobolev_norm(const F& f, int m, const QuadratureRule& rule) {
    return sobolev_norms_up_to(f, m, rule).back();
}

namespace detail {

template <class F, class G>
struct FieldDifference {
    const F& f;
    const G& g;
    double value(std::span<const double> x) const { return f.value(x) - g.value(x); }
    double derivative(const MultiIndex& alpha, std::span<const double> x) const {
        return f.derivative(alpha, x) - g.derivative(alpha, x);
    }
};

}  // namespace detail

/// H^m distance between two objects exposing exact derivatives.
template <class F, class G>
double sobolev_error(const F& f, const G& g, int m, const QuadratureRule& rule) {
    detail::FieldDifference<F, G> diff{f, g};
    return sobolev_norm(diff, m, rule);
}

template <class F, class G>
std::vector<double> sobolev_errors_up_to(const F& f, const G& g, int m,
                                         const QuadratureRule& rule) {
    detail::FieldDifference<F, G> diff{f, g};
    return sobolev_norms_up_to(diff, m, rule);
}

/// A result together with a quadrature error bar.
struct ValueWithBar {
    double value = 0.0;
    double bar = 0.0;
};

/// Evaluation rule set: the first rule gives the value, the others give the
/// error bar (max deviation). For tensor rules this is a q-refinement pair;
/// for d >= 5 a family of independently shifted lattices.
inline std::vector<QuadratureRule> default_eval_rules(int d, std::uint64_t seed) {
    std::vector<QuadratureRule> rules;
    if (d <= 3) {
        rules.push_back(build_tensor_gauss_legendre(24, d));
        rules.push_back(build_tensor_gauss_legendre(16, d));
    } else if (d == 4) {
        rules.push_back(build_tensor_gauss_legendre(12, d));
        rules.push_back(build_tensor_gauss_legendre(8, d));
    } else {
        for (std::uint64_t s = 0; s < 8; ++s)
            rules.push_back(build_lattice(1u << 14, d, seed_stream(seed, "eval-shift", s)));
    }
    return rules;
}

template <class Compute>
ValueWithBar with_error_bar(const std::vector<QuadratureRule>& rules, const Compute& compute) {
    if (rules.empty()) throw SizeError("with_error_bar: no rules");
    ValueWithBar out;
    out.value = compute(rules.front());
    for (std::size_t i = 1; i < rules.size(); ++i)
        out.bar = std::max(out.bar, std::abs(compute(rules[i]) - out.value));
    return out;
}

}  // namespace repufit
