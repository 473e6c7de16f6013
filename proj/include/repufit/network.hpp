#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repufit/common.hpp"
#include "repufit/multi_index.hpp"

namespace repufit {

/// sigma_k(z) = (max{0, z})^k. sigma_0 is the right-continuous Heaviside
/// step: sigma_0(0) = 1.
inline double sigma_k(double z, int k) {
    if (k < 0) throw UnsupportedOrderError("sigma_k: negative power k=" + std::to_string(k));
    if (z < 0.0) return 0.0;
    if (k == 0) return 1.0;
    double p = z;
    for (int i = 1; i < k; ++i) p *= z;
    return p;
}

/// Whether the neuron sum carries a 1/n factor.
enum class Scaling { MeanField, Sum };

inline const char* to_string(Scaling s) {
    return s == Scaling::MeanField ? "mean_field" : "sum";
}

struct Neuron {
    double a = 0.0;
    std::vector<double> w;
    double b = 0.0;
};

struct PolyTerm {
    double coef = 0.0;
    MultiIndex alpha;
};

/// Shallow RePU network: scale * sum_i a_i sigma_k(w_i.x + b_i) + a0 + P(x),
/// where scale is 1/n in MeanField mode and 1 in Sum mode, and P is an
/// optional polynomial tail of total degree <= k (Radon-BV mode only).
struct RepuNetwork {
    int k = 1;
    int d = 1;
    Scaling scaling = Scaling::Sum;
    double a0 = 0.0;
    std::vector<Neuron> neurons;
    std::optional<std::vector<PolyTerm>> poly_tail;

    double scale() const {
        if (scaling == Scaling::Sum || neurons.empty()) return 1.0;
        return 1.0 / static_cast<double>(neurons.size());
    }

    void validate() const {
        if (k < 1) throw InputError("network: k must be >= 1");
        if (d < 1) throw InputError("network: d must be >= 1");
        for (std::size_t i = 0; i < neurons.size(); ++i) {
            if (static_cast<int>(neurons[i].w.size()) != d)
                throw InputError("network: neuron " + std::to_string(i) +
                                 " weight length != d");
        }
        if (poly_tail) {
            for (const auto& t : *poly_tail) {
                if (t.alpha.dim() != d)
                    throw InputError("network: poly_tail exponent dimension != d");
                if (t.alpha.total() > k)
                    throw InputError("network: poly_tail exponent |alpha| > k");
                for (int o : t.alpha.orders)
                    if (o < 0) throw InputError("network: negative poly_tail exponent");
            }
        }
    }

    double value(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != d)
            throw InputError("eval: point dimension " + std::to_string(x.size()) +
                             " != network d=" + std::to_string(d));
        double s = 0.0;
        for (const auto& nr : neurons) {
            double z = nr.b;
            for (int j = 0; j < d; ++j) z += nr.w[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
            s += nr.a * sigma_k(z, k);
        }
        double out = scale() * s + a0;
        if (poly_tail) {
            for (const auto& t : *poly_tail) out += t.coef * pow_multi(x, t.alpha);
        }
        return out;
    }

    /// Analytic partial derivative of any order |alpha| <= k,
    /// d^alpha f = scale * sum_i a_i (k!/(k-|alpha|)!) w_i^alpha sigma_{k-|alpha|}(w_i.x+b_i)
    /// plus the derivative of the polynomial part.
    double derivative(const MultiIndex& alpha, std::span<const double> x) const {
        if (alpha.dim() != d) throw InputError("eval_derivative: alpha dimension != d");
        const int s = alpha.total();
        if (s > k)
            throw UnsupportedOrderError("eval_derivative: |alpha|=" + std::to_string(s) +
                                        " exceeds k=" + std::to_string(k));
        if (static_cast<int>(x.size()) != d)
            throw InputError("eval_derivative: point dimension != network d");
        const double factor = falling_factorial(k, s);
        double acc = 0.0;
        for (const auto& nr : neurons) {
            double z = nr.b;
            for (int j = 0; j < d; ++j) z += nr.w[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
            acc += nr.a * factor * pow_multi(nr.w, alpha) * sigma_k(z, k - s);
        }
        double out = scale() * acc;
        if (s == 0) out += a0;
        if (poly_tail) {
            for (const auto& t : *poly_tail) out += t.coef * monomial_derivative(t.alpha, alpha, x);
        }
        return out;
    }

    /// d^alpha x^beta evaluated at x (0 when any alpha_i > beta_i).
    static double monomial_derivative(const MultiIndex& beta, const MultiIndex& alpha,
                                      std::span<const double> x) {
        double factor = 1.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const int bj = beta.orders[j];
            const int aj = alpha.orders[j];
            if (aj > bj) return 0.0;
            factor *= falling_factorial(bj, aj);
            for (int r = 0; r < bj - aj; ++r) factor *= x[j];
        }
        return factor;
    }
};

inline double eval(const RepuNetwork& net, std::span<const double> x) { return net.value(x); }

inline double eval_derivative(const RepuNetwork& net, const MultiIndex& alpha,
                              std::span<const double> x) {
    return net.derivative(alpha, x);
}

/// Convert between scaling modes without changing the represented function
/// (outer coefficients are rescaled by the neuron count).
inline RepuNetwork to_scaling(RepuNetwork net, Scaling target) {
    if (net.scaling == target) return net;
    const double n = static_cast<double>(net.neurons.size());
    if (!net.neurons.empty()) {
        const double c = (target == Scaling::Sum) ? 1.0 / n : n;
        for (auto& nr : net.neurons) nr.a *= c;
    }
    net.scaling = target;
    return net;
}

/// Flat parameter layout: [a0, poly coefs..., then per neuron (a, w_0..w_{d-1}, b)].
struct ParamLayout {
    int d = 0;
    int n = 0;
    int n_poly = 0;

    std::size_t size() const {
        return 1 + static_cast<std::size_t>(n_poly) +
               static_cast<std::size_t>(n) * static_cast<std::size_t>(d + 2);
    }
    std::size_t a0() const { return 0; }
    std::size_t poly(int j) const { return 1 + static_cast<std::size_t>(j); }
    std::size_t a(int i) const {
        return 1 + static_cast<std::size_t>(n_poly) +
               static_cast<std::size_t>(i) * static_cast<std::size_t>(d + 2);
    }
    std::size_t w(int i, int j) const { return a(i) + 1 + static_cast<std::size_t>(j); }
    std::size_t b(int i) const { return a(i) + 1 + static_cast<std::size_t>(d); }
};

inline ParamLayout layout_of(const RepuNetwork& net) {
    ParamLayout lay;
    lay.d = net.d;
    lay.n = static_cast<int>(net.neurons.size());
    lay.n_poly = net.poly_tail ? static_cast<int>(net.poly_tail->size()) : 0;
    return lay;
}

inline std::vector<double> pack_parameters(const RepuNetwork& net) {
    const ParamLayout lay = layout_of(net);
    std::vector<double> theta(lay.size(), 0.0);
    theta[lay.a0()] = net.a0;
    for (int j = 0; j < lay.n_poly; ++j) theta[lay.poly(j)] = (*net.poly_tail)[static_cast<std::size_t>(j)].coef;
    for (int i = 0; i < lay.n; ++i) {
        const auto& nr = net.neurons[static_cast<std::size_t>(i)];
        theta[lay.a(i)] = nr.a;
        for (int j = 0; j < lay.d; ++j) theta[lay.w(i, j)] = nr.w[static_cast<std::size_t>(j)];
        theta[lay.b(i)] = nr.b;
    }
    return theta;
}

inline void apply_parameters(RepuNetwork& net, std::span<const double> theta) {
    const ParamLayout lay = layout_of(net);
    if (theta.size() != lay.size()) throw InputError("apply_parameters: size mismatch");
    net.a0 = theta[lay.a0()];
    for (int j = 0; j < lay.n_poly; ++j) (*net.poly_tail)[static_cast<std::size_t>(j)].coef = theta[lay.poly(j)];
    for (int i = 0; i < lay.n; ++i) {
        auto& nr = net.neurons[static_cast<std::size_t>(i)];
        nr.a = theta[lay.a(i)];
        for (int j = 0; j < lay.d; ++j) nr.w[static_cast<std::size_t>(j)] = theta[lay.w(i, j)];
        nr.b = theta[lay.b(i)];
    }
}

/// Gradient of eval(net, x) with respect to every parameter, in the flat layout.
/// With s the scaling factor: d/da_i = s sigma_k(z_i), d/dw_ij = s a_i k sigma_{k-1}(z_i) x_j,
/// d/db_i = s a_i k sigma_{k-1}(z_i), d/da0 = 1, d/dpoly_j = monomial_j(x).
inline std::vector<double> param_gradient(const RepuNetwork& net, std::span<const double> x) {
    if (net.k < 1) throw UnsupportedOrderError("param_gradient: requires k >= 1");
    if (static_cast<int>(x.size()) != net.d) throw InputError("param_gradient: point dimension != d");
    const ParamLayout lay = layout_of(net);
    std::vector<double> g(lay.size(), 0.0);
    g[lay.a0()] = 1.0;
    for (int j = 0; j < lay.n_poly; ++j)
        g[lay.poly(j)] = pow_multi(x, (*net.poly_tail)[static_cast<std::size_t>(j)].alpha);
    const double s = net.scale();
    const double kk = static_cast<double>(net.k);
    for (int i = 0; i < lay.n; ++i) {
        const auto& nr = net.neurons[static_cast<std::size_t>(i)];
        double z = nr.b;
        for (int j = 0; j < lay.d; ++j) z += nr.w[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
        const double sk = sigma_k(z, net.k);
        const double skm1 = sigma_k(z, net.k - 1);
        g[lay.a(i)] = s * sk;
        const double c = s * nr.a * kk * skm1;
        for (int j = 0; j < lay.d; ++j) g[lay.w(i, j)] = c * x[static_cast<std::size_t>(j)];
        g[lay.b(i)] = c;
    }
    return g;
}

}  // namespace repufit
