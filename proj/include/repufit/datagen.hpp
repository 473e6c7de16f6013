#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "repufit/common.hpp"
#include "repufit/multi_index.hpp"
#include "repufit/network.hpp"
#include "repufit/penalties.hpp"
#include "repufit/quadrature.hpp"
#include "repufit/rng.hpp"

namespace repufit {

/// Recorded penalty-level upper bounds of a synthetic target; these feed the
/// lambda selection rules as norm hints.
struct NormBounds {
    std::optional<double> barron_upper;
    std::optional<double> variation_upper;
    std::optional<double> rbv_upper;
};

// -- univariate factors with closed-form derivatives ------------------------

struct SinFactor {
    double omega = 1.0;
    double phase = 0.0;
    double derivative(int r, double t) const {
        double scale = 1.0;
        for (int i = 0; i < r; ++i) scale *= omega;
        return scale * std::sin(omega * t + phase + 1.5707963267948966 * static_cast<double>(r));
    }
};

struct ExpFactor {
    double rate = 1.0;
    double derivative(int r, double t) const {
        double scale = 1.0;
        for (int i = 0; i < r; ++i) scale *= rate;
        return scale * std::exp(rate * t);
    }
};

struct PolyFactor {
    std::vector<double> coefs;  // c_0 + c_1 t + c_2 t^2 + ...
    double derivative(int r, double t) const {
        double acc = 0.0;
        for (std::size_t deg = static_cast<std::size_t>(r); deg < coefs.size(); ++deg) {
            double term = coefs[deg] * falling_factorial(static_cast<int>(deg), r);
            for (std::size_t i = 0; i < deg - static_cast<std::size_t>(r); ++i) term *= t;
            acc += term;
        }
        return acc;
    }
};

using Factor1D = std::variant<SinFactor, ExpFactor, PolyFactor>;

inline double factor_derivative(const Factor1D& f, int r, double t) {
    return std::visit([&](const auto& ff) { return ff.derivative(r, t); }, f);
}

// -- target function ---------------------------------------------------------

/// Ground-truth target with exact partial derivatives of every order the
/// experiments need. Three kinds: a reference RePU network (Sum scaling,
/// dictionary-feasible), a multivariate polynomial, and a product of smooth
/// univariate factors.
class TargetFunction {
public:
    struct ReferenceNetworkBody {
        RepuNetwork net;
    };
    struct PolynomialBody {
        std::vector<PolyTerm> terms;
    };
    struct Product1DBody {
        std::vector<Factor1D> factors;  // one per coordinate
    };
    using Body = std::variant<ReferenceNetworkBody, PolynomialBody, Product1DBody>;

    TargetFunction(int k, int d, Body body, NormBounds bounds = {})
        : k_(k), d_(d), body_(std::move(body)), bounds_(bounds) {}

    int k() const { return k_; }
    int d() const { return d_; }
    const NormBounds& bounds() const { return bounds_; }
    const Body& body() const { return body_; }

    const RepuNetwork* reference_network() const {
        if (const auto* r = std::get_if<ReferenceNetworkBody>(&body_)) return &r->net;
        return nullptr;
    }

    double value(std::span<const double> x) const {
        return derivative(MultiIndex::zeros(d_), x);
    }

    double derivative(const MultiIndex& alpha, std::span<const double> x) const {
        if (static_cast<int>(x.size()) != d_) throw InputError("target: point dimension != d");
        if (const auto* r = std::get_if<ReferenceNetworkBody>(&body_))
            return r->net.derivative(alpha, x);
        if (const auto* p = std::get_if<PolynomialBody>(&body_)) {
            double acc = 0.0;
            for (const auto& t : p->terms)
                acc += t.coef * RepuNetwork::monomial_derivative(t.alpha, alpha, x);
            return acc;
        }
        const auto& prod = std::get<Product1DBody>(body_);
        double acc = 1.0;
        for (int j = 0; j < d_; ++j)
            acc *= factor_derivative(prod.factors[static_cast<std::size_t>(j)],
                                     alpha.orders[static_cast<std::size_t>(j)],
                                     x[static_cast<std::size_t>(j)]);
        return acc;
    }

    /// The recorded bound matching a penalty kind, when available.
    std::optional<double> bound_for(PenaltyKind kind) const {
        switch (kind) {
            case PenaltyKind::ExtendedBarron: return bounds_.barron_upper;
            case PenaltyKind::Variation: return bounds_.variation_upper;
            case PenaltyKind::RadonBV: return bounds_.rbv_upper;
        }
        return std::nullopt;
    }

private:
    int k_;
    int d_;
    Body body_;
    NormBounds bounds_;
};

// -- target construction ------------------------------------------------------

enum class TargetKind { ReferenceNetwork, Polynomial, Product1D };

inline TargetKind target_kind_from_string(const std::string& s) {
    if (s == "reference_network") return TargetKind::ReferenceNetwork;
    if (s == "polynomial") return TargetKind::Polynomial;
    if (s == "product_1d") return TargetKind::Product1D;
    throw ConfigError("unknown target kind '" + s + "'");
}

struct TargetSpec {
    TargetKind kind = TargetKind::ReferenceNetwork;
    int k = 2;
    int d = 2;
    // reference_network
    int n_ref = 5;
    double a_scale = 1.0;
    std::vector<Neuron> explicit_neurons;  // overrides random generation when non-empty
    // polynomial
    std::vector<PolyTerm> poly_terms;
    // product_1d
    std::vector<Factor1D> factors;
};

/// Deterministic in (spec, seed). Reference networks are drawn with
/// ||w_i||_2 = 1, b_i uniform in [-sqrt(d), sqrt(d)], a_i uniform in
/// [-a_scale, a_scale]; penalty-level norm bounds are recorded.
inline TargetFunction make_target(const TargetSpec& spec, std::uint64_t seed) {
    if (spec.k < 1 || spec.d < 1) throw ConfigError("target: k and d must be >= 1");
    switch (spec.kind) {
        case TargetKind::ReferenceNetwork: {
            RepuNetwork net;
            net.k = spec.k;
            net.d = spec.d;
            net.scaling = Scaling::Sum;
            if (!spec.explicit_neurons.empty()) {
                net.neurons = spec.explicit_neurons;
            } else {
                if (spec.n_ref < 1) throw ConfigError("target: n_ref must be >= 1");
                Rng rng(seed);
                const double bmax = dictionary_bias_bound(spec.d);
                for (int i = 0; i < spec.n_ref; ++i) {
                    Neuron nr;
                    nr.w = rng.unit_sphere(spec.d);
                    nr.b = rng.uniform(-bmax, bmax);
                    nr.a = rng.uniform(-spec.a_scale, spec.a_scale);
                    net.neurons.push_back(std::move(nr));
                }
            }
            net.validate();
            NormBounds bounds;
            double barron = 0.0, l1 = 0.0;
            for (const auto& nr : net.neurons) {
                barron += std::abs(nr.a) *
                          detail::int_pow(detail::l1_norm(nr.w) + std::abs(nr.b), net.k);
                l1 += std::abs(nr.a);
            }
            bounds.barron_upper = barron;
            bounds.variation_upper = l1;
            bounds.rbv_upper = l1;
            return TargetFunction(spec.k, spec.d,
                                  TargetFunction::ReferenceNetworkBody{std::move(net)}, bounds);
        }
        case TargetKind::Polynomial: {
            if (spec.poly_terms.empty()) throw ConfigError("target: polynomial needs terms");
            for (const auto& t : spec.poly_terms)
                if (t.alpha.dim() != spec.d)
                    throw ConfigError("target: polynomial exponent dimension != d");
            return TargetFunction(spec.k, spec.d,
                                  TargetFunction::PolynomialBody{spec.poly_terms});
        }
        case TargetKind::Product1D: {
            if (static_cast<int>(spec.factors.size()) != spec.d)
                throw ConfigError("target: product_1d needs one factor per coordinate");
            return TargetFunction(spec.k, spec.d, TargetFunction::Product1DBody{spec.factors});
        }
    }
    throw ConfigError("target: unknown kind");
}

// -- noisy datasets -----------------------------------------------------------

enum class NoiseKind { GaussianIID, L2CalibratedField };

inline const char* to_string(NoiseKind k) {
    return k == NoiseKind::GaussianIID ? "gaussian_iid" : "l2_calibrated_field";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "gaussian_iid") return NoiseKind::GaussianIID;
    if (s == "l2_calibrated_field") return NoiseKind::L2CalibratedField;
    throw ConfigError("unknown noise kind '" + s + "'");
}

/// Quadrature-aligned noisy samples with the discrete L2 noise norm
/// calibrated to delta exactly.
struct NoisyDataset {
    int d = 1;
    std::vector<double> points;   // size() * d
    std::vector<double> values;   // f^delta at the points
    std::vector<double> weights;  // positive, sum to 1
    double delta_nominal = 0.0;
    double delta_realized = 0.0;
    std::uint64_t noise_seed = 0;

    std::size_t size() const { return values.size(); }
    std::span<const double> point(std::size_t i) const {
        return {points.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
    }
};

/// Sample points are the rule nodes and training weights the rule weights.
/// GaussianIID injects c*e_i with e_i ~ N(0,1); L2CalibratedField injects
/// c*g(x_i) for a fixed random smooth RePU field g. In both cases c is chosen
/// so sqrt(sum_i w_i noise_i^2) equals delta exactly.
inline NoisyDataset make_noisy_dataset(const TargetFunction& target, const QuadratureRule& rule,
                                       double delta, NoiseKind kind, std::uint64_t seed) {
    if (rule.size() == 0) throw SizeError("make_noisy_dataset: empty quadrature rule");
    if (rule.d != target.d()) throw InputError("make_noisy_dataset: rule dimension != target d");
    if (delta < 0.0) throw ConfigError("make_noisy_dataset: delta must be >= 0");

    NoisyDataset ds;
    ds.d = rule.d;
    ds.points = rule.nodes;
    ds.weights = rule.weights;
    ds.noise_seed = seed;
    ds.delta_nominal = delta;
    ds.values.resize(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i) ds.values[i] = target.value(rule.node(i));
    if (delta == 0.0) return ds;

    Rng rng(seed_stream(seed, "noise"));
    std::vector<double> shape(rule.size());
    if (kind == NoiseKind::GaussianIID) {
        for (auto& e : shape) e = rng.normal();
    } else {
        RepuNetwork field;
        field.k = target.k();
        field.d = rule.d;
        field.scaling = Scaling::Sum;
        const double bmax = dictionary_bias_bound(rule.d);
        for (int i = 0; i < 8; ++i) {
            Neuron nr;
            nr.w = rng.unit_sphere(rule.d);
            nr.b = rng.uniform(-bmax, bmax);
            nr.a = rng.uniform(-1.0, 1.0);
            field.neurons.push_back(std::move(nr));
        }
        for (std::size_t i = 0; i < rule.size(); ++i) shape[i] = field.value(rule.node(i));
    }
    const double norm_sq = pairwise_sum(rule.size(), [&](std::size_t i) {
        return ds.weights[i] * shape[i] * shape[i];
    });
    if (!(norm_sq > 1e-300))
        throw NumericError("make_noisy_dataset: degenerate noise shape (zero discrete norm)");
    const double c = delta / std::sqrt(norm_sq);
    for (std::size_t i = 0; i < rule.size(); ++i) ds.values[i] += c * shape[i];
    ds.delta_realized = std::sqrt(pairwise_sum(rule.size(), [&](std::size_t i) {
        const double noise = c * shape[i];
        return ds.weights[i] * noise * noise;
    }));
    return ds;
}

// -- dataset IO ---------------------------------------------------------------

inline nlohmann::json to_json(const NoisyDataset& ds) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["d"] = ds.d;
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto p = ds.point(i);
        pts.push_back(std::vector<double>(p.begin(), p.end()));
    }
    j["points"] = std::move(pts);
    j["values"] = ds.values;
    j["weights"] = ds.weights;
    j["delta_nominal"] = ds.delta_nominal;
    j["delta_realized"] = ds.delta_realized;
    j["seed"] = ds.noise_seed;
    return j;
}

inline NoisyDataset dataset_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kFormatVersion)
            throw ParseError("dataset: unsupported format_version " + std::to_string(version));
        NoisyDataset ds;
        ds.d = j.at("d").get<int>();
        for (const auto& pj : j.at("points")) {
            auto p = pj.get<std::vector<double>>();
            if (static_cast<int>(p.size()) != ds.d)
                throw ParseError("dataset: point dimension mismatch");
            ds.points.insert(ds.points.end(), p.begin(), p.end());
        }
        ds.values = j.at("values").get<std::vector<double>>();
        ds.weights = j.at("weights").get<std::vector<double>>();
        ds.delta_nominal = j.at("delta_nominal").get<double>();
        ds.delta_realized = j.at("delta_realized").get<double>();
        ds.noise_seed = j.at("seed").get<std::uint64_t>();
        if (ds.values.size() * static_cast<std::size_t>(ds.d) != ds.points.size() ||
            ds.weights.size() != ds.values.size())
            throw ParseError("dataset: inconsistent array lengths");
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset: ") + e.what());
    }
}

inline void save_dataset(const NoisyDataset& ds, const std::filesystem::path& path) {
    write_text_atomic(path, to_json(ds).dump() + "\n");
}

inline NoisyDataset load_dataset(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("dataset file " + path.string() + ": " + e.what());
    }
    return dataset_from_json(j);
}

/// CSV export with header "x1,...,xd,value".
inline std::string dataset_to_csv(const NoisyDataset& ds) {
    std::string out;
    for (int j = 0; j < ds.d; ++j) out += "x" + std::to_string(j + 1) + ",";
    out += "value\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto p = ds.point(i);
        for (int j = 0; j < ds.d; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g,", p[static_cast<std::size_t>(j)]);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g\n", ds.values[i]);
        out += buf;
    }
    return out;
}

}  // namespace repufit
