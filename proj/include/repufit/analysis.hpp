#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "repufit/common.hpp"
#include "repufit/datagen.hpp"
#include "repufit/multi_index.hpp"
#include "repufit/network.hpp"
#include "repufit/penalties.hpp"
#include "repufit/quadrature.hpp"
#include "repufit/rng.hpp"
#include "repufit/solver.hpp"

namespace repufit {

// -- closed-form embedding constants -----------------------------------------

/// C(d,m,k) = sqrt( sum_{s<=m} binom(s+d-1, s) (k!/(k-s)!)^2 ),
/// the H^m-vs-extended-Barron embedding constant. C(d,0,k) = 1.
inline double barron_embedding_constant(int d, int m, int k) {
    if (d < 1) throw DomainError("barron_embedding_constant: d must be >= 1");
    if (m < 0 || m > k) throw DomainError("barron_embedding_constant: need 0 <= m <= k");
    double sum = 0.0;
    for (int s = 0; s <= m; ++s) {
        const double ff = falling_factorial(k, s);
        sum += count_multi_indices(d, s) * ff * ff;
    }
    return std::sqrt(sum);
}

/// c~(d,m,k) = sqrt( sum_{s<=m} I_s ) with
/// I_s = binom(s+d-1, s) (k!/(k-s)!)^2 (2 sqrt(d))^{2(k-s)},
/// the H^m-vs-variation embedding constant. c~(d,0,k) = (2 sqrt(d))^k.
inline double variation_embedding_constant(int d, int m, int k) {
    if (d < 1) throw DomainError("variation_embedding_constant: d must be >= 1");
    if (m < 0 || m > k) throw DomainError("variation_embedding_constant: need 0 <= m <= k");
    double sum = 0.0;
    for (int s = 0; s <= m; ++s) {
        const double ff = falling_factorial(k, s);
        sum += count_multi_indices(d, s) * ff * ff *
               detail::int_pow(4.0 * static_cast<double>(d), k - s);
    }
    return std::sqrt(sum);
}

/// Summand C_s resp. I_s of the constants above, exposed for the
/// ratio-recursion checks.
inline double barron_constant_term(int d, int s, int k) {
    const double ff = falling_factorial(k, s);
    return count_multi_indices(d, s) * ff * ff;
}

inline double variation_constant_term(int d, int s, int k) {
    const double ff = falling_factorial(k, s);
    return count_multi_indices(d, s) * ff * ff *
           detail::int_pow(4.0 * static_cast<double>(d), k - s);
}

/// sup_{g in P_k} ||g||_{L2} is bounded by 2^k d^{k/2} over the dictionary.
inline double dictionary_sup_bound(int d, int k) {
    return detail::int_pow(2.0, k) * std::pow(static_cast<double>(d), 0.5 * static_cast<double>(k));
}

// -- random feasible networks (shared by the property suites) -----------------

/// Draw a penalty-feasible network: MeanField with free weight radius for
/// ExtendedBarron, unit-sphere weights for Variation/RadonBV; a0 = 0.
inline RepuNetwork random_feasible_network(PenaltyKind kind, int k, int d, int n, Rng& rng,
                                           double a_scale = 1.0) {
    RepuNetwork net;
    net.k = k;
    net.d = d;
    net.scaling = kind == PenaltyKind::ExtendedBarron ? Scaling::MeanField : Scaling::Sum;
    const double bmax = dictionary_bias_bound(d);
    for (int i = 0; i < n; ++i) {
        Neuron nr;
        nr.w = rng.unit_sphere(d);
        if (kind == PenaltyKind::ExtendedBarron) {
            const double radius = std::exp(rng.uniform(-1.2, 1.2));
            for (auto& c : nr.w) c *= radius;
        }
        nr.b = rng.uniform(-bmax, bmax);
        nr.a = a_scale * rng.uniform(-1.0, 1.0);
        net.neurons.push_back(std::move(nr));
    }
    if (kind == PenaltyKind::RadonBV) {
        std::vector<PolyTerm> tail;
        for (const auto& alpha : multi_indices_up_to(d, k))
            tail.push_back({0.25 * rng.uniform(-1.0, 1.0), alpha});
        net.poly_tail = std::move(tail);
    }
    return net;
}

// -- embedding checks ----------------------------------------------------------

struct EmbeddingCheck {
    double sobolev = 0.0;
    double bar = 0.0;
    double penalty = 0.0;
    double constant = 0.0;
    double margin = 0.0;  // rhs - (lhs - bar); >= 0 means pass
    bool pass = false;
};

/// Asserts ||net||_{H^m} <= constant * penalty(net), with the constant chosen
/// by the net's scaling mode (MeanField -> Barron, Sum -> Variation), allowing
/// 1e-6 relative slack plus the quadrature error bar.
inline EmbeddingCheck check_embedding(const RepuNetwork& net, int m,
                                      const std::vector<QuadratureRule>& rules) {
    const PenaltyKind kind = net.scaling == Scaling::MeanField ? PenaltyKind::ExtendedBarron
                                                               : PenaltyKind::Variation;
    EmbeddingCheck out;
    out.penalty = penalty_value(net, kind);
    out.constant = kind == PenaltyKind::ExtendedBarron
                       ? barron_embedding_constant(net.d, m, net.k)
                       : variation_embedding_constant(net.d, m, net.k);
    const ValueWithBar nb =
        with_error_bar(rules, [&](const QuadratureRule& r) { return sobolev_norm(net, m, r); });
    out.sobolev = nb.value;
    out.bar = nb.bar;
    const double rhs = out.constant * out.penalty * (1.0 + 1e-6);
    out.margin = rhs - (out.sobolev - out.bar);
    out.pass = out.margin >= 0.0;
    return out;
}

// -- M(d) lower-bound probe ------------------------------------------------------

struct MdProbe {
    double probe = 0.0;          // ||p||_{H^k} / (c~(d,k,k) ||p||_{L2})
    double p_l2_analytic = 0.0;  // (1/2)^k / sqrt(2k+1)
    double p_l2_quadrature = 0.0;
    double p_hk = 0.0;
};

/// Certified lower bound on M(d) via p(x) = (x_1 - 1/2)^k. The polynomial
/// depends on x_1 only, so every integral reduces to one dimension and the
/// probe is cheap at any d (Gauss order q1d, exact once q1d > k).
inline MdProbe md_lower_bound_probe(int d, int k, int q1d = 0) {
    if (d < 2) throw DomainError("md_lower_bound_probe: d must be >= 2");
    if (k < 1) throw DomainError("md_lower_bound_probe: k must be >= 1");
    if (q1d <= 0) q1d = 2 * k + 4;
    std::vector<double> x1, w1;
    detail::gauss_legendre_01(q1d, x1, w1);
    // squared L2 norms of d/dx1^s p over (0,1); derivatives in other
    // coordinates vanish identically
    auto deriv_norm_sq = [&](int s) {
        const double ff = falling_factorial(k, s);
        double acc = 0.0;
        for (std::size_t i = 0; i < x1.size(); ++i) {
            const double v = ff * detail::int_pow(x1[i] - 0.5, k - s);
            acc += w1[i] * v * v;
        }
        return acc;
    };
    MdProbe out;
    out.p_l2_analytic = detail::int_pow(0.5, k) / std::sqrt(static_cast<double>(2 * k + 1));
    out.p_l2_quadrature = std::sqrt(deriv_norm_sq(0));
    double hk_sq = 0.0;
    for (int s = 0; s <= k; ++s) hk_sq += deriv_norm_sq(s);
    out.p_hk = std::sqrt(hk_sq);
    out.probe = out.p_hk / (variation_embedding_constant(d, k, k) * out.p_l2_quadrature);
    return out;
}

// -- Monte Carlo construction experiments ----------------------------------------

enum class McMode { Barron, Variation };

inline const char* to_string(McMode m) { return m == McMode::Barron ? "barron" : "variation"; }

inline McMode mc_mode_from_string(const std::string& s) {
    if (s == "barron") return McMode::Barron;
    if (s == "variation") return McMode::Variation;
    throw ConfigError("unknown mc mode '" + s + "'");
}

/// One atom of a finite neuron measure. Barron mode reads (weight = p_j,
/// coefficient a_j); Variation mode reads weight = mu_j (signed) and ignores a.
struct McAtom {
    double weight = 0.0;
    double a = 1.0;
    std::vector<double> w;
    double b = 0.0;
};

struct McRateRecord {
    std::vector<std::size_t> n_grid;
    std::vector<double> mean_sq_error;  // E ||f - f_n||^2 estimates
    std::vector<double> std_error;      // standard error of the mean
    std::vector<double> rms_error;
    std::vector<double> envelope;  // theoretical mean-square ceiling per n
    double slope = 0.0;            // of log RMS vs log n
    double intercept = 0.0;
    double measure_norm = 0.0;   // ||mu|| (Variation) or 1 (Barron)
    double sup_atom_norm = 0.0;  // max_j ||g_j||_{L2} over atoms
};

namespace detail {

inline double atom_l2(const McAtom& atom, int k, const QuadratureRule& rule) {
    return std::sqrt(std::max(0.0, integrate(rule, [&](std::span<const double> x) {
        double z = atom.b;
        for (std::size_t j = 0; j < x.size(); ++j) z += atom.w[j] * x[j];
        const double v = sigma_k(z, k);
        return v * v;
    })));
}

struct LinLogFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LinLogFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    LinLogFit out;
    if (std::abs(denom) < 1e-300 || n < 2) return out;
    out.slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
    out.intercept = (sy - out.slope * sx) / static_cast<double>(n);
    return out;
}

}  // namespace detail

/// Monte Carlo width-convergence experiment: samples n-neuron networks from a
/// finite atomic measure and estimates E ||f - f_n||_{L2}^2 on a dyadic grid.
/// Barron mode samples MeanField networks f_n = (1/n) sum a_{J_i} sigma(...),
/// J_i ~ p; Variation mode samples from the normalized total variation and
/// scales by ||mu||. Reports the per-n variance ceiling and the log-log slope.
inline McRateRecord mc_construction(const std::vector<McAtom>& atoms, int k,
                                    const std::vector<std::size_t>& n_grid, int trials,
                                    const QuadratureRule& rule, McMode mode,
                                    std::uint64_t seed) {
    if (atoms.empty()) throw ConfigError("mc_construction: no atoms");
    if (trials < 1) throw ConfigError("mc_construction: trials must be >= 1");
    for (const auto& atom : atoms)
        if (static_cast<int>(atom.w.size()) != rule.d)
            throw ConfigError("mc_construction: atom dimension != rule dimension");

    const std::size_t m = atoms.size();
    std::vector<double> prob(m), coef(m), sign(m, 1.0);
    double measure_norm = 1.0;
    if (mode == McMode::Barron) {
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (atoms[j].weight < 0.0)
                throw ConfigError("mc_construction: Barron atoms need probabilities >= 0");
            total += atoms[j].weight;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ConfigError("mc_construction: atom probabilities must sum to 1");
        for (std::size_t j = 0; j < m; ++j) {
            prob[j] = atoms[j].weight / total;
            coef[j] = atoms[j].a;
        }
    } else {
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) total += std::abs(atoms[j].weight);
        if (!(total > 0.0)) throw ConfigError("mc_construction: zero total variation");
        measure_norm = total;
        for (std::size_t j = 0; j < m; ++j) {
            prob[j] = std::abs(atoms[j].weight) / total;
            sign[j] = atoms[j].weight >= 0.0 ? 1.0 : -1.0;
            coef[j] = 1.0;
        }
    }
    std::vector<double> cum(m);
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        acc += prob[j];
        cum[j] = acc;
    }
    cum.back() = 1.0;

    // target values and per-atom activations, cached on the rule nodes
    const std::size_t npts = rule.size();
    std::vector<double> atom_vals(m * npts);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < npts; ++i) {
            const auto x = rule.node(i);
            double z = atoms[j].b;
            for (std::size_t c = 0; c < x.size(); ++c) z += atoms[j].w[c] * x[c];
            atom_vals[j * npts + i] = sigma_k(z, k);
        }
    }
    std::vector<double> target(npts, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double cj = mode == McMode::Barron ? prob[j] * coef[j] : atoms[j].weight;
        for (std::size_t i = 0; i < npts; ++i) target[i] += cj * atom_vals[j * npts + i];
    }

    McRateRecord rec;
    rec.n_grid = n_grid;
    rec.measure_norm = measure_norm;
    for (std::size_t j = 0; j < m; ++j)
        rec.sup_atom_norm = std::max(rec.sup_atom_norm, detail::atom_l2(atoms[j], k, rule));

    Rng rng(seed_stream(seed, "mc"));
    std::vector<double> fn(npts);
    std::vector<double> sq_errors(static_cast<std::size_t>(trials));
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        const std::size_t n = n_grid[gi];
        if (n == 0) throw ConfigError("mc_construction: n must be >= 1");
        for (int t = 0; t < trials; ++t) {
            std::fill(fn.begin(), fn.end(), 0.0);
            for (std::size_t s = 0; s < n; ++s) {
                const double u = rng.uniform();
                const std::size_t j = static_cast<std::size_t>(
                    std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
                const double cj = mode == McMode::Barron
                                      ? coef[j] / static_cast<double>(n)
                                      : measure_norm * sign[j] / static_cast<double>(n);
                const double* av = &atom_vals[j * npts];
                for (std::size_t i = 0; i < npts; ++i) fn[i] += cj * av[i];
            }
            sq_errors[static_cast<std::size_t>(t)] =
                pairwise_sum(npts, [&](std::size_t i) {
                    const double r = fn[i] - target[i];
                    return rule.weights[i] * r * r;
                });
        }
        const double mean = pairwise_sum(sq_errors) / static_cast<double>(trials);
        double var = 0.0;
        for (double e : sq_errors) var += (e - mean) * (e - mean);
        var /= std::max(1.0, static_cast<double>(trials - 1));
        rec.mean_sq_error.push_back(mean);
        rec.std_error.push_back(std::sqrt(var / static_cast<double>(trials)));
        rec.rms_error.push_back(std::sqrt(std::max(0.0, mean)));
        double ceiling;
        if (mode == McMode::Barron) {
            // (1/n) E_p || a g ||^2, the exact second-moment bound
            double second = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double gn = detail::atom_l2(atoms[j], k, rule);
                second += prob[j] * coef[j] * coef[j] * gn * gn;
            }
            ceiling = second / static_cast<double>(n);
        } else {
            ceiling = measure_norm * measure_norm * rec.sup_atom_norm * rec.sup_atom_norm /
                      static_cast<double>(n);
        }
        rec.envelope.push_back(ceiling);
    }

    std::vector<double> lx, ly;
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        if (rec.rms_error[gi] > 0.0) {
            lx.push_back(std::log(static_cast<double>(n_grid[gi])));
            ly.push_back(std::log(rec.rms_error[gi]));
        }
    }
    const auto line = detail::fit_line(lx, ly);
    rec.slope = line.slope;
    rec.intercept = line.intercept;
    return rec;
}

// -- interpolation inequality probe ------------------------------------------------

struct InterpolationResult {
    double k_fit = 0.0;  // max ratio over the corpus
    double median_ratio = 0.0;
    std::size_t skipped = 0;  // degenerate objects (||u||_{L2} ~ 0)
    std::vector<double> ratios;
};

/// Empirical constant of ||u||_{H^m} <= K ||u||_{H^k}^{m/k} ||u||_{L2}^{1-m/k}
/// over a corpus of networks. m = 0 and m = k give ratio 1 identically.
inline InterpolationResult interpolation_check(const std::vector<RepuNetwork>& nets, int m, int k,
                                               const QuadratureRule& rule) {
    if (m < 0 || m > k) throw DomainError("interpolation_check: need 0 <= m <= k");
    InterpolationResult out;
    for (const auto& net : nets) {
        const std::vector<double> norms = sobolev_norms_up_to(net, k, rule);
        const double l2 = norms[0];
        const double hm = norms[static_cast<std::size_t>(m)];
        const double hk = norms[static_cast<std::size_t>(k)];
        if (l2 < 1e-12) {
            ++out.skipped;
            continue;
        }
        double denom;
        if (m == 0) denom = l2;
        else if (m == k) denom = hk;
        else {
            const double frac = static_cast<double>(m) / static_cast<double>(k);
            denom = std::pow(hk, frac) * std::pow(l2, 1.0 - frac);
        }
        out.ratios.push_back(hm / denom);
    }
    if (!out.ratios.empty()) {
        out.k_fit = *std::max_element(out.ratios.begin(), out.ratios.end());
        std::vector<double> sorted = out.ratios;
        std::sort(sorted.begin(), sorted.end());
        out.median_ratio = sorted[sorted.size() / 2];
    }
    return out;
}

// -- penalty-level norm relation ------------------------------------------------------

struct NormRelationResult {
    double bound = 0.0;  // 2^k d^{k/2}
    double max_ratio = 0.0;
    double min_ratio = std::numeric_limits<double>::infinity();
    std::size_t violations = 0;
    std::size_t checked = 0;
};

/// For dictionary-feasible Sum networks, the ExtendedBarron penalty of the
/// equivalently rescaled MeanField form, divided by sum |a_i|, never exceeds
/// 2^k d^{k/2}. Penalty-level analog of the Barron-vs-variation comparison.
inline NormRelationResult norm_relation_check(const std::vector<RepuNetwork>& nets, int k, int d) {
    NormRelationResult out;
    out.bound = dictionary_sup_bound(d, k);
    for (const auto& net : nets) {
        const double var_pen = penalty_value(net, net.poly_tail ? PenaltyKind::RadonBV
                                                                : PenaltyKind::Variation);
        if (!(var_pen > 0.0)) continue;
        const double barron_pen =
            penalty_value(to_scaling(net, Scaling::MeanField), PenaltyKind::ExtendedBarron);
        const double ratio = barron_pen / var_pen;
        out.max_ratio = std::max(out.max_ratio, ratio);
        out.min_ratio = std::min(out.min_ratio, ratio);
        if (ratio > out.bound * (1.0 + 1e-12)) ++out.violations;
        ++out.checked;
    }
    return out;
}

// -- regularization rate sweeps --------------------------------------------------------

enum class SweepAxis { Delta, Neurons, Dimension };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::Delta: return "delta";
        case SweepAxis::Neurons: return "n";
        case SweepAxis::Dimension: return "d";
    }
    return "?";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "delta") return SweepAxis::Delta;
    if (s == "n") return SweepAxis::Neurons;
    if (s == "d") return SweepAxis::Dimension;
    throw ConfigError("unknown sweep axis '" + s + "' (expected delta, n or d)");
}

struct SweepConfig {
    SweepAxis axis = SweepAxis::Delta;
    std::vector<double> values;
    int m_max = 1;
    int d = 2;
    double delta = 1e-2;
    std::size_t n_train = 1u << 12;
    NoiseKind noise = NoiseKind::L2CalibratedField;
    TargetSpec target;
    TikhonovConfig tikhonov;
    std::uint64_t seed = 1;
    // evaluation rules; built per point dimension when empty
    int eval_q = 0;          // 0 = default per-d choices
    unsigned jobs = 1;
};

struct RatePoint {
    double axis_value = 0.0;
    double delta = 0.0;
    int n_model = 0;
    int d = 0;
    double lambda = 0.0;
    double norm_hint = 0.0;
    std::vector<double> errors;    // H^m errors, m = 0..m_max
    std::vector<double> bars;      // quadrature error bars
    std::vector<double> envelope;  // theoretical envelope per m
    double fidelity = 0.0;
    double penalty = 0.0;
    double objective = 0.0;
    double epsilon_achieved = 0.0;
    std::size_t iterations = 0;
    double wall_time_sec = 0.0;
    double max_sphere_defect = 0.0;  // max_i | ||w_i||_2 - 1 | of the fitted model
    double max_bias_excess = 0.0;    // max_i ( |b_i| - sqrt(d) )_+
    bool failed = false;
    std::string failure;
};

struct RateReport {
    SweepAxis axis = SweepAxis::Delta;
    int k = 0;
    int m_max = 0;
    std::vector<RatePoint> points;
    std::vector<double> slopes;            // log error vs log axis value, per m
    std::vector<double> intercepts;        // per m
    std::vector<double> theory_exponents;  // (k-m)/k per m
    std::vector<double> bound_ratio_max;   // max_j error/envelope per m
    std::vector<double> bound_ratio_min;   // min_j error/envelope per m
};

namespace detail {

inline std::vector<QuadratureRule> sweep_eval_rules(const SweepConfig& cfg, int d) {
    if (cfg.eval_q > 0) {
        std::vector<QuadratureRule> rules;
        rules.push_back(build_tensor_gauss_legendre(cfg.eval_q, d));
        rules.push_back(build_tensor_gauss_legendre(std::max(2, cfg.eval_q - 8), d));
        return rules;
    }
    return default_eval_rules(d, seed_stream(cfg.seed, "eval"));
}

}  // namespace detail

/// Sweep one axis (noise level, model width or dimension): per grid point,
/// generate target and dataset, select lambda by the scheme's rule, fit, and
/// measure H^m errors against the exact target. Along the delta axis the
/// noise shape is drawn once and rescaled (common random numbers), so the
/// error curves vary smoothly with delta. Failed fits are recorded and the
/// sweep continues.
inline RateReport rate_sweep(const SweepConfig& cfg) {
    if (cfg.values.empty()) throw ConfigError("rate_sweep: empty grid");
    if (cfg.m_max < 0 || cfg.m_max > cfg.tikhonov.k)
        throw ConfigError("rate_sweep: need 0 <= m_max <= k");

    RateReport report;
    report.axis = cfg.axis;
    report.k = cfg.tikhonov.k;
    report.m_max = cfg.m_max;
    for (int m = 0; m <= cfg.m_max; ++m)
        report.theory_exponents.push_back(static_cast<double>(cfg.tikhonov.k - m) /
                                          static_cast<double>(cfg.tikhonov.k));
    report.points.resize(cfg.values.size());

    parallel_for(cfg.values.size(), cfg.jobs, [&](std::size_t pi) {
        RatePoint& pt = report.points[pi];
        pt.axis_value = cfg.values[pi];
        pt.d = cfg.axis == SweepAxis::Dimension ? static_cast<int>(cfg.values[pi]) : cfg.d;
        pt.delta = cfg.axis == SweepAxis::Delta ? cfg.values[pi] : cfg.delta;
        pt.n_model =
            cfg.axis == SweepAxis::Neurons ? static_cast<int>(cfg.values[pi]) : cfg.tikhonov.n;
        try {
            TargetSpec tspec = cfg.target;
            tspec.d = pt.d;
            tspec.k = cfg.tikhonov.k;
            const TargetFunction target =
                make_target(tspec, seed_stream(cfg.seed, "target",
                                               cfg.axis == SweepAxis::Dimension ? pi : 0));

            const std::uint64_t train_idx = cfg.axis == SweepAxis::Delta ? 0 : pi;
            const QuadratureRule train_rule =
                build_lattice(cfg.n_train, pt.d, seed_stream(cfg.seed, "train", train_idx));
            const NoisyDataset ds =
                make_noisy_dataset(target, train_rule, pt.delta, cfg.noise,
                                   seed_stream(cfg.seed, "noise", train_idx));

            TikhonovConfig tik = cfg.tikhonov;
            tik.n = pt.n_model;
            tik.delta = pt.delta;
            if (!tik.lambda_rule.norm_hint) {
                const auto hint = target.bound_for(tik.penalty);
                if (!hint)
                    throw ConfigError("rate_sweep: target records no norm bound for the penalty");
                tik.lambda_rule.norm_hint = *hint;
            }
            pt.norm_hint = tik.lambda_rule.norm_hint.value_or(0.0);

            const FitReport fitted = fit(ds, tik);
            pt.lambda = fitted.lambda;
            pt.fidelity = fitted.fidelity;
            pt.penalty = fitted.penalty;
            pt.objective = fitted.objective;
            pt.epsilon_achieved = fitted.epsilon_achieved;
            pt.iterations = fitted.iterations;
            pt.wall_time_sec = fitted.wall_time_sec;
            for (const auto& nr : fitted.model.neurons) {
                double norm_sq = 0.0;
                for (double c : nr.w) norm_sq += c * c;
                pt.max_sphere_defect =
                    std::max(pt.max_sphere_defect, std::abs(std::sqrt(norm_sq) - 1.0));
                pt.max_bias_excess = std::max(
                    pt.max_bias_excess, std::abs(nr.b) - dictionary_bias_bound(pt.d));
            }
            pt.max_bias_excess = std::max(0.0, pt.max_bias_excess);

            const auto rules = detail::sweep_eval_rules(cfg, pt.d);
            pt.errors.assign(static_cast<std::size_t>(cfg.m_max) + 1, 0.0);
            pt.bars.assign(static_cast<std::size_t>(cfg.m_max) + 1, 0.0);
            std::vector<std::vector<double>> per_rule;
            for (const auto& rule : rules)
                per_rule.push_back(sobolev_errors_up_to(fitted.model, target, cfg.m_max, rule));
            for (int m = 0; m <= cfg.m_max; ++m) {
                pt.errors[static_cast<std::size_t>(m)] = per_rule[0][static_cast<std::size_t>(m)];
                for (std::size_t r = 1; r < per_rule.size(); ++r)
                    pt.bars[static_cast<std::size_t>(m)] =
                        std::max(pt.bars[static_cast<std::size_t>(m)],
                                 std::abs(per_rule[r][static_cast<std::size_t>(m)] -
                                          per_rule[0][static_cast<std::size_t>(m)]));
            }

            pt.envelope.clear();
            for (int m = 0; m <= cfg.m_max; ++m) {
                const double expo = report.theory_exponents[static_cast<std::size_t>(m)];
                double base;
                if (cfg.tikhonov.penalty == PenaltyKind::RadonBV)
                    base = pt.delta + std::sqrt(cfg.tikhonov.epsilon_target);
                else
                    base = pt.delta + 1.0 / std::sqrt(static_cast<double>(std::max(1, pt.n_model)));
                pt.envelope.push_back(std::pow(base, expo));
            }
        } catch (const Error& e) {
            pt.failed = true;
            pt.failure = e.what();
        }
    });

    for (int m = 0; m <= cfg.m_max; ++m) {
        std::vector<double> lx, ly;
        double rmax = 0.0, rmin = std::numeric_limits<double>::infinity();
        for (const auto& pt : report.points) {
            if (pt.failed) continue;
            const double err = pt.errors[static_cast<std::size_t>(m)];
            if (err > 0.0 && pt.axis_value > 0.0) {
                lx.push_back(std::log(pt.axis_value));
                ly.push_back(std::log(err));
            }
            const double env = pt.envelope[static_cast<std::size_t>(m)];
            if (env > 0.0) {
                rmax = std::max(rmax, err / env);
                rmin = std::min(rmin, err / env);
            }
        }
        const auto line = detail::fit_line(lx, ly);
        report.slopes.push_back(line.slope);
        report.intercepts.push_back(line.intercept);
        report.bound_ratio_max.push_back(rmax);
        report.bound_ratio_min.push_back(rmin);
    }
    return report;
}

}  // namespace repufit
