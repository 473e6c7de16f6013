#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repufit/common.hpp"
#include "repufit/datagen.hpp"
#include "repufit/network.hpp"
#include "repufit/penalties.hpp"
#include "repufit/rng.hpp"

namespace repufit {

enum class LambdaRuleKind { ExplicitValue, BarronRule, VariationRule, RadonBVRule, GridSearch };

inline const char* to_string(LambdaRuleKind k) {
    switch (k) {
        case LambdaRuleKind::ExplicitValue: return "explicit";
        case LambdaRuleKind::BarronRule: return "barron_rule";
        case LambdaRuleKind::VariationRule: return "variation_rule";
        case LambdaRuleKind::RadonBVRule: return "radon_bv_rule";
        case LambdaRuleKind::GridSearch: return "grid";
    }
    return "?";
}

inline LambdaRuleKind lambda_rule_kind_from_string(const std::string& s) {
    if (s == "explicit") return LambdaRuleKind::ExplicitValue;
    if (s == "barron_rule") return LambdaRuleKind::BarronRule;
    if (s == "variation_rule") return LambdaRuleKind::VariationRule;
    if (s == "radon_bv_rule") return LambdaRuleKind::RadonBVRule;
    if (s == "grid") return LambdaRuleKind::GridSearch;
    throw ConfigError("unknown lambda rule '" + s + "'");
}

/// Default stand-in for the approximation constant of the Barron balance
/// rule: 2^k (k+1), deliberately conservative and overridable in config.
inline double default_barron_ck(int k) {
    return detail::int_pow(2.0, k) * static_cast<double>(k + 1);
}

struct LambdaRule {
    LambdaRuleKind kind = LambdaRuleKind::ExplicitValue;
    double value = 1e-6;              // ExplicitValue
    std::vector<double> grid;         // GridSearch
    std::optional<double> norm_hint;  // H in the balance rules
    std::optional<double> c_k;        // Barron rule constant override
};

/// The theorem balance rules.
///   barron:    sqrt(lambda) = delta/H + C(k) n^{-1/2}
///   variation: sqrt(lambda) = delta/H + 2^k d^{k/2} n^{-1/2}
///   radon_bv:  sqrt(lambda) = (delta + sqrt(epsilon)) / H
inline double select_lambda(LambdaRuleKind rule, double delta, int n, double norm_hint, int k,
                            int d, double c_k = 0.0, double epsilon = 0.0) {
    if (rule == LambdaRuleKind::BarronRule || rule == LambdaRuleKind::VariationRule ||
        rule == LambdaRuleKind::RadonBVRule) {
        if (!(norm_hint > 0.0)) throw ConfigError("select_lambda: norm_hint must be > 0");
    }
    switch (rule) {
        case LambdaRuleKind::BarronRule: {
            const double ck = (c_k > 0.0) ? c_k : default_barron_ck(k);
            const double root = delta / norm_hint + ck / std::sqrt(static_cast<double>(n));
            return root * root;
        }
        case LambdaRuleKind::VariationRule: {
            const double dict = detail::int_pow(2.0, k) *
                                std::pow(static_cast<double>(d), 0.5 * static_cast<double>(k));
            const double root = delta / norm_hint + dict / std::sqrt(static_cast<double>(n));
            return root * root;
        }
        case LambdaRuleKind::RadonBVRule: {
            if (epsilon < 0.0) throw ConfigError("select_lambda: epsilon must be >= 0");
            const double root = (delta + std::sqrt(epsilon)) / norm_hint;
            return root * root;
        }
        default:
            throw ConfigError("select_lambda: rule has no closed form");
    }
}

struct OptimizerConfig {
    double step_init = 0.05;
    double step_floor = 0.05;  // cosine decay floor, as a fraction of step_init
    std::size_t max_iters = 2000;
    int restarts = 4;
    std::uint64_t seed = 1;
    double tolerance = 0.0;  // early-stop on relative best-objective stall; 0 = off
    double momentum = 0.0;
    double grad_clip = 1e3;  // cap on the (preconditioned) gradient norm per step
    double init_w_radius = 1.0;  // Barron-mode inner weight radius
    std::size_t reference_run_multiplier = 10;
    bool epsilon_audit = false;  // forced on for RadonBV
    bool record_trace = false;
};

struct TikhonovConfig {
    PenaltyKind penalty = PenaltyKind::ExtendedBarron;
    int k = 2;
    int n = 32;
    LambdaRule lambda_rule;
    std::optional<double> delta;  // defaults to the dataset's nominal level
    double epsilon_target = 1e-2;
    OptimizerConfig optimizer;
};

struct FitReport {
    RepuNetwork model;
    double objective = 0.0;
    double fidelity = 0.0;  // discrete L2 distance to the data (unsquared)
    double penalty = 0.0;
    double lambda = 0.0;
    std::size_t iterations = 0;
    int restart_index = 0;
    double epsilon_achieved = 0.0;
    std::size_t reinit_events = 0;
    double wall_time_sec = 0.0;
    std::vector<double> best_trace;  // best-so-far objective per iteration when recorded
};

/// J(net) = sum_i w_i (eval(net, x_i) - y_i)^2 + lambda * penalty(net)^2.
inline double objective(const RepuNetwork& net, const NoisyDataset& ds, PenaltyKind kind,
                        double lambda) {
    check_feasible(net, kind);
    if (net.d != ds.d) throw InputError("objective: network and dataset dimension differ");
    const double fid_sq = pairwise_sum(ds.size(), [&](std::size_t i) {
        const double r = net.value(ds.point(i)) - ds.values[i];
        return ds.weights[i] * r * r;
    });
    const double p = penalty_value(net, kind);
    return fid_sq + lambda * p * p;
}

namespace detail {

/// Fused fidelity pass: returns sum_i w_i r_i^2 and accumulates its gradient
/// (2 sum_i w_i r_i grad eval) into `grad` (pre-sized, pre-zeroed).
inline double fidelity_and_gradient(const RepuNetwork& net, const NoisyDataset& ds,
                                    const ParamLayout& lay, std::vector<double>& grad,
                                    std::vector<double>& z_buf) {
    const int n = lay.n;
    const int d = lay.d;
    const double scale = net.scale();
    const double kk = static_cast<double>(net.k);
    z_buf.resize(static_cast<std::size_t>(n));
    double fid_sq = 0.0;
    for (std::size_t ipt = 0; ipt < ds.size(); ++ipt) {
        const std::span<const double> x = ds.point(ipt);
        double out = net.a0;
        for (int i = 0; i < n; ++i) {
            const auto& nr = net.neurons[static_cast<std::size_t>(i)];
            double z = nr.b;
            for (int j = 0; j < d; ++j)
                z += nr.w[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
            z_buf[static_cast<std::size_t>(i)] = z;
            if (z > 0.0) {
                double p = z;
                for (int r = 1; r < net.k; ++r) p *= z;
                out += scale * nr.a * p;
            }
        }
        for (int j = 0; j < lay.n_poly; ++j)
            out += (*net.poly_tail)[static_cast<std::size_t>(j)].coef *
                   pow_multi(x, (*net.poly_tail)[static_cast<std::size_t>(j)].alpha);
        const double r = out - ds.values[ipt];
        fid_sq += ds.weights[ipt] * r * r;
        const double c0 = 2.0 * ds.weights[ipt] * r;
        grad[lay.a0()] += c0;
        for (int j = 0; j < lay.n_poly; ++j)
            grad[lay.poly(j)] +=
                c0 * pow_multi(x, (*net.poly_tail)[static_cast<std::size_t>(j)].alpha);
        for (int i = 0; i < n; ++i) {
            const double z = z_buf[static_cast<std::size_t>(i)];
            if (z < 0.0) continue;                 // sigma_k and sigma_{k-1} both vanish
            if (z == 0.0 && net.k >= 2) continue;  // both vanish; k == 1 keeps sigma_0(0) = 1
            const auto& nr = net.neurons[static_cast<std::size_t>(i)];
            double skm1 = 1.0;  // sigma_{k-1}(z) for z >= 0
            for (int rr = 1; rr < net.k; ++rr) skm1 *= z;
            const double sk = skm1 * z;
            grad[lay.a(i)] += c0 * scale * sk;
            const double cw = c0 * scale * nr.a * kk * skm1;
            for (int j = 0; j < d; ++j)
                grad[lay.w(i, j)] += cw * x[static_cast<std::size_t>(j)];
            grad[lay.b(i)] += cw;
        }
    }
    return fid_sq;
}

/// Least-squares fit of the polynomial tail coefficients to the data with
/// all neurons ignored (Radon-BV initialization).
inline void least_squares_tail(RepuNetwork& net, const NoisyDataset& ds) {
    if (!net.poly_tail || net.poly_tail->empty()) return;
    const int p = static_cast<int>(net.poly_tail->size());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    std::vector<double> row(static_cast<std::size_t>(p));
    for (std::size_t ipt = 0; ipt < ds.size(); ++ipt) {
        const auto x = ds.point(ipt);
        for (int j = 0; j < p; ++j)
            row[static_cast<std::size_t>(j)] =
                pow_multi(x, (*net.poly_tail)[static_cast<std::size_t>(j)].alpha);
        const double wi = ds.weights[ipt];
        for (int r = 0; r < p; ++r) {
            rhs(r) += wi * row[static_cast<std::size_t>(r)] * ds.values[ipt];
            for (int c = 0; c <= r; ++c)
                gram(r, c) += wi * row[static_cast<std::size_t>(r)] * row[static_cast<std::size_t>(c)];
        }
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    Eigen::VectorXd coef = gram.ldlt().solve(rhs);
    for (int j = 0; j < p; ++j)
        (*net.poly_tail)[static_cast<std::size_t>(j)].coef = coef(j);
}

inline RepuNetwork init_network(const TikhonovConfig& cfg, int d, const NoisyDataset& ds,
                                std::uint64_t seed) {
    Rng rng(seed);
    RepuNetwork net;
    net.k = cfg.k;
    net.d = d;
    net.scaling = cfg.penalty == PenaltyKind::ExtendedBarron ? Scaling::MeanField : Scaling::Sum;
    const double bmax = dictionary_bias_bound(d);
    const double a_std = std::sqrt(1.0 / static_cast<double>(std::max(1, cfg.n)));
    for (int i = 0; i < cfg.n; ++i) {
        Neuron nr;
        nr.w = rng.unit_sphere(d);
        if (cfg.penalty == PenaltyKind::ExtendedBarron && cfg.optimizer.init_w_radius != 1.0)
            for (auto& c : nr.w) c *= cfg.optimizer.init_w_radius;
        nr.b = rng.uniform(-bmax, bmax);
        nr.a = a_std * rng.normal();
        net.neurons.push_back(std::move(nr));
    }
    if (cfg.penalty == PenaltyKind::RadonBV) {
        std::vector<PolyTerm> tail;
        for (const auto& alpha : multi_indices_up_to(d, cfg.k)) tail.push_back({0.0, alpha});
        net.poly_tail = std::move(tail);
        least_squares_tail(net, ds);
    }
    return net;
}

struct RunResult {
    RepuNetwork net;
    double objective = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    std::size_t reinit_events = 0;
    bool diverged = false;
    std::size_t diverged_at = 0;
    std::vector<double> best_trace;
};

inline RunResult single_run(const TikhonovConfig& cfg, const NoisyDataset& ds, double lambda,
                            std::uint64_t init_seed, std::size_t max_iters, bool record_trace) {
    const bool constrained = cfg.penalty != PenaltyKind::ExtendedBarron;
    RunResult res;
    RepuNetwork net = init_network(cfg, ds.d, ds, init_seed);
    if (constrained) net = project_constraints(net, cfg.penalty);
    Rng reinit_rng(seed_stream(init_seed, "reinit"));

    const ParamLayout lay = layout_of(net);
    std::vector<double> grad(lay.size());
    std::vector<double> velocity;
    if (cfg.optimizer.momentum != 0.0) velocity.assign(lay.size(), 0.0);
    std::vector<double> z_buf;
    // MeanField gradients of neuron parameters carry a 1/n factor; scale their
    // steps by n so training speed does not degrade with width.
    const double neuron_step_scale =
        net.scaling == Scaling::MeanField ? static_cast<double>(std::max(1, cfg.n)) : 1.0;
    const bool train_a0 = cfg.penalty == PenaltyKind::ExtendedBarron;

    double best_obj = std::numeric_limits<double>::infinity();
    RepuNetwork best_net = net;
    std::size_t best_iter = 0;
    double last_check_best = std::numeric_limits<double>::infinity();
    const double pi = 3.14159265358979323846;

    for (std::size_t t = 0; t < max_iters; ++t) {
        std::fill(grad.begin(), grad.end(), 0.0);
        const double fid_sq = detail::fidelity_and_gradient(net, ds, lay, grad, z_buf);
        const double pen = penalty_value(net, cfg.penalty);
        const double obj = fid_sq + lambda * pen * pen;
        if (!std::isfinite(obj)) {
            res.diverged = true;
            res.diverged_at = t;
            break;
        }
        if (obj < best_obj) {
            best_obj = obj;
            best_net = net;
            best_iter = t;
        }
        if (record_trace) res.best_trace.push_back(best_obj);
        if (cfg.optimizer.tolerance > 0.0 && t > 0 && t % 200 == 0) {
            if (last_check_best - best_obj <=
                cfg.optimizer.tolerance * std::max(1.0, std::abs(best_obj))) {
                res.iterations = t;
                break;
            }
            last_check_best = best_obj;
        }

        if (lambda != 0.0 && pen != 0.0) {
            const std::vector<double> psub = penalty_subgradient(net, cfg.penalty);
            const double c = lambda * 2.0 * pen;
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += c * psub[j];
        }
        if (!train_a0) grad[lay.a0()] = 0.0;

        const double cosine =
            cfg.optimizer.step_floor +
            (1.0 - cfg.optimizer.step_floor) * 0.5 *
                (1.0 + std::cos(pi * static_cast<double>(t) / static_cast<double>(max_iters)));
        const double step = cfg.optimizer.step_init * cosine;

        std::vector<double> theta = pack_parameters(net);
        auto scale_at = [&](std::size_t j) {
            const bool neuron_block = lay.n > 0 && j >= lay.a(0);
            return neuron_block ? neuron_step_scale : 1.0;
        };
        double vnorm_sq = 0.0;
        for (std::size_t j = 0; j < grad.size(); ++j) {
            const double v = scale_at(j) * grad[j];
            vnorm_sq += v * v;
        }
        const double clip =
            cfg.optimizer.grad_clip > 0.0 && vnorm_sq > cfg.optimizer.grad_clip * cfg.optimizer.grad_clip
                ? cfg.optimizer.grad_clip / std::sqrt(vnorm_sq)
                : 1.0;
        if (cfg.optimizer.momentum != 0.0) {
            for (std::size_t j = 0; j < theta.size(); ++j) {
                velocity[j] = cfg.optimizer.momentum * velocity[j] -
                              step * clip * scale_at(j) * grad[j];
                theta[j] += velocity[j];
            }
        } else {
            for (std::size_t j = 0; j < theta.size(); ++j)
                theta[j] -= step * clip * scale_at(j) * grad[j];
        }
        apply_parameters(net, theta);

        if (constrained) {
            for (std::size_t i = 0; i < net.neurons.size(); ++i) {
                auto& nr = net.neurons[i];
                double norm_sq = 0.0;
                for (double c : nr.w) norm_sq += c * c;
                if (!(norm_sq > 1e-24)) {  // degenerate: re-seed in place, keep eval unchanged
                    nr.w = reinit_rng.unit_sphere(net.d);
                    nr.b = reinit_rng.uniform(-dictionary_bias_bound(net.d),
                                              dictionary_bias_bound(net.d));
                    nr.a = 0.0;
                    ++res.reinit_events;
                }
            }
            net = project_constraints(std::move(net), cfg.penalty);
        }
        res.iterations = t + 1;
    }

    // final candidate after the last step
    if (!res.diverged) {
        const double fid_sq = pairwise_sum(ds.size(), [&](std::size_t i) {
            const double r = net.value(ds.point(i)) - ds.values[i];
            return ds.weights[i] * r * r;
        });
        const double pen = penalty_value(net, cfg.penalty);
        const double obj = fid_sq + lambda * pen * pen;
        if (std::isfinite(obj) && obj < best_obj) {
            best_obj = obj;
            best_net = net;
            best_iter = res.iterations;
        }
    }
    (void)best_iter;
    res.net = std::move(best_net);
    res.objective = best_obj;
    return res;
}

inline FitReport run_restarts(const TikhonovConfig& cfg, const NoisyDataset& ds, double lambda) {
    if (cfg.optimizer.restarts < 1) throw ConfigError("fit: restarts must be >= 1");
    RunResult best;
    int best_index = -1;
    std::size_t reinits = 0;
    std::vector<double> trace;
    bool any_finite = false;
    std::size_t first_divergence_iter = 0;
    for (int r = 0; r < cfg.optimizer.restarts; ++r) {
        RunResult run = single_run(cfg, ds, lambda, seed_stream(cfg.optimizer.seed, "init",
                                                                static_cast<std::uint64_t>(r)),
                                   cfg.optimizer.max_iters,
                                   cfg.optimizer.record_trace && r == 0);
        reinits += run.reinit_events;
        if (run.diverged && !std::isfinite(run.objective)) {
            if (!any_finite) first_divergence_iter = run.diverged_at;
            continue;
        }
        any_finite = true;
        if (r == 0) trace = run.best_trace;
        // ties within 1e-12 go to the lowest restart index
        if (best_index < 0 ||
            best.objective - run.objective > 1e-12 * std::max(1.0, std::abs(best.objective))) {
            best = std::move(run);
            best_index = r;
        }
    }
    if (best_index < 0)
        throw DivergenceError(first_divergence_iter,
                              "fit: every restart produced a non-finite objective");

    // epsilon audit: compare against a longer reference run
    double epsilon_achieved = 0.0;
    if (cfg.penalty == PenaltyKind::RadonBV || cfg.optimizer.epsilon_audit) {
        RunResult ref = single_run(
            cfg, ds, lambda,
            seed_stream(cfg.optimizer.seed, "init", 1000000),
            cfg.optimizer.max_iters * std::max<std::size_t>(1, cfg.optimizer.reference_run_multiplier),
            false);
        if (std::isfinite(ref.objective))
            epsilon_achieved = std::max(0.0, best.objective - ref.objective);
    }

    FitReport report;
    report.model = std::move(best.net);
    report.lambda = lambda;
    report.iterations = best.iterations;
    report.restart_index = best_index;
    report.reinit_events = reinits;
    report.epsilon_achieved = epsilon_achieved;
    report.best_trace = std::move(trace);
    report.fidelity = std::sqrt(std::max(0.0, pairwise_sum(ds.size(), [&](std::size_t i) {
        const double r = report.model.value(ds.point(i)) - ds.values[i];
        return ds.weights[i] * r * r;
    })));
    report.penalty = penalty_value(report.model, cfg.penalty);
    report.objective = report.fidelity * report.fidelity + lambda * report.penalty * report.penalty;
    return report;
}

}  // namespace detail

/// Minimize the Tikhonov functional over the configured network class by
/// projected (sub)gradient descent with restarts. GridSearch fits every
/// candidate lambda and keeps the one whose fidelity best matches the noise
/// level (discrepancy principle), falling back to the smallest objective
/// when delta == 0.
inline FitReport fit(const NoisyDataset& ds, const TikhonovConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.k < 1) throw ConfigError("fit: k must be >= 1");
    if (cfg.n < 0) throw ConfigError("fit: n must be >= 0");
    if (ds.size() == 0) throw SizeError("fit: empty dataset");
    const double delta = cfg.delta.value_or(ds.delta_nominal);

    FitReport report;
    const auto& lr = cfg.lambda_rule;
    if (lr.kind == LambdaRuleKind::GridSearch) {
        if (lr.grid.empty()) throw ConfigError("fit: empty lambda grid");
        bool have = false;
        double best_score = std::numeric_limits<double>::infinity();
        for (double lam : lr.grid) {
            if (!(lam >= 0.0)) throw ConfigError("fit: negative lambda in grid");
            FitReport cand = detail::run_restarts(cfg, ds, lam);
            const double score =
                delta > 0.0 ? std::abs(cand.fidelity - delta) : cand.objective;
            if (!have || score < best_score) {
                best_score = score;
                report = std::move(cand);
                have = true;
            }
        }
    } else {
        double lambda = 0.0;
        if (lr.kind == LambdaRuleKind::ExplicitValue) {
            if (!(lr.value >= 0.0)) throw ConfigError("fit: lambda must be >= 0");
            lambda = lr.value;
        } else {
            lambda = select_lambda(lr.kind, delta, std::max(1, cfg.n), lr.norm_hint.value_or(0.0),
                                   cfg.k, ds.d, lr.c_k.value_or(0.0), cfg.epsilon_target);
        }
        report = detail::run_restarts(cfg, ds, lambda);
    }
    report.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Table of d^alpha values, points x alphas.
inline std::vector<std::vector<double>> differentiate(const RepuNetwork& net,
                                                      const std::vector<std::vector<double>>& points,
                                                      const std::vector<MultiIndex>& alphas) {
    for (const auto& a : alphas)
        if (a.total() > net.k)
            throw UnsupportedOrderError("differentiate: |alpha| > k is unsupported");
    std::vector<std::vector<double>> table;
    table.reserve(points.size());
    for (const auto& p : points) {
        std::vector<double> row;
        row.reserve(alphas.size());
        for (const auto& a : alphas) row.push_back(net.derivative(a, p));
        table.push_back(std::move(row));
    }
    return table;
}

}  // namespace repufit
