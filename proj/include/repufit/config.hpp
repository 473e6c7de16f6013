#pragma once

#include <cstdio>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "repufit/analysis.hpp"
#include "repufit/common.hpp"
#include "repufit/datagen.hpp"
#include "repufit/model_io.hpp"
#include "repufit/quadrature.hpp"
#include "repufit/solver.hpp"

namespace repufit {
namespace cfg {

using nlohmann::json;

/// Strict parsing: any key outside `allowed` is rejected with its path.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!ok.count(it.key()))
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

// -- quadrature ---------------------------------------------------------------

struct QuadratureSpec {
    std::string kind = "tensor_gauss_legendre";
    int q = 24;
    std::size_t n = 1u << 12;

    QuadratureRule build(int d, std::uint64_t seed) const {
        if (kind == "tensor_gauss_legendre") return build_tensor_gauss_legendre(q, d);
        if (kind == "lattice") return build_lattice(n, d, seed);
        throw ConfigError("quadrature.kind '" + kind + "' unknown");
    }
};

inline QuadratureSpec parse_quadrature(const json& j, const std::string& where) {
    check_keys(j, {"kind", "q", "n"}, where);
    QuadratureSpec spec;
    spec.kind = get_or<std::string>(j, "kind", spec.kind, where);
    spec.q = get_or<int>(j, "q", spec.q, where);
    spec.n = get_or<std::size_t>(j, "n", spec.n, where);
    if (spec.kind != "tensor_gauss_legendre" && spec.kind != "lattice")
        throw ConfigError(where + ".kind: expected tensor_gauss_legendre or lattice");
    return spec;
}

inline json to_json(const QuadratureSpec& spec) {
    return json{{"kind", spec.kind}, {"q", spec.q}, {"n", spec.n}};
}

// -- target -------------------------------------------------------------------

inline Factor1D parse_factor(const json& j, const std::string& where) {
    check_keys(j, {"kind", "omega", "phase", "rate", "coefs"}, where);
    const auto kind = require<std::string>(j, "kind", where);
    if (kind == "sin") {
        SinFactor f;
        f.omega = get_or<double>(j, "omega", 1.0, where);
        f.phase = get_or<double>(j, "phase", 0.0, where);
        return f;
    }
    if (kind == "exp") {
        ExpFactor f;
        f.rate = get_or<double>(j, "rate", 1.0, where);
        return f;
    }
    if (kind == "poly") {
        PolyFactor f;
        f.coefs = require<std::vector<double>>(j, "coefs", where);
        return f;
    }
    throw ConfigError(where + ".kind: expected sin, exp or poly");
}

inline json to_json(const Factor1D& f) {
    if (const auto* s = std::get_if<SinFactor>(&f))
        return json{{"kind", "sin"}, {"omega", s->omega}, {"phase", s->phase}};
    if (const auto* e = std::get_if<ExpFactor>(&f)) return json{{"kind", "exp"}, {"rate", e->rate}};
    const auto& p = std::get<PolyFactor>(f);
    return json{{"kind", "poly"}, {"coefs", p.coefs}};
}

inline TargetSpec parse_target(const json& j, const std::string& where) {
    check_keys(j, {"kind", "k", "d", "n_ref", "a_scale", "neurons", "terms", "factors"}, where);
    TargetSpec spec;
    spec.kind = target_kind_from_string(require<std::string>(j, "kind", where));
    spec.k = require<int>(j, "k", where);
    spec.d = require<int>(j, "d", where);
    spec.n_ref = get_or<int>(j, "n_ref", spec.n_ref, where);
    spec.a_scale = get_or<double>(j, "a_scale", spec.a_scale, where);
    if (j.contains("neurons")) {
        for (const auto& nj : j.at("neurons")) {
            check_keys(nj, {"a", "w", "b"}, where + ".neurons[]");
            Neuron nr;
            nr.a = require<double>(nj, "a", where);
            nr.w = require<std::vector<double>>(nj, "w", where);
            nr.b = require<double>(nj, "b", where);
            spec.explicit_neurons.push_back(std::move(nr));
        }
    }
    if (j.contains("terms")) {
        for (const auto& tj : j.at("terms")) {
            check_keys(tj, {"coef", "alpha"}, where + ".terms[]");
            PolyTerm t;
            t.coef = require<double>(tj, "coef", where);
            t.alpha = MultiIndex(require<std::vector<int>>(tj, "alpha", where));
            spec.poly_terms.push_back(std::move(t));
        }
    }
    if (j.contains("factors")) {
        for (const auto& fj : j.at("factors"))
            spec.factors.push_back(parse_factor(fj, where + ".factors[]"));
    }
    return spec;
}

inline json to_json(const TargetSpec& spec) {
    json j;
    switch (spec.kind) {
        case TargetKind::ReferenceNetwork: j["kind"] = "reference_network"; break;
        case TargetKind::Polynomial: j["kind"] = "polynomial"; break;
        case TargetKind::Product1D: j["kind"] = "product_1d"; break;
    }
    j["k"] = spec.k;
    j["d"] = spec.d;
    j["n_ref"] = spec.n_ref;
    j["a_scale"] = spec.a_scale;
    if (!spec.explicit_neurons.empty()) {
        json arr = json::array();
        for (const auto& nr : spec.explicit_neurons)
            arr.push_back({{"a", nr.a}, {"w", nr.w}, {"b", nr.b}});
        j["neurons"] = std::move(arr);
    }
    if (!spec.poly_terms.empty()) {
        json arr = json::array();
        for (const auto& t : spec.poly_terms)
            arr.push_back({{"coef", t.coef}, {"alpha", t.alpha.orders}});
        j["terms"] = std::move(arr);
    }
    if (!spec.factors.empty()) {
        json arr = json::array();
        for (const auto& f : spec.factors) arr.push_back(to_json(f));
        j["factors"] = std::move(arr);
    }
    return j;
}

// -- noise ---------------------------------------------------------------------

struct NoiseSpec {
    double delta = 0.0;
    NoiseKind kind = NoiseKind::GaussianIID;
};

inline NoiseSpec parse_noise(const json& j, const std::string& where) {
    check_keys(j, {"delta", "kind"}, where);
    NoiseSpec spec;
    spec.delta = get_or<double>(j, "delta", 0.0, where);
    spec.kind = noise_kind_from_string(
        get_or<std::string>(j, "kind", "gaussian_iid", where));
    return spec;
}

inline json to_json(const NoiseSpec& spec) {
    return json{{"delta", spec.delta}, {"kind", to_string(spec.kind)}};
}

// -- optimizer / tikhonov --------------------------------------------------------

inline OptimizerConfig parse_optimizer(const json& j, std::uint64_t default_seed,
                                       const std::string& where) {
    check_keys(j,
               {"step_init", "step_floor", "max_iters", "restarts", "seed", "tolerance",
                "momentum", "grad_clip", "init_w_radius", "reference_run_multiplier",
                "epsilon_audit", "record_trace"},
               where);
    OptimizerConfig opt;
    opt.step_init = get_or<double>(j, "step_init", opt.step_init, where);
    opt.step_floor = get_or<double>(j, "step_floor", opt.step_floor, where);
    opt.max_iters = get_or<std::size_t>(j, "max_iters", opt.max_iters, where);
    opt.restarts = get_or<int>(j, "restarts", opt.restarts, where);
    opt.seed = get_or<std::uint64_t>(j, "seed", default_seed, where);
    opt.tolerance = get_or<double>(j, "tolerance", opt.tolerance, where);
    opt.momentum = get_or<double>(j, "momentum", opt.momentum, where);
    opt.grad_clip = get_or<double>(j, "grad_clip", opt.grad_clip, where);
    opt.init_w_radius = get_or<double>(j, "init_w_radius", opt.init_w_radius, where);
    opt.reference_run_multiplier =
        get_or<std::size_t>(j, "reference_run_multiplier", opt.reference_run_multiplier, where);
    opt.epsilon_audit = get_or<bool>(j, "epsilon_audit", opt.epsilon_audit, where);
    opt.record_trace = get_or<bool>(j, "record_trace", opt.record_trace, where);
    return opt;
}

inline json to_json(const OptimizerConfig& opt) {
    return json{{"step_init", opt.step_init},
                {"step_floor", opt.step_floor},
                {"max_iters", opt.max_iters},
                {"restarts", opt.restarts},
                {"seed", opt.seed},
                {"tolerance", opt.tolerance},
                {"momentum", opt.momentum},
                {"grad_clip", opt.grad_clip},
                {"init_w_radius", opt.init_w_radius},
                {"reference_run_multiplier", opt.reference_run_multiplier},
                {"epsilon_audit", opt.epsilon_audit},
                {"record_trace", opt.record_trace}};
}

inline LambdaRule parse_lambda_rule(const json& j, const std::string& where) {
    check_keys(j, {"kind", "value", "grid", "norm_hint", "c_k"}, where);
    LambdaRule rule;
    rule.kind = lambda_rule_kind_from_string(require<std::string>(j, "kind", where));
    if (j.contains("value")) rule.value = require<double>(j, "value", where);
    if (j.contains("grid")) rule.grid = require<std::vector<double>>(j, "grid", where);
    if (j.contains("norm_hint") && !j.at("norm_hint").is_null())
        rule.norm_hint = require<double>(j, "norm_hint", where);
    if (j.contains("c_k") && !j.at("c_k").is_null())
        rule.c_k = require<double>(j, "c_k", where);
    if (rule.kind == LambdaRuleKind::ExplicitValue && !j.contains("value"))
        throw ConfigError(where + ": explicit rule needs 'value'");
    if (rule.kind == LambdaRuleKind::GridSearch && rule.grid.empty())
        throw ConfigError(where + ": grid rule needs a non-empty 'grid'");
    return rule;
}

inline json to_json(const LambdaRule& rule) {
    json j{{"kind", to_string(rule.kind)}};
    if (rule.kind == LambdaRuleKind::ExplicitValue) j["value"] = rule.value;
    if (rule.kind == LambdaRuleKind::GridSearch) j["grid"] = rule.grid;
    if (rule.norm_hint) j["norm_hint"] = *rule.norm_hint;
    if (rule.c_k) j["c_k"] = *rule.c_k;
    return j;
}

inline TikhonovConfig parse_tikhonov(const json& j, std::uint64_t default_seed,
                                     const std::string& where) {
    check_keys(j, {"penalty", "k", "n", "lambda_rule", "delta", "epsilon_target", "optimizer"},
               where);
    TikhonovConfig cfg;
    cfg.penalty = penalty_kind_from_string(require<std::string>(j, "penalty", where));
    cfg.k = require<int>(j, "k", where);
    cfg.n = require<int>(j, "n", where);
    cfg.lambda_rule = parse_lambda_rule(
        j.contains("lambda_rule") ? j.at("lambda_rule") : json{{"kind", "explicit"}, {"value", 1e-6}},
        where + ".lambda_rule");
    if (j.contains("delta") && !j.at("delta").is_null())
        cfg.delta = require<double>(j, "delta", where);
    cfg.epsilon_target = get_or<double>(j, "epsilon_target", cfg.epsilon_target, where);
    cfg.optimizer = parse_optimizer(j.contains("optimizer") ? j.at("optimizer") : json::object(),
                                    default_seed, where + ".optimizer");
    return cfg;
}

inline json to_json(const TikhonovConfig& cfg) {
    json j;
    j["penalty"] = to_string(cfg.penalty);
    j["k"] = cfg.k;
    j["n"] = cfg.n;
    j["lambda_rule"] = to_json(cfg.lambda_rule);
    if (cfg.delta) j["delta"] = *cfg.delta;
    j["epsilon_target"] = cfg.epsilon_target;
    j["optimizer"] = to_json(cfg.optimizer);
    return j;
}

// -- sweep -----------------------------------------------------------------------

inline SweepConfig parse_sweep(const json& j, const std::string& where) {
    check_keys(j,
               {"seed", "axis", "values", "m_max", "d", "delta", "n_train", "noise", "target",
                "tikhonov", "evaluation", "jobs"},
               where);
    SweepConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", 1, where);
    cfg.axis = sweep_axis_from_string(require<std::string>(j, "axis", where));
    cfg.values = require<std::vector<double>>(j, "values", where);
    cfg.m_max = get_or<int>(j, "m_max", 1, where);
    cfg.d = get_or<int>(j, "d", 2, where);
    cfg.delta = get_or<double>(j, "delta", 1e-2, where);
    cfg.n_train = get_or<std::size_t>(j, "n_train", cfg.n_train, where);
    if (j.contains("noise")) {
        const NoiseSpec ns = parse_noise(j.at("noise"), where + ".noise");
        cfg.noise = ns.kind;  // delta comes from the axis / "delta" field
    }
    cfg.target = parse_target(require<json>(j, "target", where), where + ".target");
    cfg.tikhonov = parse_tikhonov(require<json>(j, "tikhonov", where), cfg.seed, where + ".tikhonov");
    if (j.contains("evaluation")) {
        const json& ej = j.at("evaluation");
        check_keys(ej, {"q"}, where + ".evaluation");
        cfg.eval_q = get_or<int>(ej, "q", 0, where);
    }
    cfg.jobs = get_or<unsigned>(j, "jobs", 1, where);
    return cfg;
}

inline json to_json(const SweepConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["axis"] = to_string(cfg.axis);
    j["values"] = cfg.values;
    j["m_max"] = cfg.m_max;
    j["d"] = cfg.d;
    j["delta"] = cfg.delta;
    j["n_train"] = cfg.n_train;
    j["noise"] = json{{"delta", cfg.delta}, {"kind", to_string(cfg.noise)}};
    j["target"] = to_json(cfg.target);
    j["tikhonov"] = to_json(cfg.tikhonov);
    if (cfg.eval_q > 0) j["evaluation"] = json{{"q", cfg.eval_q}};
    j["jobs"] = cfg.jobs;
    return j;
}

// -- mc-rate ----------------------------------------------------------------------

struct McConfig {
    std::uint64_t seed = 1;
    int k = 2;
    int d = 2;
    McMode mode = McMode::Variation;
    int atom_count = 10;
    double atom_scale = 1.0;
    std::vector<McAtom> explicit_atoms;
    std::vector<std::size_t> n_grid{16, 32, 64, 128, 256, 512, 1024};
    int trials = 200;
    QuadratureSpec quadrature;
};

inline McConfig parse_mc(const json& j, const std::string& where) {
    check_keys(j, {"seed", "k", "d", "mode", "atoms", "n_grid", "trials", "quadrature"}, where);
    McConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", 1, where);
    cfg.k = get_or<int>(j, "k", 2, where);
    cfg.d = get_or<int>(j, "d", 2, where);
    cfg.mode = mc_mode_from_string(get_or<std::string>(j, "mode", "variation", where));
    if (j.contains("atoms")) {
        const json& aj = j.at("atoms");
        check_keys(aj, {"count", "scale", "explicit"}, where + ".atoms");
        cfg.atom_count = get_or<int>(aj, "count", cfg.atom_count, where);
        cfg.atom_scale = get_or<double>(aj, "scale", cfg.atom_scale, where);
        if (aj.contains("explicit")) {
            for (const auto& ej : aj.at("explicit")) {
                check_keys(ej, {"weight", "a", "w", "b"}, where + ".atoms.explicit[]");
                McAtom atom;
                atom.weight = require<double>(ej, "weight", where);
                atom.a = get_or<double>(ej, "a", 1.0, where);
                atom.w = require<std::vector<double>>(ej, "w", where);
                atom.b = require<double>(ej, "b", where);
                cfg.explicit_atoms.push_back(std::move(atom));
            }
        }
    }
    if (j.contains("n_grid")) cfg.n_grid = require<std::vector<std::size_t>>(j, "n_grid", where);
    cfg.trials = get_or<int>(j, "trials", cfg.trials, where);
    if (j.contains("quadrature"))
        cfg.quadrature = parse_quadrature(j.at("quadrature"), where + ".quadrature");
    return cfg;
}

inline json to_json(const McConfig& cfg) {
    json atoms{{"count", cfg.atom_count}, {"scale", cfg.atom_scale}};
    if (!cfg.explicit_atoms.empty()) {
        json arr = json::array();
        for (const auto& a : cfg.explicit_atoms)
            arr.push_back({{"weight", a.weight}, {"a", a.a}, {"w", a.w}, {"b", a.b}});
        atoms["explicit"] = std::move(arr);
    }
    return json{{"seed", cfg.seed},     {"k", cfg.k},
                {"d", cfg.d},           {"mode", to_string(cfg.mode)},
                {"atoms", atoms},       {"n_grid", cfg.n_grid},
                {"trials", cfg.trials}, {"quadrature", to_json(cfg.quadrature)}};
}

/// Random dictionary-feasible atoms for the MC experiment.
inline std::vector<McAtom> make_mc_atoms(const McConfig& cfg) {
    if (!cfg.explicit_atoms.empty()) return cfg.explicit_atoms;
    Rng rng(seed_stream(cfg.seed, "mc-atoms"));
    std::vector<McAtom> atoms;
    const double bmax = dictionary_bias_bound(cfg.d);
    if (cfg.mode == McMode::Variation) {
        for (int i = 0; i < cfg.atom_count; ++i) {
            McAtom a;
            a.weight = cfg.atom_scale * rng.uniform(-1.0, 1.0);
            a.w = rng.unit_sphere(cfg.d);
            a.b = rng.uniform(-bmax, bmax);
            atoms.push_back(std::move(a));
        }
    } else {
        double total = 0.0;
        for (int i = 0; i < cfg.atom_count; ++i) {
            McAtom a;
            a.weight = rng.uniform(0.05, 1.0);
            total += a.weight;
            a.a = cfg.atom_scale * rng.uniform(-1.0, 1.0);
            a.w = rng.unit_sphere(cfg.d);
            a.b = rng.uniform(-bmax, bmax);
            atoms.push_back(std::move(a));
        }
        for (auto& a : atoms) a.weight /= total;
        atoms.back().weight = 1.0;
        double partial = 0.0;
        for (std::size_t i = 0; i + 1 < atoms.size(); ++i) partial += atoms[i].weight;
        atoms.back().weight = 1.0 - partial;
    }
    return atoms;
}

// -- check ------------------------------------------------------------------------

struct CheckConfig {
    std::uint64_t seed = 1;
    int k = 2;
    std::vector<int> d_list{2, 3};
    std::vector<int> m_list{0, 1, 2};
    int embedding_nets = 200;
    int dictionary_samples = 1000;
    std::vector<int> norm_relation_d_list{2, 4, 8};
    int norm_relation_nets = 1000;
    int interpolation_nets = 500;
    int interpolation_m = 1;
    int md_d_max = 30;
    double md_band_lo = 0.05;
    double md_band_hi = 20.0;
};

inline CheckConfig parse_check(const json& j, const std::string& where) {
    check_keys(j,
               {"seed", "k", "d_list", "m_list", "embedding_nets", "dictionary_samples",
                "norm_relation_d_list", "norm_relation_nets", "interpolation_nets",
                "interpolation_m", "md_d_max", "md_band"},
               where);
    CheckConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", 1, where);
    cfg.k = get_or<int>(j, "k", cfg.k, where);
    cfg.d_list = get_or<std::vector<int>>(j, "d_list", cfg.d_list, where);
    cfg.m_list = get_or<std::vector<int>>(j, "m_list", cfg.m_list, where);
    cfg.embedding_nets = get_or<int>(j, "embedding_nets", cfg.embedding_nets, where);
    cfg.dictionary_samples = get_or<int>(j, "dictionary_samples", cfg.dictionary_samples, where);
    cfg.norm_relation_d_list =
        get_or<std::vector<int>>(j, "norm_relation_d_list", cfg.norm_relation_d_list, where);
    cfg.norm_relation_nets = get_or<int>(j, "norm_relation_nets", cfg.norm_relation_nets, where);
    cfg.interpolation_nets = get_or<int>(j, "interpolation_nets", cfg.interpolation_nets, where);
    cfg.interpolation_m = get_or<int>(j, "interpolation_m", cfg.interpolation_m, where);
    cfg.md_d_max = get_or<int>(j, "md_d_max", cfg.md_d_max, where);
    if (j.contains("md_band")) {
        const auto band = require<std::vector<double>>(j, "md_band", where);
        if (band.size() != 2) throw ConfigError(where + ".md_band: expected [lo, hi]");
        cfg.md_band_lo = band[0];
        cfg.md_band_hi = band[1];
    }
    return cfg;
}

inline json to_json(const CheckConfig& cfg) {
    return json{{"seed", cfg.seed},
                {"k", cfg.k},
                {"d_list", cfg.d_list},
                {"m_list", cfg.m_list},
                {"embedding_nets", cfg.embedding_nets},
                {"dictionary_samples", cfg.dictionary_samples},
                {"norm_relation_d_list", cfg.norm_relation_d_list},
                {"norm_relation_nets", cfg.norm_relation_nets},
                {"interpolation_nets", cfg.interpolation_nets},
                {"interpolation_m", cfg.interpolation_m},
                {"md_d_max", cfg.md_d_max},
                {"md_band", std::vector<double>{cfg.md_band_lo, cfg.md_band_hi}}};
}

// -- report serialization ------------------------------------------------------------

inline json fit_report_to_json(const FitReport& report) {
    json j;
    j["format_version"] = kFormatVersion;
    j["type"] = "fit_report";
    j["objective"] = report.objective;
    j["fidelity"] = report.fidelity;
    j["penalty"] = report.penalty;
    j["lambda"] = report.lambda;
    j["iterations"] = report.iterations;
    j["restart_index"] = report.restart_index;
    j["epsilon_achieved"] = report.epsilon_achieved;
    j["reinit_events"] = report.reinit_events;
    j["wall_time_sec"] = report.wall_time_sec;
    j["model"] = to_json(report.model);
    return j;
}

inline json rate_report_to_json(const RateReport& report) {
    json j;
    j["format_version"] = kFormatVersion;
    j["type"] = "rate_report";
    j["axis"] = to_string(report.axis);
    j["k"] = report.k;
    j["m_max"] = report.m_max;
    j["slopes"] = report.slopes;
    j["intercepts"] = report.intercepts;
    j["theory_exponents"] = report.theory_exponents;
    j["bound_ratio_max"] = report.bound_ratio_max;
    j["bound_ratio_min"] = report.bound_ratio_min;
    json pts = json::array();
    for (const auto& pt : report.points) {
        json pj;
        pj["axis_value"] = pt.axis_value;
        pj["delta"] = pt.delta;
        pj["n_model"] = pt.n_model;
        pj["d"] = pt.d;
        pj["lambda"] = pt.lambda;
        pj["norm_hint"] = pt.norm_hint;
        pj["errors"] = pt.errors;
        pj["bars"] = pt.bars;
        pj["envelope"] = pt.envelope;
        pj["fidelity"] = pt.fidelity;
        pj["penalty"] = pt.penalty;
        pj["objective"] = pt.objective;
        pj["epsilon_achieved"] = pt.epsilon_achieved;
        pj["iterations"] = pt.iterations;
        pj["wall_time_sec"] = pt.wall_time_sec;
        pj["max_sphere_defect"] = pt.max_sphere_defect;
        pj["max_bias_excess"] = pt.max_bias_excess;
        pj["failed"] = pt.failed;
        if (pt.failed) pj["failure"] = pt.failure;
        pts.push_back(std::move(pj));
    }
    j["points"] = std::move(pts);
    return j;
}

inline std::string rate_report_to_csv(const RateReport& report) {
    std::string out = "axis,axis_value,d,n_model,delta,lambda,m,error,bar,envelope,bound_ratio,"
                      "fidelity,penalty,epsilon_achieved,failed\n";
    char buf[512];
    for (const auto& pt : report.points) {
        for (int m = 0; m <= report.m_max; ++m) {
            const double err = pt.failed ? 0.0 : pt.errors[static_cast<std::size_t>(m)];
            const double bar = pt.failed ? 0.0 : pt.bars[static_cast<std::size_t>(m)];
            const double env = pt.failed ? 0.0 : pt.envelope[static_cast<std::size_t>(m)];
            std::snprintf(buf, sizeof(buf),
                          "%s,%.17g,%d,%d,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                          to_string(report.axis), pt.axis_value, pt.d, pt.n_model, pt.delta,
                          pt.lambda, m, err, bar, env, env > 0.0 ? err / env : 0.0, pt.fidelity,
                          pt.penalty, pt.epsilon_achieved, pt.failed ? 1 : 0);
            out += buf;
        }
    }
    return out;
}

inline json mc_record_to_json(const McRateRecord& rec) {
    json j;
    j["format_version"] = kFormatVersion;
    j["type"] = "mc_rate_report";
    j["n_grid"] = rec.n_grid;
    j["mean_sq_error"] = rec.mean_sq_error;
    j["std_error"] = rec.std_error;
    j["rms_error"] = rec.rms_error;
    j["envelope"] = rec.envelope;
    j["slope"] = rec.slope;
    j["intercept"] = rec.intercept;
    j["measure_norm"] = rec.measure_norm;
    j["sup_atom_norm"] = rec.sup_atom_norm;
    return j;
}

inline std::string mc_record_to_csv(const McRateRecord& rec) {
    std::string out = "n,mean_sq_error,std_error,rms_error,envelope\n";
    char buf[256];
    for (std::size_t i = 0; i < rec.n_grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", rec.n_grid[i],
                      rec.mean_sq_error[i], rec.std_error[i], rec.rms_error[i], rec.envelope[i]);
        out += buf;
    }
    return out;
}

/// Strip volatile wall-time fields so replayed reports can be compared
/// bit-for-bit.
inline json strip_wall_time(json j) {
    if (j.is_object()) {
        j.erase("wall_time_sec");
        for (auto& [key, value] : j.items()) value = strip_wall_time(value);
    } else if (j.is_array()) {
        for (auto& value : j) value = strip_wall_time(value);
    }
    return j;
}

/// Accept either a plain config document or a report embedding one under
/// "config" (that is how replay works).
inline json unwrap_config(const json& j) {
    if (j.is_object() && j.contains("config") && j.contains("type")) return j.at("config");
    return j;
}

}  // namespace cfg
}  // namespace repufit
