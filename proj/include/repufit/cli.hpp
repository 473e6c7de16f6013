#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "repufit/analysis.hpp"
#include "repufit/config.hpp"
#include "repufit/datagen.hpp"
#include "repufit/model_io.hpp"
#include "repufit/solver.hpp"

namespace repufit {
namespace cli {

using nlohmann::json;

inline json load_config_file(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    return cfg::unwrap_config(j);
}

/// "0,0;1,0;0,1" -> list of multi-indices.
inline std::vector<MultiIndex> parse_alphas(const std::string& text, int d) {
    std::vector<MultiIndex> alphas;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        if (group.empty()) continue;
        std::vector<int> orders;
        std::stringstream parts(group);
        std::string part;
        while (std::getline(parts, part, ',')) orders.push_back(std::stoi(part));
        if (static_cast<int>(orders.size()) != d)
            throw ConfigError("--alpha: index '" + group + "' has " +
                              std::to_string(orders.size()) + " entries, expected d=" +
                              std::to_string(d));
        alphas.emplace_back(std::move(orders));
    }
    if (alphas.empty()) throw ConfigError("--alpha: no multi-indices given");
    return alphas;
}

/// Points CSV with header x1,...,xd (extra columns ignored).
inline std::vector<std::vector<double>> load_points_csv(const std::string& path, int d) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw ParseError("points file " + path + ": empty");
    std::vector<int> columns;  // column index of x1..xd
    {
        std::stringstream header(line);
        std::string name;
        int col = 0;
        std::vector<std::string> names;
        while (std::getline(header, name, ',')) names.push_back(name), ++col;
        columns.assign(static_cast<std::size_t>(d), -1);
        for (int j = 0; j < d; ++j) {
            const std::string want = "x" + std::to_string(j + 1);
            for (std::size_t c = 0; c < names.size(); ++c)
                if (names[c] == want) columns[static_cast<std::size_t>(j)] = static_cast<int>(c);
            if (columns[static_cast<std::size_t>(j)] < 0)
                throw ParseError("points file " + path + ": missing column " + want);
        }
    }
    std::vector<std::vector<double>> points;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        std::vector<double> p(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            const int c = columns[static_cast<std::size_t>(j)];
            if (c >= static_cast<int>(cells.size()))
                throw ParseError("points file " + path + ": short row at line " +
                                 std::to_string(line_no));
            try {
                p[static_cast<std::size_t>(j)] = std::stod(cells[static_cast<std::size_t>(c)]);
            } catch (const std::exception&) {
                throw ParseError("points file " + path + ": bad number at line " +
                                 std::to_string(line_no));
            }
        }
        points.push_back(std::move(p));
    }
    return points;
}

// -- subcommand bodies ---------------------------------------------------------

inline int cmd_datagen(const std::string& config_path, const std::string& out_path,
                       const std::string& csv_path) {
    const json j = load_config_file(config_path);
    cfg::check_keys(j, {"seed", "target", "training", "noise"}, "datagen");
    const std::uint64_t seed = cfg::get_or<std::uint64_t>(j, "seed", 1, "datagen");
    const TargetSpec tspec = cfg::parse_target(cfg::require<json>(j, "target", "datagen"),
                                               "datagen.target");
    cfg::QuadratureSpec qspec;
    if (j.contains("training")) qspec = cfg::parse_quadrature(j.at("training"), "datagen.training");
    else qspec.kind = "lattice";
    const cfg::NoiseSpec noise = j.contains("noise")
                                     ? cfg::parse_noise(j.at("noise"), "datagen.noise")
                                     : cfg::NoiseSpec{};
    const TargetFunction target = make_target(tspec, seed_stream(seed, "target"));
    const QuadratureRule rule = qspec.build(tspec.d, seed_stream(seed, "train"));
    const NoisyDataset ds =
        make_noisy_dataset(target, rule, noise.delta, noise.kind, seed_stream(seed, "noise"));
    save_dataset(ds, out_path);
    if (!csv_path.empty()) write_text_atomic(csv_path, dataset_to_csv(ds));
    std::printf("datagen: %zu points, d=%d, delta=%.6g (realized %.6g) -> %s\n", ds.size(), ds.d,
                ds.delta_nominal, ds.delta_realized, out_path.c_str());
    return 0;
}

inline int cmd_fit(const std::string& data_path, const std::string& config_path,
                   const std::string& model_path, const std::string& report_path) {
    const json j = load_config_file(config_path);
    cfg::check_keys(j, {"seed", "tikhonov"}, "fit");
    const std::uint64_t seed = cfg::get_or<std::uint64_t>(j, "seed", 1, "fit");
    TikhonovConfig tik =
        cfg::parse_tikhonov(cfg::require<json>(j, "tikhonov", "fit"), seed, "fit.tikhonov");
    const NoisyDataset ds = load_dataset(data_path);
    const FitReport report = fit(ds, tik);
    if (!model_path.empty()) save_model(report.model, model_path);
    if (!report_path.empty()) {
        json rj = cfg::fit_report_to_json(report);
        json resolved;
        resolved["seed"] = seed;
        resolved["tikhonov"] = cfg::to_json(tik);
        rj["config"] = std::move(resolved);
        rj["data_file"] = data_path;
        write_text_atomic(report_path, rj.dump(2) + "\n");
    }
    std::printf("fit: objective=%.8g fidelity=%.8g penalty=%.8g lambda=%.8g restart=%d iters=%zu\n",
                report.objective, report.fidelity, report.penalty, report.lambda,
                report.restart_index, report.iterations);
    return 0;
}

inline int cmd_differentiate(const std::string& model_path, const std::string& points_path,
                             const std::string& alpha_text, const std::string& out_path) {
    const RepuNetwork net = load_model(model_path);
    const auto alphas = parse_alphas(alpha_text, net.d);
    const auto points = load_points_csv(points_path, net.d);
    const auto table = differentiate(net, points, alphas);
    std::string out;
    for (int jx = 0; jx < net.d; ++jx) out += "x" + std::to_string(jx + 1) + ",";
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        out += "alpha";
        for (int o : alphas[a].orders) out += "_" + std::to_string(o);
        out += (a + 1 < alphas.size()) ? "," : "\n";
    }
    char buf[64];
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (int jx = 0; jx < net.d; ++jx) {
            std::snprintf(buf, sizeof(buf), "%.17g,", points[i][static_cast<std::size_t>(jx)]);
            out += buf;
        }
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            std::snprintf(buf, sizeof(buf), a + 1 < alphas.size() ? "%.17g," : "%.17g\n",
                          table[i][a]);
            out += buf;
        }
    }
    if (!out_path.empty()) write_text_atomic(out_path, out);
    else std::fputs(out.c_str(), stdout);
    return 0;
}

inline int cmd_constants(int d, int k, int m, const std::string& out_path) {
    if (m < 0) m = k;
    std::string out = "d,k,m,barron_constant,variation_constant,md_probe,md_probe_x_dk2\n";
    char buf[256];
    double probe = std::numeric_limits<double>::quiet_NaN();
    if (d >= 2) probe = md_lower_bound_probe(d, k).probe;
    const double dk2 = std::pow(static_cast<double>(d), 0.5 * static_cast<double>(k));
    for (int mm = 0; mm <= m; ++mm) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%.17g,%.17g\n", d, k, mm,
                      barron_embedding_constant(d, mm, k), variation_embedding_constant(d, mm, k),
                      probe, probe * dk2);
        out += buf;
    }
    if (!out_path.empty()) write_text_atomic(out_path, out);
    std::fputs(out.c_str(), stdout);
    return 0;
}

inline int cmd_mc_rate(const std::string& config_path, const std::string& out_path,
                       const std::string& csv_path) {
    const json j = load_config_file(config_path);
    const cfg::McConfig mc = cfg::parse_mc(j, "mc_rate");
    const auto atoms = cfg::make_mc_atoms(mc);
    const QuadratureRule rule = mc.quadrature.build(mc.d, seed_stream(mc.seed, "shift"));
    const McRateRecord rec =
        mc_construction(atoms, mc.k, mc.n_grid, mc.trials, rule, mc.mode, mc.seed);
    json rj = cfg::mc_record_to_json(rec);
    rj["config"] = cfg::to_json(mc);
    if (!out_path.empty()) write_text_atomic(out_path, rj.dump(2) + "\n");
    if (!csv_path.empty()) write_text_atomic(csv_path, cfg::mc_record_to_csv(rec));
    std::printf("mc-rate: slope=%.4f (theory -0.5), ||mu||=%.6g, sup||g||=%.6g\n", rec.slope,
                rec.measure_norm, rec.sup_atom_norm);
    bool below = true;
    for (std::size_t i = 0; i < rec.n_grid.size(); ++i)
        if (rec.mean_sq_error[i] > rec.envelope[i] + 3.0 * rec.std_error[i]) below = false;
    std::printf("mc-rate: per-n mean-square error %s the theoretical ceiling\n",
                below ? "stays below" : "EXCEEDS");
    return below ? 0 : 2;
}

inline int cmd_rates(const std::string& config_path, const std::string& out_path,
                     const std::string& csv_path, unsigned jobs) {
    const json j = load_config_file(config_path);
    SweepConfig sweep = cfg::parse_sweep(j, "rates");
    if (jobs > 0) sweep.jobs = jobs;
    const RateReport report = rate_sweep(sweep);
    json rj = cfg::rate_report_to_json(report);
    rj["config"] = cfg::to_json(sweep);
    if (!out_path.empty()) write_text_atomic(out_path, rj.dump(2) + "\n");
    if (!csv_path.empty()) write_text_atomic(csv_path, cfg::rate_report_to_csv(report));
    for (int m = 0; m <= report.m_max; ++m)
        std::printf("rates: m=%d slope=%.4f theory_exponent=%.4f bound_ratio=[%.4g, %.4g]\n", m,
                    report.slopes[static_cast<std::size_t>(m)],
                    report.theory_exponents[static_cast<std::size_t>(m)],
                    report.bound_ratio_min[static_cast<std::size_t>(m)],
                    report.bound_ratio_max[static_cast<std::size_t>(m)]);
    for (const auto& pt : report.points)
        if (pt.failed)
            std::fprintf(stderr, "rates: point %.6g failed: %s\n", pt.axis_value,
                         pt.failure.c_str());
    return 0;
}

inline int cmd_check(const std::string& config_path, const std::string& out_path,
                     const std::string& csv_path) {
    cfg::CheckConfig cc;
    if (!config_path.empty()) cc = cfg::parse_check(load_config_file(config_path), "check");
    json summary;
    summary["format_version"] = kFormatVersion;
    summary["type"] = "check_report";
    summary["config"] = cfg::to_json(cc);
    std::string csv = "suite,case,value,bound,pass\n";
    char buf[256];
    bool all_pass = true;

    {  // embedding suite
        std::size_t violations = 0, cases = 0;
        for (int d : cc.d_list) {
            const auto rules = default_eval_rules(d, seed_stream(cc.seed, "eval"));
            for (PenaltyKind kind : {PenaltyKind::ExtendedBarron, PenaltyKind::Variation}) {
                Rng rng(seed_stream(cc.seed, "embedding",
                                    static_cast<std::uint64_t>(d) * 2 +
                                        (kind == PenaltyKind::Variation ? 1 : 0)));
                for (int i = 0; i < cc.embedding_nets; ++i) {
                    RepuNetwork net = random_feasible_network(
                        kind, cc.k, d, rng.uniform_int(1, 10), rng);
                    for (int m : cc.m_list) {
                        if (m > cc.k) continue;
                        const EmbeddingCheck chk = check_embedding(net, m, rules);
                        ++cases;
                        if (!chk.pass) ++violations;
                    }
                }
            }
        }
        summary["embedding"] = {{"cases", cases}, {"violations", violations}};
        std::snprintf(buf, sizeof(buf), "embedding,%zu cases,%zu,0,%d\n", cases, violations,
                      violations == 0);
        csv += buf;
        all_pass = all_pass && violations == 0;
        std::printf("check: embedding suite %zu cases, %zu violations\n", cases, violations);
    }

    {  // dictionary sup bound
        std::size_t violations = 0;
        for (int d : cc.d_list) {
            Rng rng(seed_stream(cc.seed, "dictionary", static_cast<std::uint64_t>(d)));
            const auto rules = default_eval_rules(d, seed_stream(cc.seed, "eval"));
            const double bound = dictionary_sup_bound(d, cc.k);
            for (int i = 0; i < cc.dictionary_samples; ++i) {
                RepuNetwork g;
                g.k = cc.k;
                g.d = d;
                g.scaling = Scaling::Sum;
                Neuron nr;
                nr.a = 1.0;
                nr.w = rng.unit_sphere(d);
                nr.b = rng.uniform(-dictionary_bias_bound(d), dictionary_bias_bound(d));
                g.neurons.push_back(std::move(nr));
                if (l2_norm(g, rules.front()) > bound * (1.0 + 1e-9)) ++violations;
            }
        }
        summary["dictionary_sup"] = {{"violations", violations}};
        std::snprintf(buf, sizeof(buf), "dictionary_sup,samples,%zu,0,%d\n", violations,
                      violations == 0);
        csv += buf;
        all_pass = all_pass && violations == 0;
        std::printf("check: dictionary sup bound, %zu violations\n", violations);
    }

    {  // penalty-level norm relation
        std::size_t violations = 0;
        double worst = 0.0;
        for (int d : cc.norm_relation_d_list) {
            Rng rng(seed_stream(cc.seed, "norm-relation", static_cast<std::uint64_t>(d)));
            std::vector<RepuNetwork> nets;
            for (int i = 0; i < cc.norm_relation_nets; ++i)
                nets.push_back(random_feasible_network(PenaltyKind::Variation, cc.k, d,
                                                       rng.uniform_int(1, 10), rng));
            const NormRelationResult res = norm_relation_check(nets, cc.k, d);
            violations += res.violations;
            worst = std::max(worst, res.max_ratio / res.bound);
        }
        summary["norm_relation"] = {{"violations", violations}, {"worst_ratio", worst}};
        std::snprintf(buf, sizeof(buf), "norm_relation,worst_ratio,%.17g,1,%d\n", worst,
                      violations == 0);
        csv += buf;
        all_pass = all_pass && violations == 0;
        std::printf("check: norm relation, %zu violations (worst ratio/bound %.4f)\n", violations,
                    worst);
    }

    {  // interpolation probe
        Rng rng(seed_stream(cc.seed, "interpolation"));
        std::vector<RepuNetwork> nets;
        const int d = cc.d_list.empty() ? 2 : cc.d_list.front();
        for (int i = 0; i < cc.interpolation_nets; ++i)
            nets.push_back(random_feasible_network(PenaltyKind::Variation, cc.k, d,
                                                   rng.uniform_int(1, 10), rng));
        const QuadratureRule rule = default_eval_rules(d, seed_stream(cc.seed, "eval")).front();
        const InterpolationResult mid = interpolation_check(nets, cc.interpolation_m, cc.k, rule);
        const InterpolationResult lo = interpolation_check(nets, 0, cc.k, rule);
        const InterpolationResult hi = interpolation_check(nets, cc.k, cc.k, rule);
        const bool pass = std::isfinite(mid.k_fit) && mid.k_fit > 0.0 &&
                          mid.k_fit < 10.0 * mid.median_ratio && lo.k_fit == 1.0 &&
                          hi.k_fit == 1.0;
        summary["interpolation"] = {{"k_fit", mid.k_fit},
                                    {"median_ratio", mid.median_ratio},
                                    {"skipped", mid.skipped},
                                    {"m0_ratio", lo.k_fit},
                                    {"mk_ratio", hi.k_fit},
                                    {"pass", pass}};
        std::snprintf(buf, sizeof(buf), "interpolation,k_fit,%.17g,%.17g,%d\n", mid.k_fit,
                      10.0 * mid.median_ratio, pass);
        csv += buf;
        all_pass = all_pass && pass;
        std::printf("check: interpolation K_fit=%.4f (median %.4f), m=0/m=k ratios %g/%g\n",
                    mid.k_fit, mid.median_ratio, lo.k_fit, hi.k_fit);
    }

    {  // M(d) probe band
        bool pass = true;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int d = 2; d <= cc.md_d_max; ++d) {
            const double scaled = md_lower_bound_probe(d, cc.k).probe *
                                  std::pow(static_cast<double>(d), 0.5 * cc.k);
            lo = std::min(lo, scaled);
            hi = std::max(hi, scaled);
            if (scaled < cc.md_band_lo || scaled > cc.md_band_hi) pass = false;
        }
        summary["md_probe"] = {{"scaled_min", lo}, {"scaled_max", hi}, {"pass", pass}};
        std::snprintf(buf, sizeof(buf), "md_probe,scaled_range,%.17g,%.17g,%d\n", lo, hi, pass);
        csv += buf;
        all_pass = all_pass && pass;
        std::printf("check: M(d) probe scaled range [%.4f, %.4f] within [%g, %g]: %s\n", lo, hi,
                    cc.md_band_lo, cc.md_band_hi, pass ? "yes" : "NO");
    }

    summary["all_pass"] = all_pass;
    if (!out_path.empty()) write_text_atomic(out_path, summary.dump(2) + "\n");
    if (!csv_path.empty()) write_text_atomic(csv_path, csv);
    std::printf("check: %s\n", all_pass ? "ALL PASS" : "FAILURES PRESENT");
    return all_pass ? 0 : 2;
}

// -- entry point ------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Tikhonov-regularized shallow RePU network fitting and numerical differentiation"};
    app.set_version_flag("--version", std::string(kVersionString) + " (format_version " +
                                          std::to_string(kFormatVersion) + ")");
    app.require_subcommand(1);

    std::string data_path, config_path, model_path, report_path, out_path, csv_path, points_path,
        alpha_text;
    int d = 2, k = 2, m = -1;
    unsigned jobs = 0;

    auto* fit_cmd = app.add_subcommand("fit", "minimize the Tikhonov functional on a dataset");
    fit_cmd->add_option("--data", data_path, "dataset file (JSON)")->required();
    fit_cmd->add_option("--config", config_path, "fit config (JSON)")->required();
    fit_cmd->add_option("--out", model_path, "output model file");
    fit_cmd->add_option("--report", report_path, "output report file");

    auto* diff_cmd = app.add_subcommand("differentiate", "evaluate model derivatives at points");
    diff_cmd->add_option("--model", model_path, "model file")->required();
    diff_cmd->add_option("--points", points_path, "points CSV with header x1,...,xd")->required();
    diff_cmd->add_option("--alpha", alpha_text, "semicolon-separated multi-indices, e.g. 0,0;1,0")
        ->required();
    diff_cmd->add_option("--out", out_path, "output CSV (stdout when omitted)");

    auto* datagen_cmd = app.add_subcommand("datagen", "generate a noisy dataset from a target");
    datagen_cmd->add_option("--config", config_path, "datagen config (JSON)")->required();
    datagen_cmd->add_option("--out", out_path, "output dataset file")->required();
    datagen_cmd->add_option("--csv", csv_path, "optional CSV export");

    auto* const_cmd = app.add_subcommand("constants", "embedding constants and the M(d) probe");
    const_cmd->add_option("--d", d, "dimension")->required();
    const_cmd->add_option("--k", k, "RePU power")->required();
    const_cmd->add_option("--m", m, "max derivative order (default k)");
    const_cmd->add_option("--out", out_path, "optional CSV output path");

    auto* mc_cmd = app.add_subcommand("mc-rate", "Monte Carlo width-convergence experiment");
    mc_cmd->add_option("--config", config_path, "mc config (JSON)")->required();
    mc_cmd->add_option("--out", out_path, "output report (JSON)");
    mc_cmd->add_option("--csv", csv_path, "output CSV");

    auto* rates_cmd = app.add_subcommand("rates", "regularization rate sweep");
    rates_cmd->add_option("--config", config_path, "sweep config (JSON)")->required();
    rates_cmd->add_option("--out", out_path, "output report (JSON)");
    rates_cmd->add_option("--csv", csv_path, "output CSV");
    rates_cmd->add_option("--jobs", jobs, "parallel sweep jobs (default: config / hardware)");

    auto* check_cmd = app.add_subcommand("check", "run the property suites");
    check_cmd->add_option("--config", config_path, "check config (JSON, optional)");
    check_cmd->add_option("--out", out_path, "output summary (JSON)");
    check_cmd->add_option("--csv", csv_path, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand(fit_cmd)) return cmd_fit(data_path, config_path, model_path, report_path);
        if (app.got_subcommand(diff_cmd))
            return cmd_differentiate(model_path, points_path, alpha_text, out_path);
        if (app.got_subcommand(datagen_cmd)) return cmd_datagen(config_path, out_path, csv_path);
        if (app.got_subcommand(const_cmd)) return cmd_constants(d, k, m, out_path);
        if (app.got_subcommand(mc_cmd)) return cmd_mc_rate(config_path, out_path, csv_path);
        if (app.got_subcommand(rates_cmd)) return cmd_rates(config_path, out_path, csv_path, jobs);
        if (app.got_subcommand(check_cmd)) return cmd_check(config_path, out_path, csv_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 1;
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    } catch (const UnsupportedOrderError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    } catch (const ConstraintError& e) {
        std::fprintf(stderr, "constraint error: %s\n", e.what());
        return 1;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "domain error: %s\n", e.what());
        return 1;
    } catch (const SizeError& e) {
        std::fprintf(stderr, "size error: %s\n", e.what());
        return 1;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "numerical failure at iteration %zu: %s\n", e.iteration, e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    }
    return 1;
}

}  // namespace cli
}  // namespace repufit
