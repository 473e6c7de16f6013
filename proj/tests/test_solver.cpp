#include <catch2/catch_amalgamated.hpp>

#include "repufit/analysis.hpp"
#include "repufit/datagen.hpp"
#include "repufit/solver.hpp"

using namespace repufit;

namespace {

NoisyDataset dataset_for(const TargetFunction& target, std::size_t n_points, double delta,
                         std::uint64_t seed) {
    const auto rule = build_lattice(n_points, target.d(), seed_stream(seed, "train"));
    return make_noisy_dataset(target, rule, delta, NoiseKind::L2CalibratedField,
                              seed_stream(seed, "noise"));
}

}  // namespace

TEST_CASE("select_lambda hand values") {
    // barron: delta=0.01, C(k)=1 override, n=100, H=2 -> sqrt(lambda) = 0.105
    CHECK(select_lambda(LambdaRuleKind::BarronRule, 0.01, 100, 2.0, 2, 2, 1.0) ==
          Catch::Approx(0.011025).epsilon(1e-12));
    // variation: delta=0, k=1, d=4, n=64, H=1 -> lambda = 0.25
    CHECK(select_lambda(LambdaRuleKind::VariationRule, 0.0, 64, 1.0, 1, 4) ==
          Catch::Approx(0.25).epsilon(1e-12));
    // radon_bv: delta=0.1, eps=0.04, H=1 -> lambda = 0.09
    CHECK(select_lambda(LambdaRuleKind::RadonBVRule, 0.1, 10, 1.0, 2, 2, 0.0, 0.04) ==
          Catch::Approx(0.09).epsilon(1e-12));
    CHECK_THROWS_AS(select_lambda(LambdaRuleKind::BarronRule, 0.01, 100, 0.0, 2, 2),
                    ConfigError);
    CHECK(default_barron_ck(2) == 12.0);
}

TEST_CASE("objective examples") {
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 2;
    spec.n_ref = 3;
    const auto target = make_target(spec, 5);
    const auto ds = dataset_for(target, 1u << 6, 0.0, 21);

    // the target network itself, delta = 0, lambda = 0 -> objective 0
    RepuNetwork net = *target.reference_network();
    CHECK(objective(net, ds, PenaltyKind::Variation, 0.0) == Catch::Approx(0.0).margin(1e-20));

    // zero network against values == 1 -> objective 1 (unit measure)
    RepuNetwork zero;
    zero.k = 2;
    zero.d = 2;
    zero.scaling = Scaling::Sum;
    NoisyDataset ones = ds;
    std::fill(ones.values.begin(), ones.values.end(), 1.0);
    CHECK(objective(zero, ones, PenaltyKind::Variation, 123.0) ==
          Catch::Approx(1.0).epsilon(1e-14));

    // doubling lambda adds exactly lambda * penalty^2
    const double lam = 0.37;
    const double p = penalty_value(net, PenaltyKind::Variation);
    const double j1 = objective(net, ds, PenaltyKind::Variation, lam);
    const double j2 = objective(net, ds, PenaltyKind::Variation, 2.0 * lam);
    CHECK(j2 - j1 == Catch::Approx(lam * p * p).epsilon(1e-12));
}

TEST_CASE("objective gradient matches finite differences") {
    Rng rng(71);
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 2;
    spec.n_ref = 2;
    const auto target = make_target(spec, 5);
    const auto ds = dataset_for(target, 1u << 7, 0.01, 22);
    const double h = 1e-5;

    for (PenaltyKind kind :
         {PenaltyKind::ExtendedBarron, PenaltyKind::Variation, PenaltyKind::RadonBV}) {
        int checked = 0;
        while (checked < 5) {
            auto net = random_feasible_network(kind, 2, 2, 3, rng, 0.7);
            bool smooth = true;
            for (const auto& nr : net.neurons) {
                if (std::abs(nr.a) < 5e-2 || std::abs(nr.b) < 5e-2) smooth = false;
                for (double c : nr.w)
                    if (std::abs(c) < 5e-2) smooth = false;
            }
            if (!smooth) continue;
            ++checked;
            const double lam = 1e-2;
            const ParamLayout lay = layout_of(net);
            std::vector<double> grad(lay.size(), 0.0);
            std::vector<double> z_buf;
            const double fid = detail::fidelity_and_gradient(net, ds, lay, grad, z_buf);
            (void)fid;
            const double pen = penalty_value(net, kind);
            const auto psub = penalty_subgradient(net, kind);
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += lam * 2.0 * pen * psub[j];

            auto raw_objective = [&](const RepuNetwork& nn) {
                double acc = 0.0;
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    const double r = nn.value(ds.point(i)) - ds.values[i];
                    acc += ds.weights[i] * r * r;
                }
                double p = 0.0;  // bypass feasibility for perturbed points
                if (kind == PenaltyKind::ExtendedBarron) {
                    for (const auto& nr : nn.neurons)
                        p += std::abs(nr.a) *
                             detail::int_pow(detail::l1_norm(nr.w) + std::abs(nr.b), nn.k);
                    p *= nn.scale();
                } else {
                    for (const auto& nr : nn.neurons) p += std::abs(nr.a);
                }
                return acc + lam * p * p;
            };

            auto theta = pack_parameters(net);
            for (std::size_t j = 0; j < theta.size(); ++j) {
                auto tp = theta, tm = theta;
                tp[j] += h;
                tm[j] -= h;
                auto np = net, nm = net;
                apply_parameters(np, tp);
                apply_parameters(nm, tm);
                const double fd = (raw_objective(np) - raw_objective(nm)) / (2.0 * h);
                CHECK(grad[j] == Catch::Approx(fd).epsilon(1e-4).margin(1e-6));
            }
        }
    }
}

TEST_CASE("fit recovers a one-neuron target at delta zero") {
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 1;
    spec.n_ref = 1;
    spec.a_scale = 0.8;
    const auto target = make_target(spec, 12);
    const auto ds = dataset_for(target, 1u << 8, 0.0, 23);

    TikhonovConfig cfg;
    cfg.penalty = PenaltyKind::ExtendedBarron;
    cfg.k = 2;
    cfg.n = 1;
    cfg.lambda_rule.kind = LambdaRuleKind::ExplicitValue;
    cfg.lambda_rule.value = 1e-8;
    cfg.optimizer.step_init = 0.2;
    cfg.optimizer.momentum = 0.9;
    cfg.optimizer.max_iters = 20000;
    cfg.optimizer.restarts = 8;
    cfg.optimizer.seed = 3;

    const auto report = fit(ds, cfg);
    CHECK(report.iterations <= 50000);
    CHECK(report.fidelity <= 1e-4);
    // objective decomposition identity
    CHECK(report.objective ==
          Catch::Approx(report.fidelity * report.fidelity +
                        report.lambda * report.penalty * report.penalty)
              .epsilon(1e-10));
}

TEST_CASE("huge lambda drives the penalty to zero") {
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 1;
    spec.n_ref = 2;
    const auto target = make_target(spec, 14);
    const auto ds = dataset_for(target, 1u << 6, 0.0, 29);

    TikhonovConfig cfg;
    cfg.penalty = PenaltyKind::ExtendedBarron;
    cfg.k = 2;
    cfg.n = 4;
    cfg.lambda_rule.kind = LambdaRuleKind::ExplicitValue;
    cfg.lambda_rule.value = 1e12;
    cfg.optimizer.step_init = 2e-13;
    cfg.optimizer.max_iters = 20000;
    cfg.optimizer.restarts = 2;
    cfg.optimizer.seed = 5;

    const auto report = fit(ds, cfg);
    CHECK(report.penalty <= 1e-4);
}

TEST_CASE("best-so-far objective trace is non-increasing") {
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 2;
    spec.n_ref = 3;
    const auto target = make_target(spec, 31);
    const auto ds = dataset_for(target, 1u << 7, 0.01, 37);

    TikhonovConfig cfg;
    cfg.penalty = PenaltyKind::Variation;
    cfg.k = 2;
    cfg.n = 8;
    cfg.lambda_rule.kind = LambdaRuleKind::ExplicitValue;
    cfg.lambda_rule.value = 1e-4;
    cfg.optimizer.step_init = 0.02;
    cfg.optimizer.max_iters = 500;
    cfg.optimizer.restarts = 1;
    cfg.optimizer.record_trace = true;

    const auto report = fit(ds, cfg);
    REQUIRE(!report.best_trace.empty());
    for (std::size_t i = 1; i < report.best_trace.size(); ++i)
        CHECK(report.best_trace[i] <= report.best_trace[i - 1]);
}

TEST_CASE("fit is deterministic and feasible under constraints") {
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 2;
    spec.n_ref = 3;
    const auto target = make_target(spec, 43);
    const auto ds = dataset_for(target, 1u << 7, 0.02, 44);

    TikhonovConfig cfg;
    cfg.penalty = PenaltyKind::Variation;
    cfg.k = 2;
    cfg.n = 12;
    cfg.lambda_rule.kind = LambdaRuleKind::ExplicitValue;
    cfg.lambda_rule.value = 1e-3;
    cfg.optimizer.step_init = 0.02;
    cfg.optimizer.max_iters = 800;
    cfg.optimizer.restarts = 2;
    cfg.optimizer.seed = 11;

    const auto r1 = fit(ds, cfg);
    const auto r2 = fit(ds, cfg);
    CHECK(r1.objective == r2.objective);
    CHECK(r1.restart_index == r2.restart_index);
    CHECK(pack_parameters(r1.model) == pack_parameters(r2.model));

    for (const auto& nr : r1.model.neurons) {
        double norm = 0.0;
        for (double c : nr.w) norm += c * c;
        CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-9);
        CHECK(std::abs(nr.b) <= std::sqrt(2.0) + 1e-9);
    }
}

TEST_CASE("radon_bv fit reports an epsilon audit and keeps the tail") {
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 2;
    spec.n_ref = 2;
    const auto target = make_target(spec, 47);
    const auto ds = dataset_for(target, 1u << 7, 0.01, 48);

    TikhonovConfig cfg;
    cfg.penalty = PenaltyKind::RadonBV;
    cfg.k = 2;
    cfg.n = 8;
    cfg.lambda_rule.kind = LambdaRuleKind::RadonBVRule;
    cfg.lambda_rule.norm_hint = target.bounds().rbv_upper;
    cfg.epsilon_target = 1e-2;
    cfg.optimizer.step_init = 0.02;
    cfg.optimizer.max_iters = 400;
    cfg.optimizer.restarts = 2;
    cfg.optimizer.reference_run_multiplier = 3;

    const auto report = fit(ds, cfg);
    REQUIRE(report.model.poly_tail.has_value());
    CHECK(report.epsilon_achieved >= 0.0);
    CHECK(report.lambda ==
          Catch::Approx(select_lambda(LambdaRuleKind::RadonBVRule, ds.delta_nominal, 8,
                                      *target.bounds().rbv_upper, 2, 2, 0.0, 1e-2)));
}

TEST_CASE("lambda grid search picks by discrepancy") {
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 1;
    spec.n_ref = 2;
    const auto target = make_target(spec, 53);
    const auto ds = dataset_for(target, 1u << 7, 0.05, 54);

    TikhonovConfig cfg;
    cfg.penalty = PenaltyKind::Variation;
    cfg.k = 2;
    cfg.n = 8;
    cfg.lambda_rule.kind = LambdaRuleKind::GridSearch;
    cfg.lambda_rule.grid = {1e-6, 1e-3, 1e-1};
    cfg.optimizer.step_init = 0.02;
    cfg.optimizer.max_iters = 400;
    cfg.optimizer.restarts = 1;

    const auto report = fit(ds, cfg);
    CHECK((report.lambda == 1e-6 || report.lambda == 1e-3 || report.lambda == 1e-1));
}

TEST_CASE("differentiate table") {
    TargetSpec spec;
    spec.kind = TargetKind::ReferenceNetwork;
    spec.k = 2;
    spec.d = 2;
    spec.n_ref = 3;
    const auto target = make_target(spec, 59);
    const RepuNetwork net = *target.reference_network();

    const std::vector<std::vector<double>> points{{0.2, 0.3}, {0.7, 0.9}};
    const std::vector<MultiIndex> alphas{MultiIndex({0, 0}), MultiIndex({1, 0}),
                                         MultiIndex({0, 2})};
    const auto table = differentiate(net, points, alphas);
    REQUIRE(table.size() == 2);
    REQUIRE(table[0].size() == 3);
    for (std::size_t i = 0; i < points.size(); ++i)
        CHECK(table[i][0] == net.value(points[i]));

    CHECK_THROWS_AS(differentiate(net, points, {MultiIndex({2, 1})}), UnsupportedOrderError);
}
