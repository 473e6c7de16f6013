#include <catch2/catch_amalgamated.hpp>

#include "repufit/analysis.hpp"

using namespace repufit;

TEST_CASE("embedding constants exact values") {
    CHECK(barron_embedding_constant(2, 1, 2) == 3.0);
    CHECK(variation_embedding_constant(2, 0, 2) == 8.0);
    // C(d, 0, k) = 1 for every d, k
    for (int d : {1, 2, 7, 50})
        for (int k : {1, 2, 3, 4}) CHECK(barron_embedding_constant(d, 0, k) == 1.0);
    // c~(d, 0, k) = (2 sqrt(d))^k
    for (int d : {2, 3, 9})
        for (int k : {1, 2, 3}) {
            const double expected = std::pow(2.0 * std::sqrt(static_cast<double>(d)), k);
            CHECK(variation_embedding_constant(d, 0, k) ==
                  Catch::Approx(expected).epsilon(1e-13));
        }
    CHECK_THROWS_AS(barron_embedding_constant(2, 3, 2), DomainError);
    CHECK_THROWS_AS(variation_embedding_constant(2, 3, 2), DomainError);
}

TEST_CASE("constants against direct multi-index enumeration") {
    // independent oracle: enumerate alpha explicitly and sum (k!/(k-|a|)!)^2
    for (int d : {1, 2, 3, 4})
        for (int k : {1, 2, 3})
            for (int m = 0; m <= k; ++m) {
                double barron_sq = 0.0, var_sq = 0.0;
                for (const auto& alpha : multi_indices_up_to(d, m)) {
                    const double ff = falling_factorial(k, alpha.total());
                    barron_sq += ff * ff;
                    var_sq += ff * ff * detail::int_pow(4.0 * d, k - alpha.total());
                }
                CHECK(barron_embedding_constant(d, m, k) ==
                      Catch::Approx(std::sqrt(barron_sq)).epsilon(1e-13));
                CHECK(variation_embedding_constant(d, m, k) ==
                      Catch::Approx(std::sqrt(var_sq)).epsilon(1e-13));
            }
}

TEST_CASE("ratio recursions of the constant terms") {
    for (int d = 1; d <= 50; ++d)
        for (int k = 1; k <= 4; ++k)
            for (int s = 0; s < k; ++s) {
                const double cs = barron_constant_term(d, s, k);
                const double cs1 = barron_constant_term(d, s + 1, k);
                const double expected = (s + d) * (k - s) * (k - s) / static_cast<double>(s + 1);
                CHECK(cs1 / cs == Catch::Approx(expected).epsilon(1e-12));
                // bracket (k-1+d)/k <= ratio <= d k^2
                CHECK(cs1 / cs >= (k - 1.0 + d) / k - 1e-12);
                CHECK(cs1 / cs <= static_cast<double>(d) * k * k + 1e-12);

                const double is = variation_constant_term(d, s, k);
                const double is1 = variation_constant_term(d, s + 1, k);
                const double iexp = (s + d) * (k - s) * (k - s) /
                                    (4.0 * (s + 1) * static_cast<double>(d));
                CHECK(is1 / is == Catch::Approx(iexp).epsilon(1e-12));
            }
}

TEST_CASE("embedding checks pass on random feasible nets") {
    Rng rng(101);
    const auto rules = std::vector<QuadratureRule>{build_tensor_gauss_legendre(16, 2),
                                                   build_tensor_gauss_legendre(12, 2)};
    for (PenaltyKind kind : {PenaltyKind::ExtendedBarron, PenaltyKind::Variation}) {
        for (int rep = 0; rep < 25; ++rep) {
            const auto net = random_feasible_network(kind, 2, 2, rng.uniform_int(1, 8), rng);
            for (int m : {0, 1, 2}) {
                const auto chk = check_embedding(net, m, rules);
                CHECK(chk.pass);
            }
        }
    }

    // zero network: 0 <= 0
    RepuNetwork zero;
    zero.k = 2;
    zero.d = 2;
    zero.scaling = Scaling::MeanField;
    const auto chk = check_embedding(zero, 1, rules);
    CHECK(chk.pass);
    CHECK(chk.sobolev == 0.0);
    CHECK(chk.penalty == 0.0);
}

TEST_CASE("dictionary sup bound on random elements") {
    Rng rng(103);
    const auto rule = build_tensor_gauss_legendre(16, 2);
    const double bound = dictionary_sup_bound(2, 2);
    for (int rep = 0; rep < 100; ++rep) {
        RepuNetwork g;
        g.k = 2;
        g.d = 2;
        g.scaling = Scaling::Sum;
        Neuron nr;
        nr.a = 1.0;
        nr.w = rng.unit_sphere(2);
        nr.b = rng.uniform(-std::sqrt(2.0), std::sqrt(2.0));
        g.neurons.push_back(std::move(nr));
        CHECK(l2_norm(g, rule) <= bound);
    }
}

TEST_CASE("md probe values and band") {
    const auto probe = md_lower_bound_probe(2, 2);
    CHECK(probe.p_l2_analytic == Catch::Approx(1.0 / std::sqrt(80.0)).epsilon(1e-15));
    CHECK(probe.p_l2_quadrature == Catch::Approx(probe.p_l2_analytic).margin(1e-10));
    for (int d : {2, 5, 17, 30}) {
        const auto p = md_lower_bound_probe(d, 2);
        const double scaled = p.probe * static_cast<double>(d);  // d^{k/2} with k = 2
        CHECK(scaled > 0.05);
        CHECK(scaled < 20.0);
    }
    CHECK_THROWS_AS(md_lower_bound_probe(1, 2), DomainError);
}

TEST_CASE("mc single atom reproduces the target exactly") {
    const auto rule = build_tensor_gauss_legendre(8, 2);
    McAtom atom;
    atom.weight = 1.0;
    atom.a = 0.7;
    atom.w = {0.6, 0.8};
    atom.b = 0.3;
    for (McMode mode : {McMode::Barron, McMode::Variation}) {
        const auto rec = mc_construction({atom}, 2, {4, 16}, 10, rule, mode, 5);
        for (double mse : rec.mean_sq_error) CHECK(mse <= 1e-28);
    }
}

TEST_CASE("mc construction rate and envelope at small scale") {
    Rng rng(107);
    std::vector<McAtom> atoms;
    for (int i = 0; i < 6; ++i) {
        McAtom a;
        a.weight = rng.uniform(-1.0, 1.0);
        a.w = rng.unit_sphere(2);
        a.b = rng.uniform(-std::sqrt(2.0), std::sqrt(2.0));
        atoms.push_back(std::move(a));
    }
    const auto rule = build_tensor_gauss_legendre(12, 2);
    const auto rec =
        mc_construction(atoms, 2, {16, 32, 64, 128, 256}, 60, rule, McMode::Variation, 7);
    CHECK(rec.slope > -0.65);
    CHECK(rec.slope < -0.35);
    for (std::size_t i = 0; i < rec.n_grid.size(); ++i)
        CHECK(rec.mean_sq_error[i] <= rec.envelope[i] + 3.0 * rec.std_error[i]);
}

TEST_CASE("mc rejects bad atom measures") {
    const auto rule = build_tensor_gauss_legendre(4, 2);
    McAtom a;
    a.weight = 0.4;  // probabilities must sum to 1 in Barron mode
    a.w = {1.0, 0.0};
    CHECK_THROWS_AS(mc_construction({a}, 2, {4}, 5, rule, McMode::Barron, 1), ConfigError);
    a.weight = -0.2;
    CHECK_THROWS_AS(mc_construction({a}, 2, {4}, 5, rule, McMode::Barron, 1), ConfigError);
}

TEST_CASE("interpolation ratios") {
    Rng rng(109);
    std::vector<RepuNetwork> nets;
    for (int i = 0; i < 40; ++i)
        nets.push_back(random_feasible_network(PenaltyKind::Variation, 2, 2,
                                               rng.uniform_int(1, 6), rng));
    const auto rule = build_tensor_gauss_legendre(16, 2);
    const auto mid = interpolation_check(nets, 1, 2, rule);
    CHECK(std::isfinite(mid.k_fit));
    CHECK(mid.k_fit >= 1.0 - 1e-9);  // Cauchy-Schwarz lower bound on such ratios
    CHECK(mid.k_fit < 10.0 * mid.median_ratio);

    const auto lo = interpolation_check(nets, 0, 2, rule);
    const auto hi = interpolation_check(nets, 2, 2, rule);
    CHECK(lo.k_fit == 1.0);
    CHECK(hi.k_fit == 1.0);

    // degenerate (zero) networks are skipped
    RepuNetwork zero;
    zero.k = 2;
    zero.d = 2;
    zero.scaling = Scaling::Sum;
    const auto skipped = interpolation_check({zero}, 1, 2, rule);
    CHECK(skipped.skipped == 1);
    CHECK(skipped.ratios.empty());
}

TEST_CASE("norm relation single-neuron cases") {
    RepuNetwork e1;
    e1.k = 3;
    e1.d = 4;
    e1.scaling = Scaling::Sum;
    e1.neurons.push_back({1.0, {1.0, 0.0, 0.0, 0.0}, 0.0});
    const auto res = norm_relation_check({e1}, 3, 4);
    CHECK(res.max_ratio == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(res.violations == 0);

    Rng rng(113);
    for (int d : {2, 4, 8}) {
        std::vector<RepuNetwork> nets;
        for (int i = 0; i < 60; ++i)
            nets.push_back(random_feasible_network(PenaltyKind::Variation, 2, d,
                                                   rng.uniform_int(1, 6), rng));
        const auto r = norm_relation_check(nets, 2, d);
        CHECK(r.violations == 0);
        CHECK(r.max_ratio <= r.bound * (1.0 + 1e-12));
    }
}

TEST_CASE("rate sweep runs end to end at toy scale") {
    SweepConfig cfg;
    cfg.axis = SweepAxis::Delta;
    cfg.values = {0.02, 0.1};
    cfg.m_max = 1;
    cfg.d = 2;
    cfg.n_train = 1u << 7;
    cfg.seed = 5;
    cfg.eval_q = 10;
    cfg.target.kind = TargetKind::ReferenceNetwork;
    cfg.target.n_ref = 3;
    cfg.target.a_scale = 0.5;
    cfg.tikhonov.penalty = PenaltyKind::Variation;
    cfg.tikhonov.k = 2;
    cfg.tikhonov.n = 8;
    cfg.tikhonov.lambda_rule.kind = LambdaRuleKind::VariationRule;
    cfg.tikhonov.optimizer.step_init = 0.02;
    cfg.tikhonov.optimizer.max_iters = 300;
    cfg.tikhonov.optimizer.restarts = 1;

    const auto report = rate_sweep(cfg);
    REQUIRE(report.points.size() == 2);
    for (const auto& pt : report.points) {
        CHECK(!pt.failed);
        CHECK(pt.errors.size() == 2);
        CHECK(pt.lambda > 0.0);
        CHECK(pt.norm_hint > 0.0);  // auto-filled from the target bounds
    }
    CHECK(report.theory_exponents[0] == 1.0);
    CHECK(report.theory_exponents[1] == 0.5);

    // determinism end to end
    const auto again = rate_sweep(cfg);
    for (std::size_t i = 0; i < report.points.size(); ++i) {
        CHECK(again.points[i].errors == report.points[i].errors);
        CHECK(again.points[i].lambda == report.points[i].lambda);
    }
}
