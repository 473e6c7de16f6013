#include <catch2/catch_amalgamated.hpp>

#include "repufit/analysis.hpp"
#include "repufit/quadrature.hpp"
#include "repufit/rng.hpp"

using namespace repufit;

namespace {

struct PlainField {
    double (*fn)(std::span<const double>);
    double value(std::span<const double> x) const { return fn(x); }
};

}  // namespace

TEST_CASE("tensor rule basics") {
    const auto rule = build_tensor_gauss_legendre(3, 2);
    CHECK(rule.size() == 9);
    double wsum = 0.0;
    for (double w : rule.weights) wsum += w;
    CHECK(wsum == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t i = 0; i < rule.size(); ++i)
        for (double c : rule.node(i)) {
            CHECK(c > 0.0);
            CHECK(c < 1.0);
        }
    CHECK_THROWS_AS(build_tensor_gauss_legendre(100, 4), SizeError);
}

TEST_CASE("tensor rule polynomial exactness") {
    const auto q2 = build_tensor_gauss_legendre(2, 2);
    const double xy = integrate(q2, [](std::span<const double> x) { return x[0] * x[1]; });
    CHECK(xy == Catch::Approx(0.25).margin(1e-15));

    const auto q3 = build_tensor_gauss_legendre(3, 2);
    const double x2y2 =
        integrate(q3, [](std::span<const double> x) { return x[0] * x[0] * x[1] * x[1]; });
    CHECK(x2y2 == Catch::Approx(1.0 / 9.0).margin(1e-14));
}

TEST_CASE("lattice rule basics") {
    const auto rule = build_lattice(1u << 10, 3, 77);
    CHECK(rule.size() == 1024);
    double wsum = 0.0;
    for (double w : rule.weights) wsum += w;
    CHECK(wsum == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t i = 0; i < rule.size(); ++i)
        for (double c : rule.node(i)) {
            CHECK(c > 0.0);
            CHECK(c < 1.0);
        }
    CHECK_THROWS_AS(build_lattice(1000, 2, 1), SizeError);  // not a power of 2

    // deterministic in the seed
    const auto again = build_lattice(1u << 10, 3, 77);
    CHECK(again.nodes == rule.nodes);
    const auto other = build_lattice(1u << 10, 3, 78);
    CHECK(other.nodes != rule.nodes);
}

TEST_CASE("l2 distance examples") {
    const auto rule = build_tensor_gauss_legendre(5, 1);
    PlainField one{[](std::span<const double>) { return 1.0; }};
    PlainField zero{[](std::span<const double>) { return 0.0; }};
    PlainField x1{[](std::span<const double> x) { return x[0]; }};
    CHECK(l2_distance(one, one, rule) == 0.0);
    CHECK(l2_distance(one, zero, rule) == Catch::Approx(1.0).margin(1e-15));
    CHECK(l2_distance(x1, zero, rule) == Catch::Approx(std::sqrt(1.0 / 3.0)).margin(1e-14));
}

TEST_CASE("sobolev norm examples") {
    const auto rule = build_tensor_gauss_legendre(8, 2);

    RepuNetwork constant;  // constant function: all derivatives vanish
    constant.k = 2;
    constant.d = 2;
    constant.a0 = -2.5;
    CHECK(sobolev_norm(constant, 2, rule) == Catch::Approx(2.5).margin(1e-12));

    // f = x1 as a polynomial target
    TargetFunction fx1(2, 2,
                       TargetFunction::PolynomialBody{{PolyTerm{1.0, MultiIndex({1, 0})}}});
    CHECK(sobolev_norm(fx1, 1, rule) == Catch::Approx(std::sqrt(1.0 / 3.0 + 1.0)).margin(1e-12));

    // p = (x1 - 1/2)^2: ||p||_L2 = 1/sqrt(80)
    TargetFunction p(2, 2,
                     TargetFunction::PolynomialBody{{PolyTerm{1.0, MultiIndex({2, 0})},
                                                     PolyTerm{-1.0, MultiIndex({1, 0})},
                                                     PolyTerm{0.25, MultiIndex({0, 0})}}});
    CHECK(sobolev_norm(p, 0, rule) == Catch::Approx(1.0 / std::sqrt(80.0)).margin(1e-12));
}

TEST_CASE("sobolev error examples") {
    const auto rule = build_tensor_gauss_legendre(8, 2);
    Rng rng(3);
    RepuNetwork net = random_feasible_network(PenaltyKind::Variation, 2, 2, 4, rng);
    CHECK(sobolev_error(net, net, 2, rule) == Catch::Approx(0.0).margin(1e-12));

    // m = 0 equals the l2 distance
    RepuNetwork other = random_feasible_network(PenaltyKind::Variation, 2, 2, 3, rng);
    CHECK(sobolev_error(net, other, 0, rule) ==
          Catch::Approx(l2_distance(net, other, rule)).margin(1e-14));

    // adding the (x1-1/2)^2 tail moves the L2 distance by exactly its norm
    auto shifted = net;
    shifted.poly_tail = std::vector<PolyTerm>{{1.0, MultiIndex({2, 0})},
                                              {-1.0, MultiIndex({1, 0})},
                                              {0.25, MultiIndex({0, 0})}};
    CHECK(sobolev_error(shifted, net, 0, rule) ==
          Catch::Approx(1.0 / std::sqrt(80.0)).margin(1e-12));
}

TEST_CASE("sobolev monotonicity in m") {
    Rng rng(5);
    const auto rule = build_tensor_gauss_legendre(10, 2);
    for (int rep = 0; rep < 10; ++rep) {
        const auto net =
            random_feasible_network(PenaltyKind::Variation, 3, 2, rng.uniform_int(1, 6), rng);
        const auto norms = sobolev_norms_up_to(net, 3, rule);
        for (std::size_t m = 1; m < norms.size(); ++m) CHECK(norms[m] >= norms[m - 1]);
    }
}

TEST_CASE("gauss refinement is stable on polynomial integrands") {
    TargetFunction p(4, 2,
                     TargetFunction::PolynomialBody{{PolyTerm{1.0, MultiIndex({4, 0})},
                                                     PolyTerm{2.0, MultiIndex({2, 2})},
                                                     PolyTerm{-0.5, MultiIndex({0, 3})}}});
    const double at10 = sobolev_norm(p, 0, build_tensor_gauss_legendre(10, 2));
    const double at12 = sobolev_norm(p, 0, build_tensor_gauss_legendre(12, 2));
    CHECK(std::abs(at12 - at10) < 1e-8);
}

TEST_CASE("lattice and tensor agree on random networks at d = 3") {
    Rng rng(9);
    const auto tensor = build_tensor_gauss_legendre(16, 3);
    std::vector<QuadratureRule> lattices;
    for (std::uint64_t s = 0; s < 8; ++s) lattices.push_back(build_lattice(1u << 12, 3, 100 + s));
    for (int rep = 0; rep < 5; ++rep) {
        const auto net =
            random_feasible_network(PenaltyKind::Variation, 2, 3, rng.uniform_int(2, 6), rng);
        const double reference = l2_norm(net, tensor);
        double mean = 0.0;
        std::vector<double> vals;
        for (const auto& lat : lattices) {
            vals.push_back(l2_norm(net, lat));
            mean += vals.back();
        }
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vals.size() - 1);
        const double se = std::sqrt(var / static_cast<double>(vals.size()));
        CHECK(std::abs(mean - reference) <= 3.0 * se + 1e-6);
    }
}

TEST_CASE("l2 triangle inequality on random triples") {
    Rng rng(15);
    const auto rule = build_tensor_gauss_legendre(8, 2);
    for (int rep = 0; rep < 10; ++rep) {
        const auto a = random_feasible_network(PenaltyKind::Variation, 2, 2, 3, rng);
        const auto b = random_feasible_network(PenaltyKind::Variation, 2, 2, 3, rng);
        const auto c = random_feasible_network(PenaltyKind::Variation, 2, 2, 3, rng);
        CHECK(l2_distance(a, c, rule) <=
              l2_distance(a, b, rule) + l2_distance(b, c, rule) + 1e-12);
    }
}

TEST_CASE("pairwise summation reproducibility") {
    Rng rng(21);
    std::vector<double> terms(100000);
    for (auto& t : terms) t = rng.uniform(-1.0, 1.0) * std::exp(rng.uniform(-8.0, 8.0));
    const double s1 = pairwise_sum(terms);
    const double s2 = pairwise_sum(terms);
    CHECK(s1 == s2);
    long double exact = 0.0L;
    for (double t : terms) exact += static_cast<long double>(t);
    CHECK(static_cast<double>(exact) == Catch::Approx(s1).epsilon(1e-13));
}
