#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "phinv/dispersion.hpp"
#include "phinv/error.hpp"

using namespace phinv;
using std::numbers::pi;

TEST_CASE("nn values") {
    auto nn = make_nn(2);
    CHECK(nn.omega(std::vector<double>{0.0, 0.0}) == 0.0);
    CHECK(nn.omega(std::vector<double>{0.5, 0.5}) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-14));
    CHECK(nn.omega_squared(std::vector<double>{0.25, -0.1}) ==
          doctest::Approx(4 * std::pow(std::sin(pi * 0.25), 2) + 4 * std::pow(std::sin(pi * 0.1), 2)).epsilon(1e-14));
    // γ(0) = 2d, γ(±e_j) = -1
    const auto& c = nn.coefficients();
    CHECK(c.at({0, 0}) == 4.0);
    CHECK(c.at({1, 0}) == -1.0);
    CHECK(c.at({0, -1}) == -1.0);
}

TEST_CASE("gapped and constant models") {
    auto gap = make_nn_gap(2, 1.0);
    CHECK(gap.omega(std::vector<double>{0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-15));
    auto g = gap.gradient(std::vector<double>{0.0, 0.0});
    CHECK(g.norm() == doctest::Approx(0.0));
    auto H = gap.hessian(std::vector<double>{0.0, 0.0});
    CHECK(H(0, 0) == doctest::Approx(4 * pi * pi).epsilon(1e-12));
    CHECK(H(1, 1) == doctest::Approx(4 * pi * pi).epsilon(1e-12));
    CHECK(std::abs(H(0, 1)) < 1e-12);
    CHECK(gap.hessian_determinant(std::vector<double>{0.0, 0.0}) ==
          doctest::Approx(std::pow(4 * pi * pi, 2)).epsilon(1e-12));
    auto gap1 = make_nn_gap(1, 1.0);
    CHECK(gap1.hessian_determinant(std::vector<double>{0.0}) == doctest::Approx(4 * pi * pi).epsilon(1e-12));

    auto one = make_constant(3, 1.0);
    CHECK(one.omega(std::vector<double>{0.1, -0.3, 0.2}) == 1.0);
    CHECK(one.hessian(std::vector<double>{0.1, -0.3, 0.2}).norm() == 0.0);
}

TEST_CASE("gapped Hessian at the origin matches finite differences") {
    auto gap = make_nn_gap(2, 1.0);
    auto f = [&](const std::vector<double>& k) { return gap.omega(k); };
    auto H = oracle::fd_hessian(f, {0.0, 0.0}, 1e-3);
    CHECK(oracle::rel_err(gap.hessian(std::vector<double>{0.0, 0.0}), H) < 1e-8);
}

TEST_CASE("near-singular set") {
    auto nn = make_nn(2);
    std::vector<double> k{1e-9, 0.0};
    CHECK_THROWS_AS(nn.gradient(k, 1e-3), NearSingularSet);
    CHECK_THROWS_AS(nn.hessian(k, 1e-3), NearSingularSet);
    CHECK_THROWS_AS(nn.hessian_determinant(k, 1e-3), NearSingularSet);
    CHECK_NOTHROW(nn.gradient(std::vector<double>{0.1, 0.0}, 1e-3));
}

TEST_CASE("finite-difference checks at fixed points") {
    auto nn = make_nn(2);
    auto f = [&](const std::vector<double>& k) { return nn.omega(k); };
    std::vector<double> k1{0.25, 0.25};
    CHECK(oracle::rel_err(nn.gradient(k1), oracle::fd_gradient_plain(f, k1, 1e-6)) < 1e-6);
    std::vector<double> k2{0.25, 0.0};
    CHECK(oracle::rel_err(nn.hessian(k2), oracle::fd_hessian_plain(f, k2, 1e-4)) < 1e-6);
}

TEST_CASE("analytic derivatives vs finite differences at random regular points") {
    for (int dim : {1, 2, 3}) {
        CAPTURE(dim);
        for (auto disp : {make_nn(dim), make_nn_gap(dim, 0.5)}) {
            auto f = [&](const std::vector<double>& k) { return disp.omega(k); };
            double worst_g = 0.0, worst_h = 0.0;
            for (const auto& k : oracle::regular_points(disp, 100, 0.1, 7)) {
                worst_g = std::max(worst_g, oracle::rel_err(disp.gradient(k), oracle::fd_gradient(f, k, 1e-4)));
                worst_h = std::max(worst_h, oracle::rel_err(disp.hessian(k), oracle::fd_hessian(f, k, 1e-3)));
            }
            CHECK(worst_g < 1e-6);
            CHECK(worst_h < 1e-6);
        }
    }
}

TEST_CASE("square jet matches the cosine series") {
    auto disp = parse_dispersion_json(R"({"dim": 2, "coeffs": [
        {"n": [0, 0], "gamma": 7.0}, {"n": [1, 0], "gamma": -1.5}, {"n": [1, 1], "gamma": -0.5},
        {"n": [0, 2], "gamma": 0.25}]})");
    auto sq = [&](const std::vector<double>& k) { return disp.omega_squared(k); };
    for (const auto& k : oracle::regular_points(disp, 20, 0.1, 3)) {
        auto jet = disp.square_jet(k);
        CHECK(jet.value == doctest::Approx(disp.omega_squared(k)).epsilon(1e-14));
        CHECK(oracle::rel_err(jet.grad, oracle::fd_gradient(sq, k, 1e-4)) < 1e-8);
        CHECK(oracle::rel_err(jet.hess, oracle::fd_hessian(sq, k, 1e-3)) < 1e-7);
    }
}

TEST_CASE("periodicity and symmetry") {
    std::mt19937_64 rng(11);
    // dyadic k so that k + m is exact in binary
    std::uniform_int_distribution<int> num(-512, 511), shift(-5, 5);
    for (int dim : {1, 2, 3}) {
        auto nn = make_nn_gap(dim, 0.3);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> k(static_cast<std::size_t>(dim)), km(k.size()), neg(k.size());
            for (std::size_t j = 0; j < k.size(); ++j) {
                k[j] = num(rng) / 1024.0;
                km[j] = k[j] + shift(rng);
                neg[j] = -k[j];
            }
            CHECK(nn.omega(km) == nn.omega(k));
            CHECK(nn.omega(neg) == nn.omega(k));
        }
    }
}

TEST_CASE("Hessian is exactly symmetric") {
    auto disp = parse_dispersion_json(R"({"dim": 3, "coeffs": [
        {"n": [0, 0, 0], "gamma": 9.0}, {"n": [1, 0, 0], "gamma": -1.0}, {"n": [0, 1, 0], "gamma": -1.0},
        {"n": [0, 0, 1], "gamma": -1.0}, {"n": [1, 1, 0], "gamma": -0.5}, {"n": [0, 1, -1], "gamma": -0.7}]})");
    for (const auto& k : oracle::regular_points(disp, 50, 0.1, 5)) {
        auto H = disp.hessian(k);
        CHECK(H == H.transpose());
    }
}

TEST_CASE("coefficient validation") {
    CHECK_THROWS_AS(FourierDispersion(2, {{{1, 0}, -1.0}}), InvalidDispersion);
    CHECK_THROWS_AS(FourierDispersion(2, {{{1, 0}, -1.0}, {{-1, 0}, -2.0}, {{0, 0}, 5.0}}), InvalidDispersion);
    // ω² = 1 - 4 cos(2πk) goes negative
    CHECK_THROWS_AS(FourierDispersion(1, {{{0}, 1.0}, {{1}, -2.0}, {{-1}, -2.0}}), InvalidDispersion);

    // loader symmetrizes
    auto d = parse_dispersion_json(R"({"dim": 1, "coeffs": [{"n": [0], "gamma": 2}, {"n": [1], "gamma": -1}]})");
    CHECK(d.coefficients().at({-1}) == -1.0);
    CHECK(d.omega(std::vector<double>{0.5}) == doctest::Approx(2.0));

    CHECK_THROWS_AS(parse_dispersion_json(R"({"dim": 1, "coeffs": [{"n": [0], "gamma": 2},
        {"n": [1], "gamma": -1}, {"n": [-1], "gamma": -0.5}]})"),
                    InvalidDispersion);
    CHECK_THROWS_AS(parse_dispersion_json(R"({"dim": 1, "coefs": []})"), InvalidDispersion);
    try {
        parse_dispersion_json(R"({"dim": 2, "coeffs": [{"n": [0, 0], "gamma": 4}, {"n": [1], "gamma": -1}]})");
        FAIL("expected InvalidDispersion");
    } catch (const InvalidDispersion& e) {
        CHECK(std::string(e.what()).find("coeffs[1]") != std::string::npos);
    }
}

TEST_CASE("model names") {
    CHECK(make_model("nn", 3).dim() == 3);
    CHECK(make_model("nn-gap(2)", 2).omega(std::vector<double>{0, 0}) == doctest::Approx(2.0));
    CHECK(make_model("constant", 2).omega(std::vector<double>{0.3, 0.1}) == 1.0);
    CHECK(make_model("constant(2.5)", 1).omega(std::vector<double>{0.3}) == doctest::Approx(2.5));
    CHECK_THROWS_AS(make_model("lattice-of-doom", 2), InvalidDispersion);
    CHECK_THROWS_AS(make_model("nn-gap(x)", 2), InvalidDispersion);
}

TEST_CASE("grid sampling") {
    GridSpec g(2, 2, 0.5);
    auto w = sample_grid(make_nn(2), g);
    REQUIRE(w.size() == 4);
    for (double x : w.values) CHECK(x == doctest::Approx(2.0).epsilon(1e-14));
    auto one = sample_grid(make_constant(2, 1.0), GridSpec(2, 5));
    for (double x : one.values) CHECK(x == 1.0);

    GridSpec h(2, 4, 0.0);
    auto k = h.point(5);  // n = (1, 1)
    CHECK(k[0] == -0.25);
    CHECK(k[1] == -0.25);
    CHECK_THROWS_AS(GridSpec(2, 4, 1.0), ConfigError);
    CHECK_THROWS_AS(GridFunction(g, {1.0, 2.0}), GridMismatch);
    CHECK_THROWS_AS(GridFunction(g, {1.0, 2.0, NAN, 1.0}), Error);
}

TEST_CASE("degeneracy profile") {
    std::vector<double> deltas{1e-8, 1e-6, 1e-4, 1e-2, 1.0, 100.0};
    auto p = degeneracy_profile(make_nn_gap(2, 1.0), GridSpec(2, 64), std::vector<double>{1e-8});
    CHECK(p.fractions[0] == 0.0);

    auto c = degeneracy_profile(make_constant(2, 1.0), GridSpec(2, 8), deltas);
    for (double f : c.fractions) CHECK(f == 1.0);

    auto nn = degeneracy_profile(make_nn(2), GridSpec(2, 32), deltas);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        CHECK(nn.fractions[i] >= 0.0);
        CHECK(nn.fractions[i] <= 1.0);
        if (i) CHECK(nn.fractions[i] >= nn.fractions[i - 1]);
    }
    // offset 0 puts a grid point on k = 0
    auto z = degeneracy_profile(make_nn(2), GridSpec(2, 8, 0.0), deltas);
    CHECK(z.excluded_fraction == doctest::Approx(1.0 / 64));

    CHECK_THROWS_AS(degeneracy_profile(make_nn(2), GridSpec(2, 8), std::vector<double>{1e-2, 1e-4}), Error);

    auto dets = hessian_determinants(make_nn(2), GridSpec(2, 8, 0.0));
    CHECK(std::isnan(dets[GridSpec(2, 8, 0.0).flat_index(std::vector<int>{4, 4})]));
}
