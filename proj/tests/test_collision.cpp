#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "phinv/collision.hpp"
#include "phinv/error.hpp"

using namespace phinv;

namespace {

std::vector<oracle::Tuple> tuples(const QuadrupleSet& qs) {
    std::vector<oracle::Tuple> out;
    for (const auto& q : qs.quads) out.push_back({q.i1, q.i2, q.i3, q.i4});
    return out;
}

std::vector<oracle::Tuple> tuples(const TripleSet& ts) {
    std::vector<oracle::Tuple> out;
    for (const auto& t : ts.triples) out.push_back({t.i1, t.i2, t.i3, t.i4});
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("flat band d=1 N=4 against exhaustive search") {
    auto disp = make_constant(1, 1.0);
    GridSpec g(1, 4);
    auto qs = enumerate_quadruples(disp, g, 1e-12);
    auto ref = oracle::brute_quadruples(oracle::sample(disp, g), g, 1e-12);
    CHECK(tuples(qs) == ref);
    CHECK(!ref.empty());
    for (const auto& q : qs.quads) CHECK(q.energy_residual == 0.0);
}

TEST_CASE("nn d=2 N=8 eps=0.05 against exhaustive search") {
    auto disp = make_nn(2);
    GridSpec g(2, 8);
    auto qs = enumerate_quadruples(disp, g, 0.05);
    auto w = oracle::sample(disp, g);
    auto ref = oracle::brute_quadruples(w, g, 0.05);
    CHECK(tuples(qs) == ref);
    for (const auto& q : qs.quads) {
        CHECK(std::abs(q.energy_residual - (w[q.i1] + w[q.i2] - w[q.i3] - w[q.i4])) < 1e-14);
        CHECK(std::abs(q.energy_residual) <= 0.05);
    }
}

TEST_CASE("other dimensions and offsets against exhaustive search") {
    struct Case {
        int dim, n;
        double offset, eps;
    };
    for (auto c : {Case{1, 9, 0.5, 0.2}, Case{2, 5, 0.0, 0.3}, Case{2, 6, 0.25, 0.1}, Case{3, 3, 0.5, 0.5}}) {
        CAPTURE(c.dim);
        CAPTURE(c.n);
        auto disp = make_nn_gap(c.dim, 0.4);
        GridSpec g(c.dim, c.n, c.offset);
        CHECK(tuples(enumerate_quadruples(disp, g, c.eps)) ==
              oracle::brute_quadruples(oracle::sample(disp, g), g, c.eps));
    }
}

TEST_CASE("quadruple invariants") {
    auto disp = make_nn(2);
    GridSpec g(2, 10);
    auto qs = enumerate_quadruples(disp, g, 0.08);
    REQUIRE(!qs.quads.empty());
    CHECK(std::is_sorted(qs.quads.begin(), qs.quads.end(),
                         [](const auto& a, const auto& b) { return a.indices() < b.indices(); }));
    std::set<std::array<PointIndex, 4>> seen;
    std::vector<int> n1(2), n2(2), n3(2), n4(2);
    for (const auto& q : qs.quads) {
        CHECK(seen.insert(q.indices()).second);
        CHECK(q.i1 <= q.i2);
        CHECK(q.i3 <= q.i4);
        CHECK(std::make_pair(q.i1, q.i2) < std::make_pair(q.i3, q.i4));
        g.multi_index(q.i1, n1);
        g.multi_index(q.i2, n2);
        g.multi_index(q.i3, n3);
        g.multi_index(q.i4, n4);
        for (int j = 0; j < 2; ++j) CHECK((n1[j] + n2[j] - n3[j] - n4[j]) % 10 == 0);
    }
}

TEST_CASE("distinct incommensurate energies leave only trivial collisions") {
    GridSpec g(2, 5);
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(2.0 + static_cast<double>(i) * 3.0) + std::log(2.0 + i);
    auto qs = enumerate_quadruples(GridFunction(g, v), 0.0);
    CHECK(qs.quads.empty());
}

TEST_CASE("threads do not change the result") {
    auto disp = make_nn(2);
    GridSpec g(2, 12);
    auto a = enumerate_quadruples(disp, g, 0.04, {kDefaultQuadrupleCap, 1});
    auto b = enumerate_quadruples(disp, g, 0.04, {kDefaultQuadrupleCap, 4});
    auto c = enumerate_quadruples(disp, g, 0.04, {kDefaultQuadrupleCap, 0});
    CHECK(a.quads == b.quads);
    CHECK(a.quads == c.quads);
    auto t1 = enumerate_3to1(disp, GridSpec(2, 10), 0.2, {kDefaultQuadrupleCap, 1});
    auto t3 = enumerate_3to1(disp, GridSpec(2, 10), 0.2, {kDefaultQuadrupleCap, 3});
    CHECK(t1.triples == t3.triples);
}

TEST_CASE("monotone in the energy tolerance") {
    auto disp = make_nn(2);
    GridSpec g(2, 8);
    std::vector<oracle::Tuple> prev;
    for (double eps : {0.0, 0.01, 0.05, 0.1, 0.3}) {
        auto cur = tuples(enumerate_quadruples(disp, g, eps));
        CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        prev = cur;
    }
}

TEST_CASE("capacity") {
    auto disp = make_constant(2, 1.0);
    CHECK_THROWS_AS(enumerate_quadruples(disp, GridSpec(2, 6), 1e-9, {100, 1}), CapacityExceeded);
    CHECK_THROWS_AS(enumerate_quadruples(disp, GridSpec(2, 6), 1e-9, {100, 4}), CapacityExceeded);
    CHECK_THROWS_AS(enumerate_3to1(make_nn(2), GridSpec(2, 8), 10.0, {5, 2}), CapacityExceeded);
}

TEST_CASE("constraint matrix") {
    GridSpec g(1, 6);
    QuadrupleSet qs{g, 0.1, {{0, 5, 2, 3, 0.0}, {0, 2, 0, 4, 0.0}, {1, 1, 0, 2, 0.0}}};
    ConstraintMatrix m(qs);
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 6);
    auto r0 = m.row(0);
    REQUIRE(r0.size() == 4);
    CHECK(r0[0].col == 0);
    CHECK(r0[0].value == 1.0);
    CHECK(r0[1].col == 2);
    CHECK(r0[1].value == -1.0);
    CHECK(r0[2].col == 3);
    CHECK(r0[2].value == -1.0);
    CHECK(r0[3].col == 5);
    CHECK(r0[3].value == 1.0);
    // i1 == i3 merges to zero and is dropped
    CHECK(m.row(1).size() == 2);
    // i1 == i2 merges to +2
    REQUIRE(m.row(2).size() == 3);
    CHECK(m.row(2)[1].value == 2.0);

    auto y = m.multiply(std::vector<double>{1, 2, 3, 4, 5, 6});
    CHECK(y[0] == 1 + 6 - 3 - 4);
    CHECK(y[2] == 2 + 2 - 1 - 3);
}

TEST_CASE("constraint rows sum to zero") {
    auto qs = enumerate_quadruples(make_nn(2), GridSpec(2, 9), 0.1);
    ConstraintMatrix m(qs);
    CHECK(m.rows() == qs.quads.size());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double sum = 0, l1 = 0;
        for (const auto& e : m.row(r)) {
            sum += e.value;
            l1 += std::abs(e.value);
        }
        CHECK(sum == 0.0);
        CHECK(l1 <= 4.0);
        CHECK(m.row(r).size() <= 4);
    }
}

TEST_CASE("residual statistics") {
    auto disp = make_nn(2);
    GridSpec g(2, 8);
    auto qs = enumerate_quadruples(disp, g, 0.05);
    auto omega = sample_grid(disp, g);
    auto ones = GridFunction(g, std::vector<double>(g.size(), 1.0));
    auto s1 = residual_stats(ones, qs);
    CHECK(s1.max_abs == 0.0);
    CHECK(s1.count == qs.quads.size());
    CHECK(residual_stats(omega, qs).max_abs <= 0.05);

    std::vector<double> sq(g.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = omega[i] * omega[i];
    auto s2 = residual_stats(GridFunction(g, sq), qs);
    double ref = 0;
    for (auto t : oracle::brute_quadruples(oracle::sample(disp, g), g, 0.05))
        ref = std::max(ref, std::abs(sq[t[0]] + sq[t[1]] - sq[t[2]] - sq[t[3]]));
    CHECK(s2.max_abs == doctest::Approx(ref).epsilon(1e-14));
    CHECK(s2.max_abs > 5 * 0.05);

    QuadrupleSet empty{g, 0.05, {}};
    auto s3 = residual_stats(omega, empty);
    CHECK(s3.empty);
    CHECK(s3.max_abs == 0.0);

    CHECK_THROWS_AS(residual_stats(sample_grid(disp, GridSpec(2, 9)), qs), GridMismatch);
}

TEST_CASE("3 to 1 processes against exhaustive search") {
    for (double eps : {0.05, 0.1, 0.3}) {
        auto disp = make_nn(2);
        GridSpec g(2, 8);
        CHECK(tuples(enumerate_3to1(disp, g, eps)) == oracle::brute_triples(oracle::sample(disp, g), g, eps));
    }
    auto d1 = make_nn_gap(1, 0.2);
    GridSpec g1(1, 12, 0.0);
    CHECK(tuples(enumerate_3to1(d1, g1, 0.4)) == oracle::brute_triples(oracle::sample(d1, g1), g1, 0.4));

    // flat band: residual 2
    CHECK(enumerate_3to1(make_constant(2, 1.0), GridSpec(2, 6), 1.9).triples.empty());
    CHECK(!enumerate_3to1(make_constant(2, 1.0), GridSpec(2, 4), 2.0).triples.empty());

    // the momentum sum picks up 2*offset; only integer multiples close on the grid
    CHECK_THROWS_AS(enumerate_3to1(make_nn(2), GridSpec(2, 8, 0.25), 0.1), ConfigError);
}

TEST_CASE("3 to 1 reduction") {
    auto disp = make_nn(2);
    GridSpec g(2, 8);
    const double eps = 0.1;
    auto ts = enumerate_3to1(disp, g, eps);
    REQUIRE(!ts.triples.empty());
    std::vector<int> n(2), m(2), p(2), q(2);
    for (const auto& t : ts.triples) {
        CHECK(t.i1 <= t.i2);
        CHECK(t.i2 <= t.i3);
        g.multi_index(t.i1, n);
        g.multi_index(t.i2, m);
        g.multi_index(t.i3, p);
        g.multi_index(t.i4, q);
        // with offset 1/2 the four offsets leave one full grid step per axis
        for (int j = 0; j < 2; ++j) CHECK((n[j] + m[j] + p[j] + 1 - q[j]) % 8 == 0);
    }
    auto omega = sample_grid(disp, g);
    auto affine = [&](double a, double c) {
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * omega[i] + c;
        return GridFunction(g, v);
    };
    auto r0 = check_nonconserving_reduction(affine(1, 0), ts);
    CHECK(r0.max_abs_residual <= eps);
    CHECK(std::abs(r0.mean_residual) <= eps);
    auto r2 = check_nonconserving_reduction(affine(1, 2), ts);
    CHECK(std::abs(r2.mean_residual - 4) <= eps);
    auto r31 = check_nonconserving_reduction(affine(3, 1), ts);
    CHECK(std::abs(r31.mean_residual - 2) <= 3 * eps);
    CHECK(r2.count == ts.triples.size());

    auto empty = check_nonconserving_reduction(affine(1, 2), TripleSet{g, eps, {}});
    CHECK(empty.empty);
    CHECK(empty.count == 0);
}

TEST_CASE("default energy tolerance") {
    auto disp = make_nn(2);
    GridSpec g(2, 12);
    double L = 0;
    for (std::size_t i = 0; i < g.size(); ++i) L = std::max(L, disp.gradient(g.point(i)).cwiseAbs().maxCoeff());
    CHECK(default_energy_tolerance(disp, g) == doctest::Approx(L / 144).epsilon(1e-14));
    CHECK(default_energy_tolerance(make_constant(2, 1.0), g) == 0.0);
}
