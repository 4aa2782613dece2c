#include <cmath>
#include <vector>

#include <doctest.h>

#include "oswitch/lattice.hpp"

using namespace oswitch;

TEST_CASE("binomial lattice d=1 recombines") {
    const auto lat = LatticeModel::build(1.0, 8, 1);
    CHECK(lat.steps() == 8);
    CHECK(lat.dt() == doctest::Approx(0.125));
    for (int n = 0; n <= 8; ++n) CHECK(lat.levels()[n].size() == static_cast<std::size_t>(n + 1));

    for (int n = 0; n <= 8; ++n) {
        double total = 0.0;
        for (const auto& node : lat.levels()[n]) total += node.prob;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }

    // per-node increment moments
    const double dt = lat.dt();
    for (const auto& node : lat.levels()[3]) {
        double mean = 0.0, var = 0.0, psum = 0.0;
        for (const auto& e : node.edges) {
            mean += e.prob * e.dw[0];
            var += e.prob * e.dw[0] * e.dw[0];
            psum += e.prob;
        }
        CHECK(psum == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(var == doctest::Approx(dt).epsilon(1e-14));
    }
}

TEST_CASE("binomial lattice d=2 branches into 4") {
    const auto lat = LatticeModel::build(1.0, 4, 2);
    for (const auto& node : lat.levels()[0]) CHECK(node.edges.size() == 4);
    double total = 0.0;
    for (const auto& node : lat.levels()[4]) total += node.prob;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("gauss_hermite_normal quadrature moments") {
    std::vector<double> x, w;
    for (int q = 2; q <= 6; ++q) {
        gauss_hermite_normal(q, x, w);
        double m0 = 0.0, m1 = 0.0, m2 = 0.0, m3 = 0.0;
        for (int r = 0; r < q; ++r) {
            m0 += w[r];
            m1 += w[r] * x[r];
            m2 += w[r] * x[r] * x[r];
            m3 += w[r] * std::pow(x[r], 3);
        }
        CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(m1 == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m3 == doctest::Approx(0.0).epsilon(1e-12));
    }
    // degree-5 exactness at q = 3: E[x^4] = 3
    gauss_hermite_normal(3, x, w);
    double m4 = 0.0;
    for (int r = 0; r < 3; ++r) m4 += w[r] * std::pow(x[r], 4);
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
    // degree-7 exactness at q = 4: E[x^6] = 15
    gauss_hermite_normal(4, x, w);
    double m6 = 0.0;
    for (int r = 0; r < 4; ++r) m6 += w[r] * std::pow(x[r], 6);
    CHECK(m6 == doctest::Approx(15.0).epsilon(1e-11));
}

TEST_CASE("gauss-hermite lattice matches Brownian moments") {
    BranchSpec spec;
    spec.kind = BranchSpec::Kind::GaussHermite;
    spec.gh_nodes = 4;
    const auto lat = LatticeModel::build(1.0, 12, 1, spec);
    for (int n : {4, 12}) {
        double total = 0.0, m2 = 0.0;
        for (const auto& node : lat.levels()[n]) {
            total += node.prob;
            m2 += node.prob * node.w[0] * node.w[0];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m2 == doctest::Approx(lat.time(n)).epsilon(1e-11));
    }
}

TEST_CASE("state maps") {
    auto lat = LatticeModel::build(1.0, 4, 1);
    attach_state(lat, arithmetic_state(2.0, 0.5, 1.5));
    for (int n = 0; n <= 4; ++n)
        for (const auto& node : lat.levels()[n])
            CHECK(node.state[0] ==
                  doctest::Approx(2.0 + 0.5 * lat.time(n) + 1.5 * node.w[0]).epsilon(1e-14));

    auto lat2 = LatticeModel::build(1.0, 4, 1);
    attach_state(lat2, geometric_state(3.0, 0.4));
    for (int n = 0; n <= 4; ++n)
        for (const auto& node : lat2.levels()[n])
            CHECK(node.state[0] ==
                  doctest::Approx(3.0 * std::exp(0.4 * node.w[0] - 0.08 * lat2.time(n)))
                      .epsilon(1e-13));
}

TEST_CASE("euler tree node counts and capacity guard") {
    const auto tree = build_euler_tree(
        1.0, 5, 1.0, [](double, double x) { return -0.1 * x; },
        [](double, double x) { return 0.2 + 0.1 * std::abs(x); });
    for (int n = 0; n <= 5; ++n)
        CHECK(tree.levels()[n].size() == static_cast<std::size_t>(1) << n);
    double total = 0.0;
    for (const auto& node : tree.levels()[5]) total += node.prob;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-13));

    CHECK_THROWS_AS(build_euler_tree(
                        1.0, 40, 0.0, [](double, double) { return 0.0; },
                        [](double, double) { return 1.0; }),
                    CapacityError);
}

TEST_CASE("node capacity guard on regular lattices") {
    CHECK_THROWS_AS(LatticeModel::build(1.0, 400, 3), CapacityError);
}
