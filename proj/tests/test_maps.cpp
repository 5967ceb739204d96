#include "doctest.h"

#include "holinear/maps.hpp"

using namespace holinear;

namespace {

MapBundle quad1d(double l, double c, double delta) {
    Mat lm(1, 1);
    lm << l;
    std::vector<std::vector<PolyTerm>> terms(1);
    terms[0].push_back(PolyTerm{c, {2}});
    return MapBundle(Operator(lm), PolyMap(1, std::move(terms)), delta, "quad1d");
}

Vec v3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

}  // namespace

TEST_CASE("poly map rejects linear and constant terms") {
    std::vector<std::vector<PolyTerm>> terms(1);
    terms[0].push_back(PolyTerm{1.0, {1}});
    CHECK_THROWS_AS(PolyMap(1, terms), Error);
    terms[0][0].exponents = {0};
    CHECK_THROWS_AS(PolyMap(1, terms), Error);
}

TEST_CASE("eval: fixed point, hartman substitution, 1d quadratic") {
    auto h = hartman_map(4, 3, 0.5, 1);
    CHECK(inf_norm(h.eval(Vec::Zero(3))) == 0.0);

    Vec out = h.eval(v3(0.1, 0.0, 0.2));
    CHECK(out[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(0.06).epsilon(1e-15));
    CHECK(out[2] == doctest::Approx(0.1).epsilon(1e-15));

    auto q = quad1d(0.5, 0.1, 1.0);
    Vec x(1);
    x << 0.5;
    CHECK(q.eval(x)[0] == doctest::Approx(0.275).epsilon(1e-15));
}

TEST_CASE("hartman respects the closed form coordinatewise") {
    auto h = hartman_map(4, 3, 0.5, 1);
    SplitMix64 rng(11);
    for (int i = 0; i < 200; ++i) {
        Vec x = 0.2 * halton_point(i, 3, 11);
        Vec y = h.eval(x);
        CHECK(y[0] == doctest::Approx(4.0 * x[0]).epsilon(1e-14));
        CHECK(y[2] == doctest::Approx(0.5 * x[2]).epsilon(1e-14));
        CHECK(y[1] == doctest::Approx(3.0 * (x[1] + x[0] * x[2])).epsilon(1e-14));
    }
}

TEST_CASE("jacobian: exact rows and finite-difference cross-check") {
    auto h = hartman_map(4, 3, 0.5, 1);
    CHECK(op_norm(h.jacobian(Vec::Zero(3)) - h.linear().entries()) == 0.0);

    Vec x = v3(0.05, -0.03, 0.11);
    Mat j = h.jacobian(x);
    CHECK(j(1, 0) == doctest::Approx(3.0 * x[2]));
    CHECK(j(1, 1) == doctest::Approx(3.0));
    CHECK(j(1, 2) == doctest::Approx(3.0 * x[0]));

    // central differences across builtins and random polynomial maps
    auto fd_check = [](const MapBundle& m, const Vec& p) {
        const double step = 1e-5;
        Mat j = m.jacobian(p);
        for (int col = 0; col < m.dim(); ++col) {
            Vec e = Vec::Zero(m.dim());
            e[col] = step;
            Vec diff = (m.eval(p + e) - m.eval(p - e)) / (2.0 * step);
            for (int row = 0; row < m.dim(); ++row)
                CHECK(std::abs(diff[row] - j(row, col)) < 1e-6);
        }
    };
    for (int i = 0; i < 20; ++i) fd_check(h, 0.15 * halton_point(i, 3, 2));

    auto st = sternberg_map(0.5);
    for (int i = 0; i < 20; ++i) {
        Vec p = 0.3 * halton_point(i, 1, 3);
        if (std::abs(p[0]) < 1e-3) continue;
        fd_check(st, p);
    }

    SplitMix64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        int dim = 1 + static_cast<int>(rng.next() % 3);
        Mat l = Mat::Zero(dim, dim);
        for (int i = 0; i < dim; ++i) l(i, i) = 0.4 + rng.uniform();
        std::vector<std::vector<PolyTerm>> terms(dim);
        for (int i = 0; i < dim; ++i)
            for (int t = 0; t < 3; ++t) {
                std::vector<int> e(dim, 0);
                int total = 2 + static_cast<int>(rng.next() % 3);
                for (int k = 0; k < total; ++k) e[rng.next() % dim]++;
                terms[i].push_back(PolyTerm{0.2 * rng.symmetric(), e});
            }
        MapBundle m(Operator(l), PolyMap(dim, terms), 0.5, "rand");
        fd_check(m, 0.3 * halton_point(trial, dim, 7));
    }
}

TEST_CASE("invert_point") {
    SUBCASE("linear map inverts exactly") {
        auto q = quad1d(0.5, 0.0, 1.0);
        Vec z(1);
        z << 0.3;
        CHECK(invert_point(q, z)[0] == doctest::Approx(0.6).epsilon(1e-14));
    }
    SUBCASE("hartman forward then backward") {
        auto h = hartman_map(4, 3, 0.5, 1);
        Vec x = v3(0.1, 0.0, 0.2);
        Vec w = invert_point(h, h.eval(x), 1e-13);
        CHECK(inf_norm(w - x) < 1e-12);
    }
    SUBCASE("origin is fixed") {
        auto h = hartman_map(4, 3, 0.5, 1);
        CHECK(inf_norm(invert_point(h, Vec::Zero(3))) < 1e-14);
    }
    SUBCASE("two sided inverse on samples") {
        auto h = hartman_map(4, 3, 0.5, 1);
        for (int i = 0; i < 100; ++i) {
            Vec x = 0.15 * halton_point(i, 3, 5);
            CHECK(inf_norm(invert_point(h, h.eval(x), 1e-13) - x) < 1e-11);
            Vec w = invert_point(h, x, 1e-13);
            CHECK(inf_norm(h.linear().entries() * w + h.nonlinear(w) - x) < 1e-12);
        }
    }
}

TEST_CASE("orbit") {
    SUBCASE("contracting orbit never escapes and decays") {
        auto q = quad1d(0.5, 0.05, 1.0);
        Vec x0(1);
        x0 << 0.8;
        Orbit o = orbit(q, x0, 30, OrbitDirection::forward);
        CHECK_FALSE(o.escaped_at.has_value());
        for (std::size_t k = 1; k < o.points.size(); ++k)
            CHECK(inf_norm(o.points[k]) <= inf_norm(o.points[k - 1]) + 1e-15);
    }
    SUBCASE("linear saddle escapes at the closed-form time") {
        Mat l = Mat::Zero(2, 2);
        l(0, 0) = 2.0;
        l(1, 1) = 0.5;
        MapBundle m(Operator(l), PolyMap::zero(2), 0.5, "saddle");
        Vec x0(2);
        x0 << 0.1, 0.1;
        Orbit o = orbit(m, x0, 10, OrbitDirection::forward);
        REQUIRE(o.escaped_at.has_value());
        CHECK(*o.escaped_at == 3);  // 2^3 * 0.1 = 0.8 > 0.5
    }
    SUBCASE("fixed point orbit is constant") {
        auto h = hartman_map(4, 3, 0.5, 1);
        Orbit o = orbit(h, Vec::Zero(3), 5, OrbitDirection::forward);
        for (const auto& p : o.points) CHECK(inf_norm(p) == 0.0);
    }
    SUBCASE("forward then backward returns to start") {
        auto h = hartman_map(4, 3, 0.5, 1, 10.0);
        Vec x0 = v3(0.01, 0.02, 0.03);
        Orbit fwd = orbit(h, x0, 4, OrbitDirection::forward);
        Orbit bwd = orbit(h, fwd.points.back(), 4, OrbitDirection::backward, 1e-14);
        CHECK(inf_norm(bwd.points.back() - x0) < 4e-12);
    }
}

TEST_CASE("stable_set_member") {
    Mat l = Mat::Zero(2, 2);
    l(0, 0) = 2.0;
    l(1, 1) = 0.5;
    MapBundle m(Operator(l), PolyMap::zero(2), 0.5, "saddle");
    Vec on_axis(2), off_axis(2);
    on_axis << 0.0, 0.3;
    off_axis << 0.1, 0.1;
    CHECK(stable_set_member(m, on_axis, 50));
    CHECK_FALSE(stable_set_member(m, off_axis, 50));
    CHECK(stable_set_member(m, Vec::Zero(2), 50));
}

TEST_CASE("domain enforcement") {
    auto h = hartman_map(4, 3, 0.5, 1, 0.2);
    CHECK_THROWS_AS(h.eval(v3(0.5, 0.0, 0.0)), Error);
    CHECK_NOTHROW(h.as_global().eval(v3(5.0, 0.0, 0.0)));
}

TEST_CASE("axis restriction of a flat polynomial map") {
    // saddle with a cubic on the expanding axis
    Mat l = Mat::Zero(2, 2);
    l(0, 0) = 2.0;
    l(1, 1) = 0.5;
    std::vector<std::vector<PolyTerm>> terms(2);
    terms[0].push_back(PolyTerm{0.1, {3, 0}});
    MapBundle m(Operator(l), PolyMap(2, terms), 0.4, "axis_cubic");
    MapBundle u = axis_restriction(m, {0}, "u_axis");
    Vec x(1);
    x << 0.2;
    CHECK(u.eval(x)[0] == doctest::Approx(2.0 * 0.2 + 0.1 * 0.008));
    MapBundle s = axis_restriction(m, {1}, "s_axis");
    Vec y(1);
    y << 0.2;
    CHECK(s.eval(y)[0] == doctest::Approx(0.1));
}

TEST_CASE("sternberg closed form and removable singularity") {
    auto st = sternberg_map(0.5);
    CHECK(st.eval(Vec::Zero(1))[0] == 0.0);
    CHECK(st.jacobian(Vec::Zero(1))(0, 0) == doctest::Approx(0.5));
    Vec x(1);
    x << 0.1;
    // T(x) = 0.5 * 0.1 * (1 - 1/log(0.1))
    double expect = 0.5 * 0.1 * (1.0 - 1.0 / std::log(0.1));
    CHECK(st.eval(x)[0] == doctest::Approx(expect).epsilon(1e-14));
}
