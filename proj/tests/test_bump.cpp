#include "doctest.h"

#include "holinear/bump.hpp"

#include <cmath>

using namespace holinear;

namespace {

Vec vN(std::initializer_list<double> vals) {
    Vec v(static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (double x : vals) v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("hermite step: plateau, support, seam derivatives") {
    HermiteStep psi{0.5};
    CHECK(psi.value(0.0) == 1.0);
    CHECK(psi.value(0.5) == 1.0);
    CHECK(psi.value(1.0) == 0.0);
    CHECK(psi.value(2.0) == 0.0);
    CHECK(psi.value(0.75) == doctest::Approx(0.5));
    // C^1 seams: psi'(c) = psi'(1) = 0, one-sided mismatch below 1e-12
    for (double t : {0.5, 1.0}) {
        double h = 1e-7;
        double left = (psi.value(t) - psi.value(t - h)) / h;
        double right = (psi.value(t + h) - psi.value(t)) / h;
        CHECK(std::abs(left - right) < 1e-5);
        CHECK(psi.deriv(t) == 0.0);
    }
    CHECK(psi.max_abs_deriv() == doctest::Approx(3.0));           // (3/2)/(1-c)
    CHECK(psi.max_abs_second_deriv() == doctest::Approx(24.0));   // 6/(1-c)^2
}

TEST_CASE("make_bump: 1d constants match the closed form") {
    BumpProfile b = make_bump(0.5, 1);
    CHECK(b.lip_lambda == doctest::Approx(3.0));
    CHECK(b.lip_dlambda == doctest::Approx(24.0));
    CHECK(b.hol_dlambda(0.5) <= 24.0 * std::pow(2.0, 0.5) + 1e-12);
    CHECK(b.value(vN({0.0})) == 1.0);
    CHECK(b.value(vN({1.0})) == 0.0);
    CHECK(b.value(vN({-1.2})) == 0.0);
    CHECK_THROWS_AS(make_bump(0.0), Error);
    CHECK_THROWS_AS(make_bump(1.0), Error);
}

TEST_CASE("bump plateau and support are bit-exact in every dimension") {
    for (int dim : {1, 2, 3}) {
        BumpProfile b = make_bump(0.5, dim);
        for (int i = 0; i < 100; ++i) {
            Vec inside = 0.5 * halton_point(i, dim, 1);
            CHECK(b.value(inside) == 1.0);
            Vec outside = halton_point(i, dim, 2);
            outside[i % dim] = (i % 2 ? 1.0 : -1.0) * (1.0 + 0.5 * radical_inverse(i + 1, 2));
            CHECK(b.value(outside) == 0.0);
            CHECK(inf_norm(b.gradient(outside)) == 0.0);
        }
    }
}

TEST_CASE("stated bump constants dominate dense empirical estimates") {
    for (int dim : {1, 2, 3}) {
        BumpProfile b = make_bump(0.5, dim);
        double alpha = 0.6;
        double lip_emp = 0.0, lipd_emp = 0.0, hol_emp = 0.0;
        for (int i = 0; i < 4000; ++i) {
            Vec x = 1.1 * halton_point(i, dim, 3);
            Vec y = 1.1 * halton_point(i, dim, 4);
            Vec gx = b.gradient(x), gy = b.gradient(y);
            lip_emp = std::max(lip_emp, gx.cwiseAbs().sum());
            double sep = inf_norm(x - y);
            if (sep > 0) {
                double dd = (gx - gy).cwiseAbs().sum();
                lipd_emp = std::max(lipd_emp, dd / sep);
                hol_emp = std::max(hol_emp, dd / std::pow(sep, alpha));
            }
        }
        CHECK(lip_emp <= b.lip_lambda + 1e-12);
        CHECK(lipd_emp <= b.lip_dlambda + 1e-9);
        CHECK(hol_emp <= b.hol_dlambda(alpha) + 1e-9);
    }
}

TEST_CASE("bump is C1: gradient matches finite differences everywhere") {
    BumpProfile b = make_bump(0.5, 2);
    for (int i = 0; i < 400; ++i) {
        Vec x = 1.2 * halton_point(i, 2, 9);
        Vec g = b.gradient(x);
        for (int d = 0; d < 2; ++d) {
            Vec e = Vec::Zero(2);
            e[d] = 1e-6;
            double fd = (b.value(x + e) - b.value(x - e)) / 2e-6;
            CHECK(std::abs(fd - g[d]) < 1e-5);
        }
    }
    // tie plane of the max coordinate: the product profile stays C1 there
    for (double t : {0.6, 0.8, 0.95}) {
        Vec x = vN({t, t});
        Vec g = b.gradient(x);
        for (int d = 0; d < 2; ++d) {
            Vec e = Vec::Zero(2);
            e[d] = 1e-7;
            double fd = (b.value(x + e) - b.value(x - e)) / 2e-7;
            CHECK(std::abs(fd - g[d]) < 1e-5);
        }
    }
}

TEST_CASE("scale: scaling laws for Lip and Hol") {
    BumpProfile b = make_bump(0.5, 1);
    ScaledBump s1 = scale(b, 1.0);
    CHECK(s1.lip() == doctest::Approx(b.lip_lambda));
    CHECK(s1.hol_d(0.5) == doctest::Approx(b.hol_dlambda(0.5)));

    ScaledBump s01 = scale(b, 0.1);
    CHECK(s01.lip() == doctest::Approx(30.0));

    ScaledBump tiny = scale(b, 0.01);
    CHECK(tiny.hol_d(0.5) == doctest::Approx(b.hol_dlambda(0.5) * 1000.0));

    // sampled scaling check within 5%
    double emp = 0.0;
    for (int i = 0; i < 2000; ++i) {
        Vec x = 0.12 * halton_point(i, 1, 5);
        emp = std::max(emp, s01.gradient(x).cwiseAbs().sum());
    }
    CHECK(emp <= s01.lip() + 1e-12);
    CHECK(emp >= s01.lip() / 1.05);
}

TEST_CASE("globalize: plateau and far field are exact") {
    auto h = hartman_map(4, 3, 0.5, 1, 0.25);
    ScaledBump bump = scale(make_bump(0.5, 3), 0.002);
    GlobalizedMap g = globalize(h, bump, std::nullopt, 0.5, 2);
    CHECK(g.h_linear);
    CHECK(g.ns == doctest::Approx(0.002));

    for (int i = 0; i < 200; ++i) {
        Vec inside = 0.001 * halton_point(i, 3, 6);  // plateau radius c*delta
        CHECK(inf_norm(g.bundle.eval(inside) - h.eval(inside)) == 0.0);
        Vec outside = halton_point(i, 3, 7);
        outside[0] = 0.0025 + radical_inverse(i + 1, 3);
        CHECK(inf_norm(g.bundle.eval(outside) - g.bundle.linear().entries() * outside) == 0.0);
    }
}

TEST_CASE("globalize: f = 0 gives S = L with empty support") {
    Mat l = Mat::Zero(2, 2);
    l(0, 0) = 2.0;
    l(1, 1) = 0.5;
    MapBundle lin(Operator(l), PolyMap::zero(2), 1.0, "linear");
    GlobalizedMap g = globalize(lin, scale(make_bump(0.5, 2), 0.5), std::nullopt, 0.5, 1);
    CHECK(g.ns == 0.0);
    for (int i = 0; i < 50; ++i) {
        Vec x = 2.0 * halton_point(i, 2, 8);
        CHECK(inf_norm(g.bundle.eval(x) - l * x) == 0.0);
    }
}

TEST_CASE("globalize: certified growth factors dominate samples") {
    auto h = hartman_map(4, 3, 0.5, 1, 0.25);
    double alpha = 0.5;
    ScaledBump bump = scale(make_bump(0.5, 3), 0.002);
    SamplePlan plan;
    plan.radius = 0.002;
    plan.seed = 2;
    auto reg = estimate_regularity(h, alpha, plan);
    GlobalizedMap g = globalize(h, bump, reg, alpha, 2);

    double lip_emp = 0.0, hol_emp = 0.0;
    for (int i = 0; i < 3000; ++i) {
        Vec x = 0.0025 * halton_point(i, 3, 10);
        Vec y = 0.0025 * halton_point(i, 3, 11);
        Mat jx = g.bundle.nonlinear_jacobian(x);
        lip_emp = std::max(lip_emp, op_norm(jx));
        double sep = inf_norm(x - y);
        if (sep > 0)
            hol_emp = std::max(hol_emp,
                               op_norm(jx - g.bundle.nonlinear_jacobian(y)) / std::pow(sep, alpha));
    }
    CHECK(lip_emp <= g.lip_g + 1e-9);
    CHECK(hol_emp <= g.hol_g + 1e-9);
    CHECK(lip_emp <= g.C1 * reg.inflated().lip + 1e-9);
    CHECK(hol_emp <= g.C2 * reg.inflated().hol + 1e-9);
}

TEST_CASE("globalized h-linear map is h-linear on the whole space") {
    auto h = hartman_map(4, 3, 0.5, 1, 0.25);
    GlobalizedMap g = globalize(h, scale(make_bump(0.5, 3), 0.002), std::nullopt, 0.5, 2);
    for (int i = 0; i < 300; ++i) {
        Vec p = 3.0 * halton_point(i, 3, 12);
        Vec on_u = p, on_s = p;
        on_u[2] = 0.0;  // E^u x {0}
        on_s[0] = 0.0;
        on_s[1] = 0.0;  // {0} x E^s
        CHECK(inf_norm(g.bundle.eval(on_u) - g.bundle.linear().entries() * on_u) == 0.0);
        CHECK(inf_norm(g.bundle.eval(on_s) - g.bundle.linear().entries() * on_s) == 0.0);
    }
}

TEST_CASE("support_growth") {
    CHECK(support_radius(0.1, 2.1, 2.2, 0) == doctest::Approx(0.1));
    CHECK(support_radius(0.1, 2.1, 2.2, 3) == doctest::Approx(0.1 * 2.2 * 2.2 * 2.2));
    // both Lipschitz constants below 1: the clamp keeps delta_n >= delta
    CHECK(support_radius(0.1, 0.5, 0.8, 4) == doctest::Approx(0.1));

    auto h = hartman_map(4, 3, 0.5, 1, 0.25);
    GlobalizedMap g = globalize(h, scale(make_bump(0.5, 3), 0.002), std::nullopt, 0.5, 2);
    for (int n : {1, 2, 3}) {
        double dn = support_growth(g, n);
        // outside B_{delta_n} the n-th iterate is exactly linear
        Mat ln = Mat::Identity(3, 3);
        for (int k = 0; k < n; ++k) ln = g.bundle.linear().entries() * ln;
        for (int i = 0; i < 100; ++i) {
            Vec x = halton_point(i, 3, 13);
            x *= (dn * 1.01 + 1.0) / std::max(inf_norm(x), 1e-9);
            Vec it = x;
            for (int k = 0; k < n; ++k) it = g.bundle.eval(it);
            CHECK(inf_norm(it - ln * x) < 1e-9 * std::max(1.0, inf_norm(ln * x)));
        }
    }
}

TEST_CASE("axis derivative bounds hold on samples") {
    auto h = hartman_map(4, 3, 0.5, 1, 0.25);
    double alpha = 0.5;
    GlobalizedMap g = globalize(h, scale(make_bump(0.5, 3), 0.002), std::nullopt, alpha, 2);
    AxisDerivativeBounds cert = axis_derivative_bounds(g, 1, alpha);

    for (int i = 0; i < 10000; ++i) {
        Vec p = 0.0025 * halton_point(i, 3, 14);
        Mat dg = g.bundle.nonlinear_jacobian(p);
        double y_norm = std::abs(p[2]);                            // E^s part
        double x_norm = std::max(std::abs(p[0]), std::abs(p[1]));  // E^u part
        // x-partials of the nonlinear part: columns 0..1; y-partials: column 2
        double xpart = dg.block(0, 0, 3, 2).cwiseAbs().rowwise().sum().maxCoeff();
        double ypart = dg.col(2).cwiseAbs().maxCoeff();
        CHECK(xpart <= cert.x_partial_bound(y_norm) + 1e-9);
        CHECK(ypart <= cert.y_partial_bound(x_norm) + 1e-9);
    }

    // on the axis y = 0 the x-partials of the nonlinear part vanish
    for (int i = 0; i < 50; ++i) {
        Vec p = Vec::Zero(3);
        p[0] = 0.002 * radical_inverse(i + 1, 2);
        p[1] = 0.002 * radical_inverse(i + 1, 3);
        Mat dg = g.bundle.nonlinear_jacobian(p);
        CHECK(dg.block(0, 0, 3, 2).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(axis_derivative_bounds(g, 0, alpha), Error);
}
