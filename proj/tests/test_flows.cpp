#include "doctest.h"

#include "holinear/flows.hpp"
#include "holinear/pipeline.hpp"

#include <cmath>

using namespace holinear;

namespace {

VectorFieldDef diag_field(std::initializer_list<double> rates) {
    int n = static_cast<int>(rates.size());
    Mat a = Mat::Zero(n, n);
    int i = 0;
    for (double r : rates) a(i, i) = r, ++i;
    return VectorFieldDef::linear(a);
}

}  // namespace

TEST_CASE("expm agrees with closed forms") {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = 1.0;
    a(1, 1) = -1.0;
    Mat e = expm(a);
    CHECK(e(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-13));
    CHECK(e(1, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
    // rotation generator
    Mat r = Mat::Zero(2, 2);
    r(0, 1) = -2.0;
    r(1, 0) = 2.0;
    Mat er = expm(r);
    CHECK(er(0, 0) == doctest::Approx(std::cos(2.0)).epsilon(1e-12));
    CHECK(er(1, 0) == doctest::Approx(std::sin(2.0)).epsilon(1e-12));
}

TEST_CASE("time_one_map: linear field equals the matrix exponential") {
    auto f = diag_field({1.0, -1.0});
    TimeOneMap t = time_one_map(f, 1e-3);
    Mat oracle = expm(f.linear_part());
    CHECK(op_norm(t.linearization() - oracle) < 1e-9);

    // the motivating three dimensional field xdot = x, ydot = 1.5 y, zdot = -z
    auto f3 = diag_field({1.0, 1.5, -1.0});
    TimeOneMap t3 = time_one_map(f3, 1e-3);
    auto eig = eigenvalues_of(t3.linearization());
    std::vector<double> mods;
    for (auto z : eig) mods.push_back(std::abs(z));
    std::sort(mods.begin(), mods.end());
    CHECK(mods[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
    CHECK(mods[1] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
    CHECK(mods[2] == doctest::Approx(std::exp(1.5)).epsilon(1e-9));
}

TEST_CASE("time_one_map: zero field is the identity") {
    std::vector<std::vector<FieldTerm>> none(2);
    VectorFieldDef f(2, none);
    TimeOneMap t = time_one_map(f, 0.25);
    Vec x(2);
    x << 0.3, -0.7;
    CHECK(inf_norm(t.eval(x) - x) == 0.0);
    CHECK(op_norm(t.linearization() - Mat::Identity(2, 2)) == 0.0);
}

TEST_CASE("time_one_map bundle fixes the origin exactly") {
    std::vector<std::vector<FieldTerm>> terms(2);
    terms[0].push_back(FieldTerm{1.0, {1, 0}});
    terms[0].push_back(FieldTerm{0.3, {0, 2}});
    terms[1].push_back(FieldTerm{-0.5, {0, 1}});
    VectorFieldDef f(2, terms);
    TimeOneMap t = time_one_map(f, 1e-2);
    MapBundle b = t.bundle(0.3);
    CHECK(inf_norm(b.eval(Vec::Zero(2))) == 0.0);
    CHECK(op_norm(b.nonlinear_jacobian(Vec::Zero(2))) < 1e-14);
    // exp correspondence within integrator tolerance
    CHECK(op_norm(b.linear().entries() - expm(f.linear_part())) < 1e-8);
}

TEST_CASE("integrator order: halving h cuts the error ~16x") {
    auto f = diag_field({1.0, -0.7});
    Mat oracle = expm(f.linear_part());
    Vec x0(2);
    x0 << 0.21, -0.13;
    Vec exact = oracle * x0;
    auto err = [&](double h) { return inf_norm(integrate_time_one(f, h, x0) - exact); };
    double e1 = err(1.0 / 8.0), e2 = err(1.0 / 16.0);
    CHECK(e2 > 0.0);
    CHECK(e1 / e2 > 10.0);
    CHECK(e1 / e2 < 24.0);
}

TEST_CASE("step too large is rejected") {
    Mat stiff = Mat::Zero(1, 1);
    stiff(0, 0) = 30.0;
    CHECK_THROWS_AS(time_one_map(VectorFieldDef::linear(stiff), 1.0), Error);
}

TEST_CASE("classify_critical_point") {
    SUBCASE("diag(1, 2, -1): smoothness budget from the gap") {
        auto rep = classify_critical_point(diag_field({1.0, 2.0, -1.0}), 0.5);
        CHECK(rep.cls == HypClass::saddle);
        CHECK(rep.a1 == doctest::Approx(1.0));
        CHECK(rep.b1 == doctest::Approx(-1.0));
        // (1 + alpha) a1 < a2 needs alpha < 1; the contracting clause is vacuous
        CHECK(rep.max_alpha == doctest::Approx(1.0 - 1e-9).epsilon(1e-6));
        CHECK(rep.dim_center == 2);
    }
    SUBCASE("saddle focus: center is the whole space") {
        std::vector<std::vector<FieldTerm>> terms(3);
        Mat a = Mat::Zero(3, 3);
        a(0, 0) = -0.5;
        a(0, 1) = -2.0;
        a(1, 0) = 2.0;
        a(1, 1) = -0.5;
        a(2, 2) = 1.0;
        auto rep = classify_critical_point(VectorFieldDef::linear(a), 0.5);
        CHECK(rep.cls == HypClass::saddle);
        CHECK(rep.dim_center == 3);
        CHECK(rep.bicircular);
        CHECK(rep.bicircular_on_center);
    }
    SUBCASE("zero real part rejected") {
        Mat a = Mat::Zero(2, 2);
        a(0, 1) = -1.0;
        a(1, 0) = 1.0;  // purely imaginary pair
        CHECK_THROWS_AS(classify_critical_point(VectorFieldDef::linear(a), 0.5), Error);
    }
}

TEST_CASE("shilnikov_check") {
    auto field_with = [](double re, double im, double c) {
        Mat a = Mat::Zero(3, 3);
        a(0, 0) = re;
        a(0, 1) = -im;
        a(1, 0) = im;
        a(1, 1) = re;
        a(2, 2) = c;
        return VectorFieldDef::linear(a);
    };
    auto yes = shilnikov_check(field_with(-0.5, 2.0, 1.0));
    CHECK(yes.satisfied());
    CHECK(yes.a == doctest::Approx(-0.5));
    CHECK(yes.c == doctest::Approx(1.0));

    auto no_sum = shilnikov_check(field_with(-1.5, 2.0, 1.0));
    CHECK_FALSE(no_sum.satisfied());
    CHECK(no_sum.has_complex_pair);
    CHECK_FALSE(no_sum.sum_positive);

    auto all_real = shilnikov_check(diag_field({1.0, -0.5, -0.2}));
    CHECK_FALSE(all_real.satisfied());
    CHECK_FALSE(all_real.has_complex_pair);

    CHECK_THROWS_AS(shilnikov_check(diag_field({1.0, -1.0})), Error);
}

TEST_CASE("continue_fixed_points") {
    SUBCASE("zero perturbation keeps the origin") {
        ParamFamily fam;
        fam.lambdas = {0.0, 0.05, 0.1};
        fam.factory = [](double) {
            FamilyMap fm;
            fm.L = Operator(Mat(0.5 * Mat::Identity(1, 1)));
            fm.f = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
            fm.df = [](const Vec& x) { return Mat(Mat::Zero(x.size(), x.size())); };
            return fm;
        };
        for (const Vec& p : continue_fixed_points(fam, 0.5)) CHECK(inf_norm(p) == 0.0);
    }
    SUBCASE("1d family against the quadratic-formula oracle") {
        // T_l(x) = 0.5 x + l + 0.1 x^2: fixed point solves 0.1 x^2 - 0.5 x + l = 0
        auto factory = [](double l) {
            FamilyMap fm;
            fm.L = Operator(Mat(0.5 * Mat::Identity(1, 1)));
            fm.f = [l](const Vec& x) {
                Vec out(1);
                out[0] = l + 0.1 * x[0] * x[0];
                return out;
            };
            fm.df = [](const Vec& x) {
                Mat out(1, 1);
                out(0, 0) = 0.2 * x[0];
                return out;
            };
            return fm;
        };
        ParamFamily fam;
        fam.lambdas = {0.0, 0.01, 0.05, 0.1};
        fam.factory = factory;
        auto fps = continue_fixed_points(fam, 0.5);
        // quadratic-formula oracle: 0.1 x^2 - 0.5 x + l = 0
        auto oracle = [](double l) { return (0.5 - std::sqrt(0.25 - 0.4 * l)) / 0.2; };
        for (std::size_t i = 0; i < fam.lambdas.size(); ++i)
            CHECK(fps[i][0] == doctest::Approx(oracle(fam.lambdas[i])).epsilon(1e-10));
        CHECK(fps[1][0] == doctest::Approx(0.020082).epsilon(1e-4));

        // grid refinement halves the neighbor distance
        auto spread = [&](int n) {
            ParamFamily g;
            g.factory = factory;
            for (int i = 0; i <= n; ++i) g.lambdas.push_back(0.1 * i / n);
            auto ps = continue_fixed_points(g, 0.5);
            double worst = 0.0;
            for (std::size_t i = 0; i + 1 < ps.size(); ++i)
                worst = std::max(worst, inf_norm(ps[i + 1] - ps[i]));
            return worst;
        };
        double s1 = spread(10), s2 = spread(20);
        CHECK(s2 < 0.6 * s1);
        CHECK(s2 > 0.4 * s1);
    }
    SUBCASE("contraction perturbation bound") {
        auto factory = [](double l) {
            FamilyMap fm;
            fm.L = Operator(Mat(0.5 * Mat::Identity(1, 1)));
            fm.f = [l](const Vec& x) {
                Vec out(1);
                out[0] = l + 0.1 * x[0] * x[0];
                return out;
            };
            fm.df = [](const Vec& x) {
                Mat out(1, 1);
                out(0, 0) = 0.2 * x[0];
                return out;
            };
            return fm;
        };
        ParamFamily fam;
        fam.factory = factory;
        for (int i = 0; i <= 10; ++i) fam.lambdas.push_back(0.01 * i);
        auto fps = continue_fixed_points(fam, 0.5);
        // |p - p'| <= (1 - eps1)^{-1} |G_l(p) - G_l'(p)| with eps1 ~ |DG|
        for (std::size_t i = 0; i + 1 < fam.lambdas.size(); ++i) {
            // |DG| = 2 * 0.2 |p| <= 0.4 * 0.25 on the continuation ball
            double eps1 = 0.4 * 0.25;
            Vec p = fps[i];
            double glp = 2.0 * (fam.lambdas[i + 1] + 0.1 * p[0] * p[0]);
            double gl = 2.0 * (fam.lambdas[i] + 0.1 * p[0] * p[0]);
            double bound = std::abs(glp - gl) / (1.0 - eps1);
            CHECK(inf_norm(fps[i + 1] - fps[i]) <= bound + 1e-12);
        }
    }
}

TEST_CASE("pipeline: linear flow linearizes to the identity") {
    auto f = diag_field({-1.0});
    TimeOneMap t = time_one_map(f, 1e-2);
    MapBundle b = t.bundle(0.3);
    PipelineOptions opts;
    opts.alpha = 0.5;
    opts.n_samples = 200;
    PipelineResult res = run_pipeline(b, opts);
    CHECK(res.verification.converged);
    CHECK(res.verification.residual_sup < 1e-9);
    for (int i = 0; i < 20; ++i) {
        Vec x(1);
        x << res.effective_radius * (2.0 * radical_inverse(i + 1, 2) - 1.0);
        CHECK(inf_norm(res.conjugacy->eval(x) - x) < 1e-12);
    }
}

TEST_CASE("sweep_linearizations: hartman family tracks the closed form") {
    // b(l) = 3 + l: coefficient of xz in R is b/(b - 2)
    auto factory = [](double l) {
        FamilyMap fm;
        auto h = hartman_map(4.0, 3.0 + l, 0.5, 1.0, 0.25);
        fm.L = h.linear();
        MapBundle hb = h.as_global();
        fm.f = [hb](const Vec& x) { return hb.nonlinear(x); };
        fm.df = [hb](const Vec& x) { return hb.nonlinear_jacobian(x); };
        return fm;
    };
    ParamFamily fam;
    fam.factory = factory;
    for (int i = 0; i <= 4; ++i) fam.lambdas.push_back(0.1 * i / 4);

    PipelineOptions opts;
    opts.alpha = 0.5;
    opts.n_samples = 300;
    opts.delta_cap = 1e-4;
    SweepResult sw = sweep_linearizations(fam, 0.5, opts, 0.25);
    REQUIRE(sw.entries.size() == 5);
    for (const auto& e : sw.entries) {
        REQUIRE(e.ok);
        CHECK(inf_norm(e.fixed_point) == 0.0);
        double b = 3.0 + e.lambda;
        double expect = b / (b - 2.0);
        // probe deep in the plateau where the orbit lingers >= 45 steps
        double d = e.plan->delta;
        Vec probe(3);
        probe << 0.5 * d * std::pow(4.0, -45), 0.0, 0.5 * d;
        Vec rz = e.conjugacy->eval(probe);
        double coeff = (rz[1] - probe[1]) / (probe[0] * probe[2]);
        CHECK(coeff == doctest::Approx(expect).epsilon(1e-6));
    }
    for (double nd : sw.neighbor_dist) CHECK(std::isfinite(nd));
}
