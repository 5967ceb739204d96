#include "doctest.h"

#include "holinear/regularity.hpp"

#include <cmath>

using namespace holinear;

namespace {

MapBundle poly1d(double l, std::vector<PolyTerm> terms, double delta) {
    Mat lm(1, 1);
    lm << l;
    std::vector<std::vector<PolyTerm>> t(1);
    t[0] = std::move(terms);
    return MapBundle(Operator(lm), PolyMap(1, std::move(t)), delta, "poly1d");
}

SamplePlan plan_for(double radius, std::uint64_t seed = 0, int pts = 512, int pairs = 2048) {
    SamplePlan p;
    p.radius = radius;
    p.seed = seed;
    p.n_points = pts;
    p.n_pairs = pairs;
    return p;
}

// random small polynomial bundle for the soundness sweeps
MapBundle random_poly(SplitMix64& rng, int dim, double lscale, double coeff, double delta) {
    Mat l = Mat::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) l(i, i) = lscale * (0.7 + 0.3 * rng.uniform());
    std::vector<std::vector<PolyTerm>> terms(dim);
    for (int i = 0; i < dim; ++i)
        for (int t = 0; t < 2; ++t) {
            std::vector<int> e(dim, 0);
            int total = 2 + static_cast<int>(rng.next() % 2);
            for (int k = 0; k < total; ++k) e[rng.next() % dim]++;
            terms[i].push_back(PolyTerm{coeff * rng.symmetric(), e});
        }
    return MapBundle(Operator(l), PolyMap(dim, terms), delta, "rand");
}

}  // namespace

TEST_CASE("estimate_lip: zero, quadratic, hartman") {
    auto zero = poly1d(0.5, {}, 1.0);
    CHECK(estimate_lip(zero, plan_for(0.5)).lip == 0.0);

    // f(x) = 0.1 x^2 on [-0.5, 0.5]: |Df| = 0.2|x|, sup 0.1 (calculus oracle)
    auto quad = poly1d(0.5, {PolyTerm{0.1, {2}}}, 0.5);
    CHECK(estimate_lip(quad, plan_for(0.5)).lip == doctest::Approx(0.1).epsilon(1e-12));

    // hartman row 2 of Df is (b e z, 0, b e x): max row sum over the inf-ball
    // of radius 0.2 is b e (0.2 + 0.2) = 1.2, attained at the cube corners
    auto h = hartman_map(3.5, 3.0, 0.5, 1.0, 0.25);
    double dense = 0.0;
    for (double x = -0.2; x <= 0.201; x += 0.01)
        for (double z = -0.2; z <= 0.201; z += 0.01)
            dense = std::max(dense, 3.0 * (std::abs(x) + std::abs(z)));
    CHECK(dense == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(estimate_lip(h, plan_for(0.2)).lip == doctest::Approx(1.2).epsilon(1e-9));
}

TEST_CASE("estimate_lip rejects radius beyond the domain") {
    auto quad = poly1d(0.5, {PolyTerm{0.1, {2}}}, 0.3);
    CHECK_THROWS_AS(estimate_lip(quad, plan_for(0.5)), Error);
}

TEST_CASE("estimate_holder: linear, quadratic alpha=1, sternberg blow-up") {
    auto zero = poly1d(0.5, {}, 1.0);
    CHECK(estimate_holder(zero, 0.5, plan_for(0.5)).hol == 0.0);

    // f(x) = x^2 with alpha = 1 on B_1: Df = 2x, Lipschitz constant exactly 2
    auto sq = poly1d(0.5, {PolyTerm{1.0, {2}}}, 1.0);
    CHECK(estimate_holder(sq, 1.0, plan_for(1.0)).hol == doctest::Approx(2.0).epsilon(1e-9));

    // the sternberg derivative is not alpha-Hoelder at 0: the estimate at
    // radius 1e-2 vs 1e-4 grows by more than a factor 2 for alpha = 0.5
    auto st = sternberg_map(0.5);
    double h2 = estimate_holder(st, 0.5, plan_for(1e-2)).hol;
    double h4 = estimate_holder(st, 0.5, plan_for(1e-4)).hol;
    CHECK(h4 > 2.0 * h2);
}

TEST_CASE("estimate_holder is monotone in sample count") {
    auto h = hartman_map(4, 3, 0.5, 1);
    double prev = 0.0;
    for (int pairs : {128, 512, 2048}) {
        double cur = estimate_holder(h, 0.5, plan_for(0.2, 3, 256, pairs)).hol;
        CHECK(cur >= prev - 1e-15);
        prev = cur;
    }
}

TEST_CASE("combined bundle satisfies the mean-value inequality") {
    auto h = hartman_map(4, 3, 0.5, 1);
    auto b = estimate_regularity(h, 0.5, plan_for(0.2, 9));
    CHECK(b.lip <= b.hol * std::pow(b.domain_radius, b.alpha) + 1e-12);
}

TEST_CASE("remark: adding a linear part leaves D-Hoelder data unchanged") {
    SplitMix64 rng(31);
    auto m1 = random_poly(rng, 2, 0.5, 0.3, 0.5);
    Mat shift = Mat::Identity(2, 2) * 1.7;
    MapBundle m2(Operator(Mat(m1.linear().entries() + shift)), m1.poly(), m1.delta(), "shifted");
    for (int i = 0; i < 200; ++i) {
        Vec x = 0.4 * halton_point(i, 2, 1);
        Vec y = 0.4 * halton_point(i, 2, 2);
        double q1 = op_norm(m1.jacobian(x) - m1.jacobian(y));
        double q2 = op_norm(m2.jacobian(x) - m2.jacobian(y));
        CHECK(std::abs(q1 - q2) <= 1e-12 * std::max(1.0, q1));
    }
}

TEST_CASE("fit_holder_exponent recovers planted exponents") {
    auto planted = [](double beta, std::uint64_t seed) {
        std::vector<std::pair<Vec, Mat>> samples;
        for (int i = 0; i < 320; ++i) {
            Vec x = halton_point(i, 1, seed);
            Mat d(1, 1);
            d(0, 0) = std::pow(std::abs(x[0]), beta) * (x[0] >= 0 ? 1.0 : -1.0);
            samples.emplace_back(x, d);
        }
        return fit_holder_exponent(samples, {1e-4, 2.0});
    };
    HolderFit lin = planted(1.0, 5);
    CHECK(std::abs(lin.beta_hat - 1.0) < 0.02);
    for (double beta : {0.3, 0.5, 0.8}) {
        HolderFit f = planted(beta, 11);
        CHECK(std::abs(f.beta_hat - beta) < 0.05);
        CHECK(f.r2 >= 0.9);
    }
}

TEST_CASE("fit_holder_exponent: constant field gives the +inf sentinel") {
    std::vector<std::pair<Vec, Mat>> samples;
    for (int i = 0; i < 64; ++i) samples.emplace_back(halton_point(i, 1, 0), Mat::Identity(1, 1));
    HolderFit f = fit_holder_exponent(samples, {1e-4, 2.0});
    CHECK(f.degenerate_constant);
    CHECK(std::isinf(f.beta_hat));
    CHECK(f.r2 == 1.0);
}

TEST_CASE("fit_holder_exponent requires 32 samples") {
    std::vector<std::pair<Vec, Mat>> samples;
    for (int i = 0; i < 8; ++i) samples.emplace_back(halton_point(i, 1, 0), Mat::Identity(1, 1));
    CHECK_THROWS_AS(fit_holder_exponent(samples, {1e-4, 2.0}), Error);
}

TEST_CASE("bound_compose") {
    RegularityBundle ident{0.5, 1.0, 0.0, 1.0, false};
    RegularityBundle b{0.5, 0.4, 1.3, 1.0, false};
    auto same = bound_compose(b, ident, b.lip, 1.0);
    CHECK(same.lip == doctest::Approx(b.lip));
    CHECK(same.hol == doctest::Approx(b.hol));

    RegularityBundle bs{0.5, 2.0, 1.0, 1.0, false};
    RegularityBundle bt{0.5, 3.0, 0.5, 1.0, false};
    auto c = bound_compose(bs, bt, 2.0, 3.0);
    CHECK(c.lip == doctest::Approx(6.0));
    CHECK(c.hol == doctest::Approx(2.0 * 0.5 + std::pow(3.0, 1.5) * 1.0));

    RegularityBundle lin1{0.5, 2.0, 0.0, 1.0, false}, lin2{0.5, 3.0, 0.0, 1.0, false};
    CHECK(bound_compose(lin1, lin2, 2.0, 3.0).hol == 0.0);

    RegularityBundle wrong{0.7, 1.0, 1.0, 1.0, false};
    CHECK_THROWS_AS(bound_compose(b, wrong, 1.0, 1.0), Error);
}

TEST_CASE("bound_inverse") {
    Operator L(Mat(2.0 * Mat::Identity(1, 1)));
    RegularityBundle lin{0.5, 0.0, 0.0, 1.0, false};
    auto inv = bound_inverse(lin, L);
    CHECK(inv.lip == doctest::Approx(0.5));  // 1/m_L = |L^{-1}|
    CHECK(inv.hol == 0.0);

    RegularityBundle b{0.5, 0.5, 1.0, 1.0, false};
    auto i2 = bound_inverse(b, L);
    CHECK(i2.lip == doctest::Approx(1.0 / 1.5).epsilon(1e-12));
    CHECK(i2.hol == doctest::Approx(std::pow(1.5, -2.5)).epsilon(1e-12));

    RegularityBundle boundary{0.5, 2.0, 1.0, 1.0, false};
    CHECK_THROWS_AS(bound_inverse(boundary, L), Error);
}

TEST_CASE("bound_power") {
    Operator L(Mat(2.0 * Mat::Identity(1, 1)));
    RegularityBundle b{0.5, 0.1, 0.7, 1.0, false};
    auto p1 = bound_power(b, L, 1, 2.0);
    CHECK(p1.lip == doctest::Approx(b.lip));
    CHECK(p1.hol == doctest::Approx(b.hol));

    auto p3 = bound_power(b, L, 3, 2.0);
    CHECK(p3.lip == doctest::Approx(3 * 0.1 * 4.0));
    CHECK(p3.hol == doctest::Approx(3 * 0.7 * std::pow(2.0, 3.0)));

    RegularityBundle zero{0.5, 0.0, 0.0, 1.0, false};
    for (int m : {1, 2, 5}) {
        auto p = bound_power(zero, L, m, 2.0);
        CHECK(p.lip == 0.0);
        CHECK(p.hol == 0.0);
    }
    CHECK_THROWS_AS(bound_power(b, L, 2, 0.9), Error);
}

TEST_CASE("inverse_diff_bound") {
    Operator a(Mat(2.0 * Mat::Identity(1, 1))), b(Mat(4.0 * Mat::Identity(1, 1)));
    CHECK(inverse_diff_bound(a, b) == doctest::Approx(0.25));
    CHECK(std::abs(0.5 - 0.25) <= inverse_diff_bound(a, b) + 1e-15);

    SplitMix64 rng(100);
    for (int trial = 0; trial < 100; ++trial) {
        Mat m1(3, 3), m2(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                m1(i, j) = (i == j ? 2.0 : 0.0) + 0.5 * rng.symmetric();
                m2(i, j) = (i == j ? 2.0 : 0.0) + 0.5 * rng.symmetric();
            }
        Operator h1(m1), h2(m2);
        double lhs = op_norm(h1.inverse() - h2.inverse());
        CHECK(lhs <= inverse_diff_bound(h1, h2) + 1e-12);
    }
}

TEST_CASE("soundness: analytic bounds dominate empirical estimates") {
    SplitMix64 rng(2718);
    int done = 0;
    for (int trial = 0; trial < 200 && done < 20; ++trial) {
        auto mS = random_poly(rng, 2, 0.6, 0.2, 1.0);
        auto mT = random_poly(rng, 2, 0.6, 0.2, 1.0);
        double r = 0.3;
        auto plan = plan_for(r, trial + 1, 256, 1024);
        auto bS = estimate_regularity(mS, 0.5, plan);
        auto bT = estimate_regularity(mT, 0.5, plan);
        double lipS_full = op_norm(mS.linear().entries()) + bS.lip;
        double lipT_full = op_norm(mT.linear().entries()) + bT.lip;
        // keep the composition inside the sampled domain
        if (lipT_full * r > 0.9) continue;
        ++done;

        auto comp_bound = bound_compose(bS.inflated(), bT.inflated(), lipS_full, lipT_full);
        double emp = 0.0;
        auto pairs = detail::sup_sample_pairs(2, plan);
        MapBundle gS = mS.as_global(), gT = mT.as_global();
        for (const auto& [x, y] : pairs) {
            if (inf_norm(x - y) == 0.0) continue;
            Mat dc_x = gS.jacobian(gT.eval(x)) * gT.jacobian(x);
            Mat dc_y = gS.jacobian(gT.eval(y)) * gT.jacobian(y);
            emp = std::max(emp, op_norm(dc_x - dc_y) / std::pow(inf_norm(x - y), 0.5));
        }
        CHECK(emp <= comp_bound.hol + 1e-9);

        // inverse side: the lemma bounds Hol(DT^{-1}) on V = T(B_r); sample
        // inside B_{(m_L - lip) r} so every preimage stays in B_r
        double m_L = mS.linear().min_norm();
        if (bS.lip < 0.8 * m_L) {
            auto ib = bound_inverse(bS.inflated(), mS.linear());
            double rv = 0.9 * (m_L - bS.lip) * r;
            auto vplan = plan_for(rv, trial + 2, 128, 512);
            double empi = 0.0;
            for (const auto& [x, y] : detail::sup_sample_pairs(2, vplan)) {
                if (inf_norm(x - y) == 0.0) continue;
                Vec wx = invert_point(gS, x, 1e-13);
                Vec wy = invert_point(gS, y, 1e-13);
                if (inf_norm(wx) > r || inf_norm(wy) > r) continue;
                Mat dinv_x = gS.jacobian(wx).inverse();
                Mat dinv_y = gS.jacobian(wy).inverse();
                empi = std::max(empi, op_norm(dinv_x - dinv_y) / std::pow(inf_norm(x - y), 0.5));
            }
            CHECK(empi <= ib.hol + 1e-9);
        }
    }
    CHECK(done >= 10);
}
