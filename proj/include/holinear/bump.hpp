#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "holinear/common.hpp"
#include "holinear/errors.hpp"
#include "holinear/maps.hpp"
#include "holinear/regularity.hpp"

namespace holinear {

// Cubic Hermite step: 1 on [0,c], 2s^3 - 3s^2 + 1 on [c,1] with
// s = (t-c)/(1-c), 0 beyond. C^{1,1}, so C^{1,alpha} for every alpha < 1.
// The plateau and support values are returned as literal 1.0 and 0.0.
struct HermiteStep {
    double c;
    double value(double t) const {
        if (t <= c) return 1.0;
        if (t >= 1.0) return 0.0;
        double s = (t - c) / (1.0 - c);
        return ((2.0 * s - 3.0) * s) * s + 1.0;
    }
    double deriv(double t) const {
        if (t <= c || t >= 1.0) return 0.0;
        double s = (t - c) / (1.0 - c);
        return 6.0 * s * (s - 1.0) / (1.0 - c);
    }
    double max_abs_deriv() const { return 1.5 / (1.0 - c); }          // at s = 1/2
    double max_abs_second_deriv() const { return 6.0 / std::pow(1.0 - c, 2); }  // at s = 0, 1
};

// Unit bump on R^N with cube plateau B_c and cube support B_1 in the max
// norm: lambda(x) = prod_i psi(|x_i|). A radial max-norm profile would fail
// to be C^1 where the argmax coordinate switches, so the product form is used;
// plateau and support boxes are the same either way.
//
// Stated constants are certified upper bounds (they dominate every sampled
// estimate): with P1 = max|psi'|, P2 = max|psi''|,
//   Lip(lambda)      <= N P1                     (gradient l1 norm)
//   Lip(D lambda)    <= N (P2 + (N-1) P1^2)
//   Hol_a(D lambda)  <= interpolation of the two (see hol_dlambda).
struct BumpProfile {
    HermiteStep step;
    int dim = 1;
    double lip_lambda = 0.0;
    double lip_dlambda = 0.0;

    double value(const Vec& x) const {
        double p = 1.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double v = step.value(std::abs(x[i]));
            if (v == 0.0) return 0.0;
            p *= v;
        }
        return p;
    }

    // gradient as a row vector
    Vec gradient(const Vec& x) const {
        const int n = static_cast<int>(x.size());
        Vec g = Vec::Zero(n);
        for (int i = 0; i < n; ++i) {
            double d = step.deriv(std::abs(x[i]));
            if (d == 0.0) continue;
            double prod = d * (x[i] >= 0.0 ? 1.0 : -1.0);
            for (int j = 0; j < n; ++j)
                if (j != i) prod *= step.value(std::abs(x[j]));
            g[i] = prod;
        }
        return g;
    }

    // alpha-Hoelder constant of D lambda on all of E
    double hol_dlambda(double alpha) const {
        double ld = lip_dlambda;
        double m = lip_lambda;  // also bounds sup |D lambda|
        double interp = std::pow(ld, alpha) * std::pow(2.0 * m, 1.0 - alpha);
        double hull = std::max(ld * std::pow(2.0, 1.0 - alpha), 2.0 * m * std::pow(2.0, -alpha));
        return std::min(interp, hull);
    }

    double c1() const { return 1.0 + lip_lambda; }
    double c2(double alpha) const { return 1.0 + 2.0 * lip_lambda + 3.0 * hol_dlambda(alpha); }
};

inline BumpProfile make_bump(double c, int dim = 1) {
    require(c > 0.0 && c < 1.0, ErrorCode::BadPlateau, "plateau radius must lie in (0,1)");
    require(dim >= 1 && dim <= kMaxDim, ErrorCode::WrongDimension, "bump dimension");
    BumpProfile b;
    b.step = HermiteStep{c};
    b.dim = dim;
    double p1 = b.step.max_abs_deriv();
    double p2 = b.step.max_abs_second_deriv();
    b.lip_lambda = dim * p1;
    b.lip_dlambda = dim * (p2 + (dim - 1) * p1 * p1);
    return b;
}

// lambda_delta(x) = lambda(x/delta): Lip scales by 1/delta, Hol(D.) by
// 1/delta^{1+alpha}.
struct ScaledBump {
    BumpProfile profile;
    double delta = 1.0;

    double value(const Vec& x) const { return profile.value(x / delta); }
    Vec gradient(const Vec& x) const { return profile.gradient(x / delta) / delta; }
    double lip() const { return profile.lip_lambda / delta; }
    double hol_d(double alpha) const {
        return profile.hol_dlambda(alpha) / std::pow(delta, 1.0 + alpha);
    }
    double plateau_radius() const { return profile.step.c * delta; }
};

inline ScaledBump scale(const BumpProfile& profile, double delta) {
    require(delta > 0.0, ErrorCode::BadPrecondition, "bump scale must be positive");
    return ScaledBump{profile, delta};
}

// S = L + lambda_delta * f: equals T on the plateau, equals L outside B_delta,
// and carries certified Lipschitz / D-Hoelder growth factors.
struct GlobalizedMap {
    MapBundle bundle;          // global; nonlinear part lambda_delta * f
    ScaledBump bump;
    double delta = 0.0;        // support radius
    double C1 = 0.0;
    double C2 = 0.0;
    double lip_g = 0.0;        // certified bound on Lip(lambda_delta f, E)
    double hol_g = 0.0;        // certified bound on Hol(D(lambda_delta f), E)
    double ns = 0.0;           // nonlinear size N_s(S)
    int dim_u = 0;             // block split when known (0 = unknown)
    bool h_linear = false;

    double lip_S() const { return op_norm(bundle.linear().entries()) + lip_g; }
    double lip_S_inv() const { return 1.0 / (bundle.linear().min_norm() - lip_g); }
};

namespace detail {

inline bool numeric_axis_check(const MapBundle& g, int dim_u, double radius) {
    const int n = g.dim();
    for (int i = 0; i < 64; ++i) {
        Vec xu = Vec::Zero(n), xs = Vec::Zero(n);
        Vec h = radius * halton_point(static_cast<std::uint64_t>(i), n, 101);
        for (int d = 0; d < dim_u; ++d) xu[d] = h[d];
        for (int d = dim_u; d < n; ++d) xs[d] = h[d];
        if (inf_norm(g.nonlinear(xu)) > 1e-12) return false;
        if (inf_norm(g.nonlinear(xs)) > 1e-12) return false;
    }
    return true;
}

}  // namespace detail

// Globalization of a local map: g = lambda_delta * f with
//   Lip(g)    <= C1 Lip(f, B_delta),   Lip(g) <= delta^alpha C2 Hol(Df, B_delta),
//   Hol(Dg)   <= C2 Hol(Df, B_delta).
// `reg` holds (possibly empirical) constants of f on B_delta; when absent
// they are sampled here. dim_u > 0 requests the h-linearity check for the
// block splitting [0,dim_u) | [dim_u,n).
inline GlobalizedMap globalize(const MapBundle& map, const ScaledBump& bump,
                               std::optional<RegularityBundle> reg = std::nullopt,
                               double alpha = 0.5, int dim_u = 0) {
    require(bump.delta <= map.delta() * (1.0 + 1e-12) || map.global(), ErrorCode::DomainExceeded,
            "bump support must fit inside the map domain");
    require(bump.profile.dim == map.dim(), ErrorCode::WrongDimension,
            "bump dimension does not match the map");
    if (!reg) {
        SamplePlan plan;
        plan.radius = bump.delta;
        plan.seed = 1;
        reg = estimate_regularity(map, alpha, plan);
    }
    RegularityBundle certified = reg->inflated();
    double c1 = bump.profile.c1();
    double c2 = bump.profile.c2(alpha);
    double lip_f = std::min(certified.lip, certified.hol * std::pow(bump.delta, alpha));
    double lip_g = std::min(c1 * lip_f, std::pow(bump.delta, alpha) * c2 * certified.hol);
    double hol_g = c2 * certified.hol;

    double inv_gate = 0.5 / map.linear().inverse_norm();
    require(lip_g < inv_gate, ErrorCode::InvertibilityLost,
            "Lip(lambda_delta f) >= 1/(2|L^{-1}|): globalized map may fail to be invertible");

    ScaledBump bcopy = bump;
    MapBundle local = map;
    ClosedForm g;
    g.tag = "globalized:" + map.name();
    g.value = [bcopy, local](const Vec& x) {
        double r = inf_norm(x);
        if (r >= bcopy.delta) return Vec(Vec::Zero(x.size()));
        if (r <= bcopy.plateau_radius()) return local.nonlinear(x);
        return Vec(bcopy.value(x) * local.nonlinear(x));
    };
    g.jac = [bcopy, local](const Vec& x) {
        double r = inf_norm(x);
        if (r >= bcopy.delta) return Mat(Mat::Zero(x.size(), x.size()));
        if (r <= bcopy.plateau_radius()) return local.nonlinear_jacobian(x);
        Vec fx = local.nonlinear(x);
        Vec grad = bcopy.gradient(x);
        return Mat(bcopy.value(x) * local.nonlinear_jacobian(x) + fx * grad.transpose());
    };

    GlobalizedMap out{
        MapBundle(map.linear(), std::move(g), bump.delta, "globalized:" + map.name(), true),
        bump, bump.delta, c1, c2, lip_g, hol_g, 0.0, dim_u, false};

    bool f_zero = map.is_poly() && map.poly().terms()[0].empty();
    if (map.is_poly()) {
        f_zero = true;
        for (const auto& coord : map.poly().terms())
            if (!coord.empty()) f_zero = false;
    }
    out.ns = f_zero ? 0.0 : bump.delta;

    if (dim_u > 0) {
        out.h_linear = map.is_poly() ? map.poly().vanishes_on_axes(dim_u)
                                     : detail::numeric_axis_check(out.bundle, dim_u, bump.delta);
        require(out.h_linear, ErrorCode::NotHLinear,
                "globalize was asked for an h-linear extension of a map that is not h-linear");
    }
    return out;
}

// delta_n = delta * max(Lip(S)^n, Lip(S^{-1})^n, 1): radius containing the
// nonlinear support of S^n and S^{-n}. The max is clamped below by 1; with
// both Lipschitz constants < 1 the raw formula would shrink below the n = 0
// support, which is impossible.
inline double support_radius(double delta, double lipS, double lipSinv, int n) {
    double grow = std::max({std::pow(lipS, n), std::pow(lipSinv, n), 1.0});
    return delta * grow;
}

inline double support_growth(const GlobalizedMap& g, int n) {
    require(n >= 0, ErrorCode::BadPrecondition, "support_growth needs n >= 0");
    return support_radius(g.delta, g.lip_S(), g.lip_S_inv(), n);
}

// Certified partial-derivative envelopes of f_n = S^n - L^n for h-linear S:
//   |X_{n,x}|, |Y_{n,x}| <= Hol(Df_n) min(delta_n^alpha, |y|^alpha)
//   |X_{n,y}|, |Y_{n,y}| <= Hol(Df_n) min(delta_n^alpha, |x|^alpha)
struct AxisDerivativeBounds {
    double hol_dfn = 0.0;
    double delta_n = 0.0;
    double alpha = 0.0;
    double x_partial_bound(double y_norm) const {
        return hol_dfn * std::min(std::pow(delta_n, alpha), std::pow(y_norm, alpha));
    }
    double y_partial_bound(double x_norm) const {
        return hol_dfn * std::min(std::pow(delta_n, alpha), std::pow(x_norm, alpha));
    }
};

inline AxisDerivativeBounds axis_derivative_bounds(const GlobalizedMap& g, int n, double alpha) {
    require(g.h_linear, ErrorCode::NotHLinear, "axis derivative bounds need an h-linear map");
    require(n >= 1, ErrorCode::BadPrecondition, "power n >= 1");
    RegularityBundle base{alpha, g.lip_g, g.hol_g, g.delta, false};
    double lipS = std::max(1.0, g.lip_S());
    RegularityBundle fn = bound_power(base, g.bundle.linear(), n, lipS);
    return AxisDerivativeBounds{fn.hol, support_growth(g, n), alpha};
}

}  // namespace holinear
