#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "holinear/common.hpp"
#include "holinear/errors.hpp"
#include "holinear/spectral.hpp"

namespace holinear {

inline constexpr int kMaxPolyDegree = 6;

// Monomial nonlinearity: per output coordinate a list of (coefficient,
// exponent multi-index). Terms of total degree <= 1 are rejected; the linear
// part lives in the Operator, so f(0) = 0 and Df(0) = 0 hold by construction.
struct PolyTerm {
    double coeff = 0.0;
    std::vector<int> exponents;
    int degree() const {
        int d = 0;
        for (int e : exponents) d += e;
        return d;
    }
};

class PolyMap {
  public:
    PolyMap(int dim, std::vector<std::vector<PolyTerm>> terms)
        : dim_(dim), terms_(std::move(terms)) {
        require(dim >= 1 && dim <= kMaxDim, ErrorCode::WrongDimension, "poly map dimension");
        require(static_cast<int>(terms_.size()) == dim, ErrorCode::ParseError,
                "terms must list one vector per output coordinate");
        for (const auto& coord : terms_)
            for (const auto& t : coord) {
                require(static_cast<int>(t.exponents.size()) == dim, ErrorCode::ParseError,
                        "exponent multi-index length mismatch");
                require(t.degree() >= 2, ErrorCode::ParseError,
                        "terms of total degree <= 1 belong to the linear part");
                require(t.degree() <= kMaxPolyDegree, ErrorCode::ParseError,
                        "monomial degree exceeds cap");
                for (int e : t.exponents)
                    require(e >= 0, ErrorCode::ParseError, "negative exponent");
            }
    }

    static PolyMap zero(int dim) { return PolyMap(dim, std::vector<std::vector<PolyTerm>>(dim)); }

    int dim() const { return dim_; }
    const std::vector<std::vector<PolyTerm>>& terms() const { return terms_; }

    Vec eval(const Vec& x) const {
        Vec out(dim_);
        for (int i = 0; i < dim_; ++i) {
            KahanSum acc;
            for (const auto& t : terms_[i]) acc.add(t.coeff * monomial(x, t.exponents));
            out[i] = acc.value();
        }
        return out;
    }

    Mat jacobian(const Vec& x) const {
        Mat out = Mat::Zero(dim_, dim_);
        for (int i = 0; i < dim_; ++i)
            for (const auto& t : terms_[i])
                for (int j = 0; j < dim_; ++j) {
                    if (t.exponents[j] == 0) continue;
                    KahanSum acc;
                    acc.add(out(i, j));
                    acc.add(t.coeff * t.exponents[j] * monomial_partial(x, t.exponents, j));
                    out(i, j) = acc.value();
                }
        return out;
    }

    // true when every monomial vanishes on both coordinate blocks of the
    // splitting [0, cut) | [cut, dim): h-linearity can be read off symbolically
    bool vanishes_on_axes(int cut) const {
        for (const auto& coord : terms_)
            for (const auto& t : coord) {
                bool touches_u = false, touches_s = false;
                for (int j = 0; j < dim_; ++j)
                    if (t.exponents[j] > 0) (j < cut ? touches_u : touches_s) = true;
                if (!(touches_u && touches_s)) return false;
            }
        return true;
    }

  private:
    static double monomial(const Vec& x, const std::vector<int>& e) {
        double p = 1.0;
        for (std::size_t j = 0; j < e.size(); ++j)
            for (int k = 0; k < e[j]; ++k) p *= x[static_cast<Eigen::Index>(j)];
        return p;
    }
    static double monomial_partial(const Vec& x, const std::vector<int>& e, int j) {
        double p = 1.0;
        for (std::size_t l = 0; l < e.size(); ++l) {
            int pow = e[l] - (static_cast<int>(l) == j ? 1 : 0);
            for (int k = 0; k < pow; ++k) p *= x[static_cast<Eigen::Index>(l)];
        }
        return p;
    }

    int dim_;
    std::vector<std::vector<PolyTerm>> terms_;
};

// Closed-form nonlinearity with exact value and Jacobian routines. Used for
// the named builtins and for pipeline-internal conjugated maps.
struct ClosedForm {
    std::string tag;
    std::function<Vec(const Vec&)> value;
    std::function<Mat(const Vec&)> jac;
};

// T = L + f on the ball B_delta(0) in the max norm. `global` bundles are
// defined on all of E (the bump-globalized maps).
class MapBundle {
  public:
    MapBundle(Operator L, PolyMap f, double delta, std::string name, bool global = false)
        : L_(std::move(L)), f_(std::move(f)), delta_(delta), name_(std::move(name)),
          global_(global) {
        require(std::get<PolyMap>(f_).dim() == L_.dim(), ErrorCode::WrongDimension,
                "nonlinear part dimension mismatch");
        require(delta_ > 0.0, ErrorCode::BadPrecondition, "domain radius must be positive");
    }

    MapBundle(Operator L, ClosedForm f, double delta, std::string name, bool global = false)
        : L_(std::move(L)), f_(std::move(f)), delta_(delta), name_(std::move(name)),
          global_(global) {
        require(delta_ > 0.0, ErrorCode::BadPrecondition, "domain radius must be positive");
        Vec zero = Vec::Zero(L_.dim());
        require(inf_norm(nonlinear(zero)) <= 1e-12, ErrorCode::BadPrecondition,
                "closed form must fix the origin");
        require(op_norm(nonlinear_jacobian(zero)) <= 1e-12, ErrorCode::BadPrecondition,
                "closed form must have vanishing derivative at the origin");
    }

    int dim() const { return L_.dim(); }
    const Operator& linear() const { return L_; }
    double delta() const { return delta_; }
    const std::string& name() const { return name_; }
    bool global() const { return global_; }
    bool is_poly() const { return std::holds_alternative<PolyMap>(f_); }
    const PolyMap& poly() const { return std::get<PolyMap>(f_); }

    Vec nonlinear(const Vec& x) const {
        if (const auto* p = std::get_if<PolyMap>(&f_)) return p->eval(x);
        return std::get<ClosedForm>(f_).value(x);
    }
    Mat nonlinear_jacobian(const Vec& x) const {
        if (const auto* p = std::get_if<PolyMap>(&f_)) return p->jacobian(x);
        return std::get<ClosedForm>(f_).jac(x);
    }

    void check_domain(const Vec& x) const {
        require(global_ || inf_norm(x) <= delta_ * (1.0 + 1e-12), ErrorCode::DomainExceeded,
                "point outside B_delta for map '" + name_ + "'");
    }

    Vec eval(const Vec& x) const {
        check_domain(x);
        return L_.entries() * x + nonlinear(x);
    }
    Mat jacobian(const Vec& x) const {
        check_domain(x);
        return L_.entries() + nonlinear_jacobian(x);
    }

    MapBundle with_delta(double d) const {
        MapBundle copy = *this;
        copy.delta_ = d;
        return copy;
    }
    MapBundle as_global() const {
        MapBundle copy = *this;
        copy.global_ = true;
        return copy;
    }

  private:
    Operator L_;
    std::variant<PolyMap, ClosedForm> f_;
    double delta_;
    std::string name_;
    bool global_;
};

// --- builtins ---------------------------------------------------------------

// Quadratic saddle family T(x,y,z) = (ax, b(y + eps*x*z), cz); nonlinear part
// (0, b*eps*x*z, 0). Resonant exactly when b = ac.
inline MapBundle hartman_map(double a, double b, double c, double eps, double delta = 0.2) {
    require(a > b && b > 1.0 && 1.0 > c && c > 0.0, ErrorCode::BadPrecondition,
            "hartman parameters need a > b > 1 > c > 0");
    Mat l = Mat::Zero(3, 3);
    l(0, 0) = a;
    l(1, 1) = b;
    l(2, 2) = c;
    std::vector<std::vector<PolyTerm>> terms(3);
    terms[1].push_back(PolyTerm{b * eps, {1, 0, 1}});
    return MapBundle(Operator(l), PolyMap(3, std::move(terms)), delta, "hartman");
}

// 1D contraction with non-Hoelder derivative at 0: T(x) = a x (1 - 1/log|x|),
// T(0) = 0. No C^1 linearization exists at 0.
inline MapBundle sternberg_map(double a, double delta = 0.4) {
    require(a > 0.0 && a < 1.0, ErrorCode::BadPrecondition, "sternberg parameter a in (0,1)");
    require(delta < 0.5, ErrorCode::BadPrecondition, "sternberg domain must stay inside |x| < 1/2");
    ClosedForm f;
    f.tag = "sternberg";
    f.value = [a](const Vec& x) {
        Vec out(1);
        double t = x[0];
        out[0] = t == 0.0 ? 0.0 : -a * t / std::log(std::abs(t));
        return out;
    };
    f.jac = [a](const Vec& x) {
        Mat out(1, 1);
        double t = x[0];
        if (t == 0.0) {
            out(0, 0) = 0.0;
        } else {
            double lg = std::log(std::abs(t));
            out(0, 0) = a * (-1.0 / lg + 1.0 / (lg * lg));
        }
        return out;
    };
    Mat l(1, 1);
    l(0, 0) = a;
    return MapBundle(Operator(l), std::move(f), delta, "sternberg");
}

// 2D saddle with quadratic cross terms:
// T(x,y) = (a x + c1 x^2 + c2 xy + c3 y^2, b y + c4 x^2 + c5 xy + c6 y^2)
inline MapBundle saddle2d_quadratic(double a, double b, const std::vector<double>& c,
                                    double delta = 0.2) {
    require(c.size() == 6, ErrorCode::ParseError, "saddle2d_quadratic needs six coefficients");
    Mat l = Mat::Zero(2, 2);
    l(0, 0) = a;
    l(1, 1) = b;
    std::vector<std::vector<PolyTerm>> terms(2);
    const std::vector<std::vector<int>> expo = {{2, 0}, {1, 1}, {0, 2}};
    for (int i = 0; i < 3; ++i) {
        if (c[i] != 0.0) terms[0].push_back(PolyTerm{c[i], expo[i]});
        if (c[3 + i] != 0.0) terms[1].push_back(PolyTerm{c[3 + i], expo[i]});
    }
    return MapBundle(Operator(l), PolyMap(2, std::move(terms)), delta, "saddle2d_quadratic");
}

// --- pointwise operations ----------------------------------------------------

// T^{-1}(z) by the contraction w <- L^{-1}(z - f(w)) from w0 = L^{-1} z;
// converges geometrically with ratio |L^{-1}| Lip(f).
inline Vec invert_point(const MapBundle& map, const Vec& z, double tol = 1e-12,
                        int max_iter = 200) {
    const Mat& linv = map.linear().inverse();
    Vec w = linv * z;
    double prev_residual = std::numeric_limits<double>::infinity();
    int growth_strikes = 0;
    for (int it = 0; it < max_iter; ++it) {
        Vec residual_vec = map.linear().entries() * w + map.nonlinear(w) - z;
        double residual = inf_norm(residual_vec);
        if (residual <= tol) return w;
        if (residual > prev_residual * (1.0 + 1e-9)) {
            if (++growth_strikes >= 5)
                raise(ErrorCode::PreconditionLip,
                      "inverse iteration is not contracting (Lip(f) >= m(L)?)");
        } else {
            growth_strikes = 0;
        }
        prev_residual = residual;
        w = linv * (z - map.nonlinear(w));
    }
    raise(ErrorCode::NoConvergence, "invert_point did not reach tolerance in 200 iterations");
}

enum class OrbitDirection { forward, backward };

struct Orbit {
    std::vector<Vec> points;  // points[0] = x0
    std::optional<int> escaped_at;
};

inline Orbit orbit(const MapBundle& map, const Vec& x0, int n, OrbitDirection dir,
                   double inv_tol = 1e-12) {
    require(map.global() || inf_norm(x0) <= map.delta() * (1.0 + 1e-12),
            ErrorCode::DomainExceeded, "orbit start outside B_delta");
    Orbit o;
    o.points.push_back(x0);
    for (int k = 0; k < n; ++k) {
        const Vec& cur = o.points.back();
        if (!map.global() && inf_norm(cur) > map.delta()) break;
        Vec next = dir == OrbitDirection::forward
                       ? Vec(map.linear().entries() * cur + map.nonlinear(cur))
                       : invert_point(map, cur, inv_tol);
        o.points.push_back(next);
        if (!o.escaped_at && inf_norm(next) > map.delta())
            o.escaped_at = static_cast<int>(o.points.size()) - 1;
    }
    return o;
}

// Finite-horizon surrogate for the U-stable set: the forward orbit stays in
// B_delta for n_max steps.
inline bool stable_set_member(const MapBundle& map, const Vec& x, int n_max) {
    if (inf_norm(x) > map.delta()) return false;
    Vec cur = x;
    for (int k = 0; k < n_max; ++k) {
        cur = map.linear().entries() * cur + map.nonlinear(cur);
        if (inf_norm(cur) > map.delta()) return false;
    }
    return true;
}

// Restriction of a flat map to an axis block: coordinates `keep` in, others
// pinned to zero, output projected onto `keep`. The linear block must be
// invariant (checked).
inline MapBundle axis_restriction(const MapBundle& map, const std::vector<int>& keep,
                                  const std::string& name) {
    const int n = map.dim();
    const int k = static_cast<int>(keep.size());
    Mat lb(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) lb(i, j) = map.linear().entries()(keep[i], keep[j]);
    // invariance of the block inside L
    for (int i = 0; i < n; ++i) {
        bool in_block = false;
        for (int idx : keep)
            if (idx == i) in_block = true;
        if (in_block) continue;
        for (int j = 0; j < k; ++j)
            require(std::abs(map.linear().entries()(i, keep[j])) < 1e-12,
                    ErrorCode::NotFlat, "linear part does not preserve the axis block");
    }
    auto embed = [n, keep](const Vec& x) {
        Vec full = Vec::Zero(n);
        for (std::size_t i = 0; i < keep.size(); ++i) full[keep[i]] = x[static_cast<int>(i)];
        return full;
    };
    ClosedForm f;
    f.tag = name;
    f.value = [map, keep, embed](const Vec& x) {
        Vec fy = map.nonlinear(embed(x));
        Vec out(static_cast<int>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) out[static_cast<int>(i)] = fy[keep[i]];
        return out;
    };
    f.jac = [map, keep, embed](const Vec& x) {
        Mat fj = map.nonlinear_jacobian(embed(x));
        Mat out(static_cast<int>(keep.size()), static_cast<int>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i)
            for (std::size_t j = 0; j < keep.size(); ++j)
                out(static_cast<int>(i), static_cast<int>(j)) = fj(keep[i], keep[j]);
        return out;
    };
    return MapBundle(Operator(lb), std::move(f), map.delta(), name, map.global());
}

}  // namespace holinear
