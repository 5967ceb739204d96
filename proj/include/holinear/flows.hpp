#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "holinear/common.hpp"
#include "holinear/errors.hpp"
#include "holinear/linearize.hpp"
#include "holinear/maps.hpp"
#include "holinear/spectral.hpp"

namespace holinear {

inline constexpr int kMaxFlowDim = 6;

// Polynomial vector field with X(0) = 0; the degree-1 block is the linear
// part DX_0. Terms of any total degree >= 1 are allowed here (unlike PolyMap,
// whose linear part lives in the Operator).
struct FieldTerm {
    double coeff = 0.0;
    std::vector<int> exponents;
    int degree() const {
        int d = 0;
        for (int e : exponents) d += e;
        return d;
    }
};

class VectorFieldDef {
  public:
    VectorFieldDef(int dim, std::vector<std::vector<FieldTerm>> terms, double radius = 1.0)
        : dim_(dim), terms_(std::move(terms)), radius_(radius) {
        require(dim >= 1 && dim <= kMaxFlowDim, ErrorCode::WrongDimension,
                "vector field dimension must be in [1,6]");
        require(static_cast<int>(terms_.size()) == dim, ErrorCode::ParseError,
                "one term list per coordinate");
        for (const auto& coord : terms_)
            for (const auto& t : coord) {
                require(static_cast<int>(t.exponents.size()) == dim, ErrorCode::ParseError,
                        "exponent multi-index length mismatch");
                require(t.degree() >= 1, ErrorCode::ParseError,
                        "constant terms would move the critical point off the origin");
                require(t.degree() <= kMaxPolyDegree, ErrorCode::ParseError, "degree cap");
            }
    }

    static VectorFieldDef linear(const Mat& a, double radius = 1.0) {
        int n = static_cast<int>(a.rows());
        std::vector<std::vector<FieldTerm>> terms(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (a(i, j) == 0.0) continue;
                std::vector<int> e(static_cast<std::size_t>(n), 0);
                e[static_cast<std::size_t>(j)] = 1;
                terms[static_cast<std::size_t>(i)].push_back(FieldTerm{a(i, j), e});
            }
        return VectorFieldDef(n, std::move(terms), radius);
    }

    int dim() const { return dim_; }
    double radius() const { return radius_; }

    Vec eval(const Vec& x) const {
        Vec out = Vec::Zero(dim_);
        for (int i = 0; i < dim_; ++i) {
            KahanSum acc;
            for (const auto& t : terms_[static_cast<std::size_t>(i)])
                acc.add(t.coeff * monomial(x, t.exponents));
            out[i] = acc.value();
        }
        return out;
    }

    Mat jacobian(const Vec& x) const {
        Mat out = Mat::Zero(dim_, dim_);
        for (int i = 0; i < dim_; ++i)
            for (const auto& t : terms_[static_cast<std::size_t>(i)])
                for (int j = 0; j < dim_; ++j) {
                    if (t.exponents[static_cast<std::size_t>(j)] == 0) continue;
                    out(i, j) += t.coeff * t.exponents[static_cast<std::size_t>(j)] *
                                 monomial_partial(x, t.exponents, j);
                }
        return out;
    }

    Mat linear_part() const { return jacobian(Vec::Zero(dim_)); }

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
            int pw = e[l] - (static_cast<int>(l) == j ? 1 : 0);
            for (int k = 0; k < pw; ++k) p *= x[static_cast<Eigen::Index>(l)];
        }
        return p;
    }

    int dim_;
    std::vector<std::vector<FieldTerm>> terms_;
    double radius_;
};

// scaling-and-squaring matrix exponential (Taylor core); exact enough for the
// 1e-6 integrator checks at desk scale
inline Mat expm(const Mat& a) {
    int squarings = 0;
    double nrm = op_norm(a);
    while (nrm > 0.5) {
        nrm *= 0.5;
        ++squarings;
    }
    Mat scaled = a / std::pow(2.0, squarings);
    Mat term = Mat::Identity(a.rows(), a.cols());
    Mat sum = term;
    for (int k = 1; k <= 20; ++k) {
        term = scaled * term / k;
        sum += term;
    }
    for (int k = 0; k < squarings; ++k) sum = sum * sum;
    return sum;
}

namespace detail {

// one classical RK4 step of the state and the variational matrix
inline void rk4_step(const VectorFieldDef& field, double h, Vec& x, Mat* m) {
    Vec k1 = field.eval(x);
    Vec k2 = field.eval(x + 0.5 * h * k1);
    Vec k3 = field.eval(x + 0.5 * h * k2);
    Vec k4 = field.eval(x + h * k3);
    if (m) {
        Mat m1 = field.jacobian(x) * (*m);
        Mat m2 = field.jacobian(x + 0.5 * h * k1) * (*m + 0.5 * h * m1);
        Mat m3 = field.jacobian(x + 0.5 * h * k2) * (*m + 0.5 * h * m2);
        Mat m4 = field.jacobian(x + h * k3) * (*m + h * m3);
        *m += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
    }
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

// gate-free integration over [0,1] (used by tests probing the raw order)
inline Vec integrate_time_one(const VectorFieldDef& field, double h, Vec x) {
    int steps = static_cast<int>(std::llround(1.0 / h));
    for (int k = 0; k < steps; ++k) detail::rk4_step(field, h, x, nullptr);
    return x;
}

// Time-one map of the flow by fixed-step classical 4th-order integration; the
// Jacobian integrates the variational equation alongside the state.
class TimeOneMap {
  public:
    TimeOneMap(VectorFieldDef field, double h) : field_(std::move(field)), h_(h) {
        require(h > 0.0 && h <= 1.0, ErrorCode::BadPrecondition, "step must lie in (0,1]");
        steps_ = static_cast<int>(std::llround(1.0 / h));
        require(std::abs(steps_ * h - 1.0) < 1e-12, ErrorCode::BadPrecondition,
                "step must divide 1");
        Mat dt0 = jacobian(Vec::Zero(field_.dim()));
        Mat oracle = expm(field_.linear_part());
        require(op_norm(dt0 - oracle) <= 1e-6 * std::max(1.0, op_norm(oracle)),
                ErrorCode::StepTooLarge,
                "DT(0) deviates from exp(DX_0) beyond tolerance; shrink the step");
        dt0_ = dt0;
    }

    Vec eval(const Vec& x) const {
        Vec cur = x;
        for (int k = 0; k < steps_; ++k) detail::rk4_step(field_, h_, cur, nullptr);
        return cur;
    }
    Mat jacobian(const Vec& x) const {
        Vec cur = x;
        Mat m = Mat::Identity(field_.dim(), field_.dim());
        for (int k = 0; k < steps_; ++k) detail::rk4_step(field_, h_, cur, &m);
        return m;
    }

    // MapBundle with L equal to the integrated DT(0), so f(0) = 0 and
    // Df(0) = 0 hold to machine precision
    MapBundle bundle(double delta) const {
        Operator L(dt0_);
        TimeOneMap self = *this;
        ClosedForm f;
        f.tag = "time_one";
        f.value = [self, L2 = dt0_](const Vec& x) { return Vec(self.eval(x) - L2 * x); };
        f.jac = [self, L2 = dt0_](const Vec& x) { return Mat(self.jacobian(x) - L2); };
        return MapBundle(L, std::move(f), delta, "time_one");
    }

    const VectorFieldDef& field() const { return field_; }
    const Mat& linearization() const { return dt0_; }

  private:
    VectorFieldDef field_;
    double h_;
    int steps_ = 1;
    Mat dt0_;
};

inline TimeOneMap time_one_map(const VectorFieldDef& field, double h) {
    return TimeOneMap(field, h);
}

// Eigenstructure of DX_0 through the exponential correspondence
// exp(DX_p) = DT_p: real parts sorted, leading pair, center subspace, and the
// smoothness budget (1+alpha) a_1 < a_2, (1+alpha) b_1 > b_2.
inline int count_with_real(const std::vector<std::complex<double>>& eig, double re) {
    int c = 0;
    for (const auto& z : eig)
        if (std::abs(z.real() - re) <= 1e-9 * std::max(1.0, std::abs(re))) ++c;
    return c;
}

struct CriticalPointReport {
    std::vector<double> positive_real_parts;  // ascending: a_1 < a_2 < ...
    std::vector<double> negative_real_parts;  // descending: b_1 > b_2 > ...
    double a1 = 0.0;
    double b1 = 0.0;
    int dim_center = 0;
    double max_alpha = 0.0;
    bool bicircular_on_center = false;
    bool bicircular = false;  // real parts form a two-element set {a, b}, a < 0 < b
    HypClass cls = HypClass::nonhyperbolic;
};

inline CriticalPointReport classify_critical_point(const VectorFieldDef& field, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::BadPrecondition, "alpha in (0,1)");
    auto eig = eigenvalues_of(field.linear_part());
    CriticalPointReport rep;
    std::vector<double> pos, neg;
    for (const auto& z : eig) {
        require(std::abs(z.real()) > 1e-9, ErrorCode::NonHyperbolic,
                "eigenvalue real part within tolerance of 0");
        (z.real() > 0.0 ? pos : neg).push_back(z.real());
    }
    auto cluster = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end(), [](double a, double b) {
            return std::abs(a) < std::abs(b);
        });
        std::vector<double> out;
        for (double x : v)
            if (out.empty() || std::abs(std::abs(x) - std::abs(out.back())) >
                                   1e-9 * std::max(1.0, std::abs(x)))
                out.push_back(x);
        return out;
    };
    rep.positive_real_parts = cluster(pos);
    rep.negative_real_parts = cluster(neg);
    if (pos.empty())
        rep.cls = HypClass::contracting;
    else if (neg.empty())
        rep.cls = HypClass::expanding;
    else
        rep.cls = HypClass::saddle;

    double cap = 1.0 - 1e-9;
    double amax = cap, bmax = cap;
    if (!rep.positive_real_parts.empty()) {
        rep.a1 = rep.positive_real_parts.front();
        rep.dim_center += count_with_real(eig, rep.a1);
        if (rep.positive_real_parts.size() > 1)
            amax = rep.positive_real_parts[1] / rep.a1 - 1.0 - 1e-9;
    }
    if (!rep.negative_real_parts.empty()) {
        rep.b1 = rep.negative_real_parts.front();
        rep.dim_center += count_with_real(eig, rep.b1);
        if (rep.negative_real_parts.size() > 1)
            bmax = rep.negative_real_parts[1] / rep.b1 - 1.0 - 1e-9;
    }
    rep.max_alpha = std::min({amax, bmax, cap});
    rep.bicircular_on_center = rep.cls == HypClass::saddle;
    rep.bicircular = rep.cls == HypClass::saddle && rep.positive_real_parts.size() == 1 &&
                     rep.negative_real_parts.size() == 1;
    return rep;
}

// Saddle-focus eigenvalue pattern: complex pair a +- ib with a < 0, b != 0,
// real c > 0, and a + c > 0.
struct ShilnikovDiagnosis {
    bool has_complex_pair = false;
    bool pair_contracts = false;  // a < 0
    bool real_expands = false;    // c > 0
    bool sum_positive = false;    // a + c > 0
    double a = 0.0, b = 0.0, c = 0.0;
    bool satisfied() const {
        return has_complex_pair && pair_contracts && real_expands && sum_positive;
    }
};

inline ShilnikovDiagnosis shilnikov_check(const VectorFieldDef& field) {
    require(field.dim() == 3, ErrorCode::WrongDimension, "saddle-focus check needs dimension 3");
    auto eig = eigenvalues_of(field.linear_part());
    ShilnikovDiagnosis d;
    for (const auto& z : eig) {
        if (std::abs(z.imag()) > 1e-12) {
            d.has_complex_pair = true;
            d.a = z.real();
            d.b = std::abs(z.imag());
        } else {
            d.c = z.real();
        }
    }
    if (!d.has_complex_pair) return d;
    d.pair_contracts = d.a < 0.0;
    d.real_expands = d.c > 0.0;
    d.sum_positive = d.a + d.c > 0.0;
    return d;
}

// --- parameter continuation -------------------------------------------------------

// One member of a parametrized family: an affine-plus-nonlinear map (the
// fixed point may sit away from 0, so constants are allowed in f).
struct FamilyMap {
    Operator L = Operator::identity(1);
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> df;
    double delta = 1.0;
};

struct ParamFamily {
    std::vector<double> lambdas;
    std::function<FamilyMap(double)> factory;
};

// Fixed points of T_lambda = L + f_lambda by the uniform contraction
// G_lambda = (I - L)^{-1} f_lambda, warm-started along the grid; a failed
// step is bisected in lambda down to a step floor of 1e-6.
inline std::vector<Vec> continue_fixed_points(const ParamFamily& family, double delta) {
    require(!family.lambdas.empty(), ErrorCode::BadPrecondition, "empty parameter grid");
    std::vector<Vec> out;
    FamilyMap first = family.factory(family.lambdas.front());
    const int n = first.L.dim();
    Mat ig = (Mat::Identity(n, n) - first.L.entries()).inverse();

    auto solve_from = [&](const FamilyMap& fm, Vec p) {
        Mat igl = (Mat::Identity(n, n) - fm.L.entries()).inverse();
        double eps1 = op_norm(Mat(igl * fm.df(p)));
        require(eps1 < 1.0, ErrorCode::ContractionLost,
                "|DG_lambda| >= 1: the fixed-point map stopped contracting");
        for (int it = 0; it < 500; ++it) {
            Vec next = igl * fm.f(p);
            if (inf_norm(next - p) < 1e-14) {
                double dg = op_norm(Mat(igl * fm.df(next)));
                require(dg < 1.0, ErrorCode::ContractionLost, "|DG_lambda| >= 1 at the fixed point");
                require(inf_norm(next) <= delta, ErrorCode::DomainExceeded,
                        "fixed point left the continuation ball");
                return next;
            }
            p = next;
        }
        raise(ErrorCode::NoConvergence, "fixed-point iteration stalled");
    };

    (void)ig;
    // advance warm-started, bisecting the lambda step on ContractionLost
    std::function<Vec(double, double, const Vec&)> advance =
        [&](double lo, double hi, const Vec& warm) -> Vec {
        try {
            return solve_from(family.factory(hi), warm);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ContractionLost || std::abs(hi - lo) < 1e-6) throw;
            double mid = 0.5 * (lo + hi);
            Vec pm = advance(lo, mid, warm);
            return advance(mid, hi, pm);
        }
    };

    Vec p = Vec::Zero(n);
    double prev_lambda = family.lambdas.front();
    p = solve_from(family.factory(prev_lambda), p);
    out.push_back(p);
    for (std::size_t i = 1; i < family.lambdas.size(); ++i) {
        p = advance(prev_lambda, family.lambdas[i], p);
        prev_lambda = family.lambdas[i];
        out.push_back(p);
    }
    return out;
}

}  // namespace holinear
