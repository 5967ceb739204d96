#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "holinear/common.hpp"
#include "holinear/errors.hpp"

namespace holinear {

inline constexpr int kMaxDim = 8;
inline constexpr double kUnitCircleTol = 1e-9;   // hyperbolicity tolerance on |λ| vs 1
inline constexpr double kCircularTol = 1e-9;     // block is circular when max/min modulus < 1+tol
inline constexpr double kGelfandCrossTol = 5e-3; // eigenvalue route vs Gelfand route

// Dense invertible operator on R^N, N <= 8. The inverse is computed once at
// construction and reused everywhere (m(L) = |L^{-1}|^{-1} in particular).
class Operator {
  public:
    explicit Operator(Mat m) : entries_(std::move(m)) {
        const auto n = entries_.rows();
        require(n == entries_.cols(), ErrorCode::WrongDimension, "operator must be square");
        require(n >= 1 && n <= kMaxDim, ErrorCode::WrongDimension,
                "operator dimension must be in [1,8]");
        Eigen::FullPivLU<Mat> lu(entries_);
        double scale = entries_.cwiseAbs().maxCoeff();
        require(std::abs(lu.determinant()) > 1e-12 * std::max(scale, 1.0) &&
                    lu.isInvertible(),
                ErrorCode::SingularOperator, "operator is numerically singular");
        inverse_ = lu.inverse();
        double defect = op_norm(inverse_ * entries_ - Mat::Identity(n, n));
        require(defect < 1e-10, ErrorCode::SingularOperator,
                "inverse check failed (ill conditioned)");
    }

    int dim() const { return static_cast<int>(entries_.rows()); }
    const Mat& entries() const { return entries_; }
    const Mat& inverse() const { return inverse_; }
    double norm() const { return op_norm(entries_); }
    double inverse_norm() const { return op_norm(inverse_); }
    double min_norm() const { return 1.0 / inverse_norm(); }

    Operator inverted() const { return Operator(inverse_); }

    static Operator identity(int n) { return Operator(Mat::Identity(n, n)); }

  private:
    Mat entries_;
    Mat inverse_;
};

inline std::vector<std::complex<double>> eigenvalues_of(const Mat& m) {
    Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
    std::vector<std::complex<double>> out(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = es.eigenvalues()[i];
    return out;
}

namespace detail {

// log|L^n| for n = 1..n_max, accumulated with per-step normalization so large
// powers never overflow.
inline std::vector<double> log_power_norms(const Mat& L, int n_max) {
    std::vector<double> a(n_max + 1, 0.0);
    Mat m = Mat::Identity(L.rows(), L.cols());
    double acc = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        m = L * m;
        double s = op_norm(m);
        acc += std::log(s);
        m /= s;
        a[n] = acc;
    }
    return a;
}

// Extrapolate lim |L^n|^{1/n} from the Gelfand sequence. Raw values converge
// like rho * n^{k/n} * C^{1/n} (k from Jordan structure, C from eigenvector
// conditioning), far too slowly for a tight cross-check, so fit the model
// log|L^n| = h n + k log n + c and return exp(h).
inline double gelfand_extrapolate(const std::vector<double>& a) {
    int n_max = static_cast<int>(a.size()) - 1;
    int lo = std::max(8, n_max / 2);
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (int n = lo; n <= n_max; ++n) {
        Eigen::Vector3d row(static_cast<double>(n), std::log(static_cast<double>(n)), 1.0);
        ata += row * row.transpose();
        atb += row * a[n];
    }
    Eigen::Vector3d coef = ata.ldlt().solve(atb);
    return std::exp(coef[0]);
}

}  // namespace detail

struct SpectralInfo {
    double rho = 0.0;       // spectral radius of L
    double rho_inv = 0.0;   // spectral radius of L^{-1}
    double cond = 0.0;      // c(L) = rho * rho_inv
    double min_norm = 0.0;  // m(L) = |L^{-1}|^{-1}
    std::vector<double> gelfand_trace;  // |L^n|^{1/n} samples; final entry is extrapolated
};

// rho(L) from eigenvalue moduli, cross-checked against the Gelfand sequence.
// The two routes are independent; disagreement beyond 5e-3 relative raises
// SpectralMismatch.
inline double spectral_radius(const Operator& L, int gelfand_n = 200) {
    auto eig = eigenvalues_of(L.entries());
    double rho = 0.0;
    for (const auto& z : eig) rho = std::max(rho, std::abs(z));
    auto a = detail::log_power_norms(L.entries(), gelfand_n);
    double rho_g = detail::gelfand_extrapolate(a);
    require(std::abs(rho - rho_g) <= kGelfandCrossTol * std::max(rho, 1e-30),
            ErrorCode::SpectralMismatch,
            "eigenvalue spectral radius and Gelfand extrapolation disagree");
    return rho;
}

inline double condition_number(const Operator& L) {
    return spectral_radius(L) * spectral_radius(L.inverted());
}

inline SpectralInfo spectral_info(const Operator& L, int gelfand_n = 200) {
    SpectralInfo s;
    s.rho = spectral_radius(L, gelfand_n);
    s.rho_inv = spectral_radius(L.inverted(), gelfand_n);
    s.cond = s.rho * s.rho_inv;
    s.min_norm = L.min_norm();
    auto a = detail::log_power_norms(L.entries(), gelfand_n);
    for (int n = 1; n <= gelfand_n; ++n) s.gelfand_trace.push_back(std::exp(a[n] / n));
    s.gelfand_trace.push_back(detail::gelfand_extrapolate(a));
    return s;
}

// Equivalent norm |v|_1 = max_{0<=n<q} rho1^{-n} |L^n v| with |L|_1 <= rho1.
// Terms with n >= q satisfy rho1^{-n}|L^n v| < |v| and never attain the sup,
// so the evaluation below is exact given the cutoff certificate.
struct AdaptedNorm {
    double rho1 = 0.0;
    int q = 0;
    double K = 1.0;
    std::vector<Mat> powers;  // L^0 .. L^{max(q-1,0)}

    double eval(const Vec& v) const {
        double best = inf_norm(v);
        double scale = 1.0;
        for (int n = 1; n < q; ++n) {
            scale /= rho1;
            best = std::max(best, scale * inf_norm(powers[static_cast<std::size_t>(n)] * v));
        }
        return best;
    }

    // certified upper bound on the induced norm of an arbitrary operator
    double op_bound(const Mat& m) const { return K * op_norm(m); }
    // certified upper bound on |L^m|_1 (tight for the defining operator)
    double defining_power_bound(const Mat& l_pow_m, int m) const {
        return std::min(std::pow(rho1, m), K * op_norm(l_pow_m));
    }
};

inline AdaptedNorm adapted_norm(const Operator& L, double eps, int n_max = 200) {
    require(eps > 0.0, ErrorCode::BadPrecondition, "adapted_norm requires eps > 0");
    double rho1 = spectral_radius(L) + eps;
    const int window = 20;
    auto a = detail::log_power_norms(L.entries(), n_max + window);
    double lr = std::log(rho1);

    // q = 0 never certifies (|L^0| = 1 is not < rho1^0), so search from 1.
    int q = -1;
    for (int cand = 1; cand <= n_max; ++cand) {
        bool ok = true;
        for (int n = cand; n <= cand + window; ++n)
            if (a[n] >= n * lr) { ok = false; break; }
        if (ok) { q = cand; break; }
    }
    require(q >= 0, ErrorCode::CutoffNotFound,
            "no cutoff q <= n_max certifies |L^n| < (rho+eps)^n; eps too small for float precision");

    AdaptedNorm nrm;
    nrm.rho1 = rho1;
    nrm.q = q;
    nrm.powers.reserve(static_cast<std::size_t>(q));
    Mat p = Mat::Identity(L.dim(), L.dim());
    nrm.powers.push_back(p);
    double K = 1.0;
    double scale = 1.0;
    for (int n = 1; n < q; ++n) {
        p = L.entries() * p;
        nrm.powers.push_back(p);
        scale /= rho1;
        K = std::max(K, scale * op_norm(p));
    }
    nrm.K = K;
    return nrm;
}

// Hyperbolic splitting L = A (+) B in a real block basis: A expanding on the
// span of the first dim_u basis columns, B contracting on the rest.
struct Splitting {
    Mat basis;  // columns: [E^u basis | E^s basis]; square for a full split
    Operator A;
    Operator B;
    int dim_u = 0;
    int dim_s = 0;
};

namespace detail {

// Matrix sign function by scaled Newton iteration; requires no eigenvalues on
// the imaginary axis (guaranteed here by the hyperbolicity check).
inline Mat matrix_sign(Mat s) {
    const int n = static_cast<int>(s.rows());
    for (int it = 0; it < 120; ++it) {
        Eigen::FullPivLU<Mat> lu(s);
        require(lu.isInvertible(), ErrorCode::NonHyperbolic,
                "sign iteration hit a singular iterate (spectrum too close to the unit circle)");
        double mu = std::pow(std::abs(lu.determinant()), -1.0 / n);
        if (!std::isfinite(mu) || mu <= 0.0) mu = 1.0;
        Mat scaled = mu * s;
        Mat next = 0.5 * (scaled + (1.0 / mu) * lu.inverse());
        double step = op_norm(next - s);
        s = next;
        if (step < 1e-14 * std::max(1.0, op_norm(s))) break;
    }
    require(op_norm(s * s - Mat::Identity(n, n)) < 1e-8, ErrorCode::NonHyperbolic,
            "matrix sign iteration failed to converge");
    return s;
}

// Spectral projector onto the eigenvalues of L inside the disk |z| < r, via
// the inverse Cayley transform (disk -> left half plane) and the sign function.
inline Mat disk_projector(const Mat& L, double r) {
    const int n = static_cast<int>(L.rows());
    Mat scaled = L / r;
    Mat denom = scaled + Mat::Identity(n, n);
    Eigen::FullPivLU<Mat> lu(denom);
    require(lu.isInvertible(), ErrorCode::NonHyperbolic, "Cayley transform singular");
    Mat cay = (scaled - Mat::Identity(n, n)) * lu.inverse();
    Mat s = matrix_sign(cay);
    return 0.5 * (Mat::Identity(n, n) - s);
}

// Orthonormal basis of the range of a (near-)projector with known rank.
inline Mat projector_range(const Mat& p, int rank) {
    Eigen::ColPivHouseholderQR<Mat> qr(p);
    Mat q = qr.householderQ();
    return q.leftCols(rank);
}

inline void check_hyperbolic_moduli(const std::vector<std::complex<double>>& eig) {
    for (const auto& z : eig)
        require(std::abs(std::abs(z) - 1.0) > kUnitCircleTol, ErrorCode::NonHyperbolic,
                "eigenvalue modulus within tolerance of 1");
}

}  // namespace detail

inline Splitting split(const Operator& L) {
    auto eig = eigenvalues_of(L.entries());
    detail::check_hyperbolic_moduli(eig);
    int dim_u = 0;
    for (const auto& z : eig)
        if (std::abs(z) > 1.0) ++dim_u;
    int dim_s = L.dim() - dim_u;
    require(dim_u > 0 && dim_s > 0, ErrorCode::NonHyperbolic,
            "split requires a saddle (eigenvalue moduli on both sides of 1)");

    // already block diagonal with the expanding block first: keep the
    // identity basis so user coordinates survive the pipeline
    {
        const Mat& l = L.entries();
        double scale = std::max(op_norm(l), 1.0);
        bool blocked = op_norm(Mat(l.topRightCorner(dim_u, dim_s))) < 1e-13 * scale &&
                       op_norm(Mat(l.bottomLeftCorner(dim_s, dim_u))) < 1e-13 * scale;
        if (blocked) {
            Operator a(Mat(l.topLeftCorner(dim_u, dim_u)));
            Operator b(Mat(l.bottomRightCorner(dim_s, dim_s)));
            bool ordered = true;
            for (const auto& z : eigenvalues_of(a.entries()))
                if (std::abs(z) <= 1.0) ordered = false;
            for (const auto& z : eigenvalues_of(b.entries()))
                if (std::abs(z) >= 1.0) ordered = false;
            if (ordered)
                return Splitting{Mat::Identity(L.dim(), L.dim()), std::move(a), std::move(b),
                                 dim_u, dim_s};
        }
    }

    Mat ps = detail::disk_projector(L.entries(), 1.0);
    Mat pu = Mat::Identity(L.dim(), L.dim()) - ps;
    require(std::abs(pu.trace() - dim_u) < 1e-6, ErrorCode::NonHyperbolic,
            "projector rank does not match eigenvalue count");

    Mat c(L.dim(), L.dim());
    c.leftCols(dim_u) = detail::projector_range(pu, dim_u);
    c.rightCols(dim_s) = detail::projector_range(ps, dim_s);
    Eigen::FullPivLU<Mat> lu(c);
    require(lu.isInvertible(), ErrorCode::NonHyperbolic, "block basis is singular");
    Mat blocked = lu.inverse() * L.entries() * c;

    double scale = std::max(op_norm(L.entries()), 1.0);
    double coupling = std::max(op_norm(blocked.topRightCorner(dim_u, dim_s)),
                               op_norm(blocked.bottomLeftCorner(dim_s, dim_u)));
    require(coupling < 1e-10 * scale, ErrorCode::NonHyperbolic,
            "block diagonalization defect exceeds tolerance");

    Splitting out{c, Operator(blocked.topLeftCorner(dim_u, dim_u)),
                  Operator(blocked.bottomRightCorner(dim_s, dim_s)), dim_u, dim_s};
    require(spectral_radius(out.A.inverted()) < 1.0, ErrorCode::NonHyperbolic,
            "expanding block is not expanding");
    require(spectral_radius(out.B) < 1.0, ErrorCode::NonHyperbolic,
            "contracting block is not contracting");
    return out;
}

enum class HypClass { contracting, expanding, saddle, nonhyperbolic };

inline const char* hyp_class_name(HypClass c) {
    switch (c) {
        case HypClass::contracting: return "contracting";
        case HypClass::expanding: return "expanding";
        case HypClass::saddle: return "saddle";
        case HypClass::nonhyperbolic: return "nonhyperbolic";
    }
    return "?";
}

struct HyperbolicityReport {
    HypClass cls = HypClass::nonhyperbolic;
    double c_h = 0.0;
    double rho_h = 0.0;
    std::optional<double> alpha_star;  // threshold exponent; none when no alpha in (0,1) works
    bool alpha_star_all = false;       // bi-circular: every alpha in (0,1) is admissible
    bool is_circular_A = false;
    bool is_circular_B = false;
    bool is_bicircular = false;
    bool is_alpha_hyperbolic = false;
    double alpha = 0.0;
    // informational fallback when the full-space splitting fails alpha-hyperbolicity
    std::optional<double> leading_c_h;
    std::optional<double> leading_rho_h;
};

inline Splitting leading_splitting(const Operator& L);

inline HyperbolicityReport classify(const Operator& L, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::BadPrecondition, "alpha must be in (0,1)");
    auto eig = eigenvalues_of(L.entries());
    detail::check_hyperbolic_moduli(eig);

    int above = 0, below = 0;
    for (const auto& z : eig) (std::abs(z) > 1.0 ? above : below)++;

    HyperbolicityReport rep;
    rep.alpha = alpha;
    if (below == L.dim()) {
        rep.cls = HypClass::contracting;
        rep.c_h = condition_number(L);
        rep.rho_h = spectral_radius(L);
        rep.is_circular_A = true;  // vacuous: no expanding block
        rep.is_circular_B = rep.c_h < 1.0 + kCircularTol;
    } else if (above == L.dim()) {
        rep.cls = HypClass::expanding;
        rep.c_h = condition_number(L);
        rep.rho_h = spectral_radius(L.inverted());
        rep.is_circular_A = rep.c_h < 1.0 + kCircularTol;
        rep.is_circular_B = true;
    } else {
        rep.cls = HypClass::saddle;
        Splitting sp = split(L);
        double ca = condition_number(sp.A), cb = condition_number(sp.B);
        rep.c_h = std::max(ca, cb);
        rep.rho_h = std::max(spectral_radius(sp.A.inverted()), spectral_radius(sp.B));
        rep.is_circular_A = ca < 1.0 + kCircularTol;
        rep.is_circular_B = cb < 1.0 + kCircularTol;
    }
    rep.is_bicircular = rep.is_circular_A && rep.is_circular_B;
    rep.is_alpha_hyperbolic = rep.c_h * std::pow(rep.rho_h, alpha) < 1.0;

    if (rep.is_bicircular) {
        rep.alpha_star_all = true;  // c_h = 1: the inequality holds for every alpha in (0,1)
    } else {
        double star = std::log(rep.c_h) / (-std::log(rep.rho_h));
        if (star < 1.0) rep.alpha_star = star;
    }

    // The paper defines alpha-hyperbolicity over *some* direct sum splitting;
    // when the unit-circle split fails we also report the leading-eigenspace
    // pair, which is bi-circular and therefore always admissible on its span.
    if (rep.cls == HypClass::saddle && !rep.is_alpha_hyperbolic) {
        Splitting lead = leading_splitting(L);
        rep.leading_c_h = std::max(condition_number(lead.A), condition_number(lead.B));
        rep.leading_rho_h =
            std::max(spectral_radius(lead.A.inverted()), spectral_radius(lead.B));
    }
    return rep;
}

namespace detail {

// distinct moduli clustered at relative tolerance 1e-6, ascending
inline std::vector<double> modulus_clusters(const std::vector<std::complex<double>>& eig) {
    std::vector<double> mods;
    for (const auto& z : eig) mods.push_back(std::abs(z));
    std::sort(mods.begin(), mods.end());
    std::vector<double> out;
    for (double m : mods)
        if (out.empty() || m > out.back() * (1.0 + 1e-6)) out.push_back(m);
    return out;
}

}  // namespace detail

// Restriction of L to the span of its leading eigenvalues: moduli closest to 1
// from above and from below. The restricted pair (A, B) is bi-circular.
inline Splitting leading_splitting(const Operator& L) {
    auto eig = eigenvalues_of(L.entries());
    detail::check_hyperbolic_moduli(eig);
    auto clusters = detail::modulus_clusters(eig);

    double r_u = 0.0, r_s = 0.0;
    double next_above = 0.0, next_below = 0.0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        if (clusters[i] > 1.0) {
            r_u = clusters[i];
            if (i + 1 < clusters.size()) next_above = clusters[i + 1];
            break;
        }
    }
    for (std::size_t i = clusters.size(); i-- > 0;) {
        if (clusters[i] < 1.0) {
            r_s = clusters[i];
            if (i > 0) next_below = clusters[i - 1];
            break;
        }
    }
    require(r_u > 0.0 && r_s > 0.0, ErrorCode::NonHyperbolic,
            "leading splitting requires a saddle");

    const Mat& l = L.entries();
    int n = L.dim();
    auto count_in = [&](double lo, double hi) {
        int c = 0;
        for (const auto& z : eig)
            if (std::abs(z) > lo && std::abs(z) < hi) ++c;
        return c;
    };

    double hi_u = next_above > 0.0 ? std::sqrt(r_u * next_above) : 2.0 * r_u;
    double lo_u = std::sqrt(r_u);  // in (1, r_u)
    Mat p_lead_u = detail::disk_projector(l, hi_u) - detail::disk_projector(l, lo_u);
    int ku = count_in(lo_u, hi_u);

    double hi_s = std::sqrt(r_s);  // in (r_s, 1)
    double lo_s = next_below > 0.0 ? std::sqrt(r_s * next_below) : 0.5 * r_s;
    Mat p_lead_s = detail::disk_projector(l, hi_s) - detail::disk_projector(l, lo_s);
    int ks = count_in(lo_s, hi_s);

    Mat bu = detail::projector_range(p_lead_u, ku);
    Mat bs = detail::projector_range(p_lead_s, ks);
    Mat basis(n, ku + ks);
    basis.leftCols(ku) = bu;
    basis.rightCols(ks) = bs;

    // orthonormal columns spanning invariant subspaces: the restriction is Q^T L Q
    Operator a(Mat(bu.transpose() * l * bu));
    Operator b(Mat(bs.transpose() * l * bs));
    Splitting out{basis, a, b, ku, ks};
    require(condition_number(out.A) < 1.0 + 1e-6 && condition_number(out.B) < 1.0 + 1e-6,
            ErrorCode::NonHyperbolic, "leading pair is not bi-circular");
    return out;
}

// Multiplicative eigenvalue relations lambda_i = prod_j lambda_j^{m_j} with
// 2 <= |m| <= max_degree. The Hartman geometry b = ac is the degree-2 case.
struct ResonanceRelation {
    int target = 0;
    std::vector<int> exponents;
};

inline std::vector<ResonanceRelation> resonance_scan(const Operator& L, int max_degree = 4,
                                                     double rel_tol = 1e-9) {
    auto eig = eigenvalues_of(L.entries());
    int n = L.dim();
    std::vector<ResonanceRelation> found;
    std::vector<int> expo(n, 0);

    std::function<void(int, int)> rec = [&](int pos, int remaining) {
        if (pos == n) {
            int total = 0;
            for (int e : expo) total += e;
            if (total < 2) return;
            std::complex<double> prod(1.0, 0.0);
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < expo[j]; ++k) prod *= eig[j];
            for (int i = 0; i < n; ++i) {
                if (std::abs(prod - eig[i]) <= rel_tol * std::max(std::abs(eig[i]), 1e-30))
                    found.push_back({i, expo});
            }
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            expo[pos] = e;
            rec(pos + 1, remaining - e);
        }
        expo[pos] = 0;
    };
    rec(0, max_degree);
    return found;
}

}  // namespace holinear
