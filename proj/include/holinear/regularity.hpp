#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "holinear/common.hpp"
#include "holinear/errors.hpp"
#include "holinear/maps.hpp"

namespace holinear {

// True sups are only lower-bounded by sample maxima; certificates inflate
// empirical estimates by this factor.
inline constexpr double kEmpiricalInflation = 1.05;

// Lipschitz / D-Hoelder data for the nonlinear part of a map on B_radius.
// lip = sup |Df|, hol = sup |Df(x)-Df(y)| / |x-y|^alpha.
struct RegularityBundle {
    double alpha = 0.0;
    double lip = 0.0;
    double hol = 0.0;
    double domain_radius = 0.0;
    bool is_empirical = false;

    RegularityBundle inflated() const {
        RegularityBundle b = *this;
        if (is_empirical) {
            b.lip *= kEmpiricalInflation;
            b.hol *= kEmpiricalInflation;
        }
        return b;
    }
};

struct SamplePlan {
    int n_points = 512;
    int n_pairs = 2048;
    std::uint64_t seed = 0;
    double radius = 0.0;
};

struct HolderFit {
    double beta_hat = 0.0;
    double log_c_hat = 0.0;
    double r2 = 0.0;
    int n_pairs_used = 0;
    bool degenerate_constant = false;  // all derivative differences vanished
};

namespace detail {

// Deterministic points in the closed inf-ball of the given radius: Halton
// interior points plus the cube corners and axis extremes, which carry the
// sup for monotone quantities.
inline std::vector<Vec> sup_sample_points(int dim, const SamplePlan& plan) {
    require(plan.n_points >= 2, ErrorCode::BadPrecondition, "need at least two sample points");
    require(plan.radius > 0.0, ErrorCode::BadPrecondition, "sample radius must be positive");
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(plan.n_points) + (1u << dim) + 2 * dim + 1);
    for (int i = 0; i < plan.n_points; ++i)
        pts.push_back(plan.radius * halton_point(static_cast<std::uint64_t>(i), dim, plan.seed));
    if (dim <= 6)
        for (int mask = 0; mask < (1 << dim); ++mask) {
            Vec c(dim);
            for (int d = 0; d < dim; ++d) c[d] = (mask >> d) & 1 ? plan.radius : -plan.radius;
            pts.push_back(c);
        }
    for (int d = 0; d < dim; ++d) {
        Vec e = Vec::Zero(dim);
        e[d] = plan.radius;
        pts.push_back(e);
        pts.push_back(-e);
    }
    pts.push_back(Vec::Zero(dim));
    return pts;
}

// Pairs (x, x + s*dir) with geometric separations spanning >= 2 decades, all
// inside the ball. Also pairs each base point with the origin so that the
// mean-value inequality lip <= hol * r^alpha is visible to the sampler.
inline std::vector<std::pair<Vec, Vec>> sup_sample_pairs(int dim, const SamplePlan& plan) {
    require(plan.n_pairs >= 1, ErrorCode::BadPrecondition, "need at least one pair");
    std::vector<std::pair<Vec, Vec>> pairs;
    pairs.reserve(static_cast<std::size_t>(plan.n_pairs) * 2);
    const double s_hi = plan.radius;
    const double s_lo = plan.radius * 1e-3;
    SplitMix64 rng(plan.seed * 0x9e3779b97f4a7c15ULL + 1);
    for (int k = 0; k < plan.n_pairs; ++k) {
        double t = plan.n_pairs == 1 ? 0.0 : static_cast<double>(k) / (plan.n_pairs - 1);
        double s = s_hi * std::pow(s_lo / s_hi, t);
        Vec dir(dim);
        for (int d = 0; d < dim; ++d) dir[d] = rng.symmetric();
        double dn = inf_norm(dir);
        if (dn < 1e-12) {
            dir.setZero();
            dir[0] = 1.0;
            dn = 1.0;
        }
        dir /= dn;
        Vec x = (plan.radius - s) *
                halton_point(static_cast<std::uint64_t>(k), dim, plan.seed + 17);
        pairs.emplace_back(x, Vec(x + s * dir));
        pairs.emplace_back(x, Vec::Zero(dim));
    }
    return pairs;
}

}  // namespace detail

inline RegularityBundle estimate_lip(const MapBundle& map, const SamplePlan& plan) {
    require(plan.radius <= map.delta() * (1.0 + 1e-12) || map.global(),
            ErrorCode::DomainExceeded, "sample radius exceeds map domain");
    auto pts = detail::sup_sample_points(map.dim(), plan);
    std::vector<double> norms(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { norms[i] = op_norm(map.nonlinear_jacobian(pts[i])); });
    RegularityBundle b;
    b.alpha = 1.0;
    b.lip = *std::max_element(norms.begin(), norms.end());
    b.domain_radius = plan.radius;
    b.is_empirical = true;
    return b;
}

inline RegularityBundle estimate_holder(const MapBundle& map, double alpha,
                                        const SamplePlan& plan) {
    require(alpha > 0.0 && alpha <= 1.0, ErrorCode::BadPrecondition, "alpha in (0,1]");
    require(plan.radius <= map.delta() * (1.0 + 1e-12) || map.global(),
            ErrorCode::DomainExceeded, "sample radius exceeds map domain");
    auto pairs = detail::sup_sample_pairs(map.dim(), plan);
    std::vector<double> quot(pairs.size(), 0.0);
    std::size_t usable = 0;
    parallel_for(pairs.size(), [&](std::size_t i) {
        const auto& [x, y] = pairs[i];
        double sep = inf_norm(x - y);
        if (sep <= 0.0) return;
        quot[i] = op_norm(map.nonlinear_jacobian(x) - map.nonlinear_jacobian(y)) /
                  std::pow(sep, alpha);
    });
    for (const auto& [x, y] : pairs)
        if (inf_norm(x - y) > 0.0) ++usable;
    require(usable > 0, ErrorCode::DegenerateSample, "all sample pairs coincide");
    RegularityBundle b;
    b.alpha = alpha;
    b.hol = *std::max_element(quot.begin(), quot.end());
    b.domain_radius = plan.radius;
    b.is_empirical = true;
    return b;
}

// Both constants from one pass; the pairs include (x, 0) for every lip sample
// point, so lip <= hol * r^alpha holds on the sample itself.
inline RegularityBundle estimate_regularity(const MapBundle& map, double alpha,
                                            const SamplePlan& plan) {
    RegularityBundle lipb = estimate_lip(map, plan);
    RegularityBundle holb = estimate_holder(map, alpha, plan);
    RegularityBundle b;
    b.alpha = alpha;
    b.lip = lipb.lip;
    b.hol = std::max(holb.hol, lipb.lip / std::pow(plan.radius, alpha));
    b.domain_radius = plan.radius;
    b.is_empirical = true;
    return b;
}

// Fits the exponent of the Hoelder modulus omega(s) = sup_{|x-y|<=s} |dD|.
// Pairs are binned by log separation inside [sep_lo, sep_hi]; the regression
// runs on log(bin max) against log(bin center). Raw pair clouds mix the local
// Lipschitz regime away from the kink with the sup regime near it, so only
// the per-bin maxima identify the exponent of the constant. Pairs with
// |dD| = 0 are excluded; if every pair is excluded the field is flat and
// beta_hat is the +inf sentinel with r2 = 1.
inline HolderFit fit_holder_exponent(const std::vector<std::pair<Vec, Mat>>& samples,
                                     std::pair<double, double> sep_window) {
    require(samples.size() >= 32, ErrorCode::DegenerateSample,
            "need at least 32 samples for an exponent fit");
    require(sep_window.first > 0.0 && sep_window.second > sep_window.first,
            ErrorCode::BadPrecondition, "separation window must be positive and ordered");
    const int bins_per_decade = 8;
    const double log_lo = std::log10(sep_window.first);
    const double log_hi = std::log10(sep_window.second);
    const int n_bins = std::max(4, static_cast<int>(std::ceil((log_hi - log_lo) * bins_per_decade)));
    std::vector<double> bin_max(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<long> bin_count(static_cast<std::size_t>(n_bins), 0);

    const std::size_t n = samples.size();
    const std::size_t pair_cap = 400000;
    std::size_t stride = 1;
    while ((n * (n - 1)) / (2 * stride) > pair_cap) ++stride;
    bool any_separated = false;
    long pairs_used = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; j += stride) {
            double sep = inf_norm(samples[i].first - samples[j].first);
            if (sep <= 0.0) continue;
            any_separated = true;
            if (sep < sep_window.first || sep > sep_window.second) continue;
            int bin = std::min(n_bins - 1,
                               static_cast<int>((std::log10(sep) - log_lo) / (log_hi - log_lo) *
                                                n_bins));
            double dd = op_norm(samples[i].second - samples[j].second);
            bin_count[static_cast<std::size_t>(bin)]++;
            ++pairs_used;
            if (dd > bin_max[static_cast<std::size_t>(bin)])
                bin_max[static_cast<std::size_t>(bin)] = dd;
        }
    require(any_separated, ErrorCode::DegenerateSample, "all sample points coincide");

    // a bin whose pair count is far below the others cannot estimate a sup;
    // keep bins holding at least 5% of the densest bin
    long densest = 0;
    for (long c : bin_count) densest = std::max(densest, c);
    long min_count = std::max<long>(16, densest / 20);

    std::vector<double> lx, ly;
    for (int b = 0; b < n_bins; ++b) {
        if (bin_count[static_cast<std::size_t>(b)] < min_count) continue;
        if (bin_max[static_cast<std::size_t>(b)] <= 0.0) continue;
        double center = log_lo + (b + 0.5) * (log_hi - log_lo) / n_bins;
        lx.push_back(center * std::log(10.0));
        ly.push_back(std::log(bin_max[static_cast<std::size_t>(b)]));
    }

    HolderFit fit;
    if (lx.empty()) {
        fit.beta_hat = std::numeric_limits<double>::infinity();
        fit.log_c_hat = -std::numeric_limits<double>::infinity();
        fit.r2 = 1.0;
        fit.degenerate_constant = true;
        return fit;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
        syy += ly[i] * ly[i];
    }
    double m = static_cast<double>(lx.size());
    double vxx = sxx - sx * sx / m;
    double vxy = sxy - sx * sy / m;
    double vyy = syy - sy * sy / m;
    require(vxx > 0.0, ErrorCode::DegenerateSample, "no separation spread inside the window");
    fit.beta_hat = vxy / vxx;
    fit.log_c_hat = (sy - fit.beta_hat * sx) / m;
    fit.r2 = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
    fit.n_pairs_used = static_cast<int>(pairs_used);
    return fit;
}

// Lemma on compositions: Lip(S.T) <= Lip(S)Lip(T) and
// Hol(D(S.T)) <= Lip(S)Hol(DT) + Lip(T)^{1+alpha}Hol(DS).
inline RegularityBundle bound_compose(const RegularityBundle& bS, const RegularityBundle& bT,
                                      double lipS, double lipT) {
    require(bS.alpha == bT.alpha, ErrorCode::AlphaMismatch, "bundle exponents differ");
    RegularityBundle out;
    out.alpha = bS.alpha;
    out.lip = lipS * lipT;
    out.hol = lipS * bT.hol + std::pow(lipT, 1.0 + bS.alpha) * bS.hol;
    out.domain_radius = bT.domain_radius;
    out.is_empirical = bS.is_empirical || bT.is_empirical;
    return out;
}

inline double lip_of_inverse(double m_L, double lip_f) {
    require(lip_f < m_L, ErrorCode::NotInvertibleBound, "Lip(f) >= m(L): inverse bound void");
    return 1.0 / (m_L - lip_f);
}

inline double lip_of_inverse_nonlinearity(const Operator& L, double lip_f) {
    return L.inverse_norm() * lip_of_inverse(L.min_norm(), lip_f) * lip_f;
}

// Inverse bounds: Lip(T^{-1}) <= (m_L - Lip f)^{-1} and
// Hol(DT^{-1}) <= (m_L - Lip f)^{-(2+alpha)} Hol(Df).
inline RegularityBundle bound_inverse(const RegularityBundle& b, const Operator& L) {
    double m_L = L.min_norm();
    require(b.lip < m_L, ErrorCode::NotInvertibleBound,
            "Lip(f) >= m(L): T need not be invertible");
    RegularityBundle out;
    out.alpha = b.alpha;
    out.lip = 1.0 / (m_L - b.lip);
    out.hol = std::pow(m_L - b.lip, -(2.0 + b.alpha)) * b.hol;
    out.domain_radius = b.domain_radius;
    out.is_empirical = b.is_empirical;
    return out;
}

// Power bounds: Lip(f_m) <= m Lip(f) Lip(T)^{m-1} and
// Hol(Df_m) <= m Hol(Df) Lip(T)^{(1+alpha)(m-1)}; requires Lip(T) >= 1.
inline RegularityBundle bound_power(const RegularityBundle& b, const Operator& L, int m,
                                    double lipT) {
    (void)L;
    require(m >= 1, ErrorCode::BadPrecondition, "power m >= 1");
    require(lipT >= 1.0, ErrorCode::PreconditionLip, "power bound assumes Lip(T) >= 1");
    if (m == 1) return b;
    RegularityBundle out;
    out.alpha = b.alpha;
    out.lip = m * b.lip * std::pow(lipT, m - 1);
    out.hol = m * b.hol * std::pow(lipT, (1.0 + b.alpha) * (m - 1));
    out.domain_radius = b.domain_radius;
    out.is_empirical = b.is_empirical;
    return out;
}

// |h1^{-1} - h2^{-1}| <= |h2^{-1}| |h1 - h2| |h1^{-1}|
inline double inverse_diff_bound(const Operator& h1, const Operator& h2) {
    return h2.inverse_norm() * op_norm(h1.entries() - h2.entries()) * h1.inverse_norm();
}

}  // namespace holinear
