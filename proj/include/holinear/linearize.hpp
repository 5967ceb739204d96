#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "holinear/bump.hpp"
#include "holinear/common.hpp"
#include "holinear/conjugacy.hpp"
#include "holinear/errors.hpp"
#include "holinear/maps.hpp"
#include "holinear/regularity.hpp"
#include "holinear/spectral.hpp"

namespace holinear {

inline constexpr double kPlanMargin = 0.95;   // strict paper inequalities need float slack
inline constexpr double kDeltaFloor = 1e-8;
inline constexpr int kSeriesCap = 10000;
inline constexpr double kDivergenceRatio = 0.999;

// --- series bookkeeping -------------------------------------------------------

namespace detail {

// Tracks block maxima of pointwise term norms. Convergence is declared when
// the certified geometric tail (ratio max(tau, measured block ratio)) drops
// below tol_tail; two consecutive block ratios >= 0.999 raise SeriesDiverged.
class BlockTracker {
  public:
    BlockTracker(int m, double tau, double tol_tail, double tol_rel = 1e-8)
        : m_(std::max(1, m)), tau_(tau), tol_(tol_tail), tol_rel_(tol_rel) {}

    // feed one term norm; returns true when the series may stop
    bool add(double tn, ConjEvalInfo* info) {
        ++count_;
        cur_ = std::max(cur_, tn);
        if (count_ % m_ != 0) return false;
        history_.push_back(cur_);
        if (scale_ == 0.0) scale_ = cur_;
        bool stop = false;
        if (prev_ >= 0.0) {
            double ratio = prev_ > 0.0 ? cur_ / prev_ : 0.0;
            // strikes only count past the startup grace: orbits crossing the
            // nonlinearity's zero set give one or two slow blocks before the
            // geometric regime, while a resonance holds ratio ~ 1 throughout
            bool past_grace = static_cast<int>(history_.size()) > 3;
            if (past_grace && ratio >= kDivergenceRatio && cur_ > tol_) {
                if (++strikes_ >= 2) {
                    DivergenceDiagnostic diag;
                    diag.block_norms = history_;
                    diag.worst_ratio = ratio;
                    diag.at_term = count_;
                    throw SeriesDivergedError(
                        "series terms fail to decay over two consecutive blocks", diag);
                }
            } else {
                strikes_ = 0;
            }
            double r = std::min(std::max(tau_, ratio), 0.9999);
            tail_ = m_ * cur_ * r / (1.0 - r);
            // absolute tolerance, sharpened to relative precision against the
            // leading block so small-amplitude evaluations keep their digits
            double gate = std::min(tol_, std::max(tol_rel_ * scale_, 1e-300));
            if (tail_ < gate && ratio < 1.0) stop = true;
        } else if (cur_ == 0.0) {
            tail_ = 0.0;
            stop = true;
        }
        prev_ = cur_;
        cur_ = 0.0;
        if (info) {
            info->terms = count_;
            info->tail_bound = tail_;
        }
        return stop;
    }

    void finish_exact(ConjEvalInfo* info) {  // remaining terms are exactly zero
        tail_ = 0.0;
        if (info) {
            info->terms = count_;
            info->tail_bound = 0.0;
        }
    }

    double tail() const { return tail_; }
    const std::vector<double>& history() const { return history_; }

  private:
    int m_;
    double tau_;
    double tol_;
    double tol_rel_;
    double scale_ = 0.0;
    int count_ = 0;
    double cur_ = 0.0;
    double prev_ = -1.0;
    int strikes_ = 0;
    double tail_ = std::numeric_limits<double>::infinity();
    std::vector<double> history_;
};

// Normalized power accumulator: holds P / exp(log_scale) with |P| ~ 1, so
// large powers of expanding operators never overflow as intermediates.
struct ScaledPower {
    Mat mat;
    double log_scale = 0.0;
    explicit ScaledPower(int n) : mat(Mat::Identity(n, n)) {}
    void multiply_left(const Mat& a) {
        mat = a * mat;
        renorm();
    }
    void multiply_right(const Mat& a) {
        mat = mat * a;
        renorm();
    }
    void renorm() {
        double s = op_norm(mat);
        if (s > 0.0 && (s > 1e100 || s < 1e-100)) {
            mat /= s;
            log_scale += std::log(s);
        }
    }
    // (this) * M * exp(log_scale), safe against exp overflow
    Mat apply(const Mat& m) const {
        Mat w = mat * m;
        if (log_scale < 690.0 && log_scale > -690.0) return Mat(w * std::exp(log_scale));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                double v = w(i, j);
                w(i, j) = v == 0.0 ? 0.0
                                   : (v > 0.0 ? 1.0 : -1.0) *
                                         std::exp(log_scale + std::log(std::abs(v)));
            }
        return w;
    }
    Vec apply(const Vec& v) const {
        Mat m = apply(Mat(v));
        return m.col(0);
    }
};

// left.mat * mid * right.mat scaled by exp(left.log_scale + right.log_scale);
// the normalized factors keep every intermediate in range even when the raw
// chains would overflow.
inline Mat scaled_product(const ScaledPower& left, const Mat& mid, const ScaledPower& right) {
    Mat w = left.mat * mid * right.mat;
    double ls = left.log_scale + right.log_scale;
    if (ls < 690.0 && ls > -690.0) return Mat(w * std::exp(ls));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            double v = w(i, j);
            w(i, j) = v == 0.0
                          ? 0.0
                          : (v > 0.0 ? 1.0 : -1.0) * std::exp(ls + std::log(std::abs(v)));
        }
    return w;
}

}  // namespace detail

// --- the contracting case ------------------------------------------------------

// Certified constants for the contracting-case series. All operator norms are
// taken in the adapted norm of L (|L|_1 <= rho1 < 1); f-constants estimated in
// the base max norm convert by the equivalence factor K.
struct ContractionPlan {
    double alpha = 0.0;
    int m = 1;
    double eps1 = 0.0;
    double delta = 0.0;        // base-norm ball on which the constants hold
    double eval_radius = 0.0;  // delta / K: orbits from here provably stay in B_delta
    double K1 = 0.0;           // K_{m,1}
    double K2 = 0.0;           // K_{m,2}
    double tau1 = 0.0;
    double tau_m = 0.0;
    AdaptedNorm adapted;
    double lip_f = 0.0;  // adapted-norm certified bounds at delta
    double hol_f = 0.0;
};

struct SeriesOptions {
    double tol_tail = 1e-10;
    int n_max = kSeriesCap;
};

namespace detail {

// smallest eps with lhs(eps) = 1, found by bisection on [0, hi]
inline double slack_root(const std::function<double(double)>& lhs, double hi) {
    if (lhs(0.0) >= 1.0) return 0.0;
    double lo = 0.0;
    if (lhs(hi) < 1.0) return hi;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (lhs(mid) < 1.0 ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace detail

inline ContractionPlan plan_contraction(const Operator& L, const RegularityBundle& reg_in,
                                        int m_cap = 60) {
    double alpha = reg_in.alpha;
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::BadPrecondition, "alpha must be in (0,1)");
    double rho = spectral_radius(L);
    double cond = condition_number(L);
    require(cond * std::pow(rho, alpha) < 1.0, ErrorCode::NotAlphaContracting,
            "c(L) rho(L)^alpha >= 1");

    ContractionPlan plan;
    plan.alpha = alpha;
    plan.adapted = adapted_norm(L, 0.5 * (1.0 - rho));
    const AdaptedNorm& nrm = plan.adapted;
    const double K = nrm.K;

    RegularityBundle reg = reg_in.inflated();
    double lip1_full = K * reg.lip;  // adapted-norm conversions
    double hol1 = K * reg.hol;

    // certified adapted-norm bounds of powers
    std::vector<Mat> pow_pos{Mat::Identity(L.dim(), L.dim())};
    std::vector<Mat> pow_neg{Mat::Identity(L.dim(), L.dim())};
    auto nLm = [&](int m) {
        while (static_cast<int>(pow_pos.size()) <= m)
            pow_pos.push_back(L.entries() * pow_pos.back());
        return nrm.defining_power_bound(pow_pos[static_cast<std::size_t>(m)], m);
    };
    auto nLinv = [&](int m) {
        while (static_cast<int>(pow_neg.size()) <= m)
            pow_neg.push_back(L.inverse() * pow_neg.back());
        return K * op_norm(pow_neg[static_cast<std::size_t>(m)]);
    };

    std::string trace;
    for (int m = 1; m <= m_cap; ++m) {
        if (nLinv(m) * std::pow(nLm(m), 1.0 + alpha) >= kPlanMargin) continue;

        double am = nLm(m), aim = nLinv(m);
        double slack = std::min({1.0 - nrm.rho1,           // |L|_1 + eps < 1
                                 1.0 / nLinv(1),           // m(L) - eps > 0
                                 1.0 - am,                 // |L^m|_1 + eps < 1
                                 1.0 / am,                 // m(L^{-m}) - eps > 0
                                 detail::slack_root(
                                     [&](double e) { return aim * std::pow(am + e, 1.0 + alpha); },
                                     1.0)});
        double eps1 = 0.5 * slack;
        double k2 = aim * std::pow(am + eps1, 1.0 + alpha);
        if (k2 >= kPlanMargin) {
            trace = "K_{m,2} >= margin at m=" + std::to_string(m);
            continue;
        }

        for (double delta = reg.domain_radius; delta >= kDeltaFloor; delta *= 0.5) {
            double lip_f = std::min(lip1_full, hol1 * std::pow(delta, alpha));
            double lip_fm = m * lip_f;  // Lip(T) < 1, so the power recursion base is 1
            double hol_fm = m * hol1;
            if (lip_f >= eps1 || lip_fm >= eps1) continue;
            double k1 = aim * std::pow(am + eps1, alpha) * std::pow(K * delta, alpha) * hol_fm;
            double tau = k1 + k2;
            if (tau < kPlanMargin) {
                plan.m = m;
                plan.eps1 = eps1;
                plan.delta = delta;
                plan.eval_radius = delta / K;
                plan.K1 = k1;
                plan.K2 = k2;
                plan.tau_m = tau;
                plan.lip_f = lip_f;
                plan.hol_f = hol1;
                double k11 = nLinv(1) * std::pow(nLm(1) + eps1, alpha) *
                             std::pow(K * delta, alpha) * hol1;
                plan.tau1 = k11 + nLinv(1) * std::pow(nLm(1) + eps1, 1.0 + alpha);
                return plan;
            }
        }
        trace = "tau_m stayed >= margin down to the delta floor at m=" + std::to_string(m);
    }
    raise(ErrorCode::PlanInfeasible,
          "no (m, eps, delta) satisfies the contracting chain; last failure: " + trace);
}

// phi(x) = sum_n L^{-(n+1)} f(T^n x), R = I + phi (the unique strong
// conjugacy of the alpha-contracting case).
class ContractingSeriesConjugacy final : public ConjugacyBase {
  public:
    ContractingSeriesConjugacy(MapBundle map, ContractionPlan plan, SeriesOptions opts,
                               std::string kind_tag = "contracting_series")
        : map_(std::move(map)), plan_(std::move(plan)), opts_(opts),
          kind_(std::move(kind_tag)) {}

    Vec eval(const Vec& x, ConjEvalInfo* info = nullptr) const override {
        check_domain(x);
        const int n = map_.dim();
        std::vector<KahanSum> phi(static_cast<std::size_t>(n));
        detail::BlockTracker tracker(plan_.m, plan_.tau_m, opts_.tol_tail);
        detail::ScaledPower linv(n);
        Vec w = x;
        ConjEvalInfo local{};
        for (int k = 0; k < opts_.n_max; ++k) {
            linv.multiply_left(map_.linear().inverse());
            Vec term = linv.apply(map_.nonlinear(w));
            for (int i = 0; i < n; ++i) phi[static_cast<std::size_t>(i)].add(term[i]);
            if (tracker.add(inf_norm(term), &local)) break;
            w = map_.linear().entries() * w + map_.nonlinear(w);
        }
        if (info) *info = local;
        Vec out = x;
        for (int i = 0; i < n; ++i) out[i] += phi[static_cast<std::size_t>(i)].value();
        return out;
    }

    Mat jacobian(const Vec& x) const override {
        check_domain(x);
        const int n = map_.dim();
        Mat dphi = Mat::Zero(n, n);
        detail::BlockTracker tracker(plan_.m, plan_.tau_m, opts_.tol_tail);
        detail::ScaledPower linv(n);
        Mat chain = Mat::Identity(n, n);
        Vec w = x;
        for (int k = 0; k < opts_.n_max; ++k) {
            linv.multiply_left(map_.linear().inverse());
            Mat term = linv.apply(Mat(map_.nonlinear_jacobian(w) * chain));
            dphi += term;
            ConjEvalInfo scratch;
            if (tracker.add(op_norm(term), &scratch)) break;
            chain = (map_.linear().entries() + map_.nonlinear_jacobian(w)) * chain;
            w = map_.linear().entries() * w + map_.nonlinear(w);
        }
        return Mat::Identity(n, n) + dphi;
    }

    std::string kind() const override { return kind_; }
    int dim() const override { return map_.dim(); }
    double domain_radius() const override { return plan_.eval_radius; }
    const ContractionPlan& plan() const { return plan_; }

  private:
    void check_domain(const Vec& x) const {
        require(inf_norm(x) <= plan_.eval_radius * (1.0 + 1e-9), ErrorCode::DomainExceeded,
                "point outside the certified series domain");
    }

    MapBundle map_;
    ContractionPlan plan_;
    SeriesOptions opts_;
    std::string kind_;
};

inline ConjugacyPtr linearize_contracting(const MapBundle& map, const ContractionPlan& plan,
                                          SeriesOptions opts = {}) {
    require(map.delta() >= plan.delta * (1.0 - 1e-12) || map.global(), ErrorCode::DomainExceeded,
            "map domain smaller than the plan ball");
    return std::make_shared<ContractingSeriesConjugacy>(map, plan, opts);
}

// Expanding fixed point: the series is run on T^{-1} (whose linear part is
// contracting); the resulting R also conjugates T to L.
inline ConjugacyPtr linearize_expanding(const MapBundle& map, double alpha,
                                        const SamplePlan& reg_plan, SeriesOptions opts = {}) {
    Operator Linv = map.linear().inverted();
    MapBundle fwd = map.as_global();
    ClosedForm inv;
    inv.tag = "inverse:" + map.name();
    inv.value = [fwd, Linv](const Vec& z) {
        return Vec(invert_point(fwd, z, 1e-14) - Linv.entries() * z);
    };
    inv.jac = [fwd, Linv](const Vec& z) {
        Vec w = invert_point(fwd, z, 1e-14);
        Mat dt = fwd.linear().entries() + fwd.nonlinear_jacobian(w);
        return Mat(dt.inverse() - Linv.entries());
    };
    double delta_inv = map.delta() * Linv.min_norm() * 0.9;
    MapBundle inv_bundle(Linv, std::move(inv), delta_inv, "inverse:" + map.name());
    SamplePlan rp = reg_plan;
    rp.radius = std::min(rp.radius, delta_inv);
    RegularityBundle reg = estimate_regularity(inv_bundle, alpha, rp);
    ContractionPlan plan = plan_contraction(Linv, reg);
    return std::make_shared<ContractingSeriesConjugacy>(inv_bundle, plan, opts,
                                                        "contracting_series(inverse)");
}

// --- flattening (graph transform) ----------------------------------------------

// Grid function on [-radius, radius]^in_dim with multilinear interpolation.
// res intervals per axis (res even keeps 0 on the grid).
struct GridFn {
    int in_dim = 1;
    int out_dim = 1;
    int res = 16;
    double radius = 0.0;
    std::vector<Vec> values;

    int nodes_per_axis() const { return res + 1; }
    std::size_t node_count() const {
        std::size_t c = 1;
        for (int d = 0; d < in_dim; ++d) c *= static_cast<std::size_t>(nodes_per_axis());
        return c;
    }
    Vec node_coord(std::size_t idx) const {
        Vec x(in_dim);
        for (int d = 0; d < in_dim; ++d) {
            int i = static_cast<int>(idx % static_cast<std::size_t>(nodes_per_axis()));
            idx /= static_cast<std::size_t>(nodes_per_axis());
            x[d] = -radius + 2.0 * radius * i / res;
        }
        return x;
    }

    Vec eval(const Vec& x) const {
        std::vector<int> base(static_cast<std::size_t>(in_dim));
        std::vector<double> frac(static_cast<std::size_t>(in_dim));
        for (int d = 0; d < in_dim; ++d) {
            double t = (std::clamp(x[d], -radius, radius) + radius) / (2.0 * radius) * res;
            int i = std::min(res - 1, static_cast<int>(t));
            base[static_cast<std::size_t>(d)] = i;
            frac[static_cast<std::size_t>(d)] = t - i;
        }
        Vec out = Vec::Zero(out_dim);
        for (int corner = 0; corner < (1 << in_dim); ++corner) {
            double w = 1.0;
            std::size_t idx = 0, stride = 1;
            for (int d = 0; d < in_dim; ++d) {
                int bit = (corner >> d) & 1;
                w *= bit ? frac[static_cast<std::size_t>(d)]
                         : 1.0 - frac[static_cast<std::size_t>(d)];
                idx += stride * static_cast<std::size_t>(base[static_cast<std::size_t>(d)] + bit);
                stride *= static_cast<std::size_t>(nodes_per_axis());
            }
            if (w != 0.0) out += w * values[idx];
        }
        return out;
    }

    Mat jac(const Vec& x) const {
        Mat j(out_dim, in_dim);
        double h = radius / res;
        for (int d = 0; d < in_dim; ++d) {
            Vec e = Vec::Zero(in_dim);
            e[d] = h;
            j.col(d) = (eval(x + e) - eval(x - e)) / (2.0 * h);
        }
        return j;
    }
};

struct FlatteningMap {
    GridFn g_u;  // E^u_delta -> E^s
    GridFn g_s;  // E^s_delta -> E^u
    int grid_res = 0;
    double residual = 0.0;
};

namespace detail {

// One-sided graph transform: the graph of g over the expanding block of
// `map` is replaced by its image under the map, reparameterized over the
// same block. exp_ids/con_ids partition the coordinates.
inline GridFn graph_transform_fixed_point(const MapBundle& map, const std::vector<int>& exp_ids,
                                          const std::vector<int>& con_ids, double radius, int res,
                                          double tol, int max_iter) {
    const int du = static_cast<int>(exp_ids.size());
    const int ds = static_cast<int>(con_ids.size());
    require(du <= 3, ErrorCode::WrongDimension, "graph transform grids support dim_u <= 3");
    Mat a(du, du), b(ds, ds);
    for (int i = 0; i < du; ++i)
        for (int j = 0; j < du; ++j) a(i, j) = map.linear().entries()(exp_ids[i], exp_ids[j]);
    for (int i = 0; i < ds; ++i)
        for (int j = 0; j < ds; ++j) b(i, j) = map.linear().entries()(con_ids[i], con_ids[j]);
    Mat a_inv = a.inverse();

    auto embed = [&](const Vec& x, const Vec& y) {
        Vec p = Vec::Zero(map.dim());
        for (int i = 0; i < du; ++i) p[exp_ids[i]] = x[i];
        for (int i = 0; i < ds; ++i) p[con_ids[i]] = y[i];
        return p;
    };
    auto comp = [&](const Vec& full, const std::vector<int>& ids) {
        Vec out(static_cast<int>(ids.size()));
        for (std::size_t i = 0; i < ids.size(); ++i) out[static_cast<int>(i)] = full[ids[i]];
        return out;
    };

    GridFn g;
    g.in_dim = du;
    g.out_dim = ds;
    g.res = res;
    g.radius = radius;
    g.values.assign(g.node_count(), Vec::Zero(ds));

    for (int iter = 0; iter < max_iter; ++iter) {
        GridFn next = g;
        double change = 0.0;
        for (std::size_t idx = 0; idx < g.node_count(); ++idx) {
            Vec xp = g.node_coord(idx);
            // solve A x + X(x, g(x)) = xp
            Vec x = a_inv * xp;
            bool ok = false;
            for (int it = 0; it < 100; ++it) {
                Vec fx = map.nonlinear(embed(x, g.eval(x)));
                Vec xn = a_inv * (xp - comp(fx, exp_ids));
                double step = inf_norm(xn - x);
                x = xn;
                if (step < 1e-13 * std::max(1.0, radius)) {
                    ok = true;
                    break;
                }
                if (inf_norm(x) > 4.0 * radius)
                    raise(ErrorCode::ReparameterizationFailed,
                          "graph image folds over: preimage left the grid box");
            }
            require(ok, ErrorCode::ReparameterizationFailed,
                    "reparameterization iteration stalled");
            Vec gx = g.eval(x);
            Vec fx = map.nonlinear(embed(x, gx));
            next.values[idx] = b * gx + comp(fx, con_ids);
            change = std::max(change, inf_norm(next.values[idx] - g.values[idx]));
        }
        g = next;
        if (change < tol) return g;
    }
    raise(ErrorCode::GraphTransformDiverged, "graph transform did not reach tolerance");
}

}  // namespace detail

// Flattening of the local invariant manifolds: W^u as the graph of g_u over
// E^u_delta (fixed point of the graph transform under T) and W^s as the graph
// of g_s under T^{-1}. The tangency Dg(0) = 0 is enforced by subtracting the
// fitted linear part at 0.
inline FlatteningMap flatten(const MapBundle& map, int dim_u, int grid_res, double tol) {
    require(dim_u > 0 && dim_u < map.dim(), ErrorCode::NonHyperbolic,
            "flatten needs a saddle splitting");
    require(grid_res >= 4 && grid_res % 2 == 0, ErrorCode::BadPrecondition,
            "grid resolution must be even and >= 4");
    std::vector<int> uids, sids;
    for (int i = 0; i < dim_u; ++i) uids.push_back(i);
    for (int i = dim_u; i < map.dim(); ++i) sids.push_back(i);

    // contraction condition of the transform: Lip(f) below the gap margin
    SamplePlan plan;
    plan.radius = map.delta();
    plan.seed = 5;
    double lipf = estimate_lip(map, plan).lip * kEmpiricalInflation;
    Mat a(dim_u, dim_u);
    for (int i = 0; i < dim_u; ++i)
        for (int j = 0; j < dim_u; ++j) a(i, j) = map.linear().entries()(uids[i], uids[j]);
    Mat b(map.dim() - dim_u, map.dim() - dim_u);
    for (int i = 0; i < map.dim() - dim_u; ++i)
        for (int j = 0; j < map.dim() - dim_u; ++j)
            b(i, j) = map.linear().entries()(sids[i], sids[j]);
    double gap = std::min(1.0 / op_norm(a.inverse()) - 1.0, 1.0 - op_norm(b));
    require(lipf < 0.5 * gap, ErrorCode::PreconditionLip,
            "nonlinearity exceeds the graph-transform contraction margin");

    FlatteningMap out;
    out.grid_res = grid_res;
    out.g_u = detail::graph_transform_fixed_point(map.as_global(), uids, sids, map.delta(),
                                                  grid_res, tol, 600);

    // inverse bundle for the stable graph
    MapBundle fwd = map.as_global();
    Operator Linv = map.linear().inverted();
    ClosedForm invf;
    invf.tag = "inverse:" + map.name();
    invf.value = [fwd, Linv](const Vec& z) {
        return Vec(invert_point(fwd, z, 1e-14) - Linv.entries() * z);
    };
    invf.jac = [fwd, Linv](const Vec& z) {
        Vec w = invert_point(fwd, z, 1e-14);
        Mat dt = fwd.linear().entries() + fwd.nonlinear_jacobian(w);
        return Mat(dt.inverse() - Linv.entries());
    };
    MapBundle inv_bundle(Linv, std::move(invf), map.delta(), "inverse:" + map.name(), true);
    out.g_s = detail::graph_transform_fixed_point(inv_bundle, sids, uids, map.delta(), grid_res,
                                                  tol, 600);

    // tangency correction Dg(0) = 0
    auto detrend = [](GridFn& g) {
        Mat m = g.jac(Vec::Zero(g.in_dim));
        Vec g0 = g.eval(Vec::Zero(g.in_dim));
        for (std::size_t idx = 0; idx < g.node_count(); ++idx)
            g.values[idx] -= g0 + m * g.node_coord(idx);
    };
    detrend(out.g_u);
    detrend(out.g_s);

    // invariance defect of the corrected unstable graph on off-grid samples
    double res = 0.0;
    for (int i = 0; i < 256; ++i) {
        Vec x = 0.8 * map.delta() * halton_point(static_cast<std::uint64_t>(i), dim_u, 37);
        Vec p = Vec::Zero(map.dim());
        for (int d = 0; d < dim_u; ++d) p[uids[d]] = x[d];
        Vec gu = out.g_u.eval(x);
        for (int d = 0; d < map.dim() - dim_u; ++d) p[sids[d]] = gu[d];
        Vec tp = fwd.eval(p);
        Vec txu(dim_u), txs(map.dim() - dim_u);
        for (int d = 0; d < dim_u; ++d) txu[d] = tp[uids[d]];
        for (int d = 0; d < map.dim() - dim_u; ++d) txs[d] = tp[sids[d]];
        if (inf_norm(txu) > map.delta()) continue;
        res = std::max(res, inf_norm(txs - out.g_u.eval(txu)));
    }
    out.residual = res;
    return out;
}

// R(x, y) = (x - g_s(y), y - g_u(x)): strong conjugacy making both local
// invariant manifolds flat.
class FlatteningConjugacy final : public ConjugacyBase {
  public:
    FlatteningConjugacy(FlatteningMap fm, int dim_u, int dim, double radius)
        : fm_(std::move(fm)), du_(dim_u), dim_(dim), radius_(radius) {}

    Vec eval(const Vec& p, ConjEvalInfo* info = nullptr) const override {
        if (info) *info = {};
        Vec x = p.head(du_), y = p.tail(dim_ - du_);
        Vec out(dim_);
        out.head(du_) = x - fm_.g_s.eval(y);
        out.tail(dim_ - du_) = y - fm_.g_u.eval(x);
        return out;
    }
    Mat jacobian(const Vec& p) const override {
        Vec x = p.head(du_), y = p.tail(dim_ - du_);
        Mat j = Mat::Identity(dim_, dim_);
        j.topRightCorner(du_, dim_ - du_) = -fm_.g_s.jac(y);
        j.bottomLeftCorner(dim_ - du_, du_) = -fm_.g_u.jac(x);
        return j;
    }
    std::string kind() const override { return "flattening"; }
    int dim() const override { return dim_; }
    double domain_radius() const override { return radius_; }
    const FlatteningMap& data() const { return fm_; }

  private:
    FlatteningMap fm_;
    int du_;
    int dim_;
    double radius_;
};

// --- h-linearization ------------------------------------------------------------

namespace detail {

inline bool axis_restriction_is_linear(const MapBundle& axis, double radius) {
    for (int i = 0; i < 64; ++i) {
        Vec x = radius * halton_point(static_cast<std::uint64_t>(i), axis.dim(), 41);
        if (inf_norm(axis.nonlinear(x)) > 1e-12 * std::max(1.0, radius)) return false;
    }
    return true;
}

}  // namespace detail

struct HLinearizeResult {
    ConjugacyPtr conjugacy;  // block product (R_u, R_s)
    MapBundle t1;            // R T R^{-1}, h-linear on its ball
};

// Straightens the dynamics on the invariant axes of a flat map: the axis
// restrictions T^u, T^s are linearized by the contracting-case series (via
// the inverse map on the expanding side) and R = R_u x R_s conjugates T to an
// h-linear T1 with the same linear part.
inline HLinearizeResult h_linearize(const MapBundle& map, int dim_u, double alpha,
                                    SeriesOptions opts = {}, double flat_tol = 1e-9) {
    const int n = map.dim();
    std::vector<int> uids, sids;
    for (int i = 0; i < dim_u; ++i) uids.push_back(i);
    for (int i = dim_u; i < n; ++i) sids.push_back(i);

    // flatness check: the axes must be invariant
    for (int i = 0; i < 64; ++i) {
        Vec xu = Vec::Zero(n), xs = Vec::Zero(n);
        Vec h = map.delta() * halton_point(static_cast<std::uint64_t>(i), n, 43);
        for (int d : uids) xu[d] = h[d];
        for (int d : sids) xs[d] = h[d];
        Vec fu = map.nonlinear(xu), fs = map.nonlinear(xs);
        for (int d : sids)
            require(std::abs(fu[d]) < flat_tol, ErrorCode::NotFlat, "E^u is not invariant");
        for (int d : uids)
            require(std::abs(fs[d]) < flat_tol, ErrorCode::NotFlat, "E^s is not invariant");
    }

    MapBundle tu = axis_restriction(map, uids, map.name() + ":u_axis");
    MapBundle ts = axis_restriction(map, sids, map.name() + ":s_axis");

    SamplePlan rp;
    rp.radius = map.delta();
    rp.seed = 7;

    ConjugacyPtr ru, rs;
    if (detail::axis_restriction_is_linear(tu, map.delta())) {
        ru = std::make_shared<IdentityConjugacy>(dim_u, map.delta());
    } else {
        ru = linearize_expanding(tu.as_global(), alpha, rp, opts);
    }
    if (detail::axis_restriction_is_linear(ts, map.delta())) {
        rs = std::make_shared<IdentityConjugacy>(n - dim_u, map.delta());
    } else {
        RegularityBundle reg = estimate_regularity(ts, alpha, rp);
        ContractionPlan cp = plan_contraction(ts.linear(), reg);
        rs = linearize_contracting(ts, cp, opts);
    }

    double radius = 0.8 * std::min({map.delta(), ru->domain_radius(), rs->domain_radius()});
    ConjugacyPtr r = std::make_shared<BlockProductConjugacy>(ru, rs, radius);
    MapBundle t1 = conjugated_bundle(r, map.as_global(), radius, map.name() + ":hlinear");

    // the conjugated axis restrictions must now be linear
    for (int i = 0; i < 32; ++i) {
        Vec xu = Vec::Zero(n), xs = Vec::Zero(n);
        Vec h = 0.5 * radius * halton_point(static_cast<std::uint64_t>(i), n, 47);
        for (int d : uids) xu[d] = h[d];
        for (int d : sids) xs[d] = h[d];
        double htol = std::max(1e-8, 10.0 * flat_tol);
        require(inf_norm(t1.nonlinear(xu)) < htol && inf_norm(t1.nonlinear(xs)) < htol,
                ErrorCode::NotHLinear, "conjugated map failed the h-linearity check");
    }
    return {r, t1};
}

// --- the saddle case -------------------------------------------------------------

// Constant set of the saddle series and its Hoelder certificate. The K-array
// ordering is (K_{m,1}, K_{m,2}, K_{m,3}, K_{m,4}); `twin` holds the same
// constants with (S, A, B) replaced by (S^{-1}, B^{-1}, A^{-1}).
struct SaddlePlan {
    double alpha = 0.0;
    int m = 1;
    double eps = 0.0;
    double eta = 0.0;
    double beta = 0.0;
    double delta = 0.0;
    std::array<double, 4> K{};
    std::array<double, 4> K_twin{};
    std::array<double, 4> Ktilde{};
    std::array<double, 4> Ktilde_twin{};
    double tau_m = 0.0;
    double tau_tilde_m = 0.0;
    bool beta_certified = false;
    bool feasible = true;       // false for best-effort plans on non-alpha-hyperbolic input
    int dim_u = 0;
    int dim_s = 0;
    double lip_S = 0.0;         // certified adapted-norm bounds at delta
    double lip_S_inv = 0.0;
    double lip_g = 0.0;
    double hol_g = 0.0;
    double K_conv = 1.0;        // base->adapted conversion factor
    double plateau_radius = 0.0;
    std::string bump_note;      // support clamp / certificate notes
};

struct SaddlePlanOptions {
    double delta0 = 0.1;
    double margin = kPlanMargin;
    int m_cap = 40;
    double c_plateau = 0.5;
    double tol_tail = 1e-10;
    double delta_cap = std::numeric_limits<double>::infinity();
};

using HolderEstimator = std::function<RegularityBundle(double delta)>;

inline HolderEstimator fixed_bundle_estimator(const RegularityBundle& reg) {
    return [reg](double delta) {
        RegularityBundle b = reg;
        b.lip = std::min(reg.lip, reg.hol * std::pow(delta, reg.alpha));
        b.domain_radius = delta;
        return b;
    };
}

inline HolderEstimator sampling_estimator(const MapBundle& map, double alpha,
                                          std::uint64_t seed = 11) {
    return [map, alpha, seed](double delta) {
        SamplePlan plan;
        plan.radius = delta;
        plan.seed = seed;
        return estimate_regularity(map, alpha, plan);
    };
}

namespace detail {

struct SaddleNorms {
    AdaptedNorm na;  // adapted norm of A^{-1}
    AdaptedNorm nb;  // adapted norm of B
    std::vector<Mat> a_pos, a_neg, b_pos, b_neg;
    double K_conv = 1.0;
    // certified adapted-norm bounds
    double am(int m) { return na.K * op_norm(grow(a_pos, m)); }
    double ainvm(int m) {
        return std::min(std::pow(na.rho1, m), na.K * op_norm(grow(a_neg, m)));
    }
    double bm(int m) { return std::min(std::pow(nb.rho1, m), nb.K * op_norm(grow(b_pos, m))); }
    double binvm(int m) { return nb.K * op_norm(grow(b_neg, m)); }

  private:
    static const Mat& grow(std::vector<Mat>& v, int m) {
        // v[0] = I, v[1] = base; extended by repeated multiplication
        while (static_cast<int>(v.size()) <= m) v.push_back(v[1] * v.back());
        return v[static_cast<std::size_t>(m)];
    }
};

inline SaddleNorms make_saddle_norms(const Operator& A, const Operator& B) {
    SaddleNorms sn;
    double ra = spectral_radius(A.inverted());
    double rb = spectral_radius(B);
    require(ra < 1.0 && rb < 1.0, ErrorCode::NonHyperbolic,
            "saddle blocks must be expanding / contracting");
    sn.na = adapted_norm(A.inverted(), 0.5 * (1.0 - ra));
    sn.nb = adapted_norm(B, 0.5 * (1.0 - rb));
    sn.K_conv = std::max(sn.na.K, sn.nb.K);
    sn.a_pos = {Mat::Identity(A.dim(), A.dim()), A.entries()};
    sn.a_neg = {Mat::Identity(A.dim(), A.dim()), A.inverse()};
    sn.b_pos = {Mat::Identity(B.dim(), B.dim()), B.entries()};
    sn.b_neg = {Mat::Identity(B.dim(), B.dim()), B.inverse()};
    return sn;
}

}  // namespace detail

// Planner for the saddle series. Tier 1 (m, eps, delta, tau_m) certifies the
// C^1 series; tier 2 (eta, beta, tau_tilde) certifies the C^{1,beta}
// estimate and may be unattainable at float-representable delta for stiff
// spectra, in which case beta_certified = false and the empirical Hoelder
// fit carries the exponent evidence.
inline SaddlePlan plan_saddle(const Operator& A, const Operator& B, double alpha,
                              const HolderEstimator& estimate, const BumpProfile& profile,
                              SaddlePlanOptions opts = {}) {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::BadPrecondition, "alpha must be in (0,1)");
    {
        double ch = std::max(condition_number(A), condition_number(B));
        double rh = std::max(spectral_radius(A.inverted()), spectral_radius(B));
        require(ch * std::pow(rh, alpha) < 1.0, ErrorCode::NotAlphaHyperbolic,
                "c_h rho_h^alpha >= 1 for this splitting");
    }
    detail::SaddleNorms sn = detail::make_saddle_norms(A, B);
    const double margin = opts.margin;
    const double c1 = profile.c1();
    const double c2 = profile.c2(alpha);
    std::string trace = "m search exhausted";

    for (int m = 1; m <= opts.m_cap; ++m) {
        double am = sn.am(m), aim = sn.ainvm(m), bm = sn.bm(m), bim = sn.binvm(m);
        if (aim * am * std::pow(bm, alpha) >= margin) continue;       // (107)
        if (bim * bm * std::pow(aim, alpha) >= margin) continue;      // (108)

        // eps: half of the least slack across the chain
        double s109 = std::min(1.0 / aim - 1.0, 1.0 / bm - 1.0);
        double s110 = std::min(1.0 - sn.na.rho1, 1.0 - sn.nb.rho1);
        double s111 = detail::slack_root(
            [&](double e) { return aim * (am + e) * std::pow(bm + e, alpha); }, 1.0);
        double s112 = detail::slack_root(
            [&](double e) { return bm * (bim + e) * std::pow(aim + e, alpha); }, 1.0);
        double eps = 0.5 * std::min({s109, s110, s111, s112});
        if (eps <= 0.0) {
            trace = "no positive eps slack at m=" + std::to_string(m);
            continue;
        }

        double k1 = aim * (am + eps) * std::pow(bm + eps, alpha);
        double k1t = bm * (bim + eps) * std::pow(aim + eps, alpha);
        if (k1 >= margin || k1t >= margin) {
            trace = "K_{m,1} >= margin at m=" + std::to_string(m);
            continue;
        }

        // eta: smallest value satisfying (115)/(116) with margin
        auto ktilde1 = [&](double eta) {
            return aim * (am + eps) * std::pow(bm + eps, alpha * eta) *
                   std::pow(am + eps, alpha * (1.0 - eta));
        };
        auto ktilde1_twin = [&](double eta) {
            return bm * (bim + eps) * std::pow(aim + eps, alpha * eta) *
                   std::pow(bim + eps, alpha * (1.0 - eta));
        };
        if (ktilde1(1.0) >= margin || ktilde1_twin(1.0) >= margin) {
            trace = "eta chain infeasible even at eta -> 1 for m=" + std::to_string(m);
            continue;
        }
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 100; ++it) {
            double mid = 0.5 * (lo + hi);
            (ktilde1(mid) < margin && ktilde1_twin(mid) < margin ? hi : lo) = mid;
        }
        const double eta_min = hi;  // smallest eta passing (115)/(116) with margin

        std::optional<SaddlePlan> tier1_plan;
        for (double delta = std::min(opts.delta0, opts.delta_cap); delta >= kDeltaFloor;
             delta *= 0.5) {
            RegularityBundle reg = estimate(delta).inflated();
            double lip_f = std::min(reg.lip, reg.hol * std::pow(delta, alpha));
            double lip_g = sn.K_conv *
                           std::min(c1 * lip_f, std::pow(delta, alpha) * c2 * reg.hol);
            double hol_g = sn.K_conv * c2 * reg.hol;

            double norm_L = std::max(sn.na.K * op_norm(A.entries()), sn.nb.rho1);
            double norm_Linv = std::max(sn.na.rho1, sn.nb.K * op_norm(B.inverse()));
            double m_L = 1.0 / norm_Linv;
            if (lip_g >= 0.5 * m_L || lip_g >= eps) continue;  // (88), (135)
            double lipS = norm_L + lip_g;
            double lipSinv = 1.0 / (m_L - lip_g);

            double lip_fm = m * lip_g * std::pow(lipS, m - 1);
            double hol_fm = m * hol_g * std::pow(lipS, (1.0 + alpha) * (m - 1));
            double hol_g1_inv = std::pow(m_L - lip_g, -(2.0 + alpha)) * hol_g;
            double lip_g1_inv = norm_Linv * lipSinv * lip_g;
            double bwd_base = std::max(1.0, lipSinv);
            double lip_gm = m * lip_g1_inv * std::pow(bwd_base, m - 1);
            double hol_gm = m * hol_g1_inv * std::pow(bwd_base, (1.0 + alpha) * (m - 1));
            if (lip_fm >= eps || lip_gm >= eps) continue;  // (136) and its twin

            double dm = sn.K_conv * support_radius(delta, lipS, lipSinv, m);
            double d1 = sn.K_conv * support_radius(delta, lipS, lipSinv, 1);

            double k2 = aim * std::pow(am + eps, alpha) * std::pow(dm, alpha) * hol_fm;
            double k3 = aim * std::pow(bm + eps, alpha) * std::pow(dm, alpha) * hol_fm;
            double k4 = aim * (am + eps) * (bm + eps);
            double k2t = bm * std::pow(bim + eps, alpha) * std::pow(dm, alpha) * hol_gm;
            double k3t = bm * std::pow(aim + eps, alpha) * std::pow(dm, alpha) * hol_gm;
            double k4t = bm * (bim + eps) * (aim + eps);
            double tau = std::max({k1 + k2, k3 + k4, k1t + k2t, k3t + k4t});
            if (tau >= margin) continue;

            SaddlePlan plan;
            plan.alpha = alpha;
            plan.m = m;
            plan.eps = eps;
            plan.delta = delta;
            plan.K = {k1, k2, k3, k4};
            plan.K_twin = {k1t, k2t, k3t, k4t};
            plan.tau_m = tau;
            plan.dim_u = A.dim();
            plan.dim_s = B.dim();
            plan.lip_S = lipS;
            plan.lip_S_inv = lipSinv;
            plan.lip_g = lip_g;
            plan.hol_g = hol_g;
            plan.K_conv = sn.K_conv;
            plan.plateau_radius = opts.c_plateau * delta;
            plan.bump_note = "support radius delta_n clamps max(Lip^n) below by 1";

            // tier 2: eta grid above the minimal value (the minimal eta has no
            // headroom for the delta-dependent Ktilde terms); the largest beta
            // = alpha(1 - eta) that certifies wins
            bool lemma57 = hol_fm * std::pow(dm, alpha) < eps / 3.0 &&
                           hol_g * std::pow(d1, alpha) < eps / 3.0 &&
                           dm < std::min(eps, 1.0 / 3.0);
            bool certified = false;
            double best_eta = std::min(0.999999, eta_min + 1e-6);
            std::array<double, 4> kt{}, ktt{};
            double tau_tilde = std::numeric_limits<double>::infinity();
            for (int step = 1; step <= 40 && !certified; ++step) {
                double eta = eta_min + (1.0 - eta_min) * step / 41.0;
                double dfac = std::pow(dm, alpha * (1.0 - eta));
                double e1 = ktilde1(eta);
                double e2 = aim * (am + eps) * dfac * hol_fm;
                double e3 = aim * std::pow(bm + eps, alpha * eta) *
                            std::pow(am + eps, alpha * (1.0 - eta)) * hol_fm * dfac;
                double e4 = k4;
                double e1t = ktilde1_twin(eta);
                double e2t = bm * (bim + eps) * dfac * hol_gm;
                double e3t = bm * std::pow(aim + eps, alpha * eta) *
                             std::pow(bim + eps, alpha * (1.0 - eta)) * hol_gm * dfac;
                double e4t = k4t;
                double tt = std::max({e1 + e2, e3 + e4, e1t + e2t, e3t + e4t});
                if (step == 1 || tt < tau_tilde) {
                    best_eta = eta;
                    kt = {e1, e2, e3, e4};
                    ktt = {e1t, e2t, e3t, e4t};
                    tau_tilde = tt;
                }
                if (tt < margin && lemma57) {
                    best_eta = eta;
                    kt = {e1, e2, e3, e4};
                    ktt = {e1t, e2t, e3t, e4t};
                    tau_tilde = tt;
                    certified = true;
                }
            }
            plan.eta = best_eta;
            plan.beta = alpha * (1.0 - best_eta);
            plan.Ktilde = kt;
            plan.Ktilde_twin = ktt;
            plan.tau_tilde_m = tau_tilde;
            plan.beta_certified = certified;
            if (certified) return plan;
            if (!tier1_plan) tier1_plan = plan;  // keep shrinking delta for tier 2
        }
        if (tier1_plan) {
            tier1_plan->bump_note +=
                "; tau_tilde chain not certified at float-representable delta, "
                "beta is reported from the empirical fit";
            return *tier1_plan;
        }
        trace = "tau_m stayed >= margin down to the delta floor at m=" + std::to_string(m);
    }
    raise(ErrorCode::PlanInfeasible, "saddle chain infeasible; last failure: " + trace);
}

inline SaddlePlan plan_saddle(const Operator& A, const Operator& B, double alpha,
                              const RegularityBundle& reg, const BumpProfile& profile,
                              SaddlePlanOptions opts = {}) {
    return plan_saddle(A, B, alpha, fixed_bundle_estimator(reg), profile, opts);
}

// Best-effort plan for saddles that fail the alpha-hyperbolic chain (the
// resonance path): the series is still run so that the divergence detector
// can produce its diagnostic.
inline SaddlePlan plan_saddle_forced(const Operator& A, const Operator& B, double alpha,
                                     double delta, double c_plateau = 0.5) {
    SaddlePlan plan;
    plan.alpha = alpha;
    plan.m = 1;
    plan.eps = 0.0;
    plan.eta = 1.0;
    plan.beta = 0.0;
    plan.delta = delta;
    plan.tau_m = 1.0;
    plan.tau_tilde_m = 1.0;
    plan.feasible = false;
    plan.beta_certified = false;
    plan.dim_u = A.dim();
    plan.dim_s = B.dim();
    plan.plateau_radius = c_plateau * delta;
    plan.bump_note = "forced plan: input failed the alpha-hyperbolicity chain";
    return plan;
}

// psi_s(z) = sum_{n>=0} A^{-(n+1)} X_1(S^n z)   (values in E^u)
// psi_u(z) = -sum_{n>=1} B^{n-1} Y_1(S^{-n} z)  (values in E^s)
// R = I + (psi_s, psi_u) conjugates the globalized S to L on all of E.
class SaddleSeriesConjugacy final : public ConjugacyBase {
  public:
    SaddleSeriesConjugacy(GlobalizedMap S, SaddlePlan plan, SeriesOptions opts)
        : S_(std::move(S)), plan_(std::move(plan)), opts_(opts) {
        const Mat& l = S_.bundle.linear().entries();
        du_ = plan_.dim_u;
        ds_ = plan_.dim_s;
        require(du_ + ds_ == S_.bundle.dim(), ErrorCode::WrongDimension,
                "plan dimensions do not match the map");
        require(op_norm(l.topRightCorner(du_, ds_)) < 1e-12 &&
                    op_norm(l.bottomLeftCorner(ds_, du_)) < 1e-12,
                ErrorCode::BadPrecondition, "saddle series expects block coordinates");
        a_ = l.topLeftCorner(du_, du_);
        b_ = l.bottomRightCorner(ds_, ds_);
        a_inv_ = a_.inverse();
        // adapted norms for the certified escape rules
        na_ = adapted_norm(Operator(a_).inverted(), 0.5 * (1.0 - spectral_radius(Operator(a_).inverted())));
        nb_ = adapted_norm(Operator(b_), 0.5 * (1.0 - spectral_radius(Operator(b_))));
        require(S_.h_linear, ErrorCode::NotHLinear, "saddle series needs an h-linear map");
    }

    // component evaluators (psi_s in E^u, psi_u in E^s)
    Vec psi_s(const Vec& z, ConjEvalInfo* info = nullptr) const {
        return forward_series(z, nullptr, info);
    }
    Vec psi_u(const Vec& z, ConjEvalInfo* info = nullptr) const {
        return backward_series(z, nullptr, info);
    }
    Mat psi_s_jac(const Vec& z) const {
        Mat j;
        forward_series(z, &j, nullptr);
        return j;
    }
    Mat psi_u_jac(const Vec& z) const {
        Mat j;
        backward_series(z, &j, nullptr);
        return j;
    }

    Vec eval(const Vec& z, ConjEvalInfo* info = nullptr) const override {
        ConjEvalInfo is, iu;
        Vec ps = forward_series(z, nullptr, &is);
        Vec pu = backward_series(z, nullptr, &iu);
        if (info) *info = {is.terms + iu.terms, is.tail_bound + iu.tail_bound};
        Vec out = z;
        out.head(du_) += ps;
        out.tail(ds_) += pu;
        return out;
    }

    Mat jacobian(const Vec& z) const override {
        Mat js, ju;
        forward_series(z, &js, nullptr);
        backward_series(z, &ju, nullptr);
        Mat j = Mat::Identity(dim(), dim());
        j.topRows(du_) += js;
        j.bottomRows(ds_) += ju;
        return j;
    }

    std::string kind() const override { return "saddle_series"; }
    int dim() const override { return du_ + ds_; }
    double domain_radius() const override { return plan_.plateau_radius; }
    const SaddlePlan& plan() const { return plan_; }
    const GlobalizedMap& globalized() const { return S_; }

  private:
    // forward series; fills value (if jac == nullptr) or the jacobian rows
    Vec forward_series(const Vec& z, Mat* jac, ConjEvalInfo* info) const {
        const int n = dim();
        std::vector<KahanSum> acc(static_cast<std::size_t>(du_));
        if (jac) *jac = Mat::Zero(du_, n);
        detail::BlockTracker tracker(plan_.m, std::min(plan_.tau_m, 0.999), opts_.tol_tail);
        detail::ScaledPower apow(du_);
        apow.multiply_left(a_inv_);  // A^{-1}
        detail::ScaledPower chain(n);
        Vec w = z;
        ConjEvalInfo local{};
        for (int k = 0; k < opts_.n_max; ++k) {
            Vec fw = S_.bundle.nonlinear(w);
            double tn = 0.0;
            if (jac) {
                Mat dxu = S_.bundle.nonlinear_jacobian(w).topRows(du_);
                Mat term = detail::scaled_product(apow, dxu, chain);
                *jac += term;
                tn = op_norm(term);
            } else {
                Vec term = apow.apply(Vec(fw.head(du_)));
                for (int i = 0; i < du_; ++i) acc[static_cast<std::size_t>(i)].add(term[i]);
                tn = inf_norm(term);
            }
            if (tracker.add(tn, &local)) break;
            // certified escape: once the u-part leaves the support in the
            // adapted norm it grows monotonically, all later terms vanish
            if (na_.eval(Vec(w.head(du_))) > na_.K * S_.delta * (1.0 + 1e-9) ||
                inf_norm(Vec(w.head(du_))) == 0.0) {
                tracker.finish_exact(&local);
                break;
            }
            if (jac) chain.multiply_left(S_.bundle.jacobian(w));
            w = S_.bundle.eval(w);
            apow.multiply_left(a_inv_);
        }
        if (info) *info = local;
        Vec out(du_);
        for (int i = 0; i < du_; ++i) out[i] = acc[static_cast<std::size_t>(i)].value();
        return out;
    }

    Vec backward_series(const Vec& z, Mat* jac, ConjEvalInfo* info) const {
        const int n = dim();
        std::vector<KahanSum> acc(static_cast<std::size_t>(ds_));
        if (jac) *jac = Mat::Zero(ds_, n);
        detail::BlockTracker tracker(plan_.m, std::min(plan_.tau_m, 0.999), opts_.tol_tail);
        detail::ScaledPower bpow(ds_);  // B^{n-1}, starts at identity
        detail::ScaledPower chain(n);
        Vec w = z;
        ConjEvalInfo local{};
        for (int k = 0; k < opts_.n_max; ++k) {
            Vec wprev = w;
            w = invert_point(S_.bundle, w, opts_.tol_tail * 0.1);
            if (jac) {
                Mat ds_inv = (S_.bundle.linear().entries() + S_.bundle.nonlinear_jacobian(w))
                                 .inverse();
                chain.multiply_left(ds_inv);
            }
            Vec fw = S_.bundle.nonlinear(w);
            double tn = 0.0;
            if (jac) {
                Mat dys = S_.bundle.nonlinear_jacobian(w).bottomRows(ds_);
                Mat term = detail::scaled_product(bpow, dys, chain);
                *jac -= term;
                tn = op_norm(term);
            } else {
                Vec term = bpow.apply(Vec(fw.tail(ds_)));
                for (int i = 0; i < ds_; ++i) acc[static_cast<std::size_t>(i)].add(-term[i]);
                tn = inf_norm(term);
            }
            if (tracker.add(tn, &local)) break;
            if (nb_.eval(Vec(w.tail(ds_))) > nb_.K * S_.delta * (1.0 + 1e-9) ||
                inf_norm(Vec(w.tail(ds_))) == 0.0) {
                tracker.finish_exact(&local);
                break;
            }
            bpow.multiply_left(b_);
        }
        if (info) *info = local;
        Vec out(ds_);
        for (int i = 0; i < ds_; ++i) out[i] = acc[static_cast<std::size_t>(i)].value();
        return out;
    }

    GlobalizedMap S_;
    SaddlePlan plan_;
    SeriesOptions opts_;
    int du_ = 0, ds_ = 0;
    Mat a_, b_, a_inv_;
    AdaptedNorm na_, nb_;
};

inline std::shared_ptr<const SaddleSeriesConjugacy> linearize_saddle(const GlobalizedMap& S,
                                                                     const SaddlePlan& plan,
                                                                     SeriesOptions opts = {}) {
    require(S.bundle.global(), ErrorCode::BadPrecondition, "saddle series needs a global map");
    require(std::abs(S.delta - plan.delta) <= 1e-12 * std::max(1.0, plan.delta) ||
                S.delta <= plan.delta,
            ErrorCode::BadPrecondition, "nonlinear support exceeds the planned ball");
    return std::make_shared<SaddleSeriesConjugacy>(S, plan, opts);
}

// --- anisotropic norms and the Hoelder certificate -------------------------------

// psi: E^u x E^s -> Z with partials split into x- and y-blocks
struct ComponentField {
    std::function<Vec(const Vec&)> value;
    std::function<Mat(const Vec&)> jac;  // rows: Z, cols: full space
    int dim_u = 0;
    int dim_s = 0;
};

struct AnisotropicEstimate {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
    double gamma4 = 0.0;
    double eta_used = 0.0;
    int samples = 0;
};

// empirical sups of the weighted norms:
//   gamma1 = sup |psi_x| / |y|^a,  gamma2 = sup |psi_y| / |x|^a,
//   gamma3 = sup |d psi_x| / V,    gamma4 = sup |d psi_y| / U
inline AnisotropicEstimate anisotropic_norms(const ComponentField& psi, double alpha, double eta,
                                             double radius, int n_samples,
                                             std::uint64_t seed = 51) {
    AnisotropicEstimate est;
    est.eta_used = eta;
    const int n = psi.dim_u + psi.dim_s;
    int used = 0;
    for (int i = 0; i < n_samples; ++i) {
        Vec z = radius * halton_point(static_cast<std::uint64_t>(i), n, seed);
        double xn = inf_norm(Vec(z.head(psi.dim_u)));
        double yn = inf_norm(Vec(z.tail(psi.dim_s)));
        Mat j = psi.jac(z);
        double jx = op_norm(Mat(j.leftCols(psi.dim_u)));
        double jy = op_norm(Mat(j.rightCols(psi.dim_s)));
        if (yn > 0.0) est.gamma1 = std::max(est.gamma1, jx / std::pow(yn, alpha));
        if (xn > 0.0) est.gamma2 = std::max(est.gamma2, jy / std::pow(xn, alpha));
        ++used;

        Vec hk = radius * 0.5 * halton_point(static_cast<std::uint64_t>(i), n, seed + 1);
        if (inf_norm(hk) == 0.0) continue;
        Vec z2 = z + hk;
        Mat j2 = psi.jac(z2);
        double hn = inf_norm(Vec(hk.head(psi.dim_u)));
        double kn = inf_norm(Vec(hk.tail(psi.dim_s)));
        double m_star = std::max(xn, hn);
        double m_xh = std::min(1.0, m_star);
        double n_yk = std::max(yn, kn);
        double u_w = std::pow(m_xh, alpha * eta) * std::pow(inf_norm(hk), alpha * (1.0 - eta));
        double v_w = std::pow(n_yk, alpha * eta) * std::pow(inf_norm(hk), alpha * (1.0 - eta));
        double dx = op_norm(Mat(j2.leftCols(psi.dim_u) - j.leftCols(psi.dim_u)));
        double dy = op_norm(Mat(j2.rightCols(psi.dim_s) - j.rightCols(psi.dim_s)));
        if (v_w > 0.0) est.gamma3 = std::max(est.gamma3, dx / v_w);
        if (u_w > 0.0) est.gamma4 = std::max(est.gamma4, dy / u_w);
    }
    require(used > 0, ErrorCode::DegenerateSample, "no usable anisotropic samples");
    est.samples = used;
    return est;
}

// H_s^n(psi)(z) = A^{-n} psi(S^n z): used to probe the operator contraction
inline ComponentField apply_hs(const ComponentField& psi, const GlobalizedMap& S, int n) {
    Mat a = S.bundle.linear().entries().topLeftCorner(psi.dim_u, psi.dim_u);
    Mat a_inv_n = Mat::Identity(psi.dim_u, psi.dim_u);
    for (int k = 0; k < n; ++k) a_inv_n = a.inverse() * a_inv_n;
    MapBundle s = S.bundle;
    ComponentField out;
    out.dim_u = psi.dim_u;
    out.dim_s = psi.dim_s;
    out.value = [psi, s, a_inv_n, n](const Vec& z) {
        Vec w = z;
        for (int k = 0; k < n; ++k) w = s.eval(w);
        return Vec(a_inv_n * psi.value(w));
    };
    out.jac = [psi, s, a_inv_n, n](const Vec& z) {
        Vec w = z;
        Mat chain = Mat::Identity(z.size(), z.size());
        for (int k = 0; k < n; ++k) {
            chain = s.jacobian(w) * chain;
            w = s.eval(w);
        }
        return Mat(a_inv_n * psi.jac(w) * chain);
    };
    return out;
}

struct HolderCertificate {
    double beta_planned = 0.0;
    HolderFit fit;
    bool pass = false;
    bool beta_certified = false;
};

// Samples DR pairs in the plateau ball and fits the Hoelder exponent of DR;
// passes when beta_hat >= plan.beta - 0.05 (a flat derivative field passes
// by the +inf sentinel).
inline HolderCertificate holder_certificate(const ConjugacyPtr& R, const SaddlePlan& plan,
                                            int n_samples, std::uint64_t seed = 61) {
    HolderCertificate cert;
    cert.beta_planned = plan.beta;
    cert.beta_certified = plan.beta_certified;
    double radius = plan.plateau_radius;
    int n_points = std::max(32, static_cast<int>(std::sqrt(2.0 * n_samples)) + 1);
    std::vector<std::pair<Vec, Mat>> samples;
    samples.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        Vec z = radius * halton_point(static_cast<std::uint64_t>(i), R->dim(), seed);
        samples.emplace_back(z, R->jacobian(z));
    }
    cert.fit = fit_holder_exponent(samples, {radius * 1e-3, 2.0 * radius});
    cert.pass = cert.fit.degenerate_constant || cert.fit.beta_hat >= plan.beta - 0.05;
    return cert;
}

}  // namespace holinear
