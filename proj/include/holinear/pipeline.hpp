#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "holinear/bump.hpp"
#include "holinear/conjugacy.hpp"
#include "holinear/errors.hpp"
#include "holinear/flows.hpp"
#include "holinear/linearize.hpp"
#include "holinear/maps.hpp"
#include "holinear/regularity.hpp"
#include "holinear/spectral.hpp"

namespace holinear {

struct PipelineOptions {
    double alpha = 0.5;
    double tol_tail = 1e-10;
    int grid_res = 64;
    int n_samples = 2000;
    double delta_cap = std::numeric_limits<double>::infinity();
    double resonant_delta = 0.002;  // support radius for the best-effort resonant run
    std::uint64_t seed = 0;
};

struct PipelineResult {
    HyperbolicityReport classification;
    std::vector<ResonanceRelation> resonances;
    Mat basis;                  // block basis; the conjugacy lives in these coordinates
    ConjugacyPtr conjugacy;     // strong conjugacy R with L R = R T~ near 0
    std::optional<ContractionPlan> contraction_plan;
    std::optional<SaddlePlan> saddle_plan;
    ConjugacyReport verification;
    HolderCertificate certificate;          // saddle route only
    double effective_radius = 0.0;          // ball on which R was verified
    double flatten_residual = 0.0;
    std::vector<std::string> stages;
    std::optional<MapBundle> verified_map;  // blocked map the residual was measured on
};

namespace detail {

inline MapBundle change_basis(const MapBundle& map, const Mat& c) {
    Mat cinv = c.inverse();
    Operator L(Mat(cinv * map.linear().entries() * c));
    MapBundle inner = map.as_global();
    ClosedForm f;
    f.tag = "blocked:" + map.name();
    f.value = [inner, c, cinv](const Vec& x) { return Vec(cinv * inner.nonlinear(c * x)); };
    f.jac = [inner, c, cinv](const Vec& x) {
        return Mat(cinv * inner.nonlinear_jacobian(c * x) * c);
    };
    double delta = map.delta() / op_norm(c);
    return MapBundle(L, std::move(f), delta, "blocked:" + map.name());
}

inline bool axes_invariant(const MapBundle& map, int du, double radius, double tol) {
    const int n = map.dim();
    for (int i = 0; i < 48; ++i) {
        Vec h = radius * halton_point(static_cast<std::uint64_t>(i), n, 67);
        Vec xu = Vec::Zero(n), xs = Vec::Zero(n);
        for (int d = 0; d < du; ++d) xu[d] = h[d];
        for (int d = du; d < n; ++d) xs[d] = h[d];
        Vec fu = map.nonlinear(xu), fs = map.nonlinear(xs);
        for (int d = du; d < n; ++d)
            if (std::abs(fu[d]) > tol) return false;
        for (int d = 0; d < du; ++d)
            if (std::abs(fs[d]) > tol) return false;
    }
    return true;
}

// points with a tiny expanding part and an order-delta contracting part stay
// in the nonlinear support for many iterates; the resonance divergence
// detector needs them
inline std::vector<Vec> divergence_probes(int dim, int du, double delta, double plateau) {
    std::vector<Vec> probes;
    for (int k = 2; k <= 12; ++k) {
        Vec p = Vec::Zero(dim);
        p[0] = delta * std::pow(4.0, -k);
        for (int d = du; d < dim; ++d) p[d] = 0.4 * plateau;
        probes.push_back(p);
    }
    return probes;
}

}  // namespace detail

// The constructive route: classify, move to block coordinates, flatten,
// h-linearize, globalize with a bump, solve the split operator series, verify.
// Contracting / expanding inputs take the single-series route instead.
inline PipelineResult run_pipeline(const MapBundle& map, const PipelineOptions& opts) {
    PipelineResult res;
    const Operator& L = map.linear();
    res.classification = classify(L, opts.alpha);
    res.resonances = resonance_scan(L);
    res.basis = Mat::Identity(map.dim(), map.dim());

    SeriesOptions sopts;
    sopts.tol_tail = opts.tol_tail;

    if (res.classification.cls == HypClass::contracting) {
        require(res.classification.is_alpha_hyperbolic, ErrorCode::NotAlphaContracting,
                "c(L) rho(L)^alpha >= 1: no admissible contracting plan");
        SamplePlan rp;
        rp.radius = map.delta();
        rp.seed = opts.seed + 1;
        RegularityBundle reg = estimate_regularity(map, opts.alpha, rp);
        ContractionPlan plan = plan_contraction(L, reg);
        res.contraction_plan = plan;
        res.conjugacy = linearize_contracting(map, plan, sopts);
        res.stages = {"contracting_series"};
        res.effective_radius = 0.9 * plan.eval_radius;
        res.verification =
            verify_conjugacy(res.conjugacy, map, L, res.effective_radius, opts.n_samples);
        res.verified_map = map;
        return res;
    }
    if (res.classification.cls == HypClass::expanding) {
        require(res.classification.is_alpha_hyperbolic, ErrorCode::NotAlphaContracting,
                "c(L) rho(L^{-1})^alpha >= 1: no admissible expanding plan");
        SamplePlan rp;
        rp.radius = map.delta();
        rp.seed = opts.seed + 1;
        res.conjugacy = linearize_expanding(map, opts.alpha, rp, sopts);
        res.stages = {"contracting_series(inverse)"};
        res.effective_radius = 0.5 * res.conjugacy->domain_radius();
        res.verification =
            verify_conjugacy(res.conjugacy, map, L, res.effective_radius, opts.n_samples);
        res.verified_map = map;
        return res;
    }

    // saddle route
    Splitting sp = split(L);
    MapBundle blocked = map;
    bool need_basis = op_norm(Mat(sp.basis - Mat::Identity(map.dim(), map.dim()))) > 1e-12;
    if (need_basis) {
        res.basis = sp.basis;
        blocked = detail::change_basis(map, sp.basis);
    }
    const int du = sp.dim_u;

    std::vector<ConjugacyPtr> stage_list;
    MapBundle current = blocked;
    res.flatten_residual = 0.0;
    double flat_scale = 1e-12;

    if (!detail::axes_invariant(current, du, current.delta(), 1e-12)) {
        FlatteningMap fm = flatten(current, du, opts.grid_res, 1e-12);
        res.flatten_residual = fm.residual;
        flat_scale = std::max(1e-9, 10.0 * fm.residual);
        auto rflat = std::make_shared<FlatteningConjugacy>(fm, du, current.dim(),
                                                           0.8 * current.delta());
        stage_list.push_back(rflat);
        current = conjugated_bundle(rflat, current.as_global(), 0.6 * current.delta(),
                                    current.name() + ":flat");
        res.stages.push_back("flattening");
    }

    MapBundle tu = axis_restriction(current, [&] {
        std::vector<int> ids;
        for (int i = 0; i < du; ++i) ids.push_back(i);
        return ids;
    }(), "u_axis");
    MapBundle ts = axis_restriction(current, [&] {
        std::vector<int> ids;
        for (int i = du; i < current.dim(); ++i) ids.push_back(i);
        return ids;
    }(), "s_axis");
    bool already_h_linear = detail::axis_restriction_is_linear(tu, current.delta()) &&
                            detail::axis_restriction_is_linear(ts, current.delta());
    if (!already_h_linear) {
        HLinearizeResult h = h_linearize(current, du, opts.alpha, sopts, flat_scale);
        stage_list.push_back(h.conjugacy);
        current = h.t1;
        res.stages.push_back("h_linearize");
    }

    Operator A(Mat(current.linear().entries().topLeftCorner(du, du)));
    Operator B(Mat(current.linear().entries().bottomRightCorner(current.dim() - du,
                                                                current.dim() - du)));
    BumpProfile profile = make_bump(0.5, current.dim());

    SaddlePlan plan;
    if (res.classification.is_alpha_hyperbolic) {
        SaddlePlanOptions popts;
        popts.delta0 = std::min(0.5 * current.delta(), 0.1);
        popts.delta_cap = opts.delta_cap;
        popts.tol_tail = opts.tol_tail;
        plan = plan_saddle(A, B, opts.alpha, sampling_estimator(current, opts.alpha, opts.seed + 3),
                           profile, popts);
    } else {
        double d = std::min({opts.resonant_delta, 0.5 * current.delta(), opts.delta_cap});
        plan = plan_saddle_forced(A, B, opts.alpha, d);
    }
    res.saddle_plan = plan;

    GlobalizedMap S = globalize(current, scale(profile, plan.delta), std::nullopt, opts.alpha, du);
    auto rs = linearize_saddle(S, plan, sopts);
    stage_list.push_back(rs);
    res.stages.push_back("saddle_series");

    std::vector<ConjugacyPtr> ordered(stage_list.begin(), stage_list.end());
    res.conjugacy = ordered.size() == 1 ? ordered[0] : compose_conjugacies(ordered);
    res.effective_radius = plan.plateau_radius * 0.9;
    for (const auto& st : stage_list) res.effective_radius = std::min(res.effective_radius,
                                                                      0.9 * st->domain_radius());

    // verify on the globalized map over its support ball, plus deep-plateau
    // probes that expose resonant divergence
    res.verification = verify_conjugacy(rs, S.bundle, S.bundle.linear(), plan.delta,
                                        opts.n_samples);
    if (res.verification.converged) {
        try {
            for (const Vec& probe :
                 detail::divergence_probes(current.dim(), du, plan.delta, plan.plateau_radius)) {
                ConjEvalInfo info;
                rs->eval(probe, &info);
            }
            res.certificate = holder_certificate(rs, plan, opts.n_samples, opts.seed + 5);
        } catch (const SeriesDivergedError& e) {
            res.verification.converged = false;
            res.verification.divergence_diagnostic = e.diagnostic;
        }
    }
    res.verification.beta_planned = plan.beta;
    res.verified_map = S.bundle;
    return res;
}

// --- parameter sweeps -------------------------------------------------------------

struct SweepEntry {
    double lambda = 0.0;
    Vec fixed_point;
    bool ok = false;
    std::string error;
    ConjugacyPtr conjugacy;
    std::optional<SaddlePlan> plan;
    std::vector<Vec> samples;  // R(x) on the shared sample set
    double residual = 0.0;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    std::vector<Vec> sample_points;
    std::vector<double> neighbor_dist;  // sup_x |R_i(x) - R_{i+1}(x)| over shared samples
    double shared_radius = 0.0;
};

inline MapBundle translated_bundle(const FamilyMap& fm, const Vec& p, double delta,
                                   const std::string& name) {
    Mat lfull = fm.L.entries() + fm.df(p);
    Operator L(lfull);
    FamilyMap copy = fm;
    Vec pc = p;
    ClosedForm g;
    g.tag = name;
    g.value = [copy, pc, lfull](const Vec& x) {
        Vec fx = copy.L.entries() * (x + pc) + copy.f(x + pc) - pc;
        return Vec(fx - lfull * x);
    };
    g.jac = [copy, pc, lfull](const Vec& x) {
        return Mat(copy.L.entries() + copy.df(x + pc) - lfull);
    };
    return MapBundle(L, std::move(g), delta, name);
}

// Full pipeline per family member on a shared sample ball; per-lambda errors
// are collected, not fatal.
inline SweepResult sweep_linearizations(const ParamFamily& family, double alpha,
                                        PipelineOptions opts, double map_delta) {
    SweepResult sweep;
    std::vector<Vec> fps = continue_fixed_points(family, map_delta);

    opts.alpha = alpha;
    std::vector<PipelineResult> results;
    double shared = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < family.lambdas.size(); ++i) {
        SweepEntry entry;
        entry.lambda = family.lambdas[i];
        entry.fixed_point = fps[i];
        try {
            MapBundle tb = translated_bundle(family.factory(entry.lambda), fps[i], map_delta,
                                             "family");
            PipelineResult pr = run_pipeline(tb, opts);
            // pin later plans to the first chosen support radius so the
            // neighbor metric compares maps with identical bumps
            if (pr.saddle_plan && !std::isfinite(opts.delta_cap))
                opts.delta_cap = pr.saddle_plan->delta;
            else if (pr.saddle_plan)
                opts.delta_cap = std::min(opts.delta_cap, pr.saddle_plan->delta);
            require(pr.verification.converged, ErrorCode::SeriesDiverged,
                    "series diverged during the sweep");
            entry.ok = true;
            entry.conjugacy = pr.conjugacy;
            entry.plan = pr.saddle_plan;
            entry.residual = pr.verification.residual_sup;
            shared = std::min(shared, pr.effective_radius);
        } catch (const Error& e) {
            entry.error = e.what();
        }
        sweep.entries.push_back(std::move(entry));
    }
    if (!std::isfinite(shared)) return sweep;
    sweep.shared_radius = shared;

    int dim = 0;
    for (const auto& e : sweep.entries)
        if (e.ok) dim = e.conjugacy->dim();
    for (int i = 0; i < 64; ++i)
        sweep.sample_points.push_back(shared *
                                      halton_point(static_cast<std::uint64_t>(i), dim, 71));
    for (auto& e : sweep.entries) {
        if (!e.ok) continue;
        for (const Vec& x : sweep.sample_points) e.samples.push_back(e.conjugacy->eval(x));
    }
    for (std::size_t i = 0; i + 1 < sweep.entries.size(); ++i) {
        const auto& a = sweep.entries[i];
        const auto& b = sweep.entries[i + 1];
        if (!a.ok || !b.ok) {
            sweep.neighbor_dist.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        double d = 0.0;
        for (std::size_t k = 0; k < sweep.sample_points.size(); ++k)
            d = std::max(d, inf_norm(a.samples[k] - b.samples[k]));
        sweep.neighbor_dist.push_back(d);
    }
    return sweep;
}

}  // namespace holinear
