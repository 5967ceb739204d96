#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "holinear/pipeline.hpp"
#include "holinear/report.hpp"

namespace holinear {

struct GalleryItem {
    std::string name;
    bool pass = false;
    Json details;
};

struct GalleryResult {
    std::vector<GalleryItem> items;
    bool all_pass = true;
    Json report;
};

namespace gallery_detail {

inline GalleryItem hartman_nonresonant(std::uint64_t seed) {
    GalleryItem item{"hartman-nonresonant", false, {}};
    auto map = hartman_map(4, 3, 0.5, 1, 0.25);
    PipelineOptions opts;
    opts.alpha = 0.5;
    opts.delta_cap = 1e-4;
    opts.n_samples = 2000;
    opts.seed = seed;
    PipelineResult res = run_pipeline(map, opts);
    double sup_err = 0.0;
    double plateau = res.saddle_plan->plateau_radius;
    for (int i = 0; i < 2000; ++i) {
        Vec z = plateau * halton_point(static_cast<std::uint64_t>(i), 3, seed + 9);
        Vec rz = res.conjugacy->eval(z);
        Vec closed = z;
        closed[1] += 3.0 * z[0] * z[2];
        sup_err = std::max(sup_err, inf_norm(rz - closed));
    }
    item.details["closed_form_sup_err"] = json_number(sup_err);
    item.details["residual_sup"] = json_number(res.verification.residual_sup);
    item.details["plan_delta"] = json_number(res.saddle_plan->delta);
    item.pass = res.verification.converged && sup_err <= 1e-8 &&
                res.verification.residual_sup <= 1e-8;
    return item;
}

inline GalleryItem hartman_resonant(std::uint64_t seed) {
    GalleryItem item{"hartman-resonant", false, {}};
    auto map = hartman_map(4, 2, 0.5, 1, 0.25);
    PipelineOptions opts;
    opts.alpha = 0.5;
    opts.n_samples = 500;
    opts.seed = seed;
    try {
        PipelineResult res = run_pipeline(map, opts);
        if (!res.verification.converged && res.verification.divergence_diagnostic) {
            item.details["worst_ratio"] =
                json_number(res.verification.divergence_diagnostic->worst_ratio);
            item.pass = res.verification.divergence_diagnostic->worst_ratio >= 0.999;
        } else {
            item.details["unexpected"] = "series converged on a resonant map";
        }
    } catch (const SeriesDivergedError& e) {
        item.details["worst_ratio"] = json_number(e.diagnostic.worst_ratio);
        item.pass = e.diagnostic.worst_ratio >= 0.999;
    }
    item.details["expected"] = "SeriesDiverged with term ratio >= 0.999";
    return item;
}

inline GalleryItem sternberg_blowup(std::uint64_t seed) {
    GalleryItem item{"sternberg-blowup", false, {}};
    auto st = sternberg_map(0.5);
    SamplePlan p2, p4;
    p2.radius = 1e-2;
    p4.radius = 1e-4;
    p2.seed = p4.seed = seed;
    double h2 = estimate_holder(st, 0.5, p2).hol;
    double h4 = estimate_holder(st, 0.5, p4).hol;
    item.details["hol_at_1e-2"] = json_number(h2);
    item.details["hol_at_1e-4"] = json_number(h4);
    item.details["ratio"] = json_number(h4 / h2);
    item.pass = h4 > 2.0 * h2;
    return item;
}

inline GalleryItem contracting_1d(std::uint64_t seed) {
    GalleryItem item{"contracting-1d", false, {}};
    Mat l(1, 1);
    l << 0.5;
    std::vector<std::vector<PolyTerm>> terms(1);
    terms[0].push_back(PolyTerm{0.1, {2}});
    MapBundle map(Operator(l), PolyMap(1, terms), 0.2, "contracting_1d");
    PipelineOptions opts;
    opts.alpha = 0.9;
    opts.n_samples = 500;
    opts.seed = seed;
    PipelineResult res = run_pipeline(map, opts);
    item.details["residual_sup"] = json_number(res.verification.residual_sup);
    item.pass = res.verification.converged && res.verification.residual_sup <= 10.0 * opts.tol_tail;
    return item;
}

inline GalleryItem contracting_2d(std::uint64_t seed) {
    GalleryItem item{"contracting-2d", false, {}};
    Mat l = Mat::Zero(2, 2);
    l(0, 0) = 0.5;
    l(1, 1) = 0.4;
    std::vector<std::vector<PolyTerm>> terms(2);
    terms[0].push_back(PolyTerm{0.05, {1, 1}});
    terms[1].push_back(PolyTerm{0.08, {2, 0}});
    MapBundle map(Operator(l), PolyMap(2, terms), 0.2, "contracting_2d");
    PipelineOptions opts;
    opts.alpha = 0.8;
    opts.n_samples = 500;
    opts.seed = seed;
    PipelineResult res = run_pipeline(map, opts);
    item.details["residual_sup"] = json_number(res.verification.residual_sup);
    item.pass = res.verification.converged && res.verification.residual_sup <= 10.0 * opts.tol_tail;
    return item;
}

inline GalleryItem saddle_focus_flow(std::uint64_t) {
    GalleryItem item{"saddle-focus-flow", false, {}};
    Mat a = Mat::Zero(3, 3);
    a(0, 0) = -0.5;
    a(0, 1) = -2.0;
    a(1, 0) = 2.0;
    a(1, 1) = -0.5;
    a(2, 2) = 1.0;
    VectorFieldDef field = VectorFieldDef::linear(a);
    auto shil = shilnikov_check(field);
    TimeOneMap t = time_one_map(field, 1e-3);
    Mat oracle = expm(a);
    double exp_err = op_norm(t.linearization() - oracle);
    item.details["shilnikov"] = to_json(shil);
    item.details["exp_correspondence_err"] = json_number(exp_err);
    item.pass = shil.satisfied() && exp_err < 1e-6;
    return item;
}

}  // namespace gallery_detail

// The curated example set. Every item asserts its expected outcome; the
// report is deterministic for a fixed seed.
inline GalleryResult run_gallery(std::uint64_t seed = 0, const std::string& only = "") {
    using Factory = GalleryItem (*)(std::uint64_t);
    const std::vector<std::pair<std::string, Factory>> all = {
        {"hartman-nonresonant", &gallery_detail::hartman_nonresonant},
        {"hartman-resonant", &gallery_detail::hartman_resonant},
        {"sternberg-blowup", &gallery_detail::sternberg_blowup},
        {"contracting-1d", &gallery_detail::contracting_1d},
        {"contracting-2d", &gallery_detail::contracting_2d},
        {"saddle-focus-flow", &gallery_detail::saddle_focus_flow},
    };
    GalleryResult out;
    bool matched = false;
    for (const auto& [name, fn] : all) {
        if (!only.empty() && name != only) continue;
        matched = true;
        GalleryItem item;
        try {
            item = fn(seed);
        } catch (const Error& e) {
            item.name = name;
            item.pass = false;
            item.details["error"] = e.what();
        }
        out.all_pass = out.all_pass && item.pass;
        out.items.push_back(std::move(item));
    }
    require(matched, ErrorCode::ParseError, "unknown gallery item '" + only + "'");

    Json rep;
    rep["schema_version"] = kReportSchemaVersion;
    rep["command"] = "examples";
    rep["seed"] = seed;
    Json items = Json::array();
    for (const auto& item : out.items) {
        Json j;
        j["name"] = item.name;
        j["pass"] = item.pass;
        j["details"] = item.details;
        items.push_back(j);
    }
    rep["items"] = items;
    rep["all_pass"] = out.all_pass;
    out.report = rep;
    return out;
}

}  // namespace holinear
