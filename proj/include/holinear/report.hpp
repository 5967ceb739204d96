#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "json.hpp"

#include "holinear/conjugacy.hpp"
#include "holinear/flows.hpp"
#include "holinear/linearize.hpp"
#include "holinear/modelio.hpp"
#include "holinear/pipeline.hpp"
#include "holinear/spectral.hpp"

namespace holinear {

inline constexpr int kReportSchemaVersion = 1;

// JSON cannot carry inf/nan; reports use string sentinels for those
inline Json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline Json to_json(const HyperbolicityReport& r) {
    Json j;
    j["class"] = hyp_class_name(r.cls);
    j["c_h"] = json_number(r.c_h);
    j["rho_h"] = json_number(r.rho_h);
    j["alpha"] = r.alpha;
    j["alpha_hyperbolic"] = r.is_alpha_hyperbolic;
    j["bicircular"] = r.is_bicircular;
    j["circular_expanding"] = r.is_circular_A;
    j["circular_contracting"] = r.is_circular_B;
    if (r.alpha_star_all)
        j["alpha_star"] = "all";
    else if (r.alpha_star)
        j["alpha_star"] = json_number(*r.alpha_star);
    else
        j["alpha_star"] = nullptr;
    if (r.leading_c_h) {
        j["leading_pair"]["c_h"] = json_number(*r.leading_c_h);
        j["leading_pair"]["rho_h"] = json_number(*r.leading_rho_h);
    }
    return j;
}

inline Json to_json(const std::vector<ResonanceRelation>& rels) {
    Json out = Json::array();
    for (const auto& r : rels) {
        Json j;
        j["target"] = r.target;
        j["exponents"] = r.exponents;
        out.push_back(j);
    }
    return out;
}

inline Json to_json(const ContractionPlan& p) {
    Json j;
    j["kind"] = "contracting";
    j["alpha"] = p.alpha;
    j["m"] = p.m;
    j["eps1"] = json_number(p.eps1);
    j["delta"] = json_number(p.delta);
    j["eval_radius"] = json_number(p.eval_radius);
    j["K1"] = json_number(p.K1);
    j["K2"] = json_number(p.K2);
    j["tau1"] = json_number(p.tau1);
    j["tau_m"] = json_number(p.tau_m);
    j["adapted_K"] = json_number(p.adapted.K);
    j["adapted_rho1"] = json_number(p.adapted.rho1);
    return j;
}

inline Json to_json(const SaddlePlan& p) {
    Json j;
    j["kind"] = "saddle";
    j["alpha"] = p.alpha;
    j["m"] = p.m;
    j["eps"] = json_number(p.eps);
    j["eta"] = json_number(p.eta);
    j["beta"] = json_number(p.beta);
    j["beta_certified"] = p.beta_certified;
    j["delta"] = json_number(p.delta);
    j["plateau_radius"] = json_number(p.plateau_radius);
    j["K"] = {json_number(p.K[0]), json_number(p.K[1]), json_number(p.K[2]),
              json_number(p.K[3])};
    j["K_twin"] = {json_number(p.K_twin[0]), json_number(p.K_twin[1]),
                   json_number(p.K_twin[2]), json_number(p.K_twin[3])};
    j["Ktilde"] = {json_number(p.Ktilde[0]), json_number(p.Ktilde[1]),
                   json_number(p.Ktilde[2]), json_number(p.Ktilde[3])};
    j["Ktilde_twin"] = {json_number(p.Ktilde_twin[0]), json_number(p.Ktilde_twin[1]),
                        json_number(p.Ktilde_twin[2]), json_number(p.Ktilde_twin[3])};
    j["tau_m"] = json_number(p.tau_m);
    j["tau_tilde_m"] = json_number(p.tau_tilde_m);
    j["lip_S"] = json_number(p.lip_S);
    j["lip_S_inv"] = json_number(p.lip_S_inv);
    j["feasible"] = p.feasible;
    j["note"] = p.bump_note;
    return j;
}

inline Json to_json(const HolderFit& f) {
    Json j;
    j["beta_hat"] = json_number(f.beta_hat);
    j["log_c_hat"] = json_number(f.log_c_hat);
    j["r2"] = json_number(f.r2);
    j["n_pairs_used"] = f.n_pairs_used;
    j["degenerate_constant"] = f.degenerate_constant;
    return j;
}

inline Json to_json(const ConjugacyReport& r) {
    Json j;
    j["residual_sup"] = json_number(r.residual_sup);
    j["residual_samples"] = r.residual_samples;
    j["beta_planned"] = json_number(r.beta_planned);
    j["beta_hat"] = to_json(r.beta_hat);
    j["converged"] = r.converged;
    j["max_tail_bound"] = json_number(r.max_tail_bound);
    if (r.divergence_diagnostic) {
        Json d;
        d["worst_ratio"] = json_number(r.divergence_diagnostic->worst_ratio);
        d["at_term"] = r.divergence_diagnostic->at_term;
        d["block_norms"] = Json::array();
        for (double b : r.divergence_diagnostic->block_norms)
            d["block_norms"].push_back(json_number(b));
        j["divergence"] = d;
    }
    return j;
}

inline Json to_json(const CriticalPointReport& r) {
    Json j;
    j["class"] = hyp_class_name(r.cls);
    j["positive_real_parts"] = r.positive_real_parts;
    j["negative_real_parts"] = r.negative_real_parts;
    j["a1"] = json_number(r.a1);
    j["b1"] = json_number(r.b1);
    j["dim_center"] = r.dim_center;
    j["max_alpha"] = json_number(r.max_alpha);
    j["bicircular"] = r.bicircular;
    j["bicircular_on_center"] = r.bicircular_on_center;
    return j;
}

inline Json to_json(const ShilnikovDiagnosis& d) {
    Json j;
    j["satisfied"] = d.satisfied();
    j["has_complex_pair"] = d.has_complex_pair;
    j["pair_contracts"] = d.pair_contracts;
    j["real_expands"] = d.real_expands;
    j["sum_positive"] = d.sum_positive;
    j["a"] = json_number(d.a);
    j["b"] = json_number(d.b);
    j["c"] = json_number(d.c);
    return j;
}

inline Json pipeline_report(const PipelineResult& res) {
    Json j;
    j["classification"] = to_json(res.classification);
    j["resonances"] = to_json(res.resonances);
    j["stages"] = res.stages;
    j["effective_radius"] = json_number(res.effective_radius);
    j["flatten_residual"] = json_number(res.flatten_residual);
    if (res.contraction_plan) j["plan"] = to_json(*res.contraction_plan);
    if (res.saddle_plan) j["plan"] = to_json(*res.saddle_plan);
    j["verification"] = to_json(res.verification);
    if (res.saddle_plan) {
        Json c;
        c["beta_planned"] = json_number(res.certificate.beta_planned);
        c["beta_certified"] = res.certificate.beta_certified;
        c["fit"] = to_json(res.certificate.fit);
        c["pass"] = res.certificate.pass;
        j["holder_certificate"] = c;
    }
    bool basis_is_identity =
        op_norm(Mat(res.basis - Mat::Identity(res.basis.rows(), res.basis.cols()))) < 1e-12;
    j["basis_is_identity"] = basis_is_identity;
    if (!basis_is_identity) {
        Json b = Json::array();
        for (Eigen::Index i = 0; i < res.basis.rows(); ++i) {
            Json row = Json::array();
            for (Eigen::Index k = 0; k < res.basis.cols(); ++k)
                row.push_back(json_number(res.basis(i, k)));
            b.push_back(row);
        }
        j["basis"] = b;
    }
    return j;
}

inline void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::ParseError, "cannot write '" + path + "'");
    out << contents;
}

// full-precision CSV cell so round-trips reproduce the double exactly
inline std::string csv_num(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

}  // namespace holinear
