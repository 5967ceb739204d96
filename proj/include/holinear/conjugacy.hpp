#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "holinear/common.hpp"
#include "holinear/errors.hpp"
#include "holinear/maps.hpp"
#include "holinear/regularity.hpp"

namespace holinear {

// Divergence evidence attached to SeriesDiverged: the trailing block norms of
// the operator series and the offending ratio.
struct DivergenceDiagnostic {
    std::vector<double> block_norms;
    double worst_ratio = 0.0;
    int at_term = 0;
};

class SeriesDivergedError : public Error {
  public:
    SeriesDivergedError(const std::string& what, DivergenceDiagnostic diag)
        : Error(ErrorCode::SeriesDiverged, what), diagnostic(std::move(diag)) {}
    DivergenceDiagnostic diagnostic;
};

// A strong conjugacy R = I + phi with R(0) = 0 and DR(0) = I, evaluated
// pointwise. Implementations report the certified truncation tail of the
// last evaluation through eval_info.
struct ConjEvalInfo {
    int terms = 0;
    double tail_bound = 0.0;
};

class ConjugacyBase {
  public:
    virtual ~ConjugacyBase() = default;
    virtual Vec eval(const Vec& x, ConjEvalInfo* info = nullptr) const = 0;
    virtual Mat jacobian(const Vec& x) const = 0;
    virtual std::string kind() const = 0;
    virtual int dim() const = 0;
    virtual double domain_radius() const = 0;

    // R^{-1}(z) by the contraction w <- z - phi(w); valid while Lip(phi) < 1,
    // which all pipeline conjugacies satisfy on their domains.
    virtual Vec inverse(const Vec& z, double tol = 1e-12) const {
        Vec w = z;
        for (int it = 0; it < 300; ++it) {
            Vec r = eval(w);
            Vec next = w - (r - z);
            if (inf_norm(next - w) <= tol) return next;
            w = next;
        }
        raise(ErrorCode::NoConvergence, "conjugacy inverse iteration stalled");
    }
};

using ConjugacyPtr = std::shared_ptr<const ConjugacyBase>;

class IdentityConjugacy final : public ConjugacyBase {
  public:
    IdentityConjugacy(int dim, double radius) : dim_(dim), radius_(radius) {}
    Vec eval(const Vec& x, ConjEvalInfo* info = nullptr) const override {
        if (info) *info = {};
        return x;
    }
    Mat jacobian(const Vec&) const override { return Mat::Identity(dim_, dim_); }
    Vec inverse(const Vec& z, double) const override { return z; }
    std::string kind() const override { return "identity"; }
    int dim() const override { return dim_; }
    double domain_radius() const override { return radius_; }

  private:
    int dim_;
    double radius_;
};

// R(x, y) = (R_u(x), R_s(y)) on the block splitting [0,du) | [du,dim)
class BlockProductConjugacy final : public ConjugacyBase {
  public:
    BlockProductConjugacy(ConjugacyPtr ru, ConjugacyPtr rs, double radius)
        : ru_(std::move(ru)), rs_(std::move(rs)), radius_(radius) {}

    Vec eval(const Vec& x, ConjEvalInfo* info = nullptr) const override {
        int du = ru_->dim();
        ConjEvalInfo iu, is;
        Vec u = ru_->eval(x.head(du), &iu);
        Vec s = rs_->eval(x.tail(x.size() - du), &is);
        if (info) *info = {iu.terms + is.terms, std::max(iu.tail_bound, is.tail_bound)};
        Vec out(x.size());
        out.head(du) = u;
        out.tail(x.size() - du) = s;
        return out;
    }
    Mat jacobian(const Vec& x) const override {
        int du = ru_->dim();
        int n = static_cast<int>(x.size());
        Mat j = Mat::Zero(n, n);
        j.topLeftCorner(du, du) = ru_->jacobian(x.head(du));
        j.bottomRightCorner(n - du, n - du) = rs_->jacobian(x.tail(n - du));
        return j;
    }
    Vec inverse(const Vec& z, double tol = 1e-12) const override {
        int du = ru_->dim();
        Vec out(z.size());
        out.head(du) = ru_->inverse(z.head(du), tol);
        out.tail(z.size() - du) = rs_->inverse(z.tail(z.size() - du), tol);
        return out;
    }
    std::string kind() const override { return "h_product"; }
    int dim() const override { return ru_->dim() + rs_->dim(); }
    double domain_radius() const override { return radius_; }

  private:
    ConjugacyPtr ru_;
    ConjugacyPtr rs_;
    double radius_;
};

// R = R_k o ... o R_1 (list order: first applied first)
class ComposedConjugacy final : public ConjugacyBase {
  public:
    explicit ComposedConjugacy(std::vector<ConjugacyPtr> stages) : stages_(std::move(stages)) {
        require(!stages_.empty(), ErrorCode::DomainMismatch, "empty composition");
        for (std::size_t i = 1; i < stages_.size(); ++i)
            require(stages_[i]->dim() == stages_[0]->dim(), ErrorCode::DomainMismatch,
                    "composition dimension mismatch");
    }

    Vec eval(const Vec& x, ConjEvalInfo* info = nullptr) const override {
        Vec cur = x;
        ConjEvalInfo acc{};
        for (const auto& s : stages_) {
            ConjEvalInfo one;
            cur = s->eval(cur, &one);
            acc.terms += one.terms;
            acc.tail_bound += one.tail_bound;
        }
        if (info) *info = acc;
        return cur;
    }
    Mat jacobian(const Vec& x) const override {
        Vec cur = x;
        Mat j = Mat::Identity(dim(), dim());
        for (const auto& s : stages_) {
            j = s->jacobian(cur) * j;
            cur = s->eval(cur);
        }
        return j;
    }
    Vec inverse(const Vec& z, double tol = 1e-12) const override {
        Vec cur = z;
        for (auto it = stages_.rbegin(); it != stages_.rend(); ++it)
            cur = (*it)->inverse(cur, tol);
        return cur;
    }
    std::string kind() const override { return "composition"; }
    int dim() const override { return stages_[0]->dim(); }
    double domain_radius() const override { return stages_.front()->domain_radius(); }
    const std::vector<ConjugacyPtr>& stages() const { return stages_; }

  private:
    std::vector<ConjugacyPtr> stages_;
};

// Domain compatibility: each stage must map its ball into the next stage's
// ball. Checked on sampled boundary points.
inline ConjugacyPtr compose_conjugacies(std::vector<ConjugacyPtr> stages) {
    require(!stages.empty(), ErrorCode::DomainMismatch, "nothing to compose");
    if (stages.size() == 1) return stages[0];
    for (std::size_t i = 0; i + 1 < stages.size(); ++i) {
        double r_in = stages[i]->domain_radius();
        double r_next = stages[i + 1]->domain_radius();
        int d = stages[i]->dim();
        for (int k = 0; k < 32; ++k) {
            Vec x = r_in * halton_point(static_cast<std::uint64_t>(k), d, 23);
            require(inf_norm(stages[i]->eval(x)) <= r_next * (1.0 + 1e-9),
                    ErrorCode::DomainMismatch,
                    "stage output leaves the next stage's domain ball");
        }
    }
    return std::make_shared<ComposedConjugacy>(std::move(stages));
}

// The conjugated map T1 = R o T o R^{-1} packaged as a MapBundle with the
// same linear part (strong conjugacy: DR(0) = I).
inline MapBundle conjugated_bundle(const ConjugacyPtr& r, const MapBundle& map, double delta,
                                   const std::string& name, double inv_tol = 1e-13) {
    ClosedForm f;
    f.tag = name;
    Operator L = map.linear();
    MapBundle inner = map;
    f.value = [r, inner, L, inv_tol](const Vec& w) {
        Vec x = r->inverse(w, inv_tol);
        Vec tx = inner.linear().entries() * x + inner.nonlinear(x);
        return Vec(r->eval(tx) - L.entries() * w);
    };
    f.jac = [r, inner, L, inv_tol](const Vec& w) {
        Vec x = r->inverse(w, inv_tol);
        Vec tx = inner.linear().entries() * x + inner.nonlinear(x);
        Mat dr_x = r->jacobian(x);
        Mat dt = inner.linear().entries() + inner.nonlinear_jacobian(x);
        Mat full = r->jacobian(tx) * dt * dr_x.inverse();
        return Mat(full - L.entries());
    };
    return MapBundle(L, std::move(f), delta, name);
}

struct ConjugacyReport {
    double residual_sup = 0.0;
    int residual_samples = 0;
    double beta_planned = 0.0;
    HolderFit beta_hat;
    bool converged = true;
    double max_tail_bound = 0.0;
    std::optional<DivergenceDiagnostic> divergence_diagnostic;
};

// Defect of L R(x) = R(T x) over samples in B_r with T x also in B_r, plus a
// Hoelder-exponent fit of DR. Failures are carried in the report, not thrown.
inline ConjugacyReport verify_conjugacy(const ConjugacyPtr& r, const MapBundle& map,
                                        const Operator& L, double plan_radius, int n_samples) {
    ConjugacyReport rep;
    std::vector<std::pair<Vec, Mat>> dsamples;
    try {
        for (int i = 0; i < n_samples; ++i) {
            Vec x = plan_radius * halton_point(static_cast<std::uint64_t>(i), map.dim(), 29);
            Vec tx = map.linear().entries() * x + map.nonlinear(x);
            if (!map.global() && inf_norm(tx) > plan_radius) continue;
            ConjEvalInfo ia, ib;
            Vec lhs = L.entries() * r->eval(x, &ia);
            Vec rhs = r->eval(tx, &ib);
            rep.residual_sup = std::max(rep.residual_sup, inf_norm(lhs - rhs));
            rep.max_tail_bound = std::max({rep.max_tail_bound, ia.tail_bound, ib.tail_bound});
            rep.residual_samples++;
            if (static_cast<int>(dsamples.size()) < 512) dsamples.emplace_back(x, r->jacobian(x));
        }
        if (dsamples.size() >= 32)
            rep.beta_hat =
                fit_holder_exponent(dsamples, {plan_radius * 1e-3, 2.0 * plan_radius});
    } catch (const SeriesDivergedError& e) {
        rep.converged = false;
        rep.divergence_diagnostic = e.diagnostic;
    }
    return rep;
}

}  // namespace holinear
