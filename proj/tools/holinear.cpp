// holinear: certified C^{1,beta} linearization of hyperbolic fixed points.
//
// Commands: classify | linearize | flow | sweep | examples
// Every run writes <out>/report.json (deterministic for a fixed config and
// seed) plus CSV sample dumps; wall-clock timings go to a separate
// timings.json so reports stay byte-comparable.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "holinear/gallery.hpp"
#include "holinear/modelio.hpp"
#include "holinear/pipeline.hpp"
#include "holinear/report.hpp"

namespace hl = holinear;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string input;
    std::string builtin;
    std::string out_dir = "out";
    double alpha = 0.5;
    double tol_tail = 1e-10;
    int samples = 2000;
    std::uint64_t seed = 0;
    double delta_cap = std::numeric_limits<double>::infinity();
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_map_input = true) {
    if (with_map_input) {
        cmd->add_option("--input", args.input, "path to a JSON map/field definition");
        cmd->add_option("--builtin", args.builtin, "builtin TAG:params, e.g. hartman:4,3,0.5,1");
    }
    cmd->add_option("--alpha", args.alpha, "Hoelder exponent of the derivative data");
    cmd->add_option("--tol-tail", args.tol_tail, "series truncation tail tolerance");
    cmd->add_option("--samples", args.samples, "verification sample count");
    cmd->add_option("--seed", args.seed, "sampling seed (reports are deterministic per seed)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--delta-cap", args.delta_cap, "upper bound on the bump support radius");
}

hl::Json config_json(const CommonArgs& a) {
    hl::Json j;
    j["alpha"] = a.alpha;
    j["tol_tail"] = a.tol_tail;
    j["samples"] = a.samples;
    j["seed"] = a.seed;
    if (std::isfinite(a.delta_cap)) j["delta_cap"] = a.delta_cap;
    return j;
}

std::pair<hl::MapBundle, hl::Json> load_map(const CommonArgs& args) {
    hl::require(!args.input.empty() || !args.builtin.empty(), hl::ErrorCode::ParseError,
                "provide --input or --builtin");
    if (!args.builtin.empty()) {
        auto [tag, params] = hl::parse_builtin_flag(args.builtin);
        hl::Json canonical;
        canonical["builtin"] = tag;
        canonical["params"] = params;
        return {hl::builtin_map(tag, params), canonical};
    }
    hl::Json j = hl::load_json_file(args.input);
    return {hl::parse_map(j), j};
}

void write_report(const CommonArgs& args, hl::Json& report, double elapsed_s) {
    fs::create_directories(args.out_dir);
    report["schema_version"] = hl::kReportSchemaVersion;
    report["timings_file"] = "timings.json";
    hl::write_text_file(args.out_dir + "/report.json", report.dump(2) + "\n");
    hl::Json timings;
    timings["elapsed_seconds"] = elapsed_s;
    hl::write_text_file(args.out_dir + "/timings.json", timings.dump(2) + "\n");
}

int run_guarded(const CommonArgs& args, const std::string& command,
                const std::function<void(hl::Json&)>& body) {
    auto t0 = std::chrono::steady_clock::now();
    hl::Json report;
    report["command"] = command;
    report["config"] = config_json(args);
    int code = 0;
    try {
        body(report);
    } catch (const hl::Error& e) {
        code = hl::exit_code_of(e.code());
        report["error"]["name"] = hl::error_name(e.code());
        report["error"]["message"] = e.what();
        report["error"]["exit_code"] = code;
        if (const auto* div = dynamic_cast<const hl::SeriesDivergedError*>(&e)) {
            report["error"]["worst_ratio"] = hl::json_number(div->diagnostic.worst_ratio);
            report["error"]["at_term"] = div->diagnostic.at_term;
        }
    } catch (const std::exception& e) {
        code = 6;
        report["error"]["name"] = "Internal";
        report["error"]["message"] = e.what();
        report["error"]["exit_code"] = code;
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_report(args, report, elapsed);
    if (code != 0) std::cerr << report["error"].dump(2) << "\n";
    return code;
}

int cmd_classify(const CommonArgs& args) {
    return run_guarded(args, "classify", [&](hl::Json& report) {
        auto [map, canonical] = load_map(args);
        report["input_digest"] = hl::fnv1a_hex(canonical.dump());
        auto rep = hl::classify(map.linear(), args.alpha);
        auto res = hl::resonance_scan(map.linear());
        report["classification"] = hl::to_json(rep);
        report["resonances"] = hl::to_json(res);
        report["resonant"] = !res.empty();
        std::cout << report["classification"].dump(2) << "\n";
    });
}

int cmd_linearize(const CommonArgs& args) {
    return run_guarded(args, "linearize", [&](hl::Json& report) {
        auto [map, canonical] = load_map(args);
        report["input_digest"] = hl::fnv1a_hex(canonical.dump());
        hl::PipelineOptions opts;
        opts.alpha = args.alpha;
        opts.tol_tail = args.tol_tail;
        opts.n_samples = args.samples;
        opts.seed = args.seed;
        opts.delta_cap = args.delta_cap;
        hl::PipelineResult res = hl::run_pipeline(map, opts);
        report.update(hl::pipeline_report(res));

        if (!res.verification.converged) {
            hl::DivergenceDiagnostic diag =
                res.verification.divergence_diagnostic.value_or(hl::DivergenceDiagnostic{});
            throw hl::SeriesDivergedError("operator series diverged (resonance signal)", diag);
        }

        // sample dump: x, R(x), pointwise residual of L R(x) = R(T x)
        const hl::MapBundle& verified = *res.verified_map;
        std::ostringstream csv;
        csv << "";
        int d = verified.dim();
        for (int i = 0; i < d; ++i) csv << "x" << i + 1 << ",";
        for (int i = 0; i < d; ++i) csv << "R" << i + 1 << ",";
        csv << "residual\n";
        double radius = res.saddle_plan ? res.saddle_plan->delta : res.effective_radius;
        std::vector<std::pair<hl::Vec, hl::Mat>> dr_samples;
        for (int i = 0; i < args.samples; ++i) {
            hl::Vec x = radius * hl::halton_point(static_cast<std::uint64_t>(i), d, args.seed + 29);
            hl::Vec tx = verified.linear().entries() * x + verified.nonlinear(x);
            if (!verified.global() && hl::inf_norm(tx) > radius) continue;
            hl::Vec rx = res.conjugacy->eval(x);
            double residual =
                hl::inf_norm(verified.linear().entries() * rx - res.conjugacy->eval(tx));
            for (int k = 0; k < d; ++k) csv << hl::csv_num(x[k]) << ",";
            for (int k = 0; k < d; ++k) csv << hl::csv_num(rx[k]) << ",";
            csv << hl::csv_num(residual) << "\n";
            if (dr_samples.size() < 256)
                dr_samples.emplace_back(x, res.conjugacy->jacobian(x));
        }
        fs::create_directories(args.out_dir);
        hl::write_text_file(args.out_dir + "/conjugacy_samples.csv", csv.str());

        std::ostringstream dcsv;
        dcsv << "sep_norm,dderiv_norm\n";
        for (std::size_t i = 0; i < dr_samples.size(); ++i)
            for (std::size_t j = i + 1; j < dr_samples.size(); j += 7) {
                double sep = hl::inf_norm(dr_samples[i].first - dr_samples[j].first);
                if (sep <= 0.0) continue;
                dcsv << hl::csv_num(sep) << ","
                     << hl::csv_num(hl::op_norm(dr_samples[i].second - dr_samples[j].second))
                     << "\n";
            }
        hl::write_text_file(args.out_dir + "/derivative_pairs.csv", dcsv.str());
        std::cout << "residual_sup " << res.verification.residual_sup << ", stages:";
        for (const auto& s : res.stages) std::cout << " " << s;
        std::cout << "\n";
    });
}

int cmd_flow(const CommonArgs& args, double step, bool do_shilnikov, bool do_linearize,
             const std::string& sweep_spec) {
    return run_guarded(args, "flow", [&](hl::Json& report) {
        hl::require(!args.input.empty(), hl::ErrorCode::ParseError,
                    "flow needs --input FIELD.json");
        hl::Json j = hl::load_json_file(args.input);
        report["input_digest"] = hl::fnv1a_hex(j.dump());
        hl::VectorFieldDef field = hl::parse_field(j);

        auto cls = hl::classify_critical_point(field, args.alpha);
        report["critical_point"] = hl::to_json(cls);
        if (do_shilnikov || field.dim() == 3)
            report["shilnikov"] = hl::to_json(hl::shilnikov_check(field));

        hl::TimeOneMap t = hl::time_one_map(field, step);
        report["time_one_exp_defect"] = hl::json_number(
            hl::op_norm(t.linearization() - hl::expm(field.linear_part())));

        if (!sweep_spec.empty()) {
            // continuity table over a coefficient offset of the term indexed
            // by the field's sweep_term entry
            hl::SweepSpec spec = hl::parse_sweep_spec(sweep_spec);
            int term_idx = j.value("sweep_term", 0);
            std::ostringstream csv;
            csv << "lambda,rho_dt0,neighbor_dist\n";
            double prev_rho = 0.0;
            hl::Mat prev_dt;
            hl::Json table = hl::Json::array();
            for (int i = 0; i < spec.count; ++i) {
                double lam = spec.lo + (spec.hi - spec.lo) * i / (spec.count - 1);
                hl::Json jf = j;
                jf["terms"][term_idx][0] = jf["terms"][term_idx][0].get<double>() + lam;
                hl::VectorFieldDef f = hl::parse_field(jf);
                hl::TimeOneMap ti = hl::time_one_map(f, step);
                double rho = hl::spectral_radius(hl::Operator(ti.linearization()));
                double nd = i == 0 ? std::numeric_limits<double>::quiet_NaN()
                                   : hl::op_norm(ti.linearization() - prev_dt);
                csv << hl::csv_num(lam) << "," << hl::csv_num(rho) << ","
                    << (i == 0 ? "nan" : hl::csv_num(nd)) << "\n";
                hl::Json row;
                row["lambda"] = lam;
                row["rho"] = hl::json_number(rho);
                if (i > 0) row["neighbor_dist"] = hl::json_number(nd);
                table.push_back(row);
                prev_rho = rho;
                prev_dt = ti.linearization();
            }
            (void)prev_rho;
            fs::create_directories(args.out_dir);
            hl::write_text_file(args.out_dir + "/sweep.csv", csv.str());
            report["sweep"] = table;
        }

        if (do_linearize) {
            hl::PipelineOptions opts;
            opts.alpha = std::min(args.alpha, 0.999 * cls.max_alpha);
            opts.tol_tail = args.tol_tail;
            opts.n_samples = args.samples;
            opts.seed = args.seed;
            opts.delta_cap = args.delta_cap;
            hl::PipelineResult res = hl::run_pipeline(t.bundle(0.5 * field.radius()), opts);
            report["linearization"] = hl::pipeline_report(res);
        }
        std::cout << report["critical_point"].dump(2) << "\n";
    });
}

int cmd_sweep(const CommonArgs& args, const std::string& sweep_spec) {
    return run_guarded(args, "sweep", [&](hl::Json& report) {
        hl::require(!args.builtin.empty(), hl::ErrorCode::ParseError,
                    "sweep needs --builtin TAG:params");
        hl::require(!sweep_spec.empty(), hl::ErrorCode::ParseError,
                    "sweep needs --sweep PARAM:LO:HI:N");
        auto [tag, params] = hl::parse_builtin_flag(args.builtin);
        hl::SweepSpec spec = hl::parse_sweep_spec(sweep_spec);
        hl::Json canonical;
        canonical["builtin"] = tag;
        canonical["params"] = params;
        canonical["sweep"] = sweep_spec;
        report["input_digest"] = hl::fnv1a_hex(canonical.dump());

        int pidx = -1;
        if (tag == "hartman") {
            const std::vector<std::string> names = {"a", "b", "c", "eps"};
            for (std::size_t i = 0; i < names.size(); ++i)
                if (names[i] == spec.param) pidx = static_cast<int>(i);
        }
        hl::require(pidx >= 0, hl::ErrorCode::ParseError,
                    "sweep parameter '" + spec.param + "' not known for builtin '" + tag + "'");

        hl::ParamFamily fam;
        for (int i = 0; i < spec.count; ++i)
            fam.lambdas.push_back(spec.lo + (spec.hi - spec.lo) * i / (spec.count - 1));
        auto base = params;
        fam.factory = [base, pidx, tag](double lam) {
            auto p = base;
            p[static_cast<std::size_t>(pidx)] += lam;
            hl::MapBundle mb = hl::builtin_map(tag, p);
            hl::FamilyMap fm;
            fm.L = mb.linear();
            hl::MapBundle g = mb.as_global();
            fm.f = [g](const hl::Vec& x) { return g.nonlinear(x); };
            fm.df = [g](const hl::Vec& x) { return g.nonlinear_jacobian(x); };
            fm.delta = mb.delta();
            return fm;
        };

        hl::PipelineOptions opts;
        opts.alpha = args.alpha;
        opts.tol_tail = args.tol_tail;
        opts.n_samples = args.samples;
        opts.seed = args.seed;
        opts.delta_cap = std::isfinite(args.delta_cap) ? args.delta_cap : 1e-4;
        hl::MapBundle probe_map = hl::builtin_map(tag, params);
        hl::SweepResult sw =
            hl::sweep_linearizations(fam, args.alpha, opts, probe_map.delta());

        std::ostringstream csv;
        int d = probe_map.dim();
        csv << "lambda";
        for (int k = 0; k < d; ++k) csv << ",p" << k + 1;
        csv << ",residual,coeff,neighbor_dist\n";
        hl::Json table = hl::Json::array();
        for (std::size_t i = 0; i < sw.entries.size(); ++i) {
            const auto& e = sw.entries[i];
            hl::Json row;
            row["lambda"] = e.lambda;
            row["ok"] = e.ok;
            csv << hl::csv_num(e.lambda);
            for (int k = 0; k < d; ++k) csv << "," << hl::csv_num(e.fixed_point[k]);
            double coeff = std::numeric_limits<double>::quiet_NaN();
            if (e.ok && tag == "hartman") {
                // xz-coefficient probe deep in the plateau
                double dp = e.plan->delta;
                hl::Vec probe(3);
                probe << 0.5 * dp * std::pow(4.0, -45), 0.0, 0.5 * dp;
                hl::Vec rz = e.conjugacy->eval(probe);
                coeff = (rz[1] - probe[1]) / (probe[0] * probe[2]);
                row["coeff"] = hl::json_number(coeff);
            }
            if (!e.ok) row["error"] = e.error;
            csv << "," << (e.ok ? hl::csv_num(e.residual) : "nan");
            csv << "," << (std::isnan(coeff) ? "nan" : hl::csv_num(coeff));
            bool have_nd = e.ok && i < sw.neighbor_dist.size() &&
                           std::isfinite(sw.neighbor_dist[i]);
            csv << "," << (have_nd ? hl::csv_num(sw.neighbor_dist[i]) : "nan") << "\n";
            if (have_nd) row["neighbor_dist"] = hl::json_number(sw.neighbor_dist[i]);
            table.push_back(row);
        }
        fs::create_directories(args.out_dir);
        hl::write_text_file(args.out_dir + "/sweep.csv", csv.str());
        report["sweep"] = table;
        report["shared_radius"] = hl::json_number(sw.shared_radius);
        std::cout << "swept " << sw.entries.size() << " parameter values\n";
    });
}

int cmd_examples(const CommonArgs& args, const std::string& only) {
    auto t0 = std::chrono::steady_clock::now();
    hl::Json report;
    int code = 0;
    try {
        hl::GalleryResult res = hl::run_gallery(args.seed, only);
        report = res.report;
        report["config"] = config_json(args);
        for (const auto& item : res.items)
            std::cout << (item.pass ? "PASS " : "FAIL ") << item.name << "\n";
        if (!res.all_pass) code = 1;
    } catch (const hl::Error& e) {
        code = hl::exit_code_of(e.code());
        report["command"] = "examples";
        report["error"]["name"] = hl::error_name(e.code());
        report["error"]["message"] = e.what();
        std::cerr << e.what() << "\n";
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_report(args, report, elapsed);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"certified C^{1,beta} linearization of hyperbolic fixed points"};
    app.require_subcommand(1);

    CommonArgs args;
    double step = 1e-3;
    bool do_shilnikov = false;
    bool do_linearize = false;
    std::string sweep_spec;
    std::string only;

    CLI::App* classify = app.add_subcommand("classify", "spectral classification of L");
    add_common(classify, args);

    CLI::App* linearize = app.add_subcommand("linearize", "run the full conjugacy pipeline");
    add_common(linearize, args);

    CLI::App* flow = app.add_subcommand("flow", "time-one map and critical point analysis");
    add_common(flow, args);
    flow->add_option("--step", step, "integration step (must divide 1)");
    flow->add_flag("--shilnikov", do_shilnikov, "force the saddle-focus check");
    flow->add_flag("--linearize", do_linearize, "hand the time-one map to the pipeline");
    flow->add_option("--sweep", sweep_spec, "PARAM:LO:HI:N coefficient sweep");

    CLI::App* sweep = app.add_subcommand("sweep", "parameter continuation of linearizations");
    add_common(sweep, args);
    sweep->add_option("--sweep", sweep_spec, "PARAM:LO:HI:N parameter sweep")->required();

    CLI::App* examples = app.add_subcommand("examples", "run the curated example gallery");
    add_common(examples, args, false);
    examples->add_option("--only", only, "run a single gallery item");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (classify->parsed()) return cmd_classify(args);
        if (linearize->parsed()) return cmd_linearize(args);
        if (flow->parsed()) return cmd_flow(args, step, do_shilnikov, do_linearize, sweep_spec);
        if (sweep->parsed()) return cmd_sweep(args, sweep_spec);
        if (examples->parsed()) return cmd_examples(args, only);
    } catch (const hl::Error& e) {
        std::cerr << e.what() << "\n";
        return hl::exit_code_of(e.code());
    }
    return 2;
}
