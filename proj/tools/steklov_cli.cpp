// Command line front end: solve, sweep, cylinder, convergence, verify.

#include "steklov/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace steklov;

namespace {

struct Output {
    std::string format = "json";
    std::string path;
};

void emit(const Output& out, const std::string& text)
{
    if (out.path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out.path);
    if (!f)
        throw Error(ErrorCode::io_error, "cannot write " + out.path);
    f << text;
}

int emit_result(const Output& out, const ExperimentResult& result)
{
    std::ostringstream os;
    if (out.format == "csv")
        write_csv(os, result);
    else
        os << to_json(result).dump(2) << '\n';
    emit(out, os.str());
    return exit_code(result);
}

nlohmann::json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::io_error, "cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, e.what());
    }
}

void add_output(CLI::App* cmd, Output& out)
{
    cmd->add_option("--format", out.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--out", out.path, "Write the report to PATH instead of stdout");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Steklov spectra of simplicial domains and the bounds they satisfy"};
    app.require_subcommand(1);

    Output out;
    std::optional<int> refinement;
    int k = 10;
    std::uint64_t seed = 42;
    double tol_override = 0.0;
    std::string config_path;

    // solve
    auto* solve = app.add_subcommand("solve", "Solve one domain and evaluate every bound suite");
    std::string domain = "disk", mesh_path, mesh_format = "json", metric_kind = "euclidean";
    double metric_scale = 1.0, density = 1.0, r_in = 0.5;
    solve->add_option("--domain", domain, "disk, annulus, cylinder, ball or mesh")
        ->check(CLI::IsMember({"disk", "annulus", "cylinder", "ball", "mesh"}));
    solve->add_option("--mesh", mesh_path, "Mesh file for --domain mesh");
    solve->add_option("--mesh-format", mesh_format, "off or json")->check(CLI::IsMember({"off", "json"}));
    solve->add_option("--metric", metric_kind, "euclidean, spherical or hyperbolic")
        ->check(CLI::IsMember({"euclidean", "spherical", "hyperbolic"}));
    solve->add_option("--scale", metric_scale, "Curvature scale of the metric");
    solve->add_option("--density", density, "Uniform boundary density");
    solve->add_option("--r-in", r_in, "Inner radius of the annulus");
    solve->add_option("--refinement", refinement, "Refinement level");
    solve->add_option("--k", k, "Number of eigenvalues");
    solve->add_option("--tol-override", tol_override, "Relative slack on pass/fail bounds");
    solve->add_option("--config", config_path, "JSON config listing the domains");
    add_output(solve, out);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run an experiment family");
    std::string experiment = "standard";
    sweep->add_option("--experiment", experiment, "Experiment kind")
        ->check(CLI::IsMember(std::vector<std::string>(std::begin(experiment_kinds), std::end(experiment_kinds))));
    sweep->add_option("--refinement", refinement, "Refinement level");
    sweep->add_option("--k", k, "Number of eigenvalues");
    sweep->add_option("--seed", seed, "Seed of the random families");
    sweep->add_option("--tol-override", tol_override, "Relative slack on pass/fail bounds");
    sweep->add_option("--config", config_path, "JSON experiment config");
    add_output(sweep, out);

    // cylinder
    auto* cylinder = app.add_subcommand("cylinder", "Closed-form Steklov spectrum of [-L, L] x Sigma");
    std::vector<double> cross;
    double circumference = 0.0, half_length = 1.0, cross_measure = 1.0;
    int n_bdim = 1;
    bool exhaustive = false;
    cylinder->add_option("--cross", cross, "Laplace spectrum of the cross-section, starting with 0");
    cylinder->add_option("--circle", circumference, "Use the spectrum of a circle of this length as cross-section");
    cylinder->add_option("--half-length", half_length, "L");
    cylinder->add_option("--cross-measure", cross_measure, "Measure of one cross-section");
    cylinder->add_option("--n-bdim", n_bdim, "Dimension of the cross-section");
    cylinder->add_flag("--exhaustive", exhaustive, "The cross spectrum is complete");
    cylinder->add_option("--k", k, "Number of eigenvalues");
    add_output(cylinder, out);

    // convergence
    auto* convergence = app.add_subcommand("convergence", "Disk oracle error against refinement");
    int min_level = 2;
    convergence->add_option("--min-level", min_level, "Coarsest level");
    convergence->add_option("--refinement", refinement, "Finest level");
    add_output(convergence, out);

    // verify
    auto* verify = app.add_subcommand("verify", "Re-check the bound suites of a saved JSON report");
    std::string report_path;
    verify->add_option("report", report_path, "Saved report")->required();
    verify->add_option("--tol-override", tol_override, "Relative slack on pass/fail bounds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*solve) {
            ExperimentConfig cfg;
            if (!config_path.empty())
                cfg = config_from_json(read_json(config_path));
            cfg.experiment = "domains";
            cfg.k = k;
            cfg.tol_override = tol_override;
            if (cfg.domains.empty()) {
                nlohmann::json d{{"type", domain}};
                if (refinement)
                    d["refinement"] = *refinement;
                if (domain == "annulus")
                    d["r_in"] = r_in;
                if (domain == "mesh") {
                    if (mesh_path.empty())
                        throw Error(ErrorCode::invalid_spec, "--domain mesh needs --mesh PATH");
                    d["path"] = mesh_path;
                    d["format"] = mesh_format;
                    d["id"] = mesh_path;
                }
                d["metric"] = {{"kind", metric_kind}, {"scale", metric_scale}};
                cfg.domains.push_back(domain_from_json(d, refinement));
                cfg.density = density;
            }
            return emit_result(out, run_experiment(cfg));
        }
        if (*sweep) {
            ExperimentConfig cfg;
            if (!config_path.empty())
                cfg = config_from_json(read_json(config_path));
            if (config_path.empty() || sweep->count("--experiment"))
                cfg.experiment = experiment;
            if (refinement)
                cfg.refinement = refinement;
            if (sweep->count("--k"))
                cfg.k = k;
            if (sweep->count("--seed"))
                cfg.seed = seed;
            if (sweep->count("--tol-override"))
                cfg.tol_override = tol_override;
            return emit_result(out, run_experiment(cfg));
        }
        if (*cylinder) {
            CylinderSpec spec;
            if (circumference > 0)
                spec.cross_spectrum = closed_form_spectrum(ClosedFormShape::circle, circumference, 2 * k + 1);
            else
                spec.cross_spectrum = cross;
            spec.half_length = half_length;
            spec.cross_boundary_measure = circumference > 0 ? circumference : cross_measure;
            spec.n_bdim = n_bdim;
            spec.exhaustive = exhaustive;
            std::vector<double> values = cylinder_steklov(spec, k);
            std::ostringstream os;
            if (out.format == "csv") {
                os << "index,value\n";
                for (std::size_t i = 0; i < values.size(); ++i) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%.17g", values[i]);
                    os << i + 1 << ',' << buf << '\n';
                }
            } else {
                nlohmann::json j;
                j["index_convention"] = index_convention;
                j["half_length"] = half_length;
                j["values"] = values;
                j["branches"] = nlohmann::json::array();
                for (const auto& b : cylinder_branches(spec))
                    j["branches"].push_back({{"lambda", b.lambda}, {"tanh", b.even}, {"coth", b.odd}});
                os << j.dump(2) << '\n';
            }
            emit(out, os.str());
            return 0;
        }
        if (*convergence) {
            ExperimentConfig cfg;
            cfg.experiment = "convergence_study";
            cfg.min_level = min_level;
            cfg.max_level = refinement.value_or(5);
            if (cfg.min_level > cfg.max_level)
                throw Error(ErrorCode::invalid_spec, "--min-level exceeds the finest level");
            return emit_result(out, run_experiment(cfg));
        }
        if (*verify) {
            ExperimentResult saved = result_from_json(read_json(report_path));
            VerificationResult v = verify_saved(saved, tol_override);
            for (const auto& m : v.mismatches)
                std::cerr << "mismatch: " << m << '\n';
            std::cout << "checked " << v.checked << " verdicts, " << v.failed << " failed, " << v.mismatches.size()
                      << " mismatches\n";
            if (!v.mismatches.empty())
                return 2;
            return v.failed > 0 ? 1 : 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
