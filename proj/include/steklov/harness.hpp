#pragma once

#include "steklov/analytic.hpp"
#include "steklov/assembly.hpp"
#include "steklov/eigensolve.hpp"
#include "steklov/error.hpp"
#include "steklov/mesh.hpp"
#include "steklov/mesh_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace steklov {

inline constexpr const char* index_convention =
    "eigenvalues are indexed from 1 with sigma_1 = lambda_1 = 0; bounds are evaluated at bound_k = index - 1, "
    "so the perimeter bound reads sigma_bar[index] <= 2 pi (index - 1)";

enum class Verdict { pass, fail, report_only, skipped };

inline std::string_view to_string(Verdict v)
{
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::report_only: return "report-only";
    case Verdict::skipped: return "skipped";
    }
    return "skipped";
}

inline Verdict verdict_from_string(std::string_view s)
{
    if (s == "pass")
        return Verdict::pass;
    if (s == "fail")
        return Verdict::fail;
    if (s == "report-only")
        return Verdict::report_only;
    if (s == "skipped")
        return Verdict::skipped;
    throw Error(ErrorCode::parse_error, "unknown verdict " + std::string(s));
}

/// One evaluated bound. `ratio` is observed / bound; for report-only checks
/// it is the empirical constant. Pass/fail checks fail iff observed exceeds
/// the bound (after the optional relative slack).
struct Check {
    std::string name;
    int index = 0;        // steklov index (1-based), 0 when not indexed
    int lambda_index = 0; // laplace index for product checks
    double bound_value = 0.0;
    double observed_value = 0.0;
    double ratio = 0.0;
    Verdict verdict = Verdict::report_only;
    std::string note;
};

struct DomainReport {
    std::string domain_id;
    int dim = 0;
    int ambient_dim = 0;
    std::optional<int> genus;
    int boundary_components = 0;
    std::string metric = "euclidean";
    bool imported = false;
    double sigma_area = 0.0;
    double omega_volume = 0.0;
    double iso_ratio = 0.0;
    double mean_density = 1.0;
    std::optional<SpectrumResult> steklov;
    std::optional<SpectrumResult> laplace_boundary;
    std::vector<double> reference_spectrum; // closed-form values, when known
    std::vector<Check> checks;
    std::vector<std::string> assumptions;
    std::optional<std::string> error;
};

enum class Suite { perimeter, isoperimetric, genus, comparison };

inline std::string_view to_string(Suite s)
{
    switch (s) {
    case Suite::perimeter: return "perimeter";
    case Suite::isoperimetric: return "isoperimetric";
    case Suite::genus: return "genus";
    case Suite::comparison: return "comparison";
    }
    return "perimeter";
}

inline Suite suite_from_string(std::string_view s)
{
    for (Suite suite : {Suite::perimeter, Suite::isoperimetric, Suite::genus, Suite::comparison})
        if (to_string(suite) == s)
            return suite;
    throw Error(ErrorCode::invalid_input, "unknown suite " + std::string(s));
}

struct VerdictSummary {
    Suite suite = Suite::perimeter;
    bool skipped = false;
    std::string reason;
    std::vector<Check> checks;
    int passed = 0;
    int failed = 0;
    int report_only = 0;
    double fitted_constant = 0.0; // largest ratio
};

namespace detail {

inline std::string suite_check_name(Suite s)
{
    switch (s) {
    case Suite::perimeter: return "perimeter_bound";
    case Suite::isoperimetric: return "isoperimetric_growth";
    case Suite::genus: return "genus_bound";
    case Suite::comparison: return "comparison_product";
    }
    return "";
}

inline void tally(VerdictSummary& summary, Check check)
{
    if (check.verdict == Verdict::pass)
        ++summary.passed;
    else if (check.verdict == Verdict::fail)
        ++summary.failed;
    else if (check.verdict == Verdict::report_only)
        ++summary.report_only;
    if (check.verdict != Verdict::skipped && std::isfinite(check.ratio))
        summary.fitted_constant = std::max(summary.fitted_constant, check.ratio);
    summary.checks.push_back(std::move(check));
}

inline Check report_only_check(std::string name, int index, double observed, double bound)
{
    Check c;
    c.name = std::move(name);
    c.index = index;
    c.observed_value = observed;
    c.bound_value = bound;
    c.ratio = observed / bound;
    c.verdict = Verdict::report_only;
    return c;
}

/// Agreement check: observed is a deviation, bound the tolerance.
inline Check tolerance_check(std::string name, int index, double deviation, double tolerance)
{
    Check c;
    c.name = std::move(name);
    c.index = index;
    c.observed_value = deviation;
    c.bound_value = tolerance;
    c.ratio = deviation / tolerance;
    c.verdict = deviation <= tolerance ? Verdict::pass : Verdict::fail;
    return c;
}

} // namespace detail

/// Evaluates one bound family on a finished report.
inline VerdictSummary verify_bounds(const DomainReport& report, Suite suite, double tol_override = 0.0)
{
    if (!report.steklov)
        throw Error(ErrorCode::incomplete_report, "report " + report.domain_id + " has no Steklov spectrum");
    const SpectrumResult& st = *report.steklov;
    if (st.normalized.size() != st.raw.size())
        throw Error(ErrorCode::incomplete_report, "report " + report.domain_id + " lacks normalized eigenvalues");
    VerdictSummary summary;
    summary.suite = suite;
    const std::string name = detail::suite_check_name(suite);
    auto skip = [&](std::string reason) {
        summary.skipped = true;
        summary.reason = std::move(reason);
        Check c;
        c.name = name;
        c.verdict = Verdict::skipped;
        c.note = summary.reason;
        summary.checks.push_back(std::move(c));
        return summary;
    };
    const int n = st.geometry.n_bdim;
    const int count = static_cast<int>(st.normalized.size());

    switch (suite) {
    case Suite::perimeter: {
        if (report.dim != 2 || report.ambient_dim != 2)
            return skip("hypothesis violated: planar domain");
        if (report.metric != "euclidean")
            return skip("hypothesis violated: euclidean metric");
        if (!report.genus || *report.genus != 0 || report.boundary_components != 1)
            return skip("hypothesis violated: simply connected");
        for (int i = 2; i <= count; ++i) {
            Check c;
            c.name = name;
            c.index = i;
            c.bound_value = 2.0 * std::numbers::pi * (i - 1);
            c.observed_value = st.normalized[i - 1];
            c.ratio = c.observed_value / c.bound_value;
            c.verdict = c.observed_value > c.bound_value * (1.0 + tol_override) ? Verdict::fail : Verdict::pass;
            detail::tally(summary, std::move(c));
        }
        break;
    }
    case Suite::isoperimetric: {
        const double iso_factor = std::pow(report.iso_ratio, (n - 1.0) / n);
        for (int i = 2; i <= count; ++i) {
            double shape = std::pow(i - 1.0, 2.0 / (n + 1)) / iso_factor;
            detail::tally(summary, detail::report_only_check(name, i, st.normalized[i - 1], shape));
        }
        break;
    }
    case Suite::genus: {
        if (report.dim != 2 || !report.genus)
            return skip("hypothesis violated: surface of known genus");
        const int degree = (*report.genus + 3) / 2;
        for (int i = 2; i <= count; ++i)
            detail::tally(summary, detail::report_only_check(name, i, st.normalized[i - 1], degree * (i - 1.0)));
        break;
    }
    case Suite::comparison: {
        if (!report.laplace_boundary)
            throw Error(ErrorCode::incomplete_report,
                        "report " + report.domain_id + " has no boundary Laplace spectrum");
        const SpectrumResult& lb = *report.laplace_boundary;
        if (lb.normalized.size() != lb.raw.size())
            throw Error(ErrorCode::incomplete_report, "boundary Laplace spectrum lacks normalized values");
        if (report.imported)
            summary.reason = "assumed: domain lies in a ball of radius below half the injectivity radius";
        const double area_ratio = std::pow(report.sigma_area / report.omega_volume, 3.0 / n);
        for (int k = 2; k <= static_cast<int>(lb.normalized.size()); ++k)
            for (int l = 2; l <= count; ++l) {
                double shape = area_ratio * std::pow(k - 1.0, 2.0 / n) * std::pow(l - 1.0, 2.0 / (n + 1));
                Check c = detail::report_only_check(name, l, lb.normalized[k - 1] * st.normalized[l - 1], shape);
                c.lambda_index = k;
                detail::tally(summary, std::move(c));
            }
        break;
    }
    }
    return summary;
}

// Configuration ---------------------------------------------------------------

struct ImportedMesh {
    std::string path;
    MeshFormat format = MeshFormat::json;
};

struct DomainEntry {
    std::string id;
    std::variant<DomainSpec, ImportedMesh> source;
    std::optional<MetricField> metric;
};

struct ExperimentConfig {
    std::string experiment = "standard";
    std::vector<DomainEntry> domains;
    MetricField metric;
    double density = 1.0;
    int k = 10;
    std::uint64_t seed = 42;
    std::optional<int> refinement;
    int sample_count = 20;
    std::vector<double> decay{0.0, 1.0, 2.0, 4.0, 8.0};
    double steepness = 16.0;
    std::vector<double> lambda2{4.0, 16.0, 64.0, 256.0};
    int cross_bdim = 2;
    double circumference = 2.0 * std::numbers::pi;
    double half_length = 1.0;
    int min_level = 2;
    int max_level = 5;
    double tol_override = 0.0;
};

inline constexpr const char* experiment_kinds[] = {"standard",          "domains",      "planar_sweep",
                                                   "spaceform_sweep",   "conformal_experiment",
                                                   "cylinder_crosscheck", "large_sigma", "comparison_product",
                                                   "convergence_study"};

inline MetricField metric_from_json(const nlohmann::json& j)
{
    std::string kind = j.value("kind", "euclidean");
    double scale = j.value("scale", 1.0);
    if (kind == "euclidean")
        return MetricField::euclidean();
    if (kind == "spherical")
        return MetricField::spherical(scale);
    if (kind == "hyperbolic")
        return MetricField::hyperbolic(scale);
    throw Error(ErrorCode::invalid_spec, "unknown metric kind " + kind);
}

inline DomainEntry domain_from_json(const nlohmann::json& j, std::optional<int> refinement)
{
    DomainEntry entry;
    std::string type = j.at("type").get<std::string>();
    int level = j.value("refinement", refinement.value_or(type == "ball" ? 2 : 4));
    entry.id = j.value("id", type);
    if (type == "disk")
        entry.source = DomainSpec{UnitDiskSpec{level}};
    else if (type == "star")
        entry.source = DomainSpec{StarShapedSpec{j.at("radius_samples").get<std::vector<double>>(), level}};
    else if (type == "annulus")
        entry.source = DomainSpec{AnnulusSpec{j.value("r_in", 0.5), j.value("r_out", 1.0), level}};
    else if (type == "cylinder")
        entry.source = DomainSpec{
            FlatCylinderSpec{j.value("circumference", 2.0 * std::numbers::pi), j.value("length", 2.0), level}};
    else if (type == "ball")
        entry.source = DomainSpec{UnitBallSpec{level}};
    else if (type == "mesh") {
        std::string format = j.value("format", "json");
        if (format != "off" && format != "json")
            throw Error(ErrorCode::invalid_spec, "mesh format must be off or json");
        entry.source = ImportedMesh{j.at("path").get<std::string>(), format == "off" ? MeshFormat::off : MeshFormat::json};
    } else
        throw Error(ErrorCode::invalid_spec, "unknown domain type " + type);
    if (j.contains("metric"))
        entry.metric = metric_from_json(j["metric"]);
    return entry;
}

/// Config document: {"experiment", "domains", "metric", "density", "k", "seed", ...}.
inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
    ExperimentConfig cfg;
    try {
        cfg.experiment = j.value("experiment", cfg.experiment);
        if (std::find(std::begin(experiment_kinds), std::end(experiment_kinds), cfg.experiment)
            == std::end(experiment_kinds))
            throw Error(ErrorCode::invalid_spec, "unknown experiment " + cfg.experiment);
        if (j.contains("refinement"))
            cfg.refinement = j["refinement"].get<int>();
        if (j.contains("metric"))
            cfg.metric = metric_from_json(j["metric"]);
        if (j.contains("density")) {
            const auto& d = j["density"];
            if (d.value("kind", "uniform") != "uniform")
                throw Error(ErrorCode::invalid_spec, "only uniform densities are configurable");
            cfg.density = d.value("value", 1.0);
        }
        cfg.k = j.value("k", cfg.k);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.sample_count = j.value("count", cfg.sample_count);
        cfg.decay = j.value("decay", cfg.decay);
        cfg.steepness = j.value("steepness", cfg.steepness);
        cfg.lambda2 = j.value("lambda2", cfg.lambda2);
        cfg.cross_bdim = j.value("cross_bdim", cfg.cross_bdim);
        cfg.circumference = j.value("circumference", cfg.circumference);
        cfg.half_length = j.value("half_length", cfg.half_length);
        cfg.min_level = j.value("min_level", cfg.min_level);
        cfg.max_level = j.value("max_level", cfg.max_level);
        cfg.tol_override = j.value("tol_override", cfg.tol_override);
        if (j.contains("domains"))
            for (const auto& d : j["domains"])
                cfg.domains.push_back(domain_from_json(d, cfg.refinement));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_spec, e.what());
    }
    if (cfg.k < 2)
        throw Error(ErrorCode::invalid_spec, "k must be at least 2");
    if (!(cfg.density > 0))
        throw Error(ErrorCode::invalid_spec, "density must be positive");
    if (!(cfg.tol_override >= 0))
        throw Error(ErrorCode::invalid_spec, "tolerance override must be non-negative");
    if (cfg.sample_count < 1 || cfg.min_level > cfg.max_level)
        throw Error(ErrorCode::invalid_spec, "empty sweep");
    return cfg;
}

// Domain analysis ---------------------------------------------------------------

struct AnalysisOptions {
    int k = 10;
    double density = 1.0;
    bool laplace = false;
    std::vector<Suite> suites;
    double tol_override = 0.0;
    bool imported = false;
};

/// Restriction of a metric to the closed boundary mesh produced by boundary_of.
inline MetricField boundary_metric(const SimplicialMesh& mesh, const MetricField& metric)
{
    if (metric.kind != MetricField::Kind::custom)
        return metric;
    std::vector<double> values;
    values.reserve(mesh.boundary_vertices.size());
    for (Index v : mesh.boundary_vertices)
        values.push_back(metric.values.at(v));
    return MetricField::custom(std::move(values));
}

inline void apply_suites(DomainReport& report, const std::vector<Suite>& suites, double tol_override)
{
    for (Suite s : suites) {
        VerdictSummary summary = verify_bounds(report, s, tol_override);
        if (s == Suite::comparison && !summary.reason.empty())
            report.assumptions.push_back(summary.reason);
        for (auto& c : summary.checks)
            report.checks.push_back(std::move(c));
    }
}

inline DomainReport analyze_domain(std::string id, const SimplicialMesh& mesh, const MetricField& metric,
                                   const AnalysisOptions& options)
{
    DomainReport report;
    report.domain_id = std::move(id);
    report.dim = mesh.dim;
    report.ambient_dim = mesh.ambient_dim;
    report.genus = mesh.genus;
    report.boundary_components = boundary_component_count(mesh);
    report.metric = std::string(to_string(metric.kind));
    report.imported = options.imported;

    OperatorBundle ops = assemble(mesh, metric, uniform_density(mesh, options.density));
    report.steklov = steklov_spectrum(ops, options.k);
    report.sigma_area = ops.sigma_area;
    report.omega_volume = ops.omega_volume;
    report.iso_ratio = iso_ratio(ops.sigma_area, ops.omega_volume, ops.n_bdim);
    report.mean_density = ops.mean_density();
    if (options.laplace) {
        SimplicialMesh sigma = boundary_of(mesh);
        report.laplace_boundary = laplace_spectrum(sigma, boundary_metric(mesh, metric), options.k);
    }
    apply_suites(report, options.suites, options.tol_override);
    return report;
}

/// Runs `body` and turns any failure into an error record on the report.
template <class F>
DomainReport guarded(const std::string& id, F&& body)
{
    try {
        return body();
    } catch (const std::exception& e) {
        DomainReport report;
        report.domain_id = id;
        report.error = e.what();
        return report;
    }
}

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double max_relative_deviation(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size())
        return std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (double v : a)
        scale = std::max(scale, std::abs(v));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double denom = std::max(std::abs(a[i]), 1e-8 * scale);
        if (denom == 0.0)
            denom = 1.0;
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

inline std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace detail

/// r(theta) = 1 + sum_{j=1..4} a_j cos(j theta + phi_j), |a_j| <= 0.15,
/// resampled until min r >= 0.3.
inline std::vector<double> random_star_samples(std::mt19937_64& rng, int samples = 64)
{
    for (;;) {
        std::array<double, 4> a{}, phi{};
        for (int j = 0; j < 4; ++j) {
            a[j] = 0.15 * (2.0 * detail::unit_uniform(rng) - 1.0);
            phi[j] = 2.0 * std::numbers::pi * detail::unit_uniform(rng);
        }
        std::vector<double> r(samples);
        for (int i = 0; i < samples; ++i) {
            double theta = 2.0 * std::numbers::pi * i / samples;
            r[i] = 1.0;
            for (int j = 0; j < 4; ++j)
                r[i] += a[j] * std::cos((j + 1) * theta + phi[j]);
        }
        if (*std::min_element(r.begin(), r.end()) >= 0.3)
            return r;
    }
}

/// Conformal factor of the boundary-preserving experiment:
/// rho = exp(-s * steepness * (1 - |x|^2)), exactly 1 on boundary vertices.
inline std::vector<double> conformal_profile(const SimplicialMesh& mesh, double s, double steepness)
{
    std::vector<double> rho(mesh.vertices.size());
    for (std::size_t v = 0; v < rho.size(); ++v) {
        double r2 = detail::dot(mesh.vertices[v], mesh.vertices[v]);
        rho[v] = std::exp(-s * steepness * std::max(0.0, 1.0 - r2));
    }
    for (Index v : mesh.boundary_vertices)
        rho[v] = 1.0;
    return rho;
}

struct ExperimentResult {
    std::string experiment;
    std::uint64_t seed = 42;
    std::vector<DomainReport> reports;
};

namespace detail {

inline const std::vector<Suite> all_suites{Suite::perimeter, Suite::isoperimetric, Suite::genus, Suite::comparison};
inline const std::vector<Suite> spectral_suites{Suite::perimeter, Suite::isoperimetric, Suite::genus};

inline SimplicialMesh load_domain(const DomainEntry& entry)
{
    if (const auto* spec = std::get_if<DomainSpec>(&entry.source))
        return make_domain(*spec);
    const auto& file = std::get<ImportedMesh>(entry.source);
    return import_mesh(file.path, file.format);
}

inline void run_domains(const ExperimentConfig& cfg, ExperimentResult& out)
{
    for (const auto& entry : cfg.domains)
        out.reports.push_back(guarded(entry.id, [&] {
            AnalysisOptions opt{cfg.k, cfg.density, true, all_suites, cfg.tol_override,
                                std::holds_alternative<ImportedMesh>(entry.source)};
            return analyze_domain(entry.id, load_domain(entry), entry.metric.value_or(cfg.metric), opt);
        }));
}

inline void run_standard(const ExperimentConfig& cfg, ExperimentResult& out)
{
    const int level = cfg.refinement.value_or(4);
    std::mt19937_64 rng(cfg.seed);
    std::vector<double> star = random_star_samples(rng);
    struct Item {
        std::string id;
        DomainSpec spec;
        MetricField metric;
    };
    std::vector<Item> items{
        {"disk", UnitDiskSpec{level}, MetricField::euclidean()},
        {"annulus", AnnulusSpec{0.5, 1.0, std::max(level - 1, 1)}, MetricField::euclidean()},
        {"star", StarShapedSpec{star, level}, MetricField::euclidean()},
        {"flat_cylinder", FlatCylinderSpec{2.0 * std::numbers::pi, 2.0, level}, MetricField::euclidean()},
        {"ball", UnitBallSpec{std::clamp(level - 2, 0, 3)}, MetricField::euclidean()},
        {"spherical_cap", UnitDiskSpec{level}, MetricField::spherical(1.0)},
        {"hyperbolic_disk", UnitDiskSpec{level}, MetricField::hyperbolic(0.5)},
    };
    AnalysisOptions opt{cfg.k, cfg.density, true, all_suites, cfg.tol_override};
    for (const auto& item : items)
        out.reports.push_back(
            guarded(item.id, [&] { return analyze_domain(item.id, make_domain(item.spec), item.metric, opt); }));
}

inline void run_planar_sweep(const ExperimentConfig& cfg, ExperimentResult& out)
{
    const int level = cfg.refinement.value_or(5);
    std::mt19937_64 rng(cfg.seed);
    AnalysisOptions opt{cfg.k, cfg.density, false, spectral_suites, cfg.tol_override};
    for (int i = 0; i < cfg.sample_count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "star-%02d", i);
        std::vector<double> samples = random_star_samples(rng);
        out.reports.push_back(guarded(id, [&] {
            SimplicialMesh mesh = star_shaped_mesh({samples, level});
            DomainReport r = analyze_domain(id, mesh, MetricField::euclidean(), opt);
            if (i != 0)
                return r;
            // invariance of the normalized spectrum on the first sampled domain
            const auto& base = r.steklov->normalized;
            for (double t : {0.5, 3.0}) {
                OperatorBundle ops = assemble(scaled(mesh, t), MetricField::euclidean(), uniform_density(mesh, cfg.density));
                double dev = max_relative_deviation(base, steklov_spectrum(ops, cfg.k).normalized);
                r.checks.push_back(tolerance_check("scale_invariance", 0, dev, 1e-10));
                r.checks.back().note = "t = " + format_number(t);
            }
            for (double c : {0.1, 10.0}) {
                OperatorBundle ops = assemble(mesh, MetricField::euclidean(), uniform_density(mesh, c * cfg.density));
                double dev = max_relative_deviation(base, steklov_spectrum(ops, cfg.k).normalized);
                r.checks.push_back(tolerance_check("density_invariance", 0, dev, 1e-10));
                r.checks.back().note = "c = " + format_number(c);
            }
            return r;
        }));
    }
}

inline void run_spaceform(const ExperimentConfig& cfg, ExperimentResult& out)
{
    const int level = cfg.refinement.value_or(4);
    AnalysisOptions opt{cfg.k, cfg.density, false, spectral_suites, cfg.tol_override};
    // caps stay inside the stereographic image of the hemisphere (c |x|^2 <= 1)
    for (double c : {0.25, 0.5, 1.0}) {
        std::string id = "spherical_cap[c=" + format_number(c) + "]";
        out.reports.push_back(guarded(
            id, [&] { return analyze_domain(id, unit_disk_mesh(level), MetricField::spherical(c), opt); }));
    }
    for (double c : {0.25, 0.5, 0.9}) {
        std::string id = "hyperbolic_disk[c=" + format_number(c) + "]";
        out.reports.push_back(guarded(
            id, [&] { return analyze_domain(id, unit_disk_mesh(level), MetricField::hyperbolic(c), opt); }));
    }
}

inline void run_conformal(const ExperimentConfig& cfg, ExperimentResult& out)
{
    const int level = cfg.refinement.value_or(6);
    SimplicialMesh mesh = unit_disk_mesh(level);
    AnalysisOptions opt{cfg.k, cfg.density, false, {Suite::isoperimetric, Suite::genus}, cfg.tol_override};
    std::optional<Eigen::MatrixXd> base_dtn;
    std::optional<DomainReport> base;
    for (double s : cfg.decay) {
        std::string id = "conformal[s=" + format_number(s) + "]";
        out.reports.push_back(guarded(id, [&] {
            MetricField metric = MetricField::custom(conformal_profile(mesh, s, cfg.steepness));
            DomainReport r = analyze_domain(id, mesh, metric, opt);
            Eigen::MatrixXd dtn = schur_dtn(assemble(mesh, metric, uniform_density(mesh, cfg.density)));
            if (!base) {
                base = r;
                base_dtn = dtn;
            }
            double scale = std::max(1.0, base_dtn->cwiseAbs().maxCoeff());
            double dtn_dev = (dtn - *base_dtn).cwiseAbs().maxCoeff() / scale;
            r.checks.push_back(tolerance_check("dtn_equality", 0, dtn_dev, 1e-12));
            double spec_dev = max_relative_deviation(base->steklov->normalized, r.steklov->normalized);
            r.checks.push_back(tolerance_check("spectrum_equality", 0, spec_dev, 1e-10));
            r.checks.push_back(report_only_check("iso_ratio_growth", 0, r.iso_ratio, base->iso_ratio));
            return r;
        }));
    }
}

inline void run_cylinder(const ExperimentConfig& cfg, ExperimentResult& out)
{
    const int level = cfg.refinement.value_or(6);
    std::string id = "flat_cylinder[l=" + format_number(cfg.circumference) + ",L=" + format_number(cfg.half_length) + "]";
    out.reports.push_back(guarded(id, [&] {
        const int k = std::min(cfg.k, 6);
        AnalysisOptions opt{k, cfg.density, false, {}, cfg.tol_override};
        DomainReport r = analyze_domain(
            id, flat_cylinder_mesh({cfg.circumference, 2.0 * cfg.half_length, level}), MetricField::euclidean(), opt);
        CylinderSpec spec{closed_form_spectrum(ClosedFormShape::circle, cfg.circumference, 2 * k + 1), cfg.half_length,
                          cfg.circumference, 1, false};
        r.reference_spectrum = cylinder_steklov(spec, k);
        const auto& fem = r.steklov->raw;
        const double scale = r.reference_spectrum.back();
        for (int i = 0; i < k; ++i) {
            double ref = r.reference_spectrum[i];
            double dev = std::abs(fem[i] - ref) / std::max(ref, scale * 1e-2);
            r.checks.push_back(tolerance_check("cylinder_formula", i + 1, dev, 0.02));
        }
        return r;
    }));
}

inline void run_large_sigma(const ExperimentConfig& cfg, ExperimentResult& out)
{
    const double cross = 1.0;
    std::vector<LargeSigmaEntry> seq;
    try {
        seq = large_sigma_sequence(cfg.lambda2, cross, cfg.cross_bdim);
    } catch (const std::exception& e) {
        DomainReport r;
        r.domain_id = "large_sigma";
        r.error = e.what();
        out.reports.push_back(std::move(r));
        return;
    }
    double previous = 0.0;
    for (const auto& e : seq) {
        std::string id = "large_sigma[lambda2=" + format_number(e.lambda2) + "]";
        out.reports.push_back(guarded(id, [&] {
            DomainReport r;
            r.domain_id = id;
            r.dim = cfg.cross_bdim + 1;
            r.ambient_dim = r.dim;
            r.boundary_components = 2;
            r.metric = "product";
            CylinderSpec spec{{0.0, e.lambda2}, e.half_length, cross, cfg.cross_bdim, false};
            std::vector<double> raw = cylinder_steklov(spec, 2);
            r.sigma_area = 2.0 * cross;
            r.omega_volume = 2.0 * e.half_length * cross;
            auto q = normalized_quantities(raw, r.sigma_area, r.omega_volume, cfg.cross_bdim, 1.0);
            r.iso_ratio = q.iso_ratio;
            SpectrumResult st;
            st.raw = raw;
            st.normalized = q.normalized;
            st.k_count = 2;
            st.geometry = {r.sigma_area, r.omega_volume, cfg.cross_bdim, 1.0};
            st.solver_info.method = "closed-form";
            st.multiplicities = {1, 1};
            r.steklov = st;
            r.reference_spectrum = {0.0, std::sqrt(e.lambda2) * std::tanh(1.0)};
            r.checks.push_back(tolerance_check("closed_form_agreement", 2,
                                               std::abs(e.sigma2 - r.reference_spectrum[1]) / r.reference_spectrum[1],
                                               1e-14));
            r.checks.push_back(tolerance_check("formula_agreement", 2, std::abs(e.sigma2 - raw[1]) / raw[1], 1e-14));
            r.checks.push_back(report_only_check("sigma2_growth", 2, e.sigma2, previous > 0 ? previous : e.sigma2));
            previous = e.sigma2;
            return r;
        }));
    }
}

inline void run_comparison(const ExperimentConfig& cfg, ExperimentResult& out)
{
    const int level = cfg.refinement.value_or(4);
    std::mt19937_64 rng(cfg.seed);
    std::vector<double> star = random_star_samples(rng);
    AnalysisOptions opt{std::min(cfg.k, 8), cfg.density, true, {Suite::comparison}, cfg.tol_override};
    std::vector<std::pair<std::string, DomainSpec>> items{
        {"disk", UnitDiskSpec{level}},
        {"annulus", AnnulusSpec{0.5, 1.0, std::max(level - 1, 1)}},
        {"star", StarShapedSpec{star, level}},
        {"ball", UnitBallSpec{std::clamp(level - 2, 0, 3)}},
    };
    for (const auto& [id, spec] : items)
        out.reports.push_back(
            guarded(id, [&] { return analyze_domain(id, make_domain(spec), cfg.metric, opt); }));
}

inline void run_convergence(const ExperimentConfig& cfg, ExperimentResult& out)
{
    double previous = 0.0;
    for (int level = cfg.min_level; level <= cfg.max_level; ++level) {
        std::string id = "disk[level=" + std::to_string(level) + "]";
        out.reports.push_back(guarded(id, [&] {
            AnalysisOptions opt{7, 1.0, false, {}, cfg.tol_override};
            DomainReport r = analyze_domain(id, unit_disk_mesh(level), MetricField::euclidean(), opt);
            r.reference_spectrum = closed_form_spectrum(ClosedFormShape::disk, 1.0, 7);
            double err = 0.0;
            for (int i = 1; i < 7; ++i)
                err = std::max(err, std::abs(r.steklov->raw[i] - r.reference_spectrum[i]) / r.reference_spectrum[i]);
            r.checks.push_back(report_only_check("oracle_error", 0, err, 0.01));
            if (previous > 0)
                r.checks.push_back(report_only_check("error_reduction", 0, previous / err, 3.0));
            previous = err;
            return r;
        }));
    }
}

} // namespace detail

/// Runs one experiment kind. Failures inside a domain become error records.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    ExperimentResult out;
    out.experiment = cfg.experiment;
    out.seed = cfg.seed;
    const std::string& kind = cfg.experiment;
    if (kind == "standard")
        detail::run_standard(cfg, out);
    else if (kind == "domains")
        detail::run_domains(cfg, out);
    else if (kind == "planar_sweep")
        detail::run_planar_sweep(cfg, out);
    else if (kind == "spaceform_sweep")
        detail::run_spaceform(cfg, out);
    else if (kind == "conformal_experiment")
        detail::run_conformal(cfg, out);
    else if (kind == "cylinder_crosscheck")
        detail::run_cylinder(cfg, out);
    else if (kind == "large_sigma")
        detail::run_large_sigma(cfg, out);
    else if (kind == "comparison_product")
        detail::run_comparison(cfg, out);
    else if (kind == "convergence_study")
        detail::run_convergence(cfg, out);
    else
        throw Error(ErrorCode::invalid_spec, "unknown experiment " + kind);
    return out;
}

/// 0 when every check passes or is report-only, 1 on a failed check, 2 when
/// some domain could not be evaluated.
inline int exit_code(const ExperimentResult& result)
{
    bool failed = false;
    for (const auto& r : result.reports) {
        if (r.error)
            return 2;
        for (const auto& c : r.checks)
            failed = failed || c.verdict == Verdict::fail;
    }
    return failed ? 1 : 0;
}

// Serialization ---------------------------------------------------------------

inline nlohmann::json to_json(const SpectrumResult& s)
{
    nlohmann::json j;
    j["kind"] = to_string(s.kind);
    j["k_count"] = s.k_count;
    j["raw"] = s.raw;
    j["normalized"] = s.normalized;
    j["multiplicities"] = s.multiplicities;
    j["geometry"] = {{"sigma_area", s.geometry.sigma_area},
                     {"omega_volume", s.geometry.omega_volume},
                     {"n_bdim", s.geometry.n_bdim},
                     {"mean_density", s.geometry.mean_density}};
    j["solver_info"] = {{"method", s.solver_info.method},
                        {"residual_norms", s.solver_info.residual_norms},
                        {"dedup_tolerance", s.solver_info.dedup_tolerance},
                        {"deflated", s.solver_info.deflated},
                        {"truncated", s.solver_info.truncated}};
    return j;
}

inline SpectrumResult spectrum_from_json(const nlohmann::json& j)
{
    SpectrumResult s;
    s.kind = j.at("kind").get<std::string>() == "laplace" ? SpectrumKind::laplace : SpectrumKind::steklov;
    s.k_count = j.at("k_count").get<int>();
    s.raw = j.at("raw").get<std::vector<double>>();
    s.normalized = j.at("normalized").get<std::vector<double>>();
    s.multiplicities = j.value("multiplicities", std::vector<int>{});
    const auto& g = j.at("geometry");
    s.geometry = {g.at("sigma_area").get<double>(), g.at("omega_volume").get<double>(), g.at("n_bdim").get<int>(),
                  g.at("mean_density").get<double>()};
    if (j.contains("solver_info")) {
        const auto& info = j["solver_info"];
        s.solver_info.method = info.value("method", "");
        s.solver_info.residual_norms = info.value("residual_norms", std::vector<double>{});
        s.solver_info.dedup_tolerance = info.value("dedup_tolerance", 0.0);
        s.solver_info.deflated = info.value("deflated", 0);
        s.solver_info.truncated = info.value("truncated", false);
    }
    return s;
}

inline nlohmann::json to_json(const Check& c)
{
    return {{"name", c.name},
            {"index", c.index},
            {"lambda_index", c.lambda_index},
            {"bound_value", c.bound_value},
            {"observed_value", c.observed_value},
            {"ratio", c.ratio},
            {"verdict", to_string(c.verdict)},
            {"note", c.note}};
}

inline nlohmann::json to_json(const DomainReport& r)
{
    nlohmann::json j;
    j["domain_id"] = r.domain_id;
    j["dim"] = r.dim;
    j["ambient_dim"] = r.ambient_dim;
    j["genus"] = r.genus ? nlohmann::json(*r.genus) : nlohmann::json(nullptr);
    j["boundary_components"] = r.boundary_components;
    j["metric"] = r.metric;
    j["imported"] = r.imported;
    j["sigma_area"] = r.sigma_area;
    j["omega_volume"] = r.omega_volume;
    j["iso_ratio"] = r.iso_ratio;
    j["mean_density"] = r.mean_density;
    j["steklov"] = r.steklov ? to_json(*r.steklov) : nlohmann::json(nullptr);
    j["laplace_boundary"] = r.laplace_boundary ? to_json(*r.laplace_boundary) : nlohmann::json(nullptr);
    j["reference_spectrum"] = r.reference_spectrum;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : r.checks)
        j["checks"].push_back(to_json(c));
    j["assumptions"] = r.assumptions;
    j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
    return j;
}

inline DomainReport report_from_json(const nlohmann::json& j)
{
    DomainReport r;
    try {
        r.domain_id = j.at("domain_id").get<std::string>();
        r.dim = j.at("dim").get<int>();
        r.ambient_dim = j.value("ambient_dim", r.dim);
        if (!j.at("genus").is_null())
            r.genus = j["genus"].get<int>();
        r.boundary_components = j.at("boundary_components").get<int>();
        r.metric = j.at("metric").get<std::string>();
        r.imported = j.value("imported", false);
        r.sigma_area = j.at("sigma_area").get<double>();
        r.omega_volume = j.at("omega_volume").get<double>();
        r.iso_ratio = j.at("iso_ratio").get<double>();
        r.mean_density = j.at("mean_density").get<double>();
        if (j.contains("steklov") && !j["steklov"].is_null())
            r.steklov = spectrum_from_json(j["steklov"]);
        if (j.contains("laplace_boundary") && !j["laplace_boundary"].is_null())
            r.laplace_boundary = spectrum_from_json(j["laplace_boundary"]);
        r.reference_spectrum = j.value("reference_spectrum", std::vector<double>{});
        for (const auto& c : j.value("checks", nlohmann::json::array())) {
            Check check;
            check.name = c.at("name").get<std::string>();
            check.index = c.value("index", 0);
            check.lambda_index = c.value("lambda_index", 0);
            check.bound_value = c.at("bound_value").is_null() ? std::nan("") : c["bound_value"].get<double>();
            check.observed_value = c.at("observed_value").is_null() ? std::nan("") : c["observed_value"].get<double>();
            check.ratio = c.at("ratio").is_null() ? std::nan("") : c["ratio"].get<double>();
            check.verdict = verdict_from_string(c.at("verdict").get<std::string>());
            check.note = c.value("note", "");
            r.checks.push_back(std::move(check));
        }
        r.assumptions = j.value("assumptions", std::vector<std::string>{});
        if (j.contains("error") && !j["error"].is_null())
            r.error = j["error"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, e.what());
    }
    return r;
}

inline nlohmann::json to_json(const ExperimentResult& result)
{
    nlohmann::json j;
    j["index_convention"] = index_convention;
    j["experiment"] = result.experiment;
    j["seed"] = result.seed;
    int pass = 0, fail = 0, report_only = 0, skipped = 0, errors = 0;
    j["reports"] = nlohmann::json::array();
    for (const auto& r : result.reports) {
        errors += r.error ? 1 : 0;
        for (const auto& c : r.checks) {
            pass += c.verdict == Verdict::pass;
            fail += c.verdict == Verdict::fail;
            report_only += c.verdict == Verdict::report_only;
            skipped += c.verdict == Verdict::skipped;
        }
        j["reports"].push_back(to_json(r));
    }
    j["summary"] = {{"pass", pass},       {"fail", fail},     {"report_only", report_only},
                    {"skipped", skipped}, {"errors", errors}, {"exit_code", exit_code(result)}};
    return j;
}

inline ExperimentResult result_from_json(const nlohmann::json& j)
{
    ExperimentResult out;
    try {
        out.experiment = j.at("experiment").get<std::string>();
        out.seed = j.value("seed", std::uint64_t{42});
        for (const auto& r : j.at("reports"))
            out.reports.push_back(report_from_json(r));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, e.what());
    }
    return out;
}

/// One row per (domain, index); the first line states the index convention.
inline void write_csv(std::ostream& os, const ExperimentResult& result)
{
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "# " << index_convention << '\n';
    os << "domain_id,index,bound_k,sigma_raw,sigma_normalized,lambda_raw,lambda_normalized,"
          "sigma_area,omega_volume,iso_ratio,mean_density,error\n";
    for (const auto& r : result.reports) {
        std::string id = "\"" + r.domain_id + "\"";
        if (!r.steklov) {
            os << id << ",,,,,,,,,,," << "\"" << r.error.value_or("") << "\"\n";
            continue;
        }
        const auto& st = *r.steklov;
        for (std::size_t i = 0; i < st.raw.size(); ++i) {
            os << id << ',' << i + 1 << ',' << i << ',' << num(st.raw[i]) << ',' << num(st.normalized[i]) << ',';
            if (r.laplace_boundary && i < r.laplace_boundary->raw.size())
                os << num(r.laplace_boundary->raw[i]) << ',' << num(r.laplace_boundary->normalized[i]);
            else
                os << ',';
            os << ',' << num(r.sigma_area) << ',' << num(r.omega_volume) << ',' << num(r.iso_ratio) << ','
               << num(r.mean_density) << ",\n";
        }
    }
}

/// Re-evaluates the bound suites of saved reports and reports disagreements
/// with the stored verdicts.
struct VerificationResult {
    int checked = 0;
    int failed = 0;
    std::vector<std::string> mismatches;
};

inline VerificationResult verify_saved(const ExperimentResult& saved, double tol_override = 0.0)
{
    VerificationResult out;
    for (const auto& r : saved.reports) {
        if (r.error || !r.steklov)
            continue;
        for (Suite suite : detail::all_suites) {
            const std::string name = detail::suite_check_name(suite);
            std::vector<const Check*> stored;
            for (const auto& c : r.checks)
                if (c.name == name)
                    stored.push_back(&c);
            if (stored.empty())
                continue;
            VerdictSummary fresh = verify_bounds(r, suite, tol_override);
            out.failed += fresh.failed;
            if (fresh.checks.size() != stored.size()) {
                out.mismatches.push_back(r.domain_id + ": " + name + " check count differs");
                continue;
            }
            for (std::size_t i = 0; i < stored.size(); ++i) {
                ++out.checked;
                if (fresh.checks[i].verdict != stored[i]->verdict)
                    out.mismatches.push_back(r.domain_id + ": " + name + " index " + std::to_string(stored[i]->index)
                                             + " verdict differs");
            }
        }
        // experiment-specific checks are not recomputable from the report
        for (const auto& c : r.checks)
            if (c.verdict == Verdict::fail && c.name.find("_bound") == std::string::npos)
                ++out.failed;
    }
    return out;
}

} // namespace steklov
