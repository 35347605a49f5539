#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nhpp/basis.hpp"
#include "nhpp/changepoint.hpp"
#include "nhpp/error.hpp"
#include "nhpp/inference.hpp"
#include "nhpp/io.hpp"
#include "nhpp/model.hpp"
#include "nhpp/simulate.hpp"

// Command implementations behind the `nhpp` tool. Each command computes all
// of its outputs in memory, then commits them with io::write_all_or_nothing.
namespace nhpp::app {

enum class EmitFormat { csv, json };

struct RunConfig {
    std::filesystem::path input_path;
    std::optional<int> start_year;
    std::optional<int> end_year;
    std::size_t interior_knot_count = 9;
    std::size_t grid_points = 1001;
    std::optional<int> change_year;
    TestVariant test_variant = TestVariant::strict;
    std::filesystem::path output_dir = ".";
    std::optional<std::uint64_t> seed;
    EmitFormat emit_format = EmitFormat::csv;
    BandScale band_scale = BandScale::linear;
    std::string label;
};

/// Scenario for `simulate`. Change times are calendar years: a change at
/// year Y takes effect after the end of Y.
struct SimulationConfig {
    std::string kind = "constant";
    double rate = 5.0;
    double rate_after = 3.0;
    double start_rate = 5.0;
    double end_rate = 3.0;
    int change_year = 0;
    std::filesystem::path output_path;
};

inline std::string to_string(EmitFormat f) { return f == EmitFormat::csv ? "csv" : "json"; }

inline nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["input_path"] = c.input_path.generic_string();
    j["start_year"] = c.start_year ? nlohmann::ordered_json(*c.start_year) : nlohmann::ordered_json();
    j["end_year"] = c.end_year ? nlohmann::ordered_json(*c.end_year) : nlohmann::ordered_json();
    j["interior_knot_count"] = c.interior_knot_count;
    j["grid_points"] = c.grid_points;
    j["change_year"] = c.change_year ? nlohmann::ordered_json(*c.change_year) : nlohmann::ordered_json();
    j["test_variant"] = std::string(to_string(c.test_variant));
    j["output_dir"] = c.output_dir.generic_string();
    j["seed"] = c.seed ? nlohmann::ordered_json(*c.seed) : nlohmann::ordered_json();
    j["emit_format"] = to_string(c.emit_format);
    j["band_scale"] = c.band_scale == BandScale::linear ? "linear" : "log";
    j["label"] = c.label;
    return j;
}

inline nlohmann::ordered_json to_json(const SimulationConfig& s) {
    nlohmann::ordered_json j;
    j["kind"] = s.kind;
    if (s.kind == "constant") {
        j["rate"] = s.rate;
    } else if (s.kind == "step") {
        j["rate_before"] = s.rate;
        j["rate_after"] = s.rate_after;
        j["change_year"] = s.change_year;
    } else {
        j["start_rate"] = s.start_rate;
        j["end_rate"] = s.end_rate;
    }
    j["output_path"] = s.output_path.generic_string();
    return j;
}

namespace detail {

inline std::string csv_header(const std::string& command, const nlohmann::ordered_json& config) {
    return io::comment_block("nhpp " + command + "\nconfig " + config.dump());
}

/// Config with the series' resolved year range filled in.
inline RunConfig resolve(RunConfig config, const CountSeries& series) {
    config.start_year = io::first_year(series);
    config.end_year = io::first_year(series) + static_cast<int>(series.size()) - 1;
    if (config.label.empty()) config.label = series.label();
    return config;
}

inline std::string curve_file_stem(int order) {
    return order == 0 ? "intensity" : "intensity_d" + std::to_string(order);
}

inline std::string render_curve(const CurveEstimate& curve, const RunConfig& config) {
    if (config.emit_format == EmitFormat::json) {
        nlohmann::ordered_json j;
        j["config"] = to_json(config);
        j["order"] = curve.order;
        j["t"] = curve.grid;
        j["estimate"] = curve.value;
        j["std_error"] = curve.std_error;
        j["ci_low"] = curve.ci_low;
        j["ci_high"] = curve.ci_high;
        return j.dump(2) + "\n";
    }
    std::ostringstream out;
    out << csv_header("fit", to_json(config));
    out << "t,estimate,std_error,ci_low,ci_high\n";
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        out << io::format_double(curve.grid[i]) << ',' << io::format_double(curve.value[i]) << ','
            << io::format_double(curve.std_error[i]) << ',' << io::format_double(curve.ci_low[i]) << ','
            << io::format_double(curve.ci_high[i]) << '\n';
    }
    return out.str();
}

inline std::string render_fit_summary(const FitResult& fit, const SplineBasis& basis, const CountSeries& series,
                                      const RunConfig& config) {
    const Eigen::VectorXd se = fit.standard_errors();
    const double sum_fitted = fit.fitted_means.sum();
    const auto sum_observed = series.total();
    if (config.emit_format == EmitFormat::json) {
        nlohmann::ordered_json j;
        j["config"] = to_json(config);
        j["label"] = config.label;
        j["bins"] = series.size();
        j["basis_size"] = basis.size();
        j["knot_vector"] = basis.knot_vector();
        j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
        j["std_error"] = std::vector<double>(se.data(), se.data() + se.size());
        j["log_likelihood"] = fit.log_likelihood;
        j["iterations"] = fit.iterations;
        j["converged"] = fit.converged;
        j["score_norm"] = fit.score_norm;
        j["sum_fitted"] = sum_fitted;
        j["sum_observed"] = sum_observed;
        return j.dump(2) + "\n";
    }
    std::ostringstream out;
    out << csv_header("fit", to_json(config));
    out << "name,value\n";
    out << "label," << config.label << '\n';
    out << "bins," << series.size() << '\n';
    out << "basis_size," << basis.size() << '\n';
    out << "log_likelihood," << io::format_double(fit.log_likelihood) << '\n';
    out << "iterations," << fit.iterations << '\n';
    out << "converged," << (fit.converged ? "true" : "false") << '\n';
    out << "score_norm," << io::format_double(fit.score_norm) << '\n';
    out << "sum_fitted," << io::format_double(sum_fitted) << '\n';
    out << "sum_observed," << sum_observed << '\n';
    for (Eigen::Index l = 0; l < fit.beta.size(); ++l) {
        out << "beta_" << l + 1 << ',' << io::format_double(fit.beta(l)) << '\n';
    }
    for (Eigen::Index l = 0; l < se.size(); ++l) {
        out << "std_error_" << l + 1 << ',' << io::format_double(se(l)) << '\n';
    }
    return out.str();
}

inline std::string extension(const RunConfig& config) {
    return config.emit_format == EmitFormat::json ? ".json" : ".csv";
}

}  // namespace detail

struct FitRun {
    CountSeries series;
    SplineBasis basis;
    FitResult fit;
    std::vector<CurveEstimate> curves;  ///< orders 0, 1, 2
    std::vector<std::filesystem::path> written;
};

/// `fit`: ingest, fit, and write three curve files plus a fit summary.
inline FitRun run_fit(RunConfig config) {
    CountSeries series = io::ingest(config.input_path, config.start_year, config.end_year, config.label);
    config = detail::resolve(std::move(config), series);

    SplineBasis basis = make_basis(series.period(), config.interior_knot_count);
    const DesignMatrix design = build_design(basis, series.period());
    FitResult fit = fit_mle(design, series);
    const auto grid = default_grid(basis, config.grid_points);

    std::vector<CurveEstimate> curves;
    std::vector<std::pair<std::filesystem::path, std::string>> files;
    for (int order = 0; order <= 2; ++order) {
        const BandScale scale = order == 0 ? config.band_scale : BandScale::linear;
        curves.push_back(intensity(fit, basis, grid, order, scale));
        files.emplace_back(config.output_dir / (detail::curve_file_stem(order) + detail::extension(config)),
                           detail::render_curve(curves.back(), config));
    }
    files.emplace_back(config.output_dir / ("fit_summary" + detail::extension(config)),
                       detail::render_fit_summary(fit, basis, series, config));
    io::write_all_or_nothing(files);

    std::vector<std::filesystem::path> written;
    for (const auto& f : files) written.push_back(f.first);
    return {std::move(series), std::move(basis), std::move(fit), std::move(curves), std::move(written)};
}

/// Split index K for a change at the end of `change_year`.
inline std::size_t split_for_year(const CountSeries& series, int change_year) {
    const int first = io::first_year(series);
    const int last = first + static_cast<int>(series.size()) - 1;
    if (change_year <= first || change_year >= last) {
        throw DomainError("change year " + std::to_string(change_year) + " must lie strictly between " +
                          std::to_string(first) + " and " + std::to_string(last));
    }
    return static_cast<std::size_t>(change_year - first + 1);
}

struct TestRun {
    ChangePointResult result;
    std::string report;  ///< human-readable table
    std::filesystem::path written;
};

inline std::string render_test_table(const ChangePointResult& r, int first_year, int change_year, int last_year,
                                     const std::string& label) {
    auto fixed4 = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", x);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "series: " << (label.empty() ? "(unnamed)" : label) << '\n';
    out << "change after: " << change_year << " (K=" << r.split << ", N=" << r.bins << ")\n";
    char row[128];
    std::snprintf(row, sizeof row, "%-15s %-11s %8s %9s\n", "segment", "years", "sum", "average");
    out << row;
    std::snprintf(row, sizeof row, "%-15s %4d-%-6d %8lld %9s\n", "before change", first_year, change_year,
                  static_cast<long long>(r.sum_before), fixed4(r.average_before()).c_str());
    out << row;
    std::snprintf(row, sizeof row, "%-15s %4d-%-6d %8lld %9s\n", "after change", change_year + 1, last_year,
                  static_cast<long long>(r.sum_after()), fixed4(r.average_after()).c_str());
    out << row;
    out << "null probability K/N: " << io::format_double(r.null_probability) << '\n';
    out << "variant: " << to_string(r.variant) << '\n';
    out << "p-value: " << io::format_double(r.p_value) << '\n';
    out << "decision at level 0.05: " << (r.reject() ? "reject H0 (mean intensity dropped)" : "do not reject H0")
        << '\n';
    return out.str();
}

/// `test`: exact conditional-binomial test at the end of change_year.
inline TestRun run_test(RunConfig config) {
    if (!config.change_year) {
        throw DomainError("the test command needs a change year");
    }
    const CountSeries series = io::ingest(config.input_path, config.start_year, config.end_year, config.label);
    config = detail::resolve(std::move(config), series);
    const std::size_t split = split_for_year(series, *config.change_year);
    const ChangePointResult r = exact_test(series, split, config.test_variant);

    TestRun run;
    run.result = r;
    run.report = render_test_table(r, *config.start_year, *config.change_year, *config.end_year, config.label);

    std::string content;
    if (config.emit_format == EmitFormat::json) {
        nlohmann::ordered_json j;
        j["config"] = to_json(config);
        j["label"] = config.label;
        j["K"] = r.split;
        j["N"] = r.bins;
        j["sum_before"] = r.sum_before;
        j["sum_after"] = r.sum_after();
        j["sum_total"] = r.sum_total;
        j["average_before"] = r.average_before();
        j["average_after"] = r.average_after();
        j["null_probability"] = r.null_probability;
        j["variant"] = std::string(to_string(r.variant));
        j["p_value"] = r.p_value;
        j["level"] = 0.05;
        j["reject"] = r.reject();
        content = j.dump(2) + "\n";
    } else {
        std::ostringstream out;
        out << detail::csv_header("test", to_json(config));
        out << "name,value\n";
        out << "label," << config.label << '\n';
        out << "K," << r.split << '\n';
        out << "N," << r.bins << '\n';
        out << "sum_before," << r.sum_before << '\n';
        out << "sum_after," << r.sum_after() << '\n';
        out << "sum_total," << r.sum_total << '\n';
        out << "average_before," << io::format_double(r.average_before()) << '\n';
        out << "average_after," << io::format_double(r.average_after()) << '\n';
        out << "null_probability," << io::format_double(r.null_probability) << '\n';
        out << "variant," << to_string(r.variant) << '\n';
        out << "p_value," << io::format_double(r.p_value) << '\n';
        out << "level,0.05\n";
        out << "reject," << (r.reject() ? "true" : "false") << '\n';
        content = out.str();
    }
    run.written = config.output_dir / ("test_report" + detail::extension(config));
    io::write_all_or_nothing({{run.written, content}});
    return run;
}

inline IntensitySpec make_spec(const StudyPeriod& period, const SimulationConfig& sim) {
    if (sim.kind == "constant") {
        return {period, ConstantRate{sim.rate}};
    }
    if (sim.kind == "step") {
        return {period, StepRate{sim.rate, sim.rate_after, static_cast<double>(sim.change_year) + 1.0}};
    }
    if (sim.kind == "ramp") {
        return {period, RampRate{sim.start_rate, sim.end_rate}};
    }
    throw SpecError("unknown intensity kind '" + sim.kind + "' (expected constant, step or ramp)");
}

/// `simulate`: synthetic annual counts in the ingestion format.
inline CountSeries run_simulate(const RunConfig& config, const SimulationConfig& sim) {
    if (!config.seed) {
        throw DomainError("simulate requires an explicit seed");
    }
    if (!config.start_year || !config.end_year) {
        throw DomainError("simulate requires start and end years");
    }
    const StudyPeriod period = StudyPeriod::annual(*config.start_year, *config.end_year);
    const IntensitySpec spec = make_spec(period, sim);
    CountSeries series = simulate_counts(spec, *config.seed, config.label.empty() ? "simulated" : config.label);

    nlohmann::ordered_json meta;
    meta["rng"] = std::string(kRngName);
    meta["seed"] = *config.seed;
    meta["start_year"] = *config.start_year;
    meta["end_year"] = *config.end_year;
    meta["intensity"] = to_json(sim);
    const std::string header = io::comment_block("nhpp simulate\nconfig " + meta.dump());
    const auto path = sim.output_path.empty() ? config.output_dir / "simulated.csv" : sim.output_path;
    io::write_all_or_nothing({{path, io::format_counts(series, header)}});
    return series;
}

/// `basis`: dump the basis on the evaluation grid and the design matrix.
inline std::vector<std::filesystem::path> run_basis(RunConfig config) {
    std::optional<StudyPeriod> period;
    if (!config.input_path.empty()) {
        const CountSeries series = io::ingest(config.input_path, config.start_year, config.end_year, config.label);
        config = detail::resolve(std::move(config), series);
        period = series.period();
    } else if (config.start_year && config.end_year) {
        period = StudyPeriod::annual(*config.start_year, *config.end_year);
    } else {
        throw DomainError("basis needs an input file or start and end years");
    }
    const SplineBasis basis = make_basis(*period, config.interior_knot_count);
    const DesignMatrix design = build_design(basis, *period);
    const auto grid = default_grid(basis, config.grid_points);
    const auto L = static_cast<Eigen::Index>(basis.size());

    std::ostringstream b;
    std::ostringstream d;
    b << detail::csv_header("basis", to_json(config));
    d << detail::csv_header("basis", to_json(config));
    b << "t";
    d << "bin_lower,bin_upper";
    for (Eigen::Index l = 0; l < L; ++l) {
        b << ",B_" << l + 1;
        d << ",D_" << l + 1;
    }
    b << '\n';
    d << '\n';
    for (const double t : grid) {
        const Eigen::VectorXd v = basis.evaluate(t, 0);
        b << io::format_double(t);
        for (Eigen::Index l = 0; l < L; ++l) b << ',' << io::format_double(v(l));
        b << '\n';
    }
    for (std::size_t n = 0; n < period->bins(); ++n) {
        d << io::format_double(period->bin_lower(n)) << ',' << io::format_double(period->bin_upper(n));
        for (Eigen::Index l = 0; l < L; ++l) {
            d << ',' << io::format_double(design.entries()(static_cast<Eigen::Index>(n), l));
        }
        d << '\n';
    }
    std::vector<std::pair<std::filesystem::path, std::string>> files{
        {config.output_dir / "basis.csv", b.str()}, {config.output_dir / "design.csv", d.str()}};
    io::write_all_or_nothing(files);
    return {files[0].first, files[1].first};
}

/// One-line remediation hint for an error raised by a command.
inline std::string remediation(const Error& e) {
    if (dynamic_cast<const IdentifiabilityError*>(&e) || dynamic_cast<const RankDeficiencyError*>(&e)) {
        return "reduce --knots so the basis has fewer functions than there are years";
    }
    if (dynamic_cast<const ConvergenceError*>(&e)) {
        return "try fewer interior knots; long runs of zeros can push the log-intensity toward -inf";
    }
    if (dynamic_cast<const DegenerateDataError*>(&e)) {
        return "the series has no events; nothing can be estimated or tested";
    }
    if (dynamic_cast<const IngestError*>(&e)) {
        return "input must be CSV with header 'year,count' and one row per contiguous year";
    }
    if (dynamic_cast<const NumericError*>(&e)) {
        return "the fitted log-intensity overflowed; check the counts for outliers";
    }
    return {};
}

}  // namespace nhpp::app
