// nhpp: intensity estimation and change-point testing for annual event counts.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "nhpp/app.hpp"

namespace {

void add_common(CLI::App& cmd, nhpp::app::RunConfig& config, std::optional<int>& start, std::optional<int>& end,
                std::string& format) {
    cmd.add_option("--start-year", start, "First calendar year (default: first year in the input)");
    cmd.add_option("--end-year", end, "Last calendar year (default: last year in the input)");
    cmd.add_option("-o,--output-dir", config.output_dir, "Directory for output files")->capture_default_str();
    cmd.add_option("--label", config.label, "Series label (default: input file stem)");
    cmd.add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}, CLI::ignore_case))
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-homogeneous Poisson intensity estimation and exact change-point testing"};
    app.require_subcommand(1);

    nhpp::app::RunConfig config;
    nhpp::app::SimulationConfig sim;
    std::optional<int> start_year;
    std::optional<int> end_year;
    std::optional<int> change_year;
    std::optional<std::uint64_t> seed;
    std::string variant = "strict";
    std::string format = "csv";
    std::string band_scale = "linear";

    auto* fit = app.add_subcommand("fit", "Fit the spline log-intensity and write curves with 95% bands");
    fit->add_option("-i,--input", config.input_path, "CSV with header year,count")->required()->check(CLI::ExistingFile);
    add_common(*fit, config, start_year, end_year, format);
    fit->add_option("--knots", config.interior_knot_count, "Number of equally spaced interior knots")
        ->capture_default_str();
    fit->add_option("--grid-points", config.grid_points, "Evaluation grid size")->capture_default_str()->check(
        CLI::Range(2, 10'000'000));
    fit->add_option("--band-scale", band_scale, "Band for the intensity: linear, or log (stays positive)")
        ->check(CLI::IsMember({"linear", "log"}, CLI::ignore_case))
        ->capture_default_str();

    auto* test = app.add_subcommand("test", "Exact test for a drop in mean intensity after a change year");
    test->add_option("-i,--input", config.input_path, "CSV with header year,count")->required()->check(CLI::ExistingFile);
    add_common(*test, config, start_year, end_year, format);
    test->add_option("--change-year", change_year, "Last year before the suspected change")->required();
    test->add_option("--variant", variant, "Tail convention: strict P(S>s) or inclusive P(S>=s)")
        ->check(CLI::IsMember({"strict", "inclusive"}))
        ->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Write synthetic annual counts in the input format");
    add_common(*simulate, config, start_year, end_year, format);
    simulate->add_option("--seed", seed, "RNG seed")->required();
    simulate->add_option("--kind", sim.kind, "Intensity shape")
        ->check(CLI::IsMember({"constant", "step", "ramp"}))
        ->capture_default_str();
    simulate->add_option("--rate", sim.rate, "Constant rate, or rate before the change for step")
        ->capture_default_str();
    simulate->add_option("--rate-after", sim.rate_after, "Rate after the change (step)")->capture_default_str();
    simulate->add_option("--change-year", sim.change_year, "Last year at the initial rate (step)");
    simulate->add_option("--start-rate", sim.start_rate, "Rate at the start (ramp)")->capture_default_str();
    simulate->add_option("--end-rate", sim.end_rate, "Rate at the end (ramp)")->capture_default_str();
    simulate->add_option("--output", sim.output_path, "Output CSV (default: <output-dir>/simulated.csv)");

    auto* basis = app.add_subcommand("basis", "Dump the spline basis on the grid and the design matrix");
    basis->add_option("-i,--input", config.input_path, "CSV with header year,count")->check(CLI::ExistingFile);
    add_common(*basis, config, start_year, end_year, format);
    basis->add_option("--knots", config.interior_knot_count, "Number of equally spaced interior knots")
        ->capture_default_str();
    basis->add_option("--grid-points", config.grid_points, "Evaluation grid size")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    config.start_year = start_year;
    config.end_year = end_year;
    config.change_year = change_year;
    config.seed = seed;
    config.test_variant = *nhpp::parse_variant(variant);
    config.emit_format = format == "json" ? nhpp::app::EmitFormat::json : nhpp::app::EmitFormat::csv;
    config.band_scale = band_scale == "log" ? nhpp::BandScale::log : nhpp::BandScale::linear;

    try {
        if (fit->parsed()) {
            const auto run = nhpp::app::run_fit(config);
            std::cout << "fitted " << run.basis.size() << " coefficients in " << run.fit.iterations
                      << " iterations; log-likelihood " << run.fit.log_likelihood << '\n';
            for (const auto& p : run.written) std::cout << "wrote " << p.string() << '\n';
        } else if (test->parsed()) {
            const auto run = nhpp::app::run_test(config);
            std::cout << run.report << "wrote " << run.written.string() << '\n';
        } else if (simulate->parsed()) {
            if (sim.kind == "step" && sim.change_year == 0) {
                throw nhpp::SpecError("step intensity needs --change-year");
            }
            const auto series = nhpp::app::run_simulate(config, sim);
            std::cout << "simulated " << series.size() << " years, total " << series.total() << " events (rng "
                      << nhpp::kRngName << ", seed " << *config.seed << ")\n";
        } else if (basis->parsed()) {
            for (const auto& p : nhpp::app::run_basis(config)) std::cout << "wrote " << p.string() << '\n';
        }
    } catch (const nhpp::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (const auto hint = nhpp::app::remediation(e); !hint.empty()) {
            std::cerr << "hint: " << hint << '\n';
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
