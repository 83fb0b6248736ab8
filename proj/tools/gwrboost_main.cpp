// Command-line front end: simulate | fit | sweep | report.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "gwrb/cli.hpp"
#include "gwrb/version.hpp"

namespace {

void add_schema_flags(CLI::App* cmd, gwrb::DatasetSchema& schema) {
    cmd->add_option("--id-col", schema.id, "Id column name")->default_val("id");
    cmd->add_option("--u-col", schema.u, "Horizontal coordinate column")->default_val("u");
    cmd->add_option("--v-col", schema.v, "Vertical coordinate column")->default_val("v");
    cmd->add_option("--y-col", schema.response, "Response column")->default_val("y");
    cmd->add_option("--covariates", schema.covariates, "Covariate column names (ordered)")
        ->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geographically weighted regression with gradient boosting"};
    app.set_version_flag("--version", std::string(gwrb::kVersion));
    app.require_subcommand(1);

    gwrb::cli::SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate synthetic grid datasets and run the replication study");
    simulate->add_option("--out-dir", sim.out_dir, "Output directory")->required();
    simulate->add_option("--reps", sim.reps, "Number of replications")->default_val(1);
    simulate->add_option("--seed", sim.seed, "Base seed")->default_val(42);
    simulate->add_option("--models", sim.models, "Models to fit: ols,gwr,gwrboost")->delimiter(',');
    simulate->add_flag("--emit-datasets", sim.emit_datasets, "Write one CSV per replication");
    simulate->add_option("--extent", sim.extent, "Grid side length")->default_val(25);
    simulate->add_option("--noise-sd", sim.noise_sd, "Noise standard deviation")->default_val(0.25);
    simulate->add_option("--covariate-dist", sim.covariates, "normal|uniform")->default_val("uniform");
    simulate->add_option("--kernel", sim.kernel, "bisquare|gaussian")->default_val("gaussian");
    simulate->add_option("--bw-search", sim.bw_search, "Bandwidth criterion: aicc|loocv")->default_val("aicc");
    simulate->add_option("--bw-factor", sim.bw_factor, "Boosting bandwidth factor")->default_val(1.2);
    simulate->add_option("--learning-rate", sim.learning_rate, "Boosting learning rate")->default_val(0.1);
    simulate->add_option("--max-stages", sim.max_stages, "Boosting stage cap")->default_val(100);
    simulate->add_option("--early-stop", sim.early_stop, "aicc|r2|none")->default_val("aicc");
    simulate->add_option("--likelihood", sim.likelihood, "paper|profile")->default_val("profile");
    simulate->add_option("--threads", sim.threads, "Worker threads (0 = auto)")->default_val(0);

    gwrb::cli::FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one model to a CSV dataset");
    fit_cmd->add_option("--input", fit.input, "Input CSV")->required();
    fit_cmd->add_option("--out-dir", fit.out_dir, "Output directory")->required();
    add_schema_flags(fit_cmd, fit.schema);
    fit_cmd->add_option("--model", fit.model, "ols|gwr|gwrboost")->default_val("gwrboost");
    fit_cmd->add_option("--kernel", fit.kernel, "bisquare|gaussian")->default_val("bisquare");
    fit_cmd->add_option("--bandwidth", fit.bandwidth, "Fixed bandwidth distance");
    fit_cmd->add_option("--adaptive", fit.adaptive, "Adaptive neighbor count");
    fit_cmd->add_option("--bw-search", fit.bw_search, "Search criterion: aicc|loocv");
    fit_cmd->add_option("--bw-search-mode", fit.bw_search_mode, "fixed|adaptive")->default_val("fixed");
    fit_cmd->add_option("--bw-factor", fit.bw_factor, "Boosting bandwidth factor")->default_val(1.2);
    fit_cmd->add_option("--learning-rate", fit.learning_rate, "Boosting learning rate")->default_val(0.1);
    fit_cmd->add_option("--max-stages", fit.max_stages, "Boosting stage cap")->default_val(100);
    fit_cmd->add_option("--early-stop", fit.early_stop, "aicc|r2|none")->default_val("aicc");
    fit_cmd->add_flag("--no-standardize", fit.no_standardize, "Skip the z-score transform");
    fit_cmd->add_flag("--original-units", fit.original_units, "Report coefficients in input units");
    fit_cmd->add_option("--likelihood", fit.likelihood, "paper|profile")->default_val("profile");
    fit_cmd->add_option("--moran-weights", fit.moran, "auto|rook|knn")->default_val("auto");
    fit_cmd->add_option("--threads", fit.threads, "Worker threads (0 = auto)")->default_val(0);

    gwrb::cli::SweepArgs sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Stage-curve sweep over learning rates and bandwidth factors");
    sweep_cmd->add_option("--out-dir", sweep.out_dir, "Output directory")->required();
    sweep_cmd->add_option("--input", sweep.input, "Input CSV (omit to simulate)");
    add_schema_flags(sweep_cmd, sweep.schema);
    sweep_cmd->add_option("--seed", sweep.seed, "Simulation seed")->default_val(42);
    sweep_cmd->add_option("--reps", sweep.reps, "Simulated replications of the grid")->default_val(1);
    sweep_cmd->add_option("--extent", sweep.extent, "Grid side length")->default_val(25);
    sweep_cmd->add_option("--noise-sd", sweep.noise_sd, "Noise standard deviation")->default_val(0.25);
    sweep_cmd->add_option("--covariate-dist", sweep.covariates, "normal|uniform")->default_val("uniform");
    sweep_cmd->add_option("--learning-rates", sweep.learning_rates, "Learning-rate grid")->delimiter(',');
    sweep_cmd->add_option("--bw-factors", sweep.bw_factors, "Bandwidth-factor grid")->delimiter(',');
    sweep_cmd->add_option("--max-stages", sweep.max_stages, "Stages per curve")->default_val(100);
    sweep_cmd->add_option("--kernel", sweep.kernel, "bisquare|gaussian")->default_val("gaussian");
    sweep_cmd->add_option("--bw-search", sweep.bw_search, "Reference bandwidth criterion")->default_val("aicc");
    sweep_cmd->add_option("--likelihood", sweep.likelihood, "paper|profile")->default_val("profile");
    sweep_cmd->add_option("--threads", sweep.threads, "Worker threads (0 = auto)")->default_val(0);

    gwrb::cli::ReportArgs report;
    CLI::App* report_cmd = app.add_subcommand("report", "Merge diagnostics files into a comparison table");
    report_cmd->add_option("--inputs", report.inputs, "diagnostics.json files")->required()->delimiter(',');
    report_cmd->add_option("--out-dir", report.out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return gwrb::cli::cmd_simulate(sim);
        if (fit_cmd->parsed()) return gwrb::cli::cmd_fit(fit);
        if (sweep_cmd->parsed()) return gwrb::cli::cmd_sweep(sweep);
        if (report_cmd->parsed()) return gwrb::cli::cmd_report(report);
    } catch (const gwrb::Error& e) {
        std::fprintf(stderr, "{\"error\":\"%s\"}\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "{\"error\":\"%s\"}\n", e.what());
        return 1;
    }
    return 0;
}
