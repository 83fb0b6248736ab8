#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gwrb/boost.hpp"
#include "gwrb/dataset_io.hpp"
#include "gwrb/errors.hpp"
#include "gwrb/gwr.hpp"
#include "gwrb/json_io.hpp"
#include "gwrb/metrics.hpp"
#include "gwrb/simulation.hpp"
#include "gwrb/version.hpp"

namespace gwrb::cli {

namespace fs = std::filesystem;

inline Kernel parse_kernel(const std::string& s) {
    if (s == "bisquare") return Kernel::Bisquare;
    if (s == "gaussian") return Kernel::Gaussian;
    throw InvalidConfig("unknown kernel '" + s + "' (expected bisquare|gaussian)");
}

inline LikelihoodKind parse_likelihood(const std::string& s) {
    if (s == "paper" || s == "inverse-variance") return LikelihoodKind::InverseVariance;
    if (s == "profile") return LikelihoodKind::Profile;
    throw InvalidConfig("unknown likelihood '" + s + "' (expected paper|profile)");
}

inline BoostConfig::EarlyStop parse_early_stop(const std::string& s) {
    if (s == "aicc") return BoostConfig::EarlyStop::Aicc;
    if (s == "r2") return BoostConfig::EarlyStop::R2;
    if (s == "none") return BoostConfig::EarlyStop::None;
    throw InvalidConfig("unknown early-stop mode '" + s + "' (expected aicc|r2|none)");
}

inline SearchCriterion parse_criterion(const std::string& s) {
    if (s == "aicc") return SearchCriterion::Aicc;
    if (s == "loocv") return SearchCriterion::Loocv;
    throw InvalidConfig("unknown bandwidth criterion '" + s + "' (expected aicc|loocv)");
}

inline CovariateDistribution parse_covariates(const std::string& s) {
    if (s == "normal") return CovariateDistribution::StandardNormal;
    if (s == "uniform") return CovariateDistribution::Uniform01;
    throw InvalidConfig("unknown covariate distribution '" + s + "' (expected normal|uniform)");
}

// Moran weights per data layout: rook contiguity on complete integer
// lattices, 8-nearest-neighbor otherwise.
inline MoranWeights moran_weights_for(const Eigen::Ref<const CoordMatrix>& coords,
                                      const std::string& mode) {
    if (mode == "rook") return rook_contiguity_weights(coords);
    if (mode == "knn") return knn_weights(coords);
    if (mode != "auto") throw InvalidConfig("unknown Moran weights mode '" + mode + "'");
    try {
        return rook_contiguity_weights(coords);
    } catch (const InvalidInput&) {
        return knn_weights(coords);
    }
}

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline fs::path prepare_out_dir(const std::string& requested) {
    std::string dir = requested;
    if (dir.empty()) {
        if (const char* env = std::getenv("GWRBOOST_OUT_DIR")) dir = env;
    }
    if (dir.empty()) throw InvalidConfig("output directory is required");
    fs::path path(dir);
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return path;
}

// Every command leaves exactly one manifest in its output directory,
// written after all other outputs so exit status 0 implies completeness.
inline void write_manifest(const fs::path& out_dir, const std::string& command, Json config,
                           const std::vector<std::string>& inputs,
                           const std::vector<std::string>& outputs) {
    Json manifest;
    manifest["command"] = command;
    manifest["version"] = std::string(kVersion);
    manifest["timestamp"] = iso_timestamp();
    manifest["config"] = std::move(config);
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    manifest["rng"] = std::string(Rng::identity());
    write_json((out_dir / "manifest.json").string(), manifest);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string out_dir;
    int reps = 1;
    std::uint64_t seed = 42;
    std::vector<std::string> models;  // subset of {ols, gwr, gwrboost}; empty = datasets only
    bool emit_datasets = false;
    int extent = 25;
    double noise_sd = 0.25;
    std::string covariates = "uniform";
    std::string kernel = "gaussian";
    std::string bw_search = "aicc";
    double bw_factor = 1.2;
    double learning_rate = 0.1;
    int max_stages = 100;
    std::string early_stop = "aicc";
    std::string likelihood = "profile";
    int threads = 0;
};

inline int cmd_simulate(const SimulateArgs& args) {
    if (args.reps < 1) throw InvalidConfig("--reps must be >= 1");
    const fs::path out_dir = prepare_out_dir(args.out_dir);

    ReplicationConfig config;
    config.reps = args.reps;
    config.base_seed = args.seed;
    config.sim.extent = args.extent;
    config.sim.noise_sd = args.noise_sd;
    config.sim.covariates = parse_covariates(args.covariates);
    config.kernel = parse_kernel(args.kernel);
    config.criterion = parse_criterion(args.bw_search);
    config.likelihood = parse_likelihood(args.likelihood);
    config.boost.learning_rate = args.learning_rate;
    config.boost.max_stages = args.max_stages;
    config.boost.bandwidth_factor = args.bw_factor;
    config.boost.early_stop = parse_early_stop(args.early_stop);
    config.threads = args.threads;

    config.models = {false, false, false};
    for (const auto& m : args.models) {
        if (m == "ols") config.models.ols = true;
        else if (m == "gwr") config.models.gwr = true;
        else if (m == "gwrboost") config.models.gwrboost = true;
        else throw InvalidConfig("unknown model '" + m + "' (expected ols|gwr|gwrboost)");
    }
    const bool run_models = !args.models.empty();
    const bool emit_datasets = args.emit_datasets || !run_models;

    std::vector<std::string> outputs;
    if (emit_datasets) {
        for (int rep = 0; rep < args.reps; ++rep) {
            const SimulatedDataset sim = generate_dataset(
                Rng::substream(config.base_seed, static_cast<std::uint64_t>(rep)), config.sim);
            char name[48];
            std::snprintf(name, sizeof(name), "dataset_rep%04d.csv", rep);
            write_dataset_csv((out_dir / name).string(), sim.data, sim.true_coefficients,
                              {"true_beta0", "true_beta1", "true_beta2", "true_beta3"});
            outputs.push_back(name);
        }
    }
    if (run_models) {
        const ReplicationReport report = run_replications(config);
        write_replications_csv((out_dir / "replications.csv").string(), report);
        write_json((out_dir / "aggregate.json").string(), aggregate_json(report));
        outputs.push_back("replications.csv");
        outputs.push_back("aggregate.json");
    }

    Json echo = replication_protocol_json(config);
    echo["models"] = args.models;
    echo["emit_datasets"] = emit_datasets;
    echo["threads_requested"] = args.threads;
    write_manifest(out_dir, "simulate", std::move(echo), {}, outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string input;
    DatasetSchema schema;
    std::string out_dir;
    std::string model = "gwrboost";
    std::string kernel = "bisquare";
    double bandwidth = 0.0;   // fixed-mode bandwidth, exclusive with the next two
    int adaptive = 0;         // adaptive-mode neighbor count
    std::string bw_search;    // aicc | loocv; searches when set
    std::string bw_search_mode = "fixed";  // fixed | adaptive search space
    double bw_factor = 1.2;
    double learning_rate = 0.1;
    int max_stages = 100;
    std::string early_stop = "aicc";
    bool no_standardize = false;
    bool original_units = false;
    std::string likelihood = "profile";
    std::string moran = "auto";
    int threads = 0;
};

inline int cmd_fit(const FitArgs& args) {
    if (args.model != "ols" && args.model != "gwr" && args.model != "gwrboost")
        throw InvalidConfig("unknown model '" + args.model + "' (expected ols|gwr|gwrboost)");
    const bool needs_bandwidth = args.model != "ols";
    const int ways = (args.bandwidth > 0.0 ? 1 : 0) + (args.adaptive > 0 ? 1 : 0) +
                     (!args.bw_search.empty() ? 1 : 0);
    if (needs_bandwidth && ways != 1)
        throw InvalidConfig("specify exactly one of --bandwidth, --adaptive, --bw-search");
    if (args.bandwidth < 0.0) throw InvalidConfig("--bandwidth must be positive");
    if (args.adaptive < 0) throw InvalidConfig("--adaptive must be positive");
    if (!(args.bw_factor > 0.0)) throw InvalidConfig("--bw-factor must be positive");
    if (!(args.learning_rate > 0.0) || args.learning_rate > 1.0)
        throw InvalidConfig("--learning-rate must lie in (0, 1]");
    if (args.max_stages < 1) throw InvalidConfig("--max-stages must be >= 1");

    const fs::path out_dir = prepare_out_dir(args.out_dir);
    const int threads = resolve_threads(args.threads);
    const LikelihoodKind likelihood = parse_likelihood(args.likelihood);
    const Kernel kernel = parse_kernel(args.kernel);

    const LoadedDataset loaded = load_csv(args.input, args.schema);
    Dataset data = loaded.data;
    std::optional<StandardizationRecord> standardization;
    if (!args.no_standardize) {
        auto [standardized, record] = zscore(data);
        data = std::move(standardized);
        standardization = std::move(record);
    }
    if (args.original_units && !standardization)
        throw InvalidConfig("--original-units requires standardization");

    const GeometryCache geometry(data.coords);
    const MoranWeights moran = moran_weights_for(data.coords, args.moran);

    FitOptions fit_options;
    fit_options.threads = threads;
    fit_options.assemble_hat = false;

    Json echo;
    echo["model"] = args.model;
    echo["kernel"] = to_string(kernel);
    echo["likelihood"] = args.likelihood;
    echo["standardized"] = !args.no_standardize;
    echo["original_units"] = args.original_units;
    echo["n"] = data.n();
    echo["p"] = data.p();
    echo["dataset_hash"] = loaded.dataset_hash;
    echo["seed"] = nullptr;

    Matrix coefficients;
    Vector fitted, residuals;
    double effective_params = 0.0;
    std::optional<GwrBoostModel> boost_model;

    auto resolve_scheme = [&]() -> SpatialWeightScheme {
        if (args.bandwidth > 0.0) return SpatialWeightScheme::fixed(kernel, args.bandwidth);
        if (args.adaptive > 0) return SpatialWeightScheme::adaptive(kernel, args.adaptive);
        SearchOptions search_options;
        search_options.criterion = parse_criterion(args.bw_search);
        search_options.likelihood = likelihood;
        search_options.threads = threads;
        const auto mode = args.bw_search_mode == "adaptive" ? SpatialWeightScheme::Mode::Adaptive
                                                            : SpatialWeightScheme::Mode::Fixed;
        const auto result = search_bandwidth(data, kernel, mode, search_options, &geometry);
        echo["bandwidth_search_score"] = result.score;
        return result.scheme;
    };

    if (args.model == "ols") {
        const GwrModel model = fit_ols(data, fit_options);
        coefficients = model.coefficients;
        fitted = model.fitted;
        residuals = model.residuals;
        effective_params = model.hat_trace;
        echo["bandwidth_mode"] = nullptr;
    } else {
        const SpatialWeightScheme reference = resolve_scheme();
        echo["bandwidth_mode"] =
            reference.mode == SpatialWeightScheme::Mode::Fixed ? "fixed" : "adaptive";
        if (args.model == "gwr") {
            echo["bandwidth"] = reference.mode == SpatialWeightScheme::Mode::Fixed
                                    ? Json(reference.bandwidth)
                                    : Json(reference.neighbors);
            const GwrModel model = fit_gwr(data, reference, fit_options, &geometry);
            coefficients = model.coefficients;
            fitted = model.fitted;
            residuals = model.residuals;
            effective_params = model.hat_trace;
        } else {
            BoostConfig boost;
            boost.learning_rate = args.learning_rate;
            boost.max_stages = args.max_stages;
            boost.bandwidth_factor = args.bw_factor;
            boost.early_stop = parse_early_stop(args.early_stop);
            boost.likelihood = likelihood;
            const SpatialWeightScheme stage_scheme =
                scale_bandwidth(reference, boost.bandwidth_factor, data.p(), data.n());
            echo["bandwidth"] = stage_scheme.mode == SpatialWeightScheme::Mode::Fixed
                                    ? Json(stage_scheme.bandwidth)
                                    : Json(stage_scheme.neighbors);
            echo["reference_bandwidth"] = reference.mode == SpatialWeightScheme::Mode::Fixed
                                              ? Json(reference.bandwidth)
                                              : Json(reference.neighbors);
            echo["bandwidth_factor"] = boost.bandwidth_factor;
            echo["learning_rate"] = boost.learning_rate;
            echo["max_stages"] = boost.max_stages;
            echo["early_stop"] = args.early_stop;
            boost_model = fit_gwrboost(data, stage_scheme, boost, fit_options, &geometry);
            coefficients = boost_model->coefficients;
            fitted = boost_model->fitted;
            residuals = boost_model->residuals;
            effective_params = boost_model->hat_trace;
            echo["stopped_at"] = boost_model->trace.stopped_at;
        }
    }

    const Diagnostics diagnostics =
        compute_diagnostics(data.response, fitted, effective_params, moran, likelihood);

    Matrix reported = coefficients;
    Vector reported_fitted = fitted, reported_residuals = residuals;
    Dataset report_data = data;
    if (args.original_units) {
        reported = coefficients_to_original_units(coefficients, *standardization);
        const double y_mean = standardization->mean.back();
        const double y_sd = standardization->sd.back();
        reported_fitted = (fitted.array() * y_sd + y_mean).matrix();
        reported_residuals = (residuals.array() * y_sd).matrix();
        report_data = loaded.data;
    }

    std::vector<std::string> outputs = {"coefficients.csv", "diagnostics.json"};
    write_coefficients_csv((out_dir / "coefficients.csv").string(), report_data, reported,
                           reported_fitted, reported_residuals);
    Json diag_doc;
    diag_doc["diagnostics"] = diagnostics_to_json(diagnostics);
    diag_doc["config"] = echo;
    write_json((out_dir / "diagnostics.json").string(), diag_doc);

    if (boost_model) {
        std::ofstream trace_out((out_dir / "trace.csv").string(), std::ios::binary);
        if (!trace_out) throw IoError("cannot open trace.csv for writing");
        trace_out << "stage,rss,r2,aicc,hat_trace\n";
        for (const auto& stage : boost_model->trace.stages) {
            trace_out << stage.stage << ',' << io_detail::format_double(stage.rss) << ','
                      << io_detail::format_double(stage.r2) << ','
                      << (stage.aicc ? io_detail::format_double(*stage.aicc) : "") << ','
                      << io_detail::format_double(stage.hat_trace) << '\n';
        }
        if (!trace_out) throw IoError("failed while writing trace.csv");
        outputs.push_back("trace.csv");
    }

    write_manifest(out_dir, "fit", std::move(echo), {args.input}, outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string out_dir;
    // Data source: either an input CSV with a schema, or a simulated dataset.
    std::string input;
    DatasetSchema schema;
    std::uint64_t seed = 42;
    int reps = 1;  // simulated-source replications of the whole grid
    int extent = 25;
    double noise_sd = 0.25;
    std::string covariates = "uniform";

    std::vector<double> learning_rates = {0.1};
    std::vector<double> bw_factors = {1.2};
    int max_stages = 100;
    std::string kernel = "gaussian";
    std::string bw_search = "aicc";
    std::string likelihood = "profile";
    int threads = 0;
};

// Hyperparameter sweep: boosting runs with early stopping disabled over the
// (learning rate x bandwidth factor) grid, one per-stage score curve per cell,
// emitted as tidy CSV for external plotting.
inline int cmd_sweep(const SweepArgs& args) {
    if (args.learning_rates.empty() || args.bw_factors.empty())
        throw InvalidConfig("sweep grid is empty");
    for (const double lr : args.learning_rates)
        if (!(lr > 0.0) || lr > 1.0) throw InvalidConfig("learning rates must lie in (0, 1]");
    for (const double f : args.bw_factors)
        if (!(f > 0.0)) throw InvalidConfig("bandwidth factors must be positive");
    if (args.max_stages < 1) throw InvalidConfig("--max-stages must be >= 1");
    if (args.reps < 1) throw InvalidConfig("--reps must be >= 1");
    const bool simulated = args.input.empty();
    if (!simulated && args.reps != 1)
        throw InvalidConfig("--reps applies to simulated sweeps only");

    const fs::path out_dir = prepare_out_dir(args.out_dir);
    const int threads = resolve_threads(args.threads);
    const Kernel kernel = parse_kernel(args.kernel);
    const LikelihoodKind likelihood = parse_likelihood(args.likelihood);

    std::ofstream out((out_dir / "sweep.csv").string(), std::ios::binary);
    if (!out) throw IoError("cannot open sweep.csv for writing");
    out << "rep,learning_rate,bandwidth_factor,stage,rss,r2,aicc,hat_trace\n";

    SimulationConfig sim_config;
    sim_config.extent = args.extent;
    sim_config.noise_sd = args.noise_sd;
    sim_config.covariates = parse_covariates(args.covariates);

    for (int rep = 0; rep < args.reps; ++rep) {
        Dataset data;
        if (simulated) {
            data = generate_dataset(Rng::substream(args.seed, static_cast<std::uint64_t>(rep)),
                                    sim_config)
                       .data;
        } else {
            data = zscore(load_csv(args.input, args.schema).data).first;
        }
        const GeometryCache geometry(data.coords);

        SearchOptions search_options;
        search_options.criterion = parse_criterion(args.bw_search);
        search_options.likelihood = likelihood;
        search_options.threads = threads;
        const auto reference =
            search_bandwidth(data, kernel, SpatialWeightScheme::Mode::Fixed, search_options,
                             &geometry);

        FitOptions fit_options;
        fit_options.threads = threads;
        fit_options.assemble_hat = false;

        for (const double lr : args.learning_rates) {
            for (const double factor : args.bw_factors) {
                BoostConfig boost;
                boost.learning_rate = lr;
                boost.max_stages = args.max_stages;
                boost.bandwidth_factor = factor;
                boost.early_stop = BoostConfig::EarlyStop::None;
                boost.likelihood = likelihood;
                const SpatialWeightScheme stage_scheme =
                    scale_bandwidth(reference.scheme, factor, data.p(), data.n());
                const GwrBoostModel model =
                    fit_gwrboost(data, stage_scheme, boost, fit_options, &geometry);
                for (const auto& stage : model.trace.stages) {
                    out << rep << ',' << io_detail::format_double(lr) << ','
                        << io_detail::format_double(factor) << ',' << stage.stage << ','
                        << io_detail::format_double(stage.rss) << ','
                        << io_detail::format_double(stage.r2) << ','
                        << (stage.aicc ? io_detail::format_double(*stage.aicc) : "") << ','
                        << io_detail::format_double(stage.hat_trace) << '\n';
                }
            }
        }
    }
    out.close();

    Json echo;
    echo["source"] = simulated ? "simulated" : args.input;
    echo["seed"] = simulated ? Json(args.seed) : Json(nullptr);
    echo["reps"] = args.reps;
    echo["learning_rates"] = args.learning_rates;
    echo["bandwidth_factors"] = args.bw_factors;
    echo["max_stages"] = args.max_stages;
    echo["kernel"] = args.kernel;
    echo["bw_search"] = args.bw_search;
    echo["likelihood"] = args.likelihood;
    std::vector<std::string> inputs;
    if (!simulated) inputs.push_back(args.input);
    write_manifest(out_dir, "sweep", std::move(echo), inputs, {"sweep.csv"});
    return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    std::vector<std::string> inputs;  // diagnostics.json files
    std::string out_dir;
};

// Merge single-fit diagnostics files into one metrics-by-model table.
inline int cmd_report(const ReportArgs& args) {
    if (args.inputs.empty()) throw InvalidConfig("report needs at least one diagnostics file");
    const fs::path out_dir = prepare_out_dir(args.out_dir);

    static const std::vector<std::pair<std::string, std::string>> kMetrics = {
        {"rss", "RSS"},           {"aic", "AIC"},
        {"aicc", "AICc"},         {"r2", "R2"},
        {"adjusted_r2", "Adjusted R2"}, {"moran_i", "Moran's I"},
        {"effective_params", "Effective parameters"}};

    std::vector<std::string> labels;
    std::vector<Json> docs;
    std::set<std::string> hashes;
    for (const auto& path : args.inputs) {
        Json doc = read_json(path);
        if (!doc.contains("diagnostics") || !doc.contains("config"))
            throw SchemaError("'" + path + "' is not a diagnostics document");
        std::vector<std::string> missing;
        for (const auto& [key, label] : kMetrics) {
            if (!doc["diagnostics"].contains(key)) missing.push_back(key);
        }
        if (!missing.empty()) {
            std::string msg = "'" + path + "' is missing metric keys:";
            for (const auto& k : missing) msg += " " + k;
            throw SchemaError(msg);
        }
        std::string label = doc["config"].value("model", std::string("model"));
        // Disambiguate duplicate model names by suffixing an index.
        std::string unique = label;
        int suffix = 2;
        while (std::find(labels.begin(), labels.end(), unique) != labels.end())
            unique = label + "_" + std::to_string(suffix++);
        labels.push_back(unique);
        if (doc["config"].contains("dataset_hash") && doc["config"]["dataset_hash"].is_string())
            hashes.insert(doc["config"]["dataset_hash"].get<std::string>());
        docs.push_back(std::move(doc));
    }
    if (hashes.size() > 1)
        std::fprintf(stderr,
                     "warning: diagnostics files were produced from %zu different datasets\n",
                     hashes.size());

    const auto cell = [&](const Json& doc, const std::string& key) -> std::string {
        const Json& value = doc["diagnostics"][key];
        if (value.is_null()) return "undefined";
        std::ostringstream os;
        os.precision(6);
        os << value.get<double>();
        return os.str();
    };

    {
        std::ofstream csv((out_dir / "comparison.csv").string(), std::ios::binary);
        if (!csv) throw IoError("cannot open comparison.csv for writing");
        csv << "metric";
        for (const auto& label : labels) csv << ',' << label;
        csv << '\n';
        for (const auto& [key, label] : kMetrics) {
            csv << label;
            for (const auto& doc : docs) csv << ',' << cell(doc, key);
            csv << '\n';
        }
    }
    {
        std::ofstream txt((out_dir / "comparison.txt").string(), std::ios::binary);
        if (!txt) throw IoError("cannot open comparison.txt for writing");
        std::size_t name_width = 0;
        for (const auto& [key, label] : kMetrics) name_width = std::max(name_width, label.size());
        txt << std::string(name_width, ' ');
        for (const auto& label : labels) {
            txt << "  ";
            txt.width(14);
            txt << label;
        }
        txt << '\n';
        for (const auto& [key, label] : kMetrics) {
            txt << label << std::string(name_width - label.size(), ' ');
            for (const auto& doc : docs) {
                txt << "  ";
                txt.width(14);
                txt << cell(doc, key);
            }
            txt << '\n';
        }
    }

    Json echo;
    echo["inputs"] = args.inputs;
    write_manifest(out_dir, "report", std::move(echo), args.inputs,
                   {"comparison.csv", "comparison.txt"});
    return 0;
}

}  // namespace gwrb::cli
