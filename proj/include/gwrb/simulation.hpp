#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gwrb/boost.hpp"
#include "gwrb/dataset.hpp"
#include "gwrb/errors.hpp"
#include "gwrb/geometry.hpp"
#include "gwrb/gwr.hpp"
#include "gwrb/metrics.hpp"
#include "gwrb/parallel.hpp"
#include "gwrb/rng.hpp"

namespace gwrb {

// The four coefficient surfaces of the synthetic experiment, ordered by
// spatial heterogeneity. Formulas are anchored to the 25-unit scale; other
// extents sample the same analytic surfaces on a different lattice.
enum class Surface { Stationary, Low, Medium, High };

inline double surface_value(Surface kind, double u, double v) {
    switch (kind) {
        case Surface::Stationary:
            return 2.0;
        case Surface::Low:
            return 0.125 * (u + v) - 2.0;
        case Surface::Medium:
            return 3.0 * std::cos(kPi * std::exp(u / 25.0)) * std::sin(kPi * std::exp(v / 25.0)) + 1.0;
        case Surface::High: {
            const double a = 36.0 - (6.0 - u / 2.0) * (6.0 - u / 2.0);
            const double b = 36.0 - (6.0 - v / 2.0) * (6.0 - v / 2.0);
            return a * b / 216.0 - 2.0;
        }
    }
    return 0.0;
}

enum class CovariateDistribution { StandardNormal, Uniform01 };

inline std::string to_string(CovariateDistribution d) {
    return d == CovariateDistribution::StandardNormal ? "normal" : "uniform";
}

struct SimulationConfig {
    int extent = 25;          // grid side; cells at integer (u, v) in [1, extent]
    double noise_sd = 0.25;
    CovariateDistribution covariates = CovariateDistribution::Uniform01;

    void validate() const {
        if (extent < 2) throw InvalidConfig("grid extent must be at least 2");
        if (noise_sd < 0.0) throw InvalidConfig("noise standard deviation must be nonnegative");
    }
};

struct SimulatedDataset {
    Dataset data;
    Matrix true_coefficients;  // N x 4: stationary, low, medium, high
    Vector noise;
    std::uint64_t seed = 0;
};

// Deterministic synthetic dataset: three covariates, a response assembled
// from the four coefficient surfaces, Gaussian noise. Grid rows are laid out
// v-major (u varies fastest); covariate columns are drawn one after another,
// then the noise column.
inline SimulatedDataset generate_dataset(std::uint64_t seed, const SimulationConfig& config = {}) {
    config.validate();
    const int extent = config.extent;
    const Eigen::Index n = static_cast<Eigen::Index>(extent) * extent;

    SimulatedDataset out;
    out.seed = seed;
    out.data.coords.resize(n, 2);
    out.true_coefficients.resize(n, 4);
    Eigen::Index row = 0;
    for (int v = 1; v <= extent; ++v) {
        for (int u = 1; u <= extent; ++u, ++row) {
            out.data.coords(row, 0) = u;
            out.data.coords(row, 1) = v;
            out.true_coefficients(row, 0) = surface_value(Surface::Stationary, u, v);
            out.true_coefficients(row, 1) = surface_value(Surface::Low, u, v);
            out.true_coefficients(row, 2) = surface_value(Surface::Medium, u, v);
            out.true_coefficients(row, 3) = surface_value(Surface::High, u, v);
        }
    }

    Rng rng(seed);
    Matrix covariates(n, 3);
    for (Eigen::Index j = 0; j < 3; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            covariates(i, j) = config.covariates == CovariateDistribution::StandardNormal
                                   ? rng.normal()
                                   : rng.uniform01();
        }
    }
    out.noise.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) out.noise[i] = rng.normal(0.0, config.noise_sd);

    out.data.design = make_design(covariates);
    out.data.response =
        (out.true_coefficients.array() * out.data.design.array()).rowwise().sum().matrix() + out.noise;
    out.data.names = {"x1", "x2", "x3"};
    out.data.validate();
    return out;
}

// Slim per-stage curve kept when full boosting traces are requested; the
// heavyweight coefficient snapshots are dropped.
struct StageScore {
    int stage = 0;
    double rss = 0.0;
    double r2 = 0.0;
    std::optional<double> aicc;
    double hat_trace = 0.0;
};

struct ModelRunRecord {
    std::string model;  // "ols" | "gwr" | "gwrboost"
    Diagnostics diagnostics;
    std::vector<double> coef_rmse;  // per coefficient, intercept first
    double coef_rmse_mean = 0.0;
    double bandwidth = 0.0;  // fixed distance or neighbor count; 0 for ols
    int stopped_at = 0;      // boosting stage returned; 0 otherwise
    std::vector<StageScore> curve;  // gwrboost only, when full traces requested
};

struct ReplicationRecord {
    int rep = 0;
    std::uint64_t seed = 0;
    std::vector<ModelRunRecord> models;
};

struct ModelSelection {
    bool ols = true;
    bool gwr = true;
    bool gwrboost = true;
};

struct ReplicationConfig {
    int reps = 100;
    std::uint64_t base_seed = 42;
    SimulationConfig sim;
    ModelSelection models;
    Kernel kernel = Kernel::Gaussian;
    SpatialWeightScheme::Mode bandwidth_mode = SpatialWeightScheme::Mode::Fixed;
    SearchCriterion criterion = SearchCriterion::Aicc;
    BoostConfig boost;
    LikelihoodKind likelihood = LikelihoodKind::Profile;
    int threads = 0;
    bool full_boost_trace = false;

    void validate() const {
        if (reps < 1) throw InvalidConfig("replication count must be >= 1");
        sim.validate();
        boost.validate();
    }
};

struct AggregateStat {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation over replications
};

struct ReplicationReport {
    std::vector<ReplicationRecord> records;
    // model -> metric -> (mean, sd) over replications
    std::map<std::string, std::map<std::string, AggregateStat>> aggregates;
    std::string rng_identity;
    ReplicationConfig config;
};

namespace detail {

inline std::vector<double> rmse_per_coefficient(const Matrix& truth, const Matrix& estimate) {
    std::vector<double> out(static_cast<std::size_t>(truth.cols()));
    for (Eigen::Index j = 0; j < truth.cols(); ++j)
        out[static_cast<std::size_t>(j)] = coefficient_rmse(truth, estimate, j);
    return out;
}

inline ModelRunRecord summarize_model(std::string name, const Vector& y, const Vector& fitted,
                                      double k, const Matrix& truth, const Matrix& estimate,
                                      const MoranWeights& moran, LikelihoodKind kind) {
    ModelRunRecord rec;
    rec.model = std::move(name);
    rec.diagnostics = compute_diagnostics(y, fitted, k, moran, kind);
    rec.coef_rmse = rmse_per_coefficient(truth, estimate);
    double sum = 0.0;
    for (const double r : rec.coef_rmse) sum += r;
    rec.coef_rmse_mean = sum / static_cast<double>(rec.coef_rmse.size());
    return rec;
}

inline std::map<std::string, double> metric_map(const ModelRunRecord& rec) {
    std::map<std::string, double> m;
    const auto& d = rec.diagnostics;
    m["rss"] = d.rss;
    m["r2"] = d.r2;
    m["adjusted_r2"] = d.adjusted_r2.value_or(std::numeric_limits<double>::quiet_NaN());
    m["aic"] = d.aic;
    m["aicc"] = d.aicc.value_or(std::numeric_limits<double>::quiet_NaN());
    m["moran_i"] = d.moran_i;
    m["effective_params"] = d.effective_params;
    m["log_likelihood"] = d.log_likelihood;
    for (std::size_t j = 0; j < rec.coef_rmse.size(); ++j)
        m["rmse_beta" + std::to_string(j)] = rec.coef_rmse[j];
    m["rmse_mean"] = rec.coef_rmse_mean;
    if (rec.model != "ols") m["bandwidth"] = rec.bandwidth;
    if (rec.model == "gwrboost") m["stopped_at"] = rec.stopped_at;
    return m;
}

}  // namespace detail

// The replication study: generate `reps` independent datasets, fit the
// requested models (GWR at its per-replication criterion-optimal bandwidth,
// boosting at that bandwidth scaled by the configured factor), and aggregate
// every metric as mean and standard deviation over replications. A failed
// replication aborts the whole report.
inline ReplicationReport run_replications(const ReplicationConfig& config) {
    config.validate();
    ReplicationReport report;
    report.config = config;
    report.rng_identity = std::string(Rng::identity());
    report.records.resize(static_cast<std::size_t>(config.reps));

    // The grid, its geometry, and the Moran weights are identical across
    // replications; build them once and share read-only.
    const SimulatedDataset probe = generate_dataset(Rng::substream(config.base_seed, 0), config.sim);
    const GeometryCache geometry(probe.data.coords);
    geometry.sorted_rows();
    const MoranWeights moran = rook_contiguity_weights(probe.data.coords);

    const int outer_threads = resolve_threads(config.threads);
    parallel_for(config.reps, outer_threads, [&](long rep) {
        try {
            const std::uint64_t seed = Rng::substream(config.base_seed, static_cast<std::uint64_t>(rep));
            const SimulatedDataset sim =
                rep == 0 ? probe : generate_dataset(seed, config.sim);
            const Dataset& data = sim.data;
            ReplicationRecord record;
            record.rep = static_cast<int>(rep);
            record.seed = seed;

            FitOptions fit_options;
            fit_options.threads = 1;
            fit_options.assemble_hat = false;
            SearchOptions search_options;
            search_options.criterion = config.criterion;
            search_options.likelihood = config.likelihood;
            search_options.threads = 1;

            if (config.models.ols) {
                const GwrModel ols = fit_ols(data, fit_options);
                record.models.push_back(detail::summarize_model(
                    "ols", data.response, ols.fitted, ols.hat_trace, sim.true_coefficients,
                    ols.coefficients, moran, config.likelihood));
            }

            std::optional<BandwidthSearchResult> search;
            if (config.models.gwr || config.models.gwrboost)
                search = search_bandwidth(data, config.kernel, config.bandwidth_mode, search_options,
                                          &geometry);

            if (config.models.gwr) {
                const GwrModel gwr = fit_gwr(data, search->scheme, fit_options, &geometry);
                auto rec = detail::summarize_model("gwr", data.response, gwr.fitted, gwr.hat_trace,
                                                   sim.true_coefficients, gwr.coefficients, moran,
                                                   config.likelihood);
                rec.bandwidth = search->scheme.mode == SpatialWeightScheme::Mode::Fixed
                                    ? search->scheme.bandwidth
                                    : search->scheme.neighbors;
                record.models.push_back(std::move(rec));
            }

            if (config.models.gwrboost) {
                BoostConfig boost = config.boost;
                boost.likelihood = config.likelihood;
                boost.record_full_trace = config.full_boost_trace;
                const SpatialWeightScheme stage_scheme =
                    scale_bandwidth(search->scheme, boost.bandwidth_factor, data.p(), data.n());
                const GwrBoostModel model =
                    fit_gwrboost(data, stage_scheme, boost, fit_options, &geometry);
                auto rec = detail::summarize_model("gwrboost", data.response, model.fitted,
                                                   model.hat_trace, sim.true_coefficients,
                                                   model.coefficients, moran, config.likelihood);
                rec.bandwidth = stage_scheme.mode == SpatialWeightScheme::Mode::Fixed
                                    ? stage_scheme.bandwidth
                                    : stage_scheme.neighbors;
                rec.stopped_at = model.trace.stopped_at;
                if (config.full_boost_trace) {
                    rec.curve.reserve(model.trace.stages.size());
                    for (const auto& s : model.trace.stages)
                        rec.curve.push_back({s.stage, s.rss, s.r2, s.aicc, s.hat_trace});
                }
                record.models.push_back(std::move(rec));
            }

            report.records[static_cast<std::size_t>(rep)] = std::move(record);
        } catch (const SingularSystem& e) {
            throw SingularSystem("replication " + std::to_string(rep) + ": " + e.what(), e.location,
                                 e.condition, e.stage);
        } catch (const Error& e) {
            throw Error("replication " + std::to_string(rep) + ": " + e.what());
        }
    });

    // Deterministic ordered reduction by replication index.
    std::map<std::string, std::map<std::string, std::vector<double>>> samples;
    for (const auto& record : report.records) {
        for (const auto& model : record.models) {
            for (const auto& [metric, value] : detail::metric_map(model))
                samples[model.model][metric].push_back(value);
        }
    }
    for (const auto& [model, metrics] : samples) {
        for (const auto& [metric, values] : metrics) {
            AggregateStat stat;
            const double dn = static_cast<double>(values.size());
            for (const double v : values) stat.mean += v;
            stat.mean /= dn;
            if (values.size() > 1) {
                double ss = 0.0;
                for (const double v : values) ss += (v - stat.mean) * (v - stat.mean);
                stat.sd = std::sqrt(ss / (dn - 1.0));
            }
            report.aggregates[model][metric] = stat;
        }
    }
    return report;
}

}  // namespace gwrb
