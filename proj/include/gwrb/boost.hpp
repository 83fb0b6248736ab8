#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gwrb/dataset.hpp"
#include "gwrb/errors.hpp"
#include "gwrb/geometry.hpp"
#include "gwrb/gwr.hpp"
#include "gwrb/metrics.hpp"
#include "gwrb/parallel.hpp"
#include "gwrb/wls.hpp"

namespace gwrb {

struct BoostConfig {
    int max_stages = 100;
    double learning_rate = 0.1;     // scales the residual target each stage
    double bandwidth_factor = 1.2;  // applied to the reference bandwidth by the caller
    enum class EarlyStop { Aicc, R2, None } early_stop = EarlyStop::Aicc;
    // Run every stage even after the stopping rule fires, so the full
    // score-vs-stage curve is recorded; the returned model still honors the
    // stopping rule.
    bool record_full_trace = false;
    // Scale the fitted learner instead of the fit target. For a linear base
    // learner the two placements are the same map (the stage solve operator
    // commutes with the scalar), so this changes rounding only.
    bool conventional_shrinkage = false;
    LikelihoodKind likelihood = LikelihoodKind::Profile;

    void validate() const {
        if (max_stages < 1) throw InvalidConfig("max_stages must be >= 1");
        if (!(learning_rate > 0.0) || learning_rate > 1.0)
            throw InvalidConfig("learning_rate must lie in (0, 1]");
        if (!(bandwidth_factor > 0.0)) throw InvalidConfig("bandwidth_factor must be positive");
    }
};

inline std::string to_string(BoostConfig::EarlyStop s) {
    switch (s) {
        case BoostConfig::EarlyStop::Aicc: return "aicc";
        case BoostConfig::EarlyStop::R2: return "r2";
        default: return "none";
    }
}

// Per-stage snapshot of the cumulative model.
struct BoostStageRecord {
    int stage = 0;        // 1-based
    Matrix coefficients;  // cumulative coefficient field
    double rss = 0.0;
    double r2 = 0.0;
    std::optional<double> aicc;
    double hat_trace = 0.0;  // effective parameters of the cumulative smoother
};

struct BoostTrace {
    std::vector<BoostStageRecord> stages;
    int stopped_at = 0;  // stage index of the returned model
    std::vector<std::string> warnings;
};

struct GwrBoostModel {
    Matrix coefficients;  // aggregated across stages; still one linear model per location
    Vector fitted;
    Vector residuals;
    double hat_trace = 0.0;
    BoostTrace trace;
    Matrix stage_hat_matrix;  // the constant single-stage smoother
};

// Elementwise sum of per-stage coefficient fields. The aggregate is itself a
// linear predictor: fitted[i] = sum_m (x_i . beta_i^m) = x_i . field[i].
inline Matrix stage_coefficient_aggregation(const std::vector<Matrix>& stage_fields) {
    if (stage_fields.empty()) throw InvalidInput("no stage fields to aggregate");
    Matrix total = stage_fields.front();
    for (std::size_t m = 1; m < stage_fields.size(); ++m) {
        if (stage_fields[m].rows() != total.rows() || stage_fields[m].cols() != total.cols())
            throw DimensionMismatch("stage coefficient fields have different shapes");
        total += stage_fields[m];
    }
    return total;
}

// Closed-form boosted smoother H * sum_{m=1..M} [lambda (I - H)]^{m-1},
// built by iterating G <- lambda (I - H) G with a running sum. This is the
// smoother of the recursion whose stage-m target is lambda times the
// PREVIOUS TARGET's own residual, y_m = lambda (I - H) y_{m-1}.
inline Matrix boosted_hat_matrix(const Eigen::Ref<const Matrix>& hat, double learning_rate,
                                 int stages) {
    if (hat.rows() != hat.cols()) throw DimensionMismatch("hat matrix must be square");
    if (stages < 1) throw InvalidConfig("stage count must be >= 1");
    if (stages == 1) return hat;
    const Eigen::Index n = hat.rows();
    const Matrix step = learning_rate * (Matrix::Identity(n, n) - hat);
    Matrix power = Matrix::Identity(n, n);
    Matrix sum = Matrix::Identity(n, n);
    for (int m = 2; m <= stages; ++m) {
        power = step * power;
        sum += power;
    }
    return hat * sum;
}

// Exact smoother of the fitting loop below, whose stage-m target is lambda
// times the CUMULATIVE residual y - F^{m-1}: S_M = I - (I - lambda H)^{M-1} (I - H).
// The closed form above coincides with this one only for lambda = 1 or
// M <= 2; the discrepancy between the two derivations is intrinsic to the
// method's published description, so both operators are provided. AIC and
// AICc for boosted fits use this one, since it is the operator that actually
// maps y to the fitted values.
inline Matrix cumulative_residual_hat_matrix(const Eigen::Ref<const Matrix>& hat,
                                             double learning_rate, int stages) {
    if (hat.rows() != hat.cols()) throw DimensionMismatch("hat matrix must be square");
    if (stages < 1) throw InvalidConfig("stage count must be >= 1");
    if (stages == 1) return hat;
    const Eigen::Index n = hat.rows();
    const Matrix damp = Matrix::Identity(n, n) - learning_rate * hat;
    Matrix residual_factor = Matrix::Identity(n, n) - hat;
    for (int m = 2; m <= stages; ++m) residual_factor = damp * residual_factor;
    return Matrix::Identity(n, n) - residual_factor;
}

enum class StopDecision { Continue, StopAtPrevious };

// Patience-1 stopping rule on the stage records: a single worsening step of
// the criterion ends the run and the previous stage's snapshot is returned.
// An undefined AICc (overparameterized stage) counts as worsening.
inline StopDecision early_stop_check(const std::vector<BoostStageRecord>& stages,
                                     BoostConfig::EarlyStop criterion) {
    if (stages.empty()) throw InvalidInput("early_stop_check needs at least one completed stage");
    if (criterion == BoostConfig::EarlyStop::None || stages.size() < 2) return StopDecision::Continue;
    const auto& prev = stages[stages.size() - 2];
    const auto& curr = stages.back();
    if (criterion == BoostConfig::EarlyStop::Aicc) {
        const double inf = std::numeric_limits<double>::infinity();
        const double prev_score = prev.aicc.value_or(inf);
        const double curr_score = curr.aicc.value_or(inf);
        return curr_score > prev_score ? StopDecision::StopAtPrevious : StopDecision::Continue;
    }
    return curr.r2 < prev.r2 ? StopDecision::StopAtPrevious : StopDecision::Continue;
}

// Rescale a reference bandwidth. Fixed bandwidths scale directly; adaptive
// neighbor counts round and clamp to the solvable range [p+2, N-1].
inline SpatialWeightScheme scale_bandwidth(const SpatialWeightScheme& scheme, double factor,
                                           Eigen::Index p, Eigen::Index n) {
    if (!(factor > 0.0)) throw InvalidConfig("bandwidth factor must be positive");
    SpatialWeightScheme scaled = scheme;
    if (scheme.mode == SpatialWeightScheme::Mode::Fixed) {
        scaled.bandwidth = scheme.bandwidth * factor;
    } else {
        const long k = std::lround(static_cast<double>(scheme.neighbors) * factor);
        scaled.neighbors = static_cast<int>(
            std::clamp<long>(k, static_cast<long>(p) + 2, static_cast<long>(n) - 1));
    }
    scaled.validate();
    return scaled;
}

// Stage-wise boosting of local linear fits. Stage 1 is a plain geographically
// weighted fit of y; every later stage fits the scaled cumulative residual
// with the same weights and adds its coefficient field into the running
// total. The weights, and therefore the single-stage smoother H and the
// per-location solve operators, are constant across stages.
inline GwrBoostModel fit_gwrboost(const Dataset& data, const SpatialWeightScheme& scheme,
                                  const BoostConfig& config, const FitOptions& options = {},
                                  const GeometryCache* shared = nullptr) {
    data.validate();
    config.validate();
    detail::check_scheme_for(data, scheme);
    std::optional<GeometryCache> local;
    if (!shared) local.emplace(data.coords);
    const GeometryCache& geometry = shared ? *shared : *local;

    const Eigen::Index n = data.n();
    const Eigen::Index q = data.design.cols();
    const double lambda = config.learning_rate;

    std::vector<LocalOperator> ops;
    try {
        ops = build_local_operators(data.design, geometry, scheme, options.wls, options.threads);
    } catch (const SingularSystem& e) {
        throw SingularSystem(std::string(e.what()) + " (boosting stage 1)", e.location, e.condition, 1);
    }
    Matrix hat = hat_matrix_from_operators(ops, n);

    const double mean_y = data.response.mean();
    const double tss = (data.response.array() - mean_y).square().sum();
    if (!(tss > 0.0)) throw UndefinedVariance("response has zero variance");

    GwrBoostModel model;
    model.stage_hat_matrix = hat;

    // Effective parameters track the exact cumulative smoother: its residual
    // factor obeys R_1 = I - H, R_m = (I - lambda H) R_{m-1}, and
    // tr(S_m) = n - tr(R_m).
    const Matrix damp = Matrix::Identity(n, n) - lambda * hat;
    Matrix residual_factor = Matrix::Identity(n, n) - hat;

    Matrix cumulative = Matrix::Zero(n, q);
    Vector fitted(n);
    Vector target(n);

    auto& stages = model.trace.stages;
    stages.reserve(static_cast<std::size_t>(config.max_stages));
    int stopped_at = 0;

    for (int m = 1; m <= config.max_stages; ++m) {
        if (m == 1) {
            target = data.response;
        } else {
            target = data.response - fitted;
            if (!config.conventional_shrinkage) target *= lambda;
            residual_factor = damp * residual_factor;
        }
        parallel_for(n, options.threads, [&](long i) {
            Vector beta_inc = ops[static_cast<std::size_t>(i)].apply(target);
            if (m > 1 && config.conventional_shrinkage) beta_inc *= lambda;
            cumulative.row(i) += beta_inc.transpose();
            fitted[i] = data.design.row(i).dot(cumulative.row(i));
        });

        BoostStageRecord record;
        record.stage = m;
        record.coefficients = cumulative;
        record.rss = (data.response - fitted).squaredNorm();
        record.r2 = 1.0 - record.rss / tss;
        record.hat_trace = static_cast<double>(n) - residual_factor.trace();
        const LogLikelihood ll = gaussian_log_likelihood(record.rss, n, config.likelihood);
        if (!ll.degenerate) record.aicc = aic_aicc(ll.value, record.hat_trace, n).aicc;
        if (m > 1 && record.hat_trace < stages.back().hat_trace - 1e-9)
            model.trace.warnings.push_back("effective parameters decreased at stage " +
                                           std::to_string(m));
        stages.push_back(std::move(record));

        if (stopped_at == 0 && config.early_stop != BoostConfig::EarlyStop::None &&
            early_stop_check(stages, config.early_stop) == StopDecision::StopAtPrevious) {
            stopped_at = m - 1;
            if (!config.record_full_trace) break;
        }
    }
    if (stopped_at == 0) stopped_at = static_cast<int>(stages.size());
    model.trace.stopped_at = stopped_at;

    const BoostStageRecord& final_record = stages[static_cast<std::size_t>(stopped_at - 1)];
    model.coefficients = final_record.coefficients;
    model.fitted.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        model.fitted[i] = data.design.row(i).dot(model.coefficients.row(i));
    model.residuals = data.response - model.fitted;
    model.hat_trace = final_record.hat_trace;
    return model;
}

// Search a reference bandwidth, enlarge it by the configured factor, and fit.
struct BoostFitResult {
    GwrBoostModel model;
    SpatialWeightScheme reference_scheme;  // criterion-optimal for plain GWR
    SpatialWeightScheme stage_scheme;      // reference scaled by bandwidth_factor
    BandwidthSearchResult search;
};

inline BoostFitResult fit_gwrboost_searched(const Dataset& data, Kernel kernel,
                                            SpatialWeightScheme::Mode mode,
                                            const BoostConfig& config,
                                            const SearchOptions& search_options = {},
                                            const FitOptions& fit_options = {},
                                            const GeometryCache* shared = nullptr) {
    BoostFitResult out;
    out.search = search_bandwidth(data, kernel, mode, search_options, shared);
    out.reference_scheme = out.search.scheme;
    out.stage_scheme = scale_bandwidth(out.reference_scheme, config.bandwidth_factor, data.p(), data.n());
    out.model = fit_gwrboost(data, out.stage_scheme, config, fit_options, shared);
    return out;
}

}  // namespace gwrb
