#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gwrb/dataset.hpp"
#include "gwrb/errors.hpp"
#include "gwrb/geometry.hpp"
#include "gwrb/metrics.hpp"
#include "gwrb/parallel.hpp"
#include "gwrb/wls.hpp"

namespace gwrb {

// One local linear fit per observation. Fitted values come from the local
// coefficients (fitted[i] = x_i . beta_i), so the coefficient field and the
// fitted vector are consistent by construction; the hat matrix reproduces
// them through hat_row . y up to rounding.
struct GwrModel {
    Matrix coefficients;  // N x (p+1), intercept first
    Vector fitted;
    Vector residuals;
    double hat_trace = 0.0;
    Matrix hat_matrix;  // empty unless assembled
    bool hat_assembled = false;
};

struct FitOptions {
    int threads = 1;
    WlsOptions wls;
    bool assemble_hat = true;
};

namespace detail {

inline void check_scheme_for(const Dataset& data, const SpatialWeightScheme& scheme) {
    scheme.validate();
    if (scheme.mode == SpatialWeightScheme::Mode::Adaptive) {
        if (scheme.neighbors < data.p() + 2)
            throw InvalidBandwidth("adaptive neighbor count must be at least p+2 = " +
                                   std::to_string(data.p() + 2));
        if (scheme.neighbors > data.n() - 1)
            throw InvalidBandwidth("adaptive neighbor count exceeds N-1");
    }
}

inline double self_hat_entry(const LocalOperator& op, Eigen::Index i) {
    for (Eigen::Index r = 0; r < op.active.size(); ++r)
        if (op.active[r] == static_cast<int>(i)) return op.hat_active[r];
    return 0.0;
}

}  // namespace detail

inline GwrModel fit_gwr(const Dataset& data, const SpatialWeightScheme& scheme,
                        const FitOptions& options = {}, const GeometryCache* shared = nullptr) {
    data.validate();
    detail::check_scheme_for(data, scheme);
    std::optional<GeometryCache> local;
    if (!shared) local.emplace(data.coords);
    const GeometryCache& geometry = shared ? *shared : *local;

    const Eigen::Index n = data.n();
    const auto ops = build_local_operators(data.design, geometry, scheme, options.wls, options.threads);

    GwrModel model;
    model.coefficients.resize(n, data.design.cols());
    model.fitted.resize(n);
    Vector diag(n);
    parallel_for(n, options.threads, [&](long i) {
        const Vector beta = ops[static_cast<std::size_t>(i)].apply(data.response);
        model.coefficients.row(i) = beta.transpose();
        model.fitted[i] = data.design.row(i).dot(beta);
        diag[i] = detail::self_hat_entry(ops[static_cast<std::size_t>(i)], i);
    });
    model.residuals = data.response - model.fitted;
    model.hat_trace = diag.sum();
    if (options.assemble_hat) {
        model.hat_matrix = hat_matrix_from_operators(ops, n);
        model.hat_assembled = true;
    }
    return model;
}

// Ordinary least squares as the degenerate all-weights-one case. The hat
// trace is exactly p+1 and the hat matrix is the orthogonal projector onto
// the design's column space.
inline GwrModel fit_ols(const Dataset& data, const FitOptions& options = {}) {
    data.validate();
    const Eigen::Index n = data.n();
    const Eigen::Index q = data.design.cols();
    Eigen::ColPivHouseholderQR<Matrix> qr(data.design);
    if (qr.rank() < q)
        throw SingularSystem("design matrix is rank deficient", -1,
                             std::numeric_limits<double>::infinity());
    const Vector beta = qr.solve(data.response);

    GwrModel model;
    model.coefficients = beta.transpose().replicate(n, 1);
    model.fitted = data.design * beta;
    model.residuals = data.response - model.fitted;
    model.hat_trace = static_cast<double>(q);
    if (options.assemble_hat) {
        Matrix thin_q = qr.householderQ() * Matrix::Identity(n, q);
        model.hat_matrix = thin_q * thin_q.transpose();
        model.hat_assembled = true;
    }
    return model;
}

enum class SearchCriterion { Aicc, Loocv };

inline std::string to_string(SearchCriterion c) {
    return c == SearchCriterion::Aicc ? "aicc" : "loocv";
}

struct SearchOptions {
    SearchCriterion criterion = SearchCriterion::Aicc;
    LikelihoodKind likelihood = LikelihoodKind::Profile;
    WlsOptions wls;
    int threads = 1;
    // Golden-section stopping width as a fraction of the (log) search range.
    double tolerance_fraction = 1e-2;
};

struct BandwidthSearchResult {
    SpatialWeightScheme scheme;
    double score = 0.0;
    std::vector<std::pair<double, double>> evaluations;  // (bandwidth or k, score)
};

namespace detail {

// Criterion value for one candidate scheme; +inf marks an unsolvable or
// overparameterized candidate so the search steers away from it.
inline double evaluate_scheme(const Dataset& data, const GeometryCache& geometry,
                              const SpatialWeightScheme& scheme, const SearchOptions& options) {
    const Eigen::Index n = data.n();
    Vector fitted(n), diag(n);
    try {
        if (options.criterion == SearchCriterion::Aicc) {
            parallel_for(n, options.threads, [&](long i) {
                const LocalOperator op =
                    wls_local_operator(data.design, geometry.weights(i, scheme), i, options.wls);
                fitted[i] = data.design.row(i).dot(op.apply(data.response));
                diag[i] = self_hat_entry(op, i);
            });
            const double residual_ss = rss(data.response, fitted);
            const LogLikelihood ll = gaussian_log_likelihood(residual_ss, n, options.likelihood);
            if (ll.degenerate) return -std::numeric_limits<double>::infinity();
            const AicPair pair = aic_aicc(ll.value, diag.sum(), n);
            return pair.aicc ? *pair.aicc : std::numeric_limits<double>::infinity();
        }
        // Leave-one-out: refit every location with its own weight forced to 0.
        parallel_for(n, options.threads, [&](long i) {
            Vector w = geometry.weights(i, scheme);
            w[i] = 0.0;
            const LocalOperator op = wls_local_operator(data.design, w, i, options.wls);
            fitted[i] = data.design.row(i).dot(op.apply(data.response));
        });
        return (data.response - fitted).squaredNorm();
    } catch (const SingularSystem&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace detail

// Bandwidth search: golden-section over a log-spaced fixed-bandwidth interval
// bracketed by solvability below and the dataset diameter above, or a
// golden/exhaustive scan over the integer neighbor counts [p+2, N-1].
// Ties break toward the larger (smoother) bandwidth.
inline BandwidthSearchResult search_bandwidth(const Dataset& data, Kernel kernel,
                                              SpatialWeightScheme::Mode mode,
                                              const SearchOptions& options = {},
                                              const GeometryCache* shared = nullptr) {
    data.validate();
    std::optional<GeometryCache> local;
    if (!shared) local.emplace(data.coords);
    const GeometryCache& geometry = shared ? *shared : *local;

    BandwidthSearchResult result;
    const auto better = [](double score, double value, double best_score, double best_value) {
        if (score < best_score) return true;
        return score == best_score && value > best_value;
    };

    if (mode == SpatialWeightScheme::Mode::Fixed) {
        const double h_min = geometry.min_solvable_bandwidth(static_cast<int>(data.p()) + 2);
        const double h_max = geometry.max_distance();
        if (!(h_max > h_min))
            throw SearchFailure("fixed-bandwidth search interval is empty");
        const double lo = std::log(h_min), hi = std::log(h_max);
        const double tol = options.tolerance_fraction * (hi - lo);
        const double inv_phi = 0.6180339887498949;

        const auto eval_log = [&](double t) {
            const double h = std::exp(t);
            const double score =
                detail::evaluate_scheme(data, geometry, SpatialWeightScheme::fixed(kernel, h), options);
            result.evaluations.emplace_back(h, score);
            return score;
        };

        eval_log(lo);
        eval_log(hi);
        double a = lo, b = hi;
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        double fc = eval_log(c);
        double fd = eval_log(d);
        while (b - a > tol) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval_log(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval_log(d);
            }
        }
        double best_value = 0.0, best_score = std::numeric_limits<double>::infinity();
        bool found = false;
        for (const auto& [h, score] : result.evaluations) {
            if (std::isfinite(score) && (!found || better(score, h, best_score, best_value))) {
                best_value = h;
                best_score = score;
                found = true;
            }
        }
        if (!found) throw SearchFailure("no solvable fixed bandwidth in the search interval");
        result.scheme = SpatialWeightScheme::fixed(kernel, best_value);
        result.score = best_score;
        return result;
    }

    const int k_lo = static_cast<int>(data.p()) + 2;
    const int k_hi = static_cast<int>(data.n()) - 1;
    if (k_lo > k_hi) throw SearchFailure("adaptive search needs N-1 >= p+2");
    std::map<int, double> memo;
    const auto eval_k = [&](int k) {
        auto it = memo.find(k);
        if (it != memo.end()) return it->second;
        const double score =
            detail::evaluate_scheme(data, geometry, SpatialWeightScheme::adaptive(kernel, k), options);
        memo.emplace(k, score);
        result.evaluations.emplace_back(static_cast<double>(k), score);
        return score;
    };

    int a = k_lo, b = k_hi;
    if (b - a > 64) {
        // Golden-section on the integers until the bracket is small, then scan.
        const double inv_phi = 0.6180339887498949;
        while (b - a > 8) {
            const int c = b - static_cast<int>(std::round(inv_phi * (b - a)));
            const int d = a + static_cast<int>(std::round(inv_phi * (b - a)));
            if (eval_k(c) < eval_k(d)) b = d; else a = c;
        }
    }
    for (int k = a; k <= b; ++k) eval_k(k);

    int best_k = 0;
    double best_score = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& [k, score] : memo) {
        if (std::isfinite(score) &&
            (!found || better(score, k, best_score, best_k))) {
            best_k = k;
            best_score = score;
            found = true;
        }
    }
    if (!found) throw SearchFailure("no solvable adaptive bandwidth in [p+2, N-1]");
    result.scheme = SpatialWeightScheme::adaptive(kernel, best_k);
    result.score = best_score;
    return result;
}

}  // namespace gwrb
