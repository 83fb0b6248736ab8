#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gwrb/dataset.hpp"
#include "gwrb/errors.hpp"
#include "gwrb/rng.hpp"

namespace gwrb {

// Two Gaussian likelihood conventions. InverseVariance parameterizes the
// density by the inverse variance sigma multiplying the residual sum directly
// and maximizes over sigma (sigma_hat = n / (2 rss)); Profile is the usual
// profile likelihood at sigma2_hat = rss / n. The two differ by the constant
// n*ln(2)/2, so model comparisons at fixed n are identical under either.
enum class LikelihoodKind { InverseVariance, Profile };

inline constexpr double kPi = 3.14159265358979323846;

inline std::string to_string(LikelihoodKind k) {
    return k == LikelihoodKind::InverseVariance ? "inverse-variance" : "profile";
}

template <typename DerivedA, typename DerivedB>
double rss(const Eigen::MatrixBase<DerivedA>& y, const Eigen::MatrixBase<DerivedB>& fitted) {
    if (y.size() != fitted.size()) throw DimensionMismatch("rss: vector lengths differ");
    return (y - fitted).squaredNorm();
}

struct RSquared {
    double r2 = 0.0;
    std::optional<double> adjusted;  // absent when n <= k+1 (overparameterized)
};

template <typename DerivedA, typename DerivedB>
RSquared r2_and_adjusted(const Eigen::MatrixBase<DerivedA>& y,
                         const Eigen::MatrixBase<DerivedB>& fitted, double k, Eigen::Index n) {
    if (y.size() != fitted.size()) throw DimensionMismatch("r2: vector lengths differ");
    const double mean = y.mean();
    const double tss = (y.array() - mean).square().sum();
    if (!(tss > 0.0)) throw UndefinedVariance("r2: response has zero total variance");
    RSquared out;
    const double residual = rss(y, fitted);
    out.r2 = 1.0 - residual / tss;
    const double dn = static_cast<double>(n);
    if (dn > k + 1.0) out.adjusted = 1.0 - (dn - 1.0) * (1.0 - out.r2) / (dn - k - 1.0);
    return out;
}

struct LogLikelihood {
    double value = 0.0;
    bool degenerate = false;  // rss == 0: +inf sentinel
};

inline LogLikelihood gaussian_log_likelihood(double residual_ss, Eigen::Index n,
                                             LikelihoodKind kind = LikelihoodKind::InverseVariance) {
    if (n < 1) throw InvalidInput("log likelihood needs n >= 1");
    if (residual_ss < 0.0) throw InvalidInput("negative residual sum of squares");
    if (residual_ss == 0.0) return {std::numeric_limits<double>::infinity(), true};
    const double dn = static_cast<double>(n);
    if (kind == LikelihoodKind::InverseVariance) {
        // l(sigma) = (n/2) ln sigma - (n/2) ln(2 pi) - sigma * rss,
        // maximized at sigma_hat = n / (2 rss).
        const double sigma_hat = dn / (2.0 * residual_ss);
        return {0.5 * dn * std::log(sigma_hat) - 0.5 * dn * std::log(2.0 * kPi) - 0.5 * dn, false};
    }
    return {-0.5 * dn * std::log(2.0 * kPi * residual_ss / dn) - 0.5 * dn, false};
}

struct AicPair {
    double aic = 0.0;
    std::optional<double> aicc;  // absent when n <= k+1
};

// k is the effective parameter count: tr(H) for a linear smoother, the trace
// of the boosted smoother for staged fits.
inline AicPair aic_aicc(double log_likelihood, double k, Eigen::Index n) {
    AicPair out;
    out.aic = -2.0 * log_likelihood + 2.0 * k;
    const double dn = static_cast<double>(n);
    if (dn > k + 1.0) out.aicc = out.aic + 2.0 * k * (k + 1.0) / (dn - k - 1.0);
    return out;
}

// Nonnegative spatial weights with a zero diagonal; optionally row-standardized.
struct MoranWeights {
    Eigen::SparseMatrix<double> w;
    bool row_standardized = false;

    void validate() const {
        if (w.rows() != w.cols()) throw DimensionMismatch("Moran weights must be square");
        for (int k = 0; k < w.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(w, k); it; ++it) {
                if (it.row() == it.col() && it.value() != 0.0)
                    throw InvalidInput("Moran weights must have a zero diagonal");
                if (it.value() < 0.0) throw InvalidInput("Moran weights must be nonnegative");
            }
        }
    }
};

inline double morans_i(const Eigen::Ref<const Vector>& values, const MoranWeights& weights) {
    const Eigen::Index n = values.size();
    if (n < 2) throw InvalidInput("Moran's I needs at least two observations");
    if (weights.w.rows() != n) throw DimensionMismatch("Moran weights size != value count");
    const double mean = values.mean();
    const Vector centered = values.array() - mean;
    const double variance_sum = centered.squaredNorm();
    if (!(variance_sum > 0.0)) throw UndefinedVariance("Moran's I undefined for constant values");
    const double total_weight = weights.w.sum();
    if (!(total_weight > 0.0)) throw InvalidInput("Moran weights sum to zero");
    const double cross = centered.dot(weights.w * centered);
    return static_cast<double>(n) * cross / (total_weight * variance_sum);
}

// Standard deviation of Moran's I under random permutation of the values.
inline double morans_i_permutation_sd(const Eigen::Ref<const Vector>& values,
                                      const MoranWeights& weights, int permutations, Rng& rng) {
    if (permutations < 2) throw InvalidInput("need at least two permutations");
    const Eigen::Index n = values.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Vector shuffled(n);
    double sum = 0.0, sum_sq = 0.0;
    for (int p = 0; p < permutations; ++p) {
        // Fisher-Yates with the library RNG for reproducibility.
        for (Eigen::Index i = n - 1; i > 0; --i) {
            const auto j = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        for (Eigen::Index i = 0; i < n; ++i) shuffled[i] = values[idx[static_cast<std::size_t>(i)]];
        const double moran = morans_i(shuffled, weights);
        sum += moran;
        sum_sq += moran * moran;
    }
    const double dm = static_cast<double>(permutations);
    return std::sqrt(std::max(0.0, sum_sq / dm - (sum / dm) * (sum / dm)));
}

// Rook-contiguity weights for observations on a complete rectangular lattice
// of integer-valued coordinates, row-standardized.
inline MoranWeights rook_contiguity_weights(const Eigen::Ref<const CoordMatrix>& coords) {
    const Eigen::Index n = coords.rows();
    std::vector<std::pair<long, long>> cells(static_cast<std::size_t>(n));
    long umin = std::numeric_limits<long>::max(), umax = std::numeric_limits<long>::min();
    long vmin = umin, vmax = umax;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ur = std::round(coords(i, 0)), vr = std::round(coords(i, 1));
        if (std::abs(coords(i, 0) - ur) > 1e-9 || std::abs(coords(i, 1) - vr) > 1e-9)
            throw InvalidInput("rook contiguity needs integer lattice coordinates");
        cells[static_cast<std::size_t>(i)] = {static_cast<long>(ur), static_cast<long>(vr)};
        umin = std::min(umin, static_cast<long>(ur));
        umax = std::max(umax, static_cast<long>(ur));
        vmin = std::min(vmin, static_cast<long>(vr));
        vmax = std::max(vmax, static_cast<long>(vr));
    }
    const long width = umax - umin + 1, height = vmax - vmin + 1;
    if (width * height != n) throw InvalidInput("coordinates do not form a complete lattice");
    std::vector<Eigen::Index> at(static_cast<std::size_t>(width * height), -1);
    const auto slot = [&](long u, long v) { return (v - vmin) * width + (u - umin); };
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& cell = at[static_cast<std::size_t>(slot(cells[i].first, cells[i].second))];
        if (cell != -1) throw InvalidInput("duplicate lattice cell");
        cell = i;
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(4 * n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto [u, v] = cells[static_cast<std::size_t>(i)];
        std::vector<Eigen::Index> nb;
        if (u > umin) nb.push_back(at[static_cast<std::size_t>(slot(u - 1, v))]);
        if (u < umax) nb.push_back(at[static_cast<std::size_t>(slot(u + 1, v))]);
        if (v > vmin) nb.push_back(at[static_cast<std::size_t>(slot(u, v - 1))]);
        if (v < vmax) nb.push_back(at[static_cast<std::size_t>(slot(u, v + 1))]);
        const double share = 1.0 / static_cast<double>(nb.size());
        for (const auto j : nb) triplets.emplace_back(i, j, share);
    }
    MoranWeights mw;
    mw.w.resize(n, n);
    mw.w.setFromTriplets(triplets.begin(), triplets.end());
    mw.row_standardized = true;
    return mw;
}

// k-nearest-neighbor weights for irregular point data, row-standardized.
// Ties resolve by (distance, index).
inline MoranWeights knn_weights(const Eigen::Ref<const CoordMatrix>& coords, int k = 8) {
    const Eigen::Index n = coords.rows();
    if (k < 1 || k > n - 1) throw InvalidInput("knn weights need 1 <= k <= N-1");
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    std::vector<std::pair<double, Eigen::Index>> order(static_cast<std::size_t>(n - 1));
    const double share = 1.0 / static_cast<double>(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = std::hypot(coords(i, 0) - coords(j, 0), coords(i, 1) - coords(j, 1));
            order[m++] = {d, j};
        }
        std::partial_sort(order.begin(), order.begin() + k, order.end());
        for (int r = 0; r < k; ++r) triplets.emplace_back(i, order[static_cast<std::size_t>(r)].second, share);
    }
    MoranWeights mw;
    mw.w.resize(n, n);
    mw.w.setFromTriplets(triplets.begin(), triplets.end());
    mw.row_standardized = true;
    return mw;
}

// Root-mean-square deviation between one column of two coefficient fields.
template <typename DerivedA, typename DerivedB>
double coefficient_rmse(const Eigen::MatrixBase<DerivedA>& truth,
                        const Eigen::MatrixBase<DerivedB>& estimate, Eigen::Index column) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
        throw DimensionMismatch("coefficient fields have different shapes");
    if (column < 0 || column >= truth.cols()) throw DimensionMismatch("coefficient column out of range");
    return std::sqrt((truth.col(column) - estimate.col(column)).squaredNorm() /
                     static_cast<double>(truth.rows()));
}

// The full per-model record reported by every fit.
struct Diagnostics {
    double rss = 0.0;
    double r2 = 0.0;
    std::optional<double> adjusted_r2;
    double aic = 0.0;
    std::optional<double> aicc;
    double moran_i = 0.0;
    double effective_params = 0.0;
    double log_likelihood = 0.0;
    bool degenerate_likelihood = false;
};

inline Diagnostics compute_diagnostics(const Eigen::Ref<const Vector>& y,
                                       const Eigen::Ref<const Vector>& fitted, double k,
                                       const MoranWeights& moran_weights,
                                       LikelihoodKind kind = LikelihoodKind::InverseVariance) {
    Diagnostics d;
    d.rss = rss(y, fitted);
    const RSquared r = r2_and_adjusted(y, fitted, k, y.size());
    d.r2 = r.r2;
    d.adjusted_r2 = r.adjusted;
    const LogLikelihood ll = gaussian_log_likelihood(d.rss, y.size(), kind);
    d.log_likelihood = ll.value;
    d.degenerate_likelihood = ll.degenerate;
    const AicPair aic = aic_aicc(ll.value, k, y.size());
    d.aic = aic.aic;
    d.aicc = aic.aicc;
    d.moran_i = morans_i(y - fitted, moran_weights);
    d.effective_params = k;
    return d;
}

}  // namespace gwrb
