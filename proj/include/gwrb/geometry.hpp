#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gwrb/dataset.hpp"
#include "gwrb/errors.hpp"

namespace gwrb {

struct Coordinates {
    double u = 0.0;
    double v = 0.0;
};

enum class Kernel { Bisquare, Gaussian };

inline std::string to_string(Kernel k) {
    return k == Kernel::Bisquare ? "bisquare" : "gaussian";
}

// Kernel + bandwidth specification. Fixed mode carries a distance; adaptive
// mode carries a neighbor count resolved per target at weighting time.
struct SpatialWeightScheme {
    enum class Mode { Fixed, Adaptive };

    Kernel kernel = Kernel::Bisquare;
    Mode mode = Mode::Fixed;
    double bandwidth = 0.0;  // fixed-mode distance, > 0
    int neighbors = 0;       // adaptive-mode neighbor count

    static SpatialWeightScheme fixed(Kernel k, double h) {
        SpatialWeightScheme s;
        s.kernel = k;
        s.mode = Mode::Fixed;
        s.bandwidth = h;
        s.validate();
        return s;
    }

    static SpatialWeightScheme adaptive(Kernel k, int count) {
        SpatialWeightScheme s;
        s.kernel = k;
        s.mode = Mode::Adaptive;
        s.neighbors = count;
        s.validate();
        return s;
    }

    void validate() const {
        if (mode == Mode::Fixed) {
            if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
                throw InvalidBandwidth("fixed bandwidth must be a positive finite distance");
        } else {
            if (neighbors < 1)
                throw InvalidBandwidth("adaptive neighbor count must be positive");
        }
    }
};

inline double pairwise_distance(Coordinates a, Coordinates b) {
    return std::hypot(a.u - b.u, a.v - b.v);
}

// Kernel weight at distance d for bandwidth h. Bisquare has compact support:
// exactly zero for d >= h.
template <typename Scalar>
Scalar kernel_weight(Scalar d, Scalar h, Kernel kernel) {
    if (!(h > Scalar(0))) throw InvalidBandwidth("kernel bandwidth must be positive");
    const Scalar t = d / h;
    if (kernel == Kernel::Bisquare) {
        if (t >= Scalar(1)) return Scalar(0);
        const Scalar s = Scalar(1) - t * t;
        return s * s;
    }
    return std::exp(Scalar(-0.5) * t * t);
}

// All pairwise Euclidean distances; dense N x N, exact zeros on the diagonal.
inline Matrix pairwise_distances(const Eigen::Ref<const CoordMatrix>& coords) {
    const Eigen::Index n = coords.rows();
    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dist = std::hypot(coords(i, 0) - coords(j, 0), coords(i, 1) - coords(j, 1));
            d(i, j) = dist;
            d(j, i) = dist;
        }
    }
    return d;
}

namespace detail {

// Adaptive bandwidth for one target: the distance to its k-th nearest other
// observation. `self` marks the one entry excluded from the neighbor count
// (exactly one zero-distance entry when the target sits in the list). Ties
// resolve by (distance, index) order, which leaves the distance itself
// unambiguous. Under bisquare the k-th neighbor lands on the support boundary
// d == h and so receives weight exactly 0: the strictly positive support is
// the target plus its k-1 nearest others.
inline double adaptive_bandwidth(const Eigen::Ref<const Vector>& distances,
                                 std::optional<Eigen::Index> self, int k) {
    const Eigen::Index n = distances.size();
    const Eigen::Index others = self ? n - 1 : n;
    if (k > others)
        throw InvalidBandwidth("adaptive neighbor count " + std::to_string(k) +
                               " exceeds the " + std::to_string(others) +
                               " other observations available");
    std::vector<double> sorted;
    sorted.reserve(others);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (self && j == *self) continue;
        sorted.push_back(distances[j]);
    }
    std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
    return sorted[static_cast<std::size_t>(k - 1)];
}

inline Vector apply_kernel(const Eigen::Ref<const Vector>& distances, double h, Kernel kernel) {
    Vector w(distances.size());
    for (Eigen::Index j = 0; j < distances.size(); ++j)
        w[j] = kernel_weight(distances[j], h, kernel);
    return w;
}

}  // namespace detail

// Weight vector for a target identified by row index (the in-sample case).
// The target itself is excluded from the adaptive neighbor count and always
// receives kernel_weight(0) = 1.
inline Vector weight_vector(Eigen::Index target, const Eigen::Ref<const Matrix>& distances,
                            const SpatialWeightScheme& scheme) {
    scheme.validate();
    const Vector row = distances.row(target);
    const double h = scheme.mode == SpatialWeightScheme::Mode::Fixed
                         ? scheme.bandwidth
                         : detail::adaptive_bandwidth(row, target, scheme.neighbors);
    if (!(h > 0.0))
        throw InvalidBandwidth("adaptive bandwidth degenerated to zero (duplicate coordinates?)");
    return detail::apply_kernel(row, h, scheme.kernel);
}

// Weight vector for an arbitrary target location. If the target coincides
// with a listed observation (distance exactly zero), that one entry is
// treated as the target itself and excluded from the adaptive count.
inline Vector weight_vector(Coordinates target, const Eigen::Ref<const CoordMatrix>& coords,
                            const SpatialWeightScheme& scheme) {
    scheme.validate();
    const Eigen::Index n = coords.rows();
    if (n < 1) throw InvalidInput("weight_vector needs at least one observation");
    Vector row(n);
    std::optional<Eigen::Index> self;
    for (Eigen::Index j = 0; j < n; ++j) {
        row[j] = std::hypot(target.u - coords(j, 0), target.v - coords(j, 1));
        if (!self && row[j] == 0.0) self = j;
    }
    const double h = scheme.mode == SpatialWeightScheme::Mode::Fixed
                         ? scheme.bandwidth
                         : detail::adaptive_bandwidth(row, self, scheme.neighbors);
    if (!(h > 0.0))
        throw InvalidBandwidth("adaptive bandwidth degenerated to zero (duplicate coordinates?)");
    return detail::apply_kernel(row, h, scheme.kernel);
}

// Shared per-dataset geometry: the distance matrix, plus per-row ascending
// distances when adaptive bandwidths are in play. Immutable after
// construction and safe to share across threads and fits.
class GeometryCache {
public:
    explicit GeometryCache(const Eigen::Ref<const CoordMatrix>& coords)
        : distances_(pairwise_distances(coords)) {}

    const Matrix& distances() const { return distances_; }
    Eigen::Index size() const { return distances_.rows(); }

    // Row i of the distance matrix sorted ascending. Entry [k] is the
    // distance to the k-th nearest other observation: exactly one
    // zero-distance entry (the target) occupies slot [0].
    const std::vector<Vector>& sorted_rows() const {
        std::call_once(sorted_once_, [this] {
            const Eigen::Index n = distances_.rows();
            sorted_.resize(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                Vector row = distances_.row(i);
                std::sort(row.data(), row.data() + row.size());
                sorted_[static_cast<std::size_t>(i)] = std::move(row);
            }
        });
        return sorted_;
    }

    Vector weights(Eigen::Index target, const SpatialWeightScheme& scheme) const {
        if (scheme.mode == SpatialWeightScheme::Mode::Adaptive) {
            const auto& rows = sorted_rows();
            const Eigen::Index n = distances_.rows();
            if (scheme.neighbors > n - 1)
                throw InvalidBandwidth("adaptive neighbor count " + std::to_string(scheme.neighbors) +
                                       " exceeds the " + std::to_string(n - 1) +
                                       " other observations available");
            const double h = rows[static_cast<std::size_t>(target)][scheme.neighbors];
            if (!(h > 0.0))
                throw InvalidBandwidth("adaptive bandwidth degenerated to zero (duplicate coordinates?)");
            return detail::apply_kernel(distances_.row(target), h, scheme.kernel);
        }
        return weight_vector(target, distances_, scheme);
    }

    double max_distance() const { return distances_.maxCoeff(); }

    // Smallest fixed bandwidth at which every location keeps at least
    // `min_neighbors` strictly positive-weight others under a compact kernel.
    double min_solvable_bandwidth(int min_neighbors) const {
        const auto& rows = sorted_rows();
        const Eigen::Index n = distances_.rows();
        if (min_neighbors > n - 1)
            throw InvalidBandwidth("not enough observations for the requested neighborhood");
        double h = 0.0;
        for (const auto& row : rows) h = std::max(h, row[min_neighbors]);
        return h * (1.0 + 1e-6);
    }

private:
    Matrix distances_;
    mutable std::once_flag sorted_once_;
    mutable std::vector<Vector> sorted_;
};

}  // namespace gwrb
