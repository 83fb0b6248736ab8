#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gwrb/dataset.hpp"
#include "gwrb/errors.hpp"
#include "gwrb/geometry.hpp"
#include "gwrb/parallel.hpp"

namespace gwrb {

struct WlsOptions {
    // Condition estimate (of the sqrt(w)-scaled design) above this fails loudly.
    double condition_limit = 1e12;
    // Opt-in diagonal jitter on the normal matrix for exploratory runs.
    bool ridge_jitter = false;
    double jitter = 1e-8;
};

// One local weighted least-squares solution. hat_row maps the full response
// vector to the fitted value at the target; entries for zero-weight
// observations are exactly 0.
struct LocalSolution {
    Vector beta;
    Vector hat_row;
    double condition_estimate = 0.0;
};

// The reusable linear operator behind a local fit: beta = solve_op * y(active).
// Boosting applies it to a fresh target vector every stage without refactorizing.
struct LocalOperator {
    Eigen::VectorXi active;  // indices with strictly positive weight
    Matrix solve_op;         // (p+1) x n_active
    Vector hat_active;       // fitted(target) = hat_active . y(active)
    double condition = 0.0;

    Vector apply(const Eigen::Ref<const Vector>& y) const {
        Vector sub(active.size());
        for (Eigen::Index r = 0; r < active.size(); ++r) sub[r] = y[active[r]];
        return solve_op * sub;
    }
};

// Weighted least squares at one target via QR of the sqrt(w)-scaled design.
// The normal matrix is never formed or inverted for the solution path; the
// (X'WX)^{-1} factors needed for the hat row come from the triangular factor.
inline LocalOperator wls_local_operator(const Eigen::Ref<const Matrix>& design,
                                        const Eigen::Ref<const Vector>& weights,
                                        Eigen::Index target, const WlsOptions& opts = {}) {
    const Eigen::Index n = design.rows();
    const Eigen::Index q = design.cols();
    if (weights.size() != n) throw DimensionMismatch("weight vector length != observation count");

    LocalOperator op;
    std::vector<int> active;
    active.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        if (weights[j] > 0.0) active.push_back(static_cast<int>(j));
    }
    const Eigen::Index na = static_cast<Eigen::Index>(active.size());
    if (na < q)
        throw SingularSystem("local system at observation " + std::to_string(target) + " has " +
                                 std::to_string(na) + " positive weights but needs " +
                                 std::to_string(q),
                             target, std::numeric_limits<double>::infinity());

    const Eigen::Index extra = opts.ridge_jitter ? q : 0;
    Matrix scaled(na + extra, q);
    for (Eigen::Index r = 0; r < na; ++r) {
        const double sw = std::sqrt(weights[active[static_cast<std::size_t>(r)]]);
        scaled.row(r) = sw * design.row(active[static_cast<std::size_t>(r)]);
    }
    if (extra > 0) {
        scaled.bottomRows(q).setZero();
        scaled.bottomRows(q).diagonal().setConstant(std::sqrt(opts.jitter));
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
    const auto rdiag = qr.matrixR().diagonal().head(q).cwiseAbs();
    const double rmax = rdiag[0];
    const double rmin = rdiag[q - 1];
    op.condition = rmin > 0.0 ? rmax / rmin : std::numeric_limits<double>::infinity();
    if (qr.rank() < q || !(op.condition <= opts.condition_limit))
        throw SingularSystem("rank-deficient or ill-conditioned local system at observation " +
                                 std::to_string(target) +
                                 " (condition ~ " + std::to_string(op.condition) + ")",
                             target, op.condition);

    // (X'WX)^{-1} = P R^{-1} R^{-T} P' from the pivoted factorization.
    const auto rtri = qr.matrixR().topLeftCorner(q, q).template triangularView<Eigen::Upper>();
    Matrix inv_gram = Matrix::Identity(q, q);
    rtri.transpose().solveInPlace(inv_gram);
    rtri.solveInPlace(inv_gram);
    inv_gram = qr.colsPermutation() * inv_gram * qr.colsPermutation().transpose();

    Matrix x_active(na, q);
    Vector w_active(na);
    for (Eigen::Index r = 0; r < na; ++r) {
        x_active.row(r) = design.row(active[static_cast<std::size_t>(r)]);
        w_active[r] = weights[active[static_cast<std::size_t>(r)]];
    }
    op.solve_op = (inv_gram * x_active.transpose()) * w_active.asDiagonal();
    op.hat_active = w_active.cwiseProduct(x_active * (inv_gram * design.row(target).transpose()));
    op.active = Eigen::Map<const Eigen::VectorXi>(active.data(), na);
    return op;
}

inline LocalSolution wls_solve(const Eigen::Ref<const Matrix>& design,
                               const Eigen::Ref<const Vector>& response,
                               const Eigen::Ref<const Vector>& weights, Eigen::Index target,
                               const WlsOptions& opts = {}) {
    if (response.size() != design.rows())
        throw DimensionMismatch("response length != observation count");
    const LocalOperator op = wls_local_operator(design, weights, target, opts);
    LocalSolution s;
    s.beta = op.apply(response);
    s.hat_row = Vector::Zero(design.rows());
    for (Eigen::Index r = 0; r < op.active.size(); ++r) s.hat_row[op.active[r]] = op.hat_active[r];
    s.condition_estimate = op.condition;
    return s;
}

// Local operators for every observation under one weighting scheme.
inline std::vector<LocalOperator> build_local_operators(const Eigen::Ref<const Matrix>& design,
                                                        const GeometryCache& geometry,
                                                        const SpatialWeightScheme& scheme,
                                                        const WlsOptions& opts = {},
                                                        int threads = 1) {
    const Eigen::Index n = design.rows();
    if (geometry.size() != n) throw DimensionMismatch("geometry cache size != observation count");
    std::vector<LocalOperator> ops(static_cast<std::size_t>(n));
    parallel_for(n, threads, [&](long i) {
        ops[static_cast<std::size_t>(i)] =
            wls_local_operator(design, geometry.weights(i, scheme), i, opts);
    });
    return ops;
}

// Rows of the smoother matrix assembled from the per-location hat rows:
// fitted = H * y for any response y.
inline Matrix hat_matrix_from_operators(const std::vector<LocalOperator>& ops, Eigen::Index n) {
    Matrix h = Matrix::Zero(static_cast<Eigen::Index>(ops.size()), n);
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const auto& op = ops[i];
        for (Eigen::Index r = 0; r < op.active.size(); ++r)
            h(static_cast<Eigen::Index>(i), op.active[r]) = op.hat_active[r];
    }
    return h;
}

inline Matrix global_hat_matrix(const Eigen::Ref<const Matrix>& design,
                                const Eigen::Ref<const CoordMatrix>& coords,
                                const SpatialWeightScheme& scheme, const WlsOptions& opts = {},
                                int threads = 1) {
    const GeometryCache geometry(coords);
    return hat_matrix_from_operators(build_local_operators(design, geometry, scheme, opts, threads),
                                     design.rows());
}

}  // namespace gwrb
