#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "gwrb/errors.hpp"

namespace gwrb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CoordMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Prepend the intercept column of ones to a covariate matrix.
inline Matrix make_design(const Eigen::Ref<const Matrix>& covariates) {
    Matrix design(covariates.rows(), covariates.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(covariates.cols()) = covariates;
    return design;
}

// N located observations: coordinates, design matrix (intercept first),
// response, optional covariate names and row ids.
struct Dataset {
    CoordMatrix coords;               // (u, v) per row
    Matrix design;                    // N x (p+1), first column all ones
    Vector response;                  // length N
    std::vector<std::string> names;   // covariate names, length p (may be empty)
    std::vector<std::string> ids;     // row ids (may be empty; index order used)

    Eigen::Index n() const { return design.rows(); }
    Eigen::Index p() const { return design.cols() - 1; }

    void validate() const {
        const Eigen::Index rows = design.rows();
        if (rows == 0) throw InvalidInput("dataset is empty");
        if (coords.rows() != rows || response.size() != rows)
            throw DimensionMismatch("coords/design/response row counts differ");
        if (design.cols() < 1 || rows < design.cols())
            throw InvalidInput("need at least p+1 observations for a (p+1)-parameter model");
        if (!design.allFinite() || !response.allFinite() || !coords.allFinite())
            throw InvalidInput("dataset contains non-finite values");
        if ((design.col(0).array() != 1.0).any())
            throw InvalidInput("design matrix must carry an all-ones intercept column first");
        if (!names.empty() && static_cast<Eigen::Index>(names.size()) != p())
            throw DimensionMismatch("covariate name count does not match design width");
        if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != rows)
            throw DimensionMismatch("id count does not match observation count");
    }
};

}  // namespace gwrb
