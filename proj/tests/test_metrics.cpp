#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "gwrb/metrics.hpp"
#include "gwrb/rng.hpp"

using namespace gwrb;

TEST_CASE("residual sum of squares") {
    Vector y(2), fitted(2);
    y << 1, 2;
    fitted = y;
    CHECK(rss(y, fitted) == 0.0);
    fitted << 0, 0;
    CHECK(rss(y, fitted) == 5.0);
    Vector other(3);
    CHECK_THROWS_AS(rss(y, other), DimensionMismatch);
}

TEST_CASE("coefficient of determination") {
    Vector y(4);
    y << 1, 2, 3, 8;
    SUBCASE("perfect fit") {
        const RSquared r = r2_and_adjusted(y, y, 2.0, 4);
        CHECK(r.r2 == doctest::Approx(1.0).epsilon(1e-15));
        REQUIRE(r.adjusted.has_value());
        CHECK(*r.adjusted == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("mean-only fit scores zero") {
        Vector fitted = Vector::Constant(4, y.mean());
        CHECK(r2_and_adjusted(y, fitted, 1.0, 4).r2 == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("adjusted undefined when overparameterized") {
        Vector fitted = y * 0.9;
        CHECK(!r2_and_adjusted(y, fitted, 3.0, 4).adjusted.has_value());
        CHECK(!r2_and_adjusted(y, fitted, 5.0, 4).adjusted.has_value());
    }
    SUBCASE("adjusted never exceeds plain r2 for k >= 1") {
        Rng rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            Vector noise_y(10), fitted(10);
            for (int i = 0; i < 10; ++i) {
                noise_y[i] = rng.normal();
                fitted[i] = 0.5 * noise_y[i] + 0.2 * rng.normal();
            }
            const RSquared r = r2_and_adjusted(noise_y, fitted, 3.0, 10);
            REQUIRE(r.adjusted.has_value());
            CHECK(*r.adjusted <= r.r2 + 1e-14);
        }
    }
    SUBCASE("constant response has no defined r2") {
        Vector constant = Vector::Constant(4, 3.0);
        CHECK_THROWS_AS(r2_and_adjusted(constant, y, 1.0, 4), UndefinedVariance);
    }
}

TEST_CASE("gaussian log likelihood, inverse-variance parameterization") {
    // n = 1, rss = 0.5 puts the maximizing inverse variance at exactly 1:
    // value = (1/2) ln 1 - (1/2) ln(2 pi) - 0.5
    const LogLikelihood ll = gaussian_log_likelihood(0.5, 1, LikelihoodKind::InverseVariance);
    CHECK(!ll.degenerate);
    CHECK(ll.value == doctest::Approx(-1.4189385332046727).epsilon(1e-15));

    const LogLikelihood degenerate = gaussian_log_likelihood(0.0, 10);
    CHECK(degenerate.degenerate);
    CHECK(std::isinf(degenerate.value));
    CHECK(degenerate.value > 0);

    for (const auto kind : {LikelihoodKind::InverseVariance, LikelihoodKind::Profile}) {
        CHECK(gaussian_log_likelihood(2.0, 25, kind).value <
              gaussian_log_likelihood(1.0, 25, kind).value);
    }
    CHECK_THROWS_AS(gaussian_log_likelihood(-1.0, 5), InvalidInput);
    CHECK_THROWS_AS(gaussian_log_likelihood(1.0, 0), InvalidInput);
}

TEST_CASE("likelihood conventions differ by the documented constant") {
    // (n ln 2) / 2 for any rss > 0, so model comparisons at fixed n agree
    for (const double residual_ss : {0.5, 3.0, 44.0}) {
        const double inverse_variance = gaussian_log_likelihood(residual_ss, 625,
                                                                LikelihoodKind::InverseVariance).value;
        const double profile =
            gaussian_log_likelihood(residual_ss, 625, LikelihoodKind::Profile).value;
        CHECK(profile - inverse_variance ==
              doctest::Approx(625.0 * std::log(2.0) / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("information criteria") {
    SUBCASE("zero likelihood, zero parameters") {
        const AicPair pair = aic_aicc(0.0, 0.0, 10);
        CHECK(pair.aic == 0.0);
        REQUIRE(pair.aicc.has_value());
        CHECK(*pair.aicc == 0.0);
    }
    SUBCASE("boundary k = n-1 leaves the correction undefined") {
        const AicPair pair = aic_aicc(-3.0, 9.0, 10);
        CHECK(pair.aic == doctest::Approx(24.0).epsilon(1e-15));
        CHECK(!pair.aicc.has_value());
    }
    SUBCASE("small-sample correction always increases the score") {
        Rng rng(17);
        for (int trial = 0; trial < 100; ++trial) {
            const double ll = rng.normal() * 10;
            const double k = 1.0 + 20.0 * rng.uniform01();
            const Eigen::Index n = static_cast<Eigen::Index>(k) + 2 +
                                   static_cast<Eigen::Index>(rng.next_u64() % 50);
            const AicPair pair = aic_aicc(ll, k, n);
            REQUIRE(pair.aicc.has_value());
            CHECK(*pair.aicc > pair.aic);
        }
    }
}

namespace {

CoordMatrix square_grid(int side) {
    CoordMatrix coords(side * side, 2);
    Eigen::Index row = 0;
    for (int v = 1; v <= side; ++v)
        for (int u = 1; u <= side; ++u, ++row) {
            coords(row, 0) = u;
            coords(row, 1) = v;
        }
    return coords;
}

}  // namespace

TEST_CASE("Moran's I on the rook lattice") {
    const CoordMatrix coords = square_grid(4);
    const MoranWeights weights = rook_contiguity_weights(coords);
    weights.validate();

    SUBCASE("perfect checkerboard scores minus one") {
        Vector values(16);
        for (Eigen::Index i = 0; i < 16; ++i) {
            const int u = static_cast<int>(coords(i, 0)), v = static_cast<int>(coords(i, 1));
            values[i] = ((u + v) % 2 == 0) ? 1.0 : -1.0;
        }
        CHECK(std::abs(morans_i(values, weights) - (-1.0)) < 1e-10);
    }
    SUBCASE("constant field is an error") {
        CHECK_THROWS_AS(morans_i(Vector::Constant(16, 2.0), weights), UndefinedVariance);
    }
    SUBCASE("affine invariance") {
        Rng rng(23);
        Vector values(16);
        for (Eigen::Index i = 0; i < 16; ++i) values[i] = rng.normal();
        const double base = morans_i(values, weights);
        const Vector transformed = (values.array() * 2.5 - 3.0).matrix();
        CHECK(morans_i(transformed, weights) == doctest::Approx(base).epsilon(1e-12));
        const Vector flipped = (values.array() * -0.4 + 1.0).matrix();
        CHECK(morans_i(flipped, weights) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("Moran's I of white noise sits near its randomization expectation") {
    const CoordMatrix coords = square_grid(8);
    const MoranWeights weights = rook_contiguity_weights(coords);
    const Eigen::Index n = coords.rows();
    Rng rng(2024);
    Vector values(n);
    for (Eigen::Index i = 0; i < n; ++i) values[i] = rng.normal();
    const double moran = morans_i(values, weights);
    const double expectation = -1.0 / static_cast<double>(n - 1);
    Rng perm_rng(77);
    const double sd = morans_i_permutation_sd(values, weights, 999, perm_rng);
    CHECK(std::abs(moran - expectation) < 4.0 * sd);
}

TEST_CASE("Moran weight construction") {
    SUBCASE("rook weights have zero diagonal and standardized rows") {
        const MoranWeights weights = rook_contiguity_weights(square_grid(5));
        const Matrix dense = Matrix(weights.w);
        CHECK(dense.diagonal().lpNorm<Eigen::Infinity>() == 0.0);
        for (Eigen::Index i = 0; i < dense.rows(); ++i)
            CHECK(dense.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("rook construction rejects irregular points") {
        CoordMatrix coords(3, 2);
        coords << 0.5, 1.0, 2.0, 1.0, 3.0, 1.0;
        CHECK_THROWS_AS(rook_contiguity_weights(coords), InvalidInput);
    }
    SUBCASE("knn weights have zero diagonal and standardized rows") {
        Rng rng(31);
        CoordMatrix coords(30, 2);
        for (Eigen::Index i = 0; i < 30; ++i) {
            coords(i, 0) = rng.uniform(0, 10);
            coords(i, 1) = rng.uniform(0, 10);
        }
        const MoranWeights weights = knn_weights(coords, 8);
        weights.validate();
        const Matrix dense = Matrix(weights.w);
        CHECK(dense.diagonal().lpNorm<Eigen::Infinity>() == 0.0);
        for (Eigen::Index i = 0; i < 30; ++i)
            CHECK(dense.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("weights with a nonzero diagonal are rejected") {
        MoranWeights bad;
        bad.w.resize(3, 3);
        bad.w.insert(0, 0) = 0.5;
        bad.w.insert(1, 2) = 1.0;
        bad.w.makeCompressed();
        CHECK_THROWS_AS(bad.validate(), InvalidInput);
    }
}

TEST_CASE("coefficient field root-mean-square error") {
    Rng rng(41);
    Matrix truth(20, 4), other(20, 4), third(20, 4);
    for (Eigen::Index i = 0; i < 20; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) {
            truth(i, j) = rng.normal();
            other(i, j) = rng.normal();
            third(i, j) = rng.normal();
        }
    SUBCASE("identical fields") {
        for (Eigen::Index j = 0; j < 4; ++j) CHECK(coefficient_rmse(truth, truth, j) == 0.0);
    }
    SUBCASE("constant offset comes back as its magnitude") {
        const Matrix shifted = truth.array() + 0.75;
        for (Eigen::Index j = 0; j < 4; ++j)
            CHECK(coefficient_rmse(truth, shifted, j) == doctest::Approx(0.75).epsilon(1e-14));
        const Matrix negative = truth.array() - 1.5;
        CHECK(coefficient_rmse(truth, negative, 0) == doctest::Approx(1.5).epsilon(1e-14));
    }
    SUBCASE("symmetry and triangle inequality") {
        for (Eigen::Index j = 0; j < 4; ++j) {
            const double ab = coefficient_rmse(truth, other, j);
            CHECK(coefficient_rmse(other, truth, j) == ab);
            CHECK(coefficient_rmse(truth, third, j) <=
                  ab + coefficient_rmse(other, third, j) + 1e-12);
        }
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(coefficient_rmse(truth, Matrix::Zero(20, 3), 0), DimensionMismatch);
        CHECK_THROWS_AS(coefficient_rmse(truth, other, 7), DimensionMismatch);
    }
}

TEST_CASE("diagnostics bundle") {
    const CoordMatrix coords = square_grid(4);
    const MoranWeights weights = rook_contiguity_weights(coords);
    Rng rng(53);
    Vector y(16), fitted(16);
    for (Eigen::Index i = 0; i < 16; ++i) {
        y[i] = rng.normal();
        fitted[i] = 0.8 * y[i];
    }
    const Diagnostics d = compute_diagnostics(y, fitted, 3.0, weights, LikelihoodKind::Profile);
    CHECK(d.rss == doctest::Approx(rss(y, fitted)).epsilon(1e-15));
    CHECK(d.effective_params == 3.0);
    REQUIRE(d.aicc.has_value());
    CHECK(*d.aicc > d.aic);
    CHECK(d.r2 <= 1.0);
    CHECK(!d.degenerate_likelihood);
}
