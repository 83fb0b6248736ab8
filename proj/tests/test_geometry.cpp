#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gwrb/geometry.hpp"
#include "gwrb/rng.hpp"

using namespace gwrb;

TEST_CASE("pairwise distance") {
    CHECK(pairwise_distance({0, 0}, {0, 0}) == 0.0);
    CHECK(pairwise_distance({0, 0}, {3, 4}) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(pairwise_distance({1, 1}, {25, 25}) ==
          doctest::Approx(24.0 * std::sqrt(2.0)).epsilon(1e-14));
    CHECK(pairwise_distance({3, 4}, {0, 0}) == pairwise_distance({0, 0}, {3, 4}));
}

TEST_CASE("kernel weight closed forms") {
    CHECK(kernel_weight(0.0, 10.0, Kernel::Bisquare) == 1.0);
    CHECK(kernel_weight(10.0, 10.0, Kernel::Bisquare) == 0.0);
    CHECK(kernel_weight(5.0, 10.0, Kernel::Bisquare) == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(kernel_weight(0.0, 3.0, Kernel::Gaussian) == 1.0);
    CHECK(kernel_weight(3.0, 3.0, Kernel::Gaussian) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK_THROWS_AS(kernel_weight(1.0, 0.0, Kernel::Bisquare), InvalidBandwidth);
    CHECK_THROWS_AS(kernel_weight(1.0, -2.0, Kernel::Gaussian), InvalidBandwidth);
}

TEST_CASE("kernel weight bounds, monotonicity, compact support") {
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const double h = 0.1 + 10.0 * rng.uniform01();
        const double d1 = 15.0 * rng.uniform01();
        const double d2 = d1 + 5.0 * rng.uniform01();
        for (const Kernel kernel : {Kernel::Bisquare, Kernel::Gaussian}) {
            const double w1 = kernel_weight(d1, h, kernel);
            const double w2 = kernel_weight(d2, h, kernel);
            CHECK(w1 >= 0.0);
            CHECK(w1 <= 1.0);
            CHECK(w1 >= w2);  // nonincreasing in distance
        }
        // bisquare support is exactly [0, h)
        CHECK(kernel_weight(h, h, Kernel::Bisquare) == 0.0);
        CHECK(kernel_weight(h * 1.01, h, Kernel::Bisquare) == 0.0);
        CHECK(kernel_weight(h * 0.999, h, Kernel::Bisquare) > 0.0);
    }
}

TEST_CASE("weight vector: single observation") {
    CoordMatrix coords(1, 2);
    coords << 4.0, 5.0;
    const Vector w = weight_vector(Coordinates{4.0, 5.0}, coords,
                                   SpatialWeightScheme::fixed(Kernel::Bisquare, 2.0));
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 1.0);
}

TEST_CASE("weight vector: collinear fixed bisquare") {
    CoordMatrix coords(3, 2);
    coords << 0, 0, 1, 0, 2, 0;
    const Vector w = weight_vector(Coordinates{0, 0}, coords,
                                   SpatialWeightScheme::fixed(Kernel::Bisquare, 2.0));
    CHECK(w[0] == 1.0);
    CHECK(w[1] == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(w[2] == 0.0);
}

TEST_CASE("weight vector: adaptive on unit-square corners") {
    CoordMatrix coords(4, 2);
    coords << 0, 0, 1, 0, 0, 1, 1, 1;
    // k = 2: the 2nd-nearest other of (0,0) sits at distance 1, so bisquare
    // support is [0, 1) and both distance-1 neighbors get weight 0.
    const Vector w = weight_vector(Coordinates{0, 0}, coords,
                                   SpatialWeightScheme::adaptive(Kernel::Bisquare, 2));
    CHECK(w[0] == 1.0);
    CHECK(w[1] == 0.0);
    CHECK(w[2] == 0.0);
    CHECK(w[3] == 0.0);
}

TEST_CASE("weight vector: adaptive neighbor count validation") {
    CoordMatrix coords(4, 2);
    coords << 0, 0, 1, 0, 0, 1, 1, 1;
    CHECK_THROWS_AS(weight_vector(Eigen::Index(0), pairwise_distances(coords),
                                  SpatialWeightScheme::adaptive(Kernel::Bisquare, 4)),
                    InvalidBandwidth);
    CHECK_NOTHROW(weight_vector(Eigen::Index(0), pairwise_distances(coords),
                                SpatialWeightScheme::adaptive(Kernel::Bisquare, 3)));
    CHECK_THROWS_AS(SpatialWeightScheme::fixed(Kernel::Bisquare, 0.0), InvalidBandwidth);
    CHECK_THROWS_AS(SpatialWeightScheme::adaptive(Kernel::Bisquare, 0), InvalidBandwidth);
}

TEST_CASE("adaptive support counts") {
    Rng rng(11);
    CoordMatrix coords(40, 2);
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
        coords(i, 0) = 10.0 * rng.uniform01();
        coords(i, 1) = 10.0 * rng.uniform01();
    }
    const Matrix distances = pairwise_distances(coords);
    for (const int k : {3, 8, 20}) {
        for (Eigen::Index i = 0; i < coords.rows(); ++i) {
            const Vector wg =
                weight_vector(i, distances, SpatialWeightScheme::adaptive(Kernel::Gaussian, k));
            CHECK((wg.array() > 0.0).count() == coords.rows());  // gaussian keeps everyone

            const Vector wb =
                weight_vector(i, distances, SpatialWeightScheme::adaptive(Kernel::Bisquare, k));
            // target itself plus exactly the others strictly inside the k-th distance
            const Vector row = distances.row(i);
            std::vector<double> d(row.data(), row.data() + row.size());
            std::sort(d.begin(), d.end());
            const double h = d[static_cast<std::size_t>(k)];
            Eigen::Index strictly_inside = 0;
            for (Eigen::Index j = 0; j < coords.rows(); ++j)
                if (j != i && distances(i, j) < h) ++strictly_inside;
            CHECK((wb.array() > 0.0).count() == strictly_inside + 1);
            CHECK(strictly_inside >= k - 1);
        }
    }
}

TEST_CASE("permutation equivariance") {
    Rng rng(23);
    const Eigen::Index n = 25;
    CoordMatrix coords(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        coords(i, 0) = rng.uniform(-3, 3);
        coords(i, 1) = rng.uniform(-3, 3);
    }
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (Eigen::Index i = n - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)],
                  perm[static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(i + 1))]);
    CoordMatrix shuffled(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) shuffled.row(i) = coords.row(perm[static_cast<std::size_t>(i)]);

    const Coordinates target{coords(3, 0), coords(3, 1)};
    for (const auto& scheme : {SpatialWeightScheme::fixed(Kernel::Bisquare, 2.5),
                               SpatialWeightScheme::adaptive(Kernel::Gaussian, 6)}) {
        const Vector w = weight_vector(target, coords, scheme);
        const Vector ws = weight_vector(target, shuffled, scheme);
        for (Eigen::Index i = 0; i < n; ++i)
            CHECK(ws[i] == w[perm[static_cast<std::size_t>(i)]]);
    }
}

TEST_CASE("duplicate coordinates get weight one under fixed bandwidth") {
    CoordMatrix coords(3, 2);
    coords << 1, 1, 1, 1, 4, 1;
    const Vector w = weight_vector(Eigen::Index(0), pairwise_distances(coords),
                                   SpatialWeightScheme::fixed(Kernel::Bisquare, 2.0));
    CHECK(w[0] == 1.0);
    CHECK(w[1] == 1.0);
    CHECK(w[2] == 0.0);
}

TEST_CASE("geometry cache matches direct weight vectors") {
    Rng rng(5);
    CoordMatrix coords(30, 2);
    for (Eigen::Index i = 0; i < 30; ++i) {
        coords(i, 0) = rng.uniform(0, 8);
        coords(i, 1) = rng.uniform(0, 8);
    }
    const GeometryCache cache(coords);
    const Matrix distances = pairwise_distances(coords);
    for (const auto& scheme : {SpatialWeightScheme::fixed(Kernel::Gaussian, 1.7),
                               SpatialWeightScheme::adaptive(Kernel::Bisquare, 9)}) {
        for (Eigen::Index i = 0; i < coords.rows(); ++i) {
            const Vector a = cache.weights(i, scheme);
            const Vector b = weight_vector(i, distances, scheme);
            CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
        }
    }
}
