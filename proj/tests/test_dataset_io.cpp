#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gwrb/dataset_io.hpp"
#include "gwrb/gwr.hpp"
#include "gwrb/simulation.hpp"
#include "test_support.hpp"

using namespace gwrb;
using gwrb::testing::TempDir;

namespace {

DatasetSchema default_schema() {
    DatasetSchema schema;
    schema.id = "id";
    schema.u = "u";
    schema.v = "v";
    schema.response = "y";
    schema.covariates = {"x1", "x2"};
    return schema;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("well-formed file loads with order preserved") {
    TempDir dir("io_load");
    const auto path = dir.path() / "data.csv";
    write_file(path,
               "id,u,v,x1,x2,y,extra\n"
               "a,1,1,0.5,2.0,3.5,ignored\n"
               "b,2,1,-0.25,1.0,1.25,ignored\n"
               "c,1,2,0.0,0.5,0.75,ignored\n");
    const LoadedDataset loaded = load_csv(path.string(), default_schema());
    CHECK(loaded.data.n() == 3);
    CHECK(loaded.data.p() == 2);
    CHECK(loaded.data.ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(loaded.data.design(1, 1) == -0.25);
    CHECK(loaded.data.response[2] == 0.75);
    CHECK(!loaded.dataset_hash.empty());
}

TEST_CASE("schema violations are reported by name") {
    TempDir dir("io_schema");
    const auto path = dir.path() / "data.csv";
    write_file(path, "id,u,v,x1,x2\na,1,1,0.5,2.0\n");
    try {
        load_csv(path.string(), default_schema());
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("'y'") != std::string::npos);
    }
    DatasetSchema empty = default_schema();
    empty.covariates.clear();
    CHECK_THROWS_AS(empty.validate(), SchemaError);
    DatasetSchema duplicated = default_schema();
    duplicated.covariates = {"u", "x2"};
    CHECK_THROWS_AS(duplicated.validate(), SchemaError);
}

TEST_CASE("cell-level failures carry row and column") {
    TempDir dir("io_cells");
    const auto path = dir.path() / "data.csv";
    write_file(path,
               "id,u,v,x1,x2,y\n"
               "a,1,1,0.5,2.0,3.5\n"
               "b,2,1,oops,1.0,1.25\n");
    try {
        load_csv(path.string(), default_schema());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row == 3);
        CHECK(e.column == "x1");
    }

    write_file(path,
               "id,u,v,x1,x2,y\n"
               "a,1,1,0.5,2.0,3.5\n"
               "a,2,1,0.5,1.0,1.25\n");
    try {
        load_csv(path.string(), default_schema());
        FAIL("expected duplicate-id ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row == 3);
    }

    write_file(path,
               "id,u,v,x1,x2,y\n"
               "a,1,1,inf,2.0,3.5\n");
    CHECK_THROWS_AS(load_csv(path.string(), default_schema()), ParseError);
}

TEST_CASE("city-scale schema support") {
    // NYC-shaped synthetic file: 2,216 rows and 6 covariates.
    TempDir dir("io_city");
    const auto path = dir.path() / "city.csv";
    Rng rng(8);
    std::ofstream out(path, std::ios::binary);
    out << "id,u,v,c1,c2,c3,c4,c5,c6,income\n";
    for (int i = 0; i < 2216; ++i) {
        out << "blk" << i << ',' << rng.uniform(0, 50) << ',' << rng.uniform(0, 50);
        for (int j = 0; j < 6; ++j) out << ',' << rng.normal();
        out << ',' << rng.normal() << '\n';
    }
    out.close();
    DatasetSchema schema;
    schema.id = "id";
    schema.u = "u";
    schema.v = "v";
    schema.response = "income";
    schema.covariates = {"c1", "c2", "c3", "c4", "c5", "c6"};
    const LoadedDataset loaded = load_csv(path.string(), schema);
    CHECK(loaded.data.n() == 2216);
    CHECK(loaded.data.p() == 6);
}

TEST_CASE("z-score: closed form, idempotence, failure by name") {
    Dataset data;
    data.coords = CoordMatrix::Zero(3, 2);
    data.coords.col(0) << 0, 1, 2;
    Matrix covariates(3, 1);
    covariates << 1, 2, 3;
    data.design = make_design(covariates);
    data.response.resize(3);
    data.response << 10, 20, 60;
    data.names = {"x1"};

    const auto [standardized, record] = zscore(data);
    const double expected = 1.0 / std::sqrt(2.0 / 3.0);
    CHECK(standardized.design(0, 1) == doctest::Approx(-expected).epsilon(1e-12));
    CHECK(standardized.design(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(standardized.design(2, 1) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(record.applied_to_response);
    CHECK(record.columns.back() == "response");

    // standardized columns have mean 0 and unit population sd
    for (Eigen::Index j = 1; j < standardized.design.cols(); ++j) {
        const auto col = standardized.design.col(j);
        CHECK(std::abs(col.mean()) < 1e-10);
        CHECK(std::abs(std::sqrt(col.array().square().mean()) - 1.0) < 1e-10);
    }

    // reapplying is the identity within tolerance
    const auto [twice, second_record] = zscore(standardized);
    CHECK((twice.design - standardized.design).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((twice.response - standardized.response).lpNorm<Eigen::Infinity>() < 1e-12);

    // inverse transform recovers the original columns
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(standardized.design(i, 1) * record.sd[0] + record.mean[0] ==
              doctest::Approx(data.design(i, 1)).epsilon(1e-10));
        CHECK(standardized.response[i] * record.sd[1] + record.mean[1] ==
              doctest::Approx(data.response[i]).epsilon(1e-10));
    }

    Dataset constant = data;
    constant.design.col(1).setConstant(5.0);
    try {
        zscore(constant);
        FAIL("expected ZeroVariance");
    } catch (const ZeroVariance& e) {
        CHECK(e.column == "x1");
    }
}

TEST_CASE("dataset round trip is exact") {
    TempDir dir("io_roundtrip");
    const auto path = dir.path() / "sim.csv";
    SimulationConfig config;
    config.extent = 6;
    const SimulatedDataset sim = generate_dataset(314, config);
    write_dataset_csv(path.string(), sim.data);

    DatasetSchema schema;
    schema.id = "id";
    schema.u = "u";
    schema.v = "v";
    schema.response = "y";
    schema.covariates = {"x1", "x2", "x3"};
    const LoadedDataset loaded = load_csv(path.string(), schema);
    CHECK((loaded.data.design - sim.data.design).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((loaded.data.response - sim.data.response).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((loaded.data.coords - sim.data.coords).lpNorm<Eigen::Infinity>() == 0.0);

    // writers are byte-deterministic
    const auto again = dir.path() / "sim2.csv";
    write_dataset_csv(again.string(), sim.data);
    std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    CHECK(bytes_a == bytes_b);
}

TEST_CASE("coefficient table round trip") {
    TempDir dir("io_coeffs");
    const Dataset data = gwrb::testing::grid_dataset(4, 0.2, 11);
    const GwrModel model = fit_gwr(data, SpatialWeightScheme::fixed(Kernel::Gaussian, 2.0));
    const auto path = dir.path() / "coefficients.csv";
    write_coefficients_csv(path.string(), data, model.coefficients, model.fitted, model.residuals);

    DatasetSchema schema;
    schema.id = "id";
    schema.u = "u";
    schema.v = "v";
    schema.response = "fitted";
    schema.covariates = {"beta_intercept", "beta_x1", "beta_x2", "residual"};
    const LoadedDataset loaded = load_csv(path.string(), schema);
    CHECK(loaded.data.n() == data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        CHECK(loaded.data.design(i, 1) == model.coefficients(i, 0));
        CHECK(loaded.data.design(i, 2) == model.coefficients(i, 1));
        CHECK(loaded.data.response[i] == model.fitted[i]);
        CHECK(loaded.data.design(i, 4) == model.residuals[i]);
    }
}

TEST_CASE("standardized coefficients transform back to input units") {
    const Dataset raw = [] {
        Dataset d = gwrb::testing::grid_dataset(5, 0.1, 21);
        d.design.col(1) = (d.design.col(1).array() * 3.0 + 40.0).matrix();  // un-standardized scale
        d.response = (d.response.array() * 7.0 - 5.0).matrix();
        return d;
    }();
    const auto [standardized, record] = zscore(raw);
    const GwrModel model = fit_gwr(standardized, SpatialWeightScheme::fixed(Kernel::Gaussian, 2.5));
    const Matrix original = coefficients_to_original_units(model.coefficients, record);
    // predictions in original units match the back-transformed standardized fit
    const double y_sd = record.sd.back(), y_mean = record.mean.back();
    for (Eigen::Index i = 0; i < raw.n(); ++i) {
        const double predicted = raw.design.row(i).dot(original.row(i));
        const double expected = model.fitted[i] * y_sd + y_mean;
        CHECK(predicted == doctest::Approx(expected).epsilon(1e-8));
    }
}
