#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "gwrb/dataset.hpp"
#include "gwrb/errors.hpp"

namespace gwrb {

// Column bindings for CSV ingestion. All named columns must exist and be
// distinct; covariate order is preserved into the design matrix.
struct DatasetSchema {
    std::string id;
    std::string u;
    std::string v;
    std::string response;
    std::vector<std::string> covariates;

    void validate() const {
        if (covariates.empty()) throw SchemaError("schema needs at least one covariate column");
        std::unordered_set<std::string> seen;
        for (const auto& name : {id, u, v, response}) {
            if (name.empty()) throw SchemaError("schema has an empty column name");
            if (!seen.insert(name).second) throw SchemaError("duplicate schema column: " + name);
        }
        for (const auto& name : covariates) {
            if (name.empty()) throw SchemaError("schema has an empty covariate name");
            if (!seen.insert(name).second) throw SchemaError("duplicate schema column: " + name);
        }
    }
};

// Per-column location/scale regression record from standardization, retained
// so coefficients can be reported in either unit system.
struct StandardizationRecord {
    std::vector<std::string> columns;  // covariates..., then response if applied
    std::vector<double> mean;
    std::vector<double> sd;  // population (divisor N) standard deviations
    bool applied_to_response = false;
};

namespace io_detail {

// Shortest-exact plus fixed 17-significant-digit formatting keeps writers
// deterministic, locale-independent, and round-trippable.
inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw ParseError("row " + std::to_string(row) + ", column '" + column +
                             "': cannot parse '" + std::string(text) + "' as a number",
                         row, column);
    if (!std::isfinite(value))
        throw ParseError("row " + std::to_string(row) + ", column '" + column +
                             "': non-finite value",
                         row, column);
    return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                         : comma - start);
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        cells.push_back(std::move(cell));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

// FNV-1a 64-bit over raw bytes; used for dataset provenance stamps.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string hash_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return std::string(buf);
}

}  // namespace io_detail

struct LoadedDataset {
    Dataset data;
    std::string dataset_hash;  // FNV-1a of the raw file bytes
};

// Schema-driven CSV reader. Input order is preserved; unknown columns are
// ignored; missing columns, unparsable cells, and duplicate ids are reported
// with their row and column.
inline LoadedDataset load_csv(const std::string& path, const DatasetSchema& schema) {
    schema.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();

    std::istringstream stream(bytes);
    std::string line;
    if (!std::getline(stream, line)) throw SchemaError("'" + path + "' is empty");
    const auto header = io_detail::split_csv_line(line);

    const auto column_of = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw SchemaError("'" + path + "' is missing required column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t id_col = column_of(schema.id);
    const std::size_t u_col = column_of(schema.u);
    const std::size_t v_col = column_of(schema.v);
    const std::size_t y_col = column_of(schema.response);
    std::vector<std::size_t> x_cols;
    for (const auto& name : schema.covariates) x_cols.push_back(column_of(name));

    std::vector<std::string> ids;
    std::vector<double> us, vs, ys;
    std::vector<std::vector<double>> xs(x_cols.size());
    std::unordered_set<std::string> seen_ids;
    std::size_t row = 1;
    while (std::getline(stream, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = io_detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError("row " + std::to_string(row) + ": expected " +
                                 std::to_string(header.size()) + " cells, found " +
                                 std::to_string(cells.size()),
                             row, "");
        std::string id = cells[id_col];
        if (!seen_ids.insert(id).second)
            throw ParseError("row " + std::to_string(row) + ": duplicate id '" + id + "'", row,
                             schema.id);
        ids.push_back(std::move(id));
        us.push_back(io_detail::parse_double(cells[u_col], row, schema.u));
        vs.push_back(io_detail::parse_double(cells[v_col], row, schema.v));
        ys.push_back(io_detail::parse_double(cells[y_col], row, schema.response));
        for (std::size_t j = 0; j < x_cols.size(); ++j)
            xs[j].push_back(io_detail::parse_double(cells[x_cols[j]], row, schema.covariates[j]));
    }
    const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
    if (n == 0) throw SchemaError("'" + path + "' has no data rows");

    LoadedDataset out;
    out.dataset_hash = io_detail::hash_hex(bytes);
    out.data.coords.resize(n, 2);
    out.data.response.resize(n);
    Matrix covariates(n, static_cast<Eigen::Index>(x_cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        out.data.coords(i, 0) = us[static_cast<std::size_t>(i)];
        out.data.coords(i, 1) = vs[static_cast<std::size_t>(i)];
        out.data.response[i] = ys[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < x_cols.size(); ++j)
            covariates(i, static_cast<Eigen::Index>(j)) = xs[j][static_cast<std::size_t>(i)];
    }
    out.data.design = make_design(covariates);
    out.data.names = schema.covariates;
    out.data.ids = std::move(ids);
    out.data.validate();
    return out;
}

// z-score the covariates and the response (population sd). Zero-variance
// columns fail by name.
inline std::pair<Dataset, StandardizationRecord> zscore(const Dataset& input) {
    input.validate();
    Dataset out = input;
    StandardizationRecord record;
    record.applied_to_response = true;
    const double dn = static_cast<double>(input.n());

    const auto standardize = [&](Eigen::Ref<Vector> column, const std::string& name) {
        const double mean = column.mean();
        const double sd = std::sqrt((column.array() - mean).square().sum() / dn);
        if (!(sd > 0.0)) throw ZeroVariance("column '" + name + "' has zero variance", name);
        column = (column.array() - mean) / sd;
        record.columns.push_back(name);
        record.mean.push_back(mean);
        record.sd.push_back(sd);
    };

    for (Eigen::Index j = 1; j < out.design.cols(); ++j) {
        const std::string name = !out.names.empty()
                                     ? out.names[static_cast<std::size_t>(j - 1)]
                                     : "x" + std::to_string(j);
        standardize(out.design.col(j), name);
    }
    standardize(out.response, "response");
    return {std::move(out), std::move(record)};
}

// Undo a z-score on a standardized-unit coefficient field: slopes rescale by
// sd_y / sd_xj and the intercept reabsorbs the column locations.
inline Matrix coefficients_to_original_units(const Eigen::Ref<const Matrix>& standardized,
                                             const StandardizationRecord& record) {
    if (!record.applied_to_response || record.columns.empty())
        throw InvalidInput("standardization record does not cover the response");
    const std::size_t p = record.columns.size() - 1;
    if (standardized.cols() != static_cast<Eigen::Index>(p + 1))
        throw DimensionMismatch("coefficient field width does not match the record");
    const double y_mean = record.mean.back();
    const double y_sd = record.sd.back();
    Matrix original(standardized.rows(), standardized.cols());
    for (Eigen::Index i = 0; i < standardized.rows(); ++i) {
        double intercept = y_mean + y_sd * standardized(i, 0);
        for (std::size_t j = 0; j < p; ++j) {
            const double slope = standardized(i, static_cast<Eigen::Index>(j + 1)) * y_sd / record.sd[j];
            original(i, static_cast<Eigen::Index>(j + 1)) = slope;
            intercept -= slope * record.mean[j];
        }
        original(i, 0) = intercept;
    }
    return original;
}

// Per-observation coefficient table: id, coordinates, one column per
// coefficient, fitted value, residual. Byte-deterministic given its inputs.
inline void write_coefficients_csv(const std::string& path, const Dataset& data,
                                   const Eigen::Ref<const Matrix>& coefficients,
                                   const Eigen::Ref<const Vector>& fitted,
                                   const Eigen::Ref<const Vector>& residuals) {
    if (coefficients.rows() != data.n() || fitted.size() != data.n() ||
        residuals.size() != data.n())
        throw DimensionMismatch("coefficient table inputs disagree on row count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "id,u,v,beta_intercept";
    for (Eigen::Index j = 1; j < coefficients.cols(); ++j) {
        const std::string name = !data.names.empty()
                                     ? data.names[static_cast<std::size_t>(j - 1)]
                                     : "x" + std::to_string(j);
        out << ",beta_" << name;
    }
    out << ",fitted,residual\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (!data.ids.empty())
            out << data.ids[static_cast<std::size_t>(i)];
        else
            out << (i + 1);
        out << ',' << io_detail::format_double(data.coords(i, 0)) << ','
            << io_detail::format_double(data.coords(i, 1));
        for (Eigen::Index j = 0; j < coefficients.cols(); ++j)
            out << ',' << io_detail::format_double(coefficients(i, j));
        out << ',' << io_detail::format_double(fitted[i]) << ','
            << io_detail::format_double(residuals[i]) << '\n';
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

// Plain dataset export in the same dialect load_csv reads.
inline void write_dataset_csv(const std::string& path, const Dataset& data,
                              const Eigen::Ref<const Matrix>& extra = Matrix(),
                              const std::vector<std::string>& extra_names = {}) {
    if (extra.size() > 0 && extra.rows() != data.n())
        throw DimensionMismatch("extra column row count differs from dataset");
    if (static_cast<Eigen::Index>(extra_names.size()) != extra.cols())
        throw DimensionMismatch("extra column names do not match extra columns");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "id,u,v";
    for (Eigen::Index j = 1; j < data.design.cols(); ++j) {
        out << ',' << (!data.names.empty() ? data.names[static_cast<std::size_t>(j - 1)]
                                           : "x" + std::to_string(j));
    }
    out << ",y";
    for (const auto& name : extra_names) out << ',' << name;
    out << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (!data.ids.empty())
            out << data.ids[static_cast<std::size_t>(i)];
        else
            out << (i + 1);
        out << ',' << io_detail::format_double(data.coords(i, 0)) << ','
            << io_detail::format_double(data.coords(i, 1));
        for (Eigen::Index j = 1; j < data.design.cols(); ++j)
            out << ',' << io_detail::format_double(data.design(i, j));
        out << ',' << io_detail::format_double(data.response[i]);
        for (Eigen::Index j = 0; j < extra.cols(); ++j)
            out << ',' << io_detail::format_double(extra(i, j));
        out << '\n';
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace gwrb
