#pragma once

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>

#include "gwrb/dataset_io.hpp"
#include "gwrb/errors.hpp"
#include "gwrb/metrics.hpp"
#include "gwrb/simulation.hpp"
#include "gwrb/version.hpp"

namespace gwrb {

using Json = nlohmann::ordered_json;

namespace io_detail {

inline Json opt_json(const std::optional<double>& value) {
    if (value) return *value;
    return nullptr;
}

}  // namespace io_detail

inline Json diagnostics_to_json(const Diagnostics& d) {
    Json j;
    j["rss"] = d.rss;
    j["r2"] = d.r2;
    j["adjusted_r2"] = io_detail::opt_json(d.adjusted_r2);
    j["aic"] = d.aic;
    j["aicc"] = io_detail::opt_json(d.aicc);
    j["moran_i"] = d.moran_i;
    j["effective_params"] = d.effective_params;
    j["log_likelihood"] =
        d.degenerate_likelihood ? Json(nullptr) : Json(d.log_likelihood);
    j["degenerate_likelihood"] = d.degenerate_likelihood;
    return j;
}

inline void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed while writing '" + path + "'");
}

inline Json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("cannot parse '" + path + "': " + e.what());
    }
    return j;
}

// Tidy long-format CSV: one row per replication x model x metric.
inline void write_replications_csv(const std::string& path, const ReplicationReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "rep,model,metric,value\n";
    for (const auto& record : report.records) {
        for (const auto& model : record.models) {
            for (const auto& [metric, value] : detail::metric_map(model)) {
                out << record.rep << ',' << model.model << ',' << metric << ','
                    << io_detail::format_double(value) << '\n';
            }
        }
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

inline Json replication_protocol_json(const ReplicationConfig& config) {
    Json j;
    j["reps"] = config.reps;
    j["base_seed"] = config.base_seed;
    j["extent"] = config.sim.extent;
    j["noise_sd"] = config.sim.noise_sd;
    j["covariates"] = to_string(config.sim.covariates);
    j["kernel"] = to_string(config.kernel);
    j["bandwidth_mode"] =
        config.bandwidth_mode == SpatialWeightScheme::Mode::Fixed ? "fixed" : "adaptive";
    j["bandwidth_criterion"] = to_string(config.criterion);
    j["learning_rate"] = config.boost.learning_rate;
    j["max_stages"] = config.boost.max_stages;
    j["bandwidth_factor"] = config.boost.bandwidth_factor;
    j["early_stop"] = to_string(config.boost.early_stop);
    j["likelihood"] = to_string(config.likelihood);
    return j;
}

inline Json aggregate_json(const ReplicationReport& report) {
    Json j;
    j["version"] = std::string(kVersion);
    j["protocol"] = replication_protocol_json(report.config);
    j["rng"] = report.rng_identity;
    Json models = Json::object();
    for (const auto& [model, metrics] : report.aggregates) {
        Json entry = Json::object();
        for (const auto& [metric, stat] : metrics) {
            entry[metric] = Json{{"mean", stat.mean}, {"sd", stat.sd}};
        }
        models[model] = std::move(entry);
    }
    j["models"] = std::move(models);
    return j;
}

}  // namespace gwrb
