#pragma once

#include <stdexcept>
#include <string>

namespace gwrb {

// Base class for every failure this library reports.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidBandwidth : Error {
    using Error::Error;
};

struct InvalidConfig : Error {
    using Error::Error;
};

struct InvalidInput : Error {
    using Error::Error;
};

// A local weighted system could not be solved. Carries the condition
// estimate and the observation index so the caller can decide whether to
// enlarge the bandwidth. `stage` is set when raised inside a boosting fit.
struct SingularSystem : Error {
    SingularSystem(std::string msg, long location_, double condition_, int stage_ = -1)
        : Error(std::move(msg)), location(location_), condition(condition_), stage(stage_) {}
    long location;
    double condition;
    int stage;
};

struct SearchFailure : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// A column (or the full value vector) has no variance where variance is required.
struct ZeroVariance : Error {
    ZeroVariance(std::string msg, std::string column_)
        : Error(std::move(msg)), column(std::move(column_)) {}
    std::string column;
};

struct UndefinedVariance : Error {
    using Error::Error;
};

struct SchemaError : Error {
    using Error::Error;
};

// CSV cell or row that could not be parsed; row is 1-based including the header.
struct ParseError : Error {
    ParseError(std::string msg, std::size_t row_, std::string column_)
        : Error(std::move(msg)), row(row_), column(std::move(column_)) {}
    std::size_t row;
    std::string column;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace gwrb
