#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsdelab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite evaluation of sigma, H or g while checking the standing assumptions.
class ValidationError : public Error {
public:
    using Error::Error;
};

class SimulationError : public Error {
public:
    SimulationError(const std::string& what, std::size_t step, std::size_t path)
        : Error(what + " (step " + std::to_string(step) + ", path " + std::to_string(path) + ")"),
          step_(step), path_(path) {}

    std::size_t step() const { return step_; }
    std::size_t path() const { return path_; }

private:
    std::size_t step_;
    std::size_t path_;
};

class SolverError : public Error {
public:
    using Error::Error;
};

// Picard iteration failed to contract at time node `node`.
class StepFailure : public SolverError {
public:
    StepFailure(std::size_t node, std::vector<double> history);

    std::size_t node() const { return node_; }
    const std::vector<double>& residual_history() const { return history_; }

private:
    std::size_t node_;
    std::vector<double> history_;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace bsdelab
