#pragma once

#include <stdexcept>
#include <string>

namespace sdmlmc {

struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ArgumentError : std::invalid_argument {
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct IndefiniteCovarianceError : std::runtime_error {
  explicit IndefiniteCovarianceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct AssemblyError : std::runtime_error {
  explicit AssemblyError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SmootherError : std::runtime_error {
  explicit SmootherError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverSetupError : std::runtime_error {
  explicit SolverSetupError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolveFailure : std::runtime_error {
  explicit SolveFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sdmlmc
