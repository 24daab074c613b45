#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace betaens {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr const char* kToolVersion = "betaens 0.1.0";

/// Invalid experiment configuration or arguments (CLI exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Computation cannot continue: singular Gram, exhausted rejection budget,
/// condition estimate over threshold (CLI exit code 3).
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Required input artifacts are absent or inconsistent (CLI exit code 4).
struct missing_input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace betaens
