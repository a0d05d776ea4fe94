#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace divdiv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorKind {
  UnsupportedDimension,
  DegenerateCell,
  OutOfRange,
  UnsupportedDegree,
  UnsupportedSpace,
  ShapeMismatch,
  Unsupported,
  MissingDerivative,
  Incompatibility,
  SolverFailure,
  QuadratureShortfall,
  TooLarge,
  ConfigError,
  ParseError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Number of worker threads, read once from DIVDIV_THREADS (default 1).
int thread_count();

/// Runs body(i) for i in [0, n). Each index is processed exactly once; callers
/// write into per-index slots so results do not depend on scheduling.
void parallel_for(int n, const std::function<void(int)>& body);

/// Binomial coefficient, 0 when k < 0 or k > n.
long long binomial(int n, int k);

}  // namespace divdiv
