#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fdsim {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;
using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy. The CLI maps ConfigError to exit code 1, NumericalError
// (and subclasses) to 2, IoError to 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

struct DimensionMismatch : NumericalError {
  using NumericalError::NumericalError;
};
struct NullspaceDimensionMismatch : NumericalError {
  using NumericalError::NumericalError;
};
struct NotPositiveDefinite : NumericalError {
  using NumericalError::NumericalError;
};
struct AllGainsZero : NumericalError {
  using NumericalError::NumericalError;
};
struct SaturatedRegime : NumericalError {
  using NumericalError::NumericalError;
};
struct DegenerateAnchors : NumericalError {
  using NumericalError::NumericalError;
};
struct OutOfScopeRegime : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace fdsim
