#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cfura {

using Index = Eigen::Index;
using Complex = std::complex<double>;

using CMatrix = Eigen::MatrixXcd;
using CRow = Eigen::RowVectorXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Invalid user-supplied configuration or arguments. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown (non-PD covariance, non-finite iterate). Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::optional<int> iteration = std::nullopt)
      : std::runtime_error(iteration ? what + " (iteration " + std::to_string(*iteration) + ")" : what),
        iteration_(iteration) {}

  std::optional<int> iteration() const { return iteration_; }

 private:
  std::optional<int> iteration_;
};

}  // namespace cfura
