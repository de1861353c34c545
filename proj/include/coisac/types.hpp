// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace coisac {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy. Every numerical/IO failure surfaced to callers derives
// from Error so the CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateGeometry : public Error {
 public:
  explicit DegenerateGeometry(const std::string& what, int bs_index = -1)
      : Error(what), bs_index_(bs_index) {}
  int bs_index() const noexcept { return bs_index_; }

 private:
  int bs_index_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RelationMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyNeighborSet : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(const std::string& what, std::size_t batch_index, std::string term)
      : Error(what), batch_index_(batch_index), term_(std::move(term)) {}
  std::size_t batch_index() const noexcept { return batch_index_; }
  const std::string& term() const noexcept { return term_; }

 private:
  std::size_t batch_index_;
  std::string term_;
};

class MissingArtifact : public Error {
 public:
  using Error::Error;
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

}  // namespace coisac
