#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace polysed {

/// Dense real matrix, row-major so that one row is one frame.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using BinaryMatrix =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that cannot be processed (too short, wrong shape, bad file).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached the optimizer.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Training material derived from a held-out partition.
class LeakageError : public Error {
 public:
  using Error::Error;
};

/// Binary frames x classes activity matrix.
struct TargetRoll {
  BinaryMatrix values;

  [[nodiscard]] Eigen::Index n_frames() const { return values.rows(); }
  [[nodiscard]] Eigen::Index n_classes() const { return values.cols(); }

  bool operator==(const TargetRoll& other) const {
    return values.rows() == other.values.rows() &&
           values.cols() == other.values.cols() && values == other.values;
  }
};

}  // namespace polysed
