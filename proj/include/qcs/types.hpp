#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace qcs {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
// Row-major so that measurement vectors a_i are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IntMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when operand shapes do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// sign with the convention sign(0) = +1.
inline int sign_of(double v) { return v >= 0.0 ? 1 : -1; }

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace qcs
