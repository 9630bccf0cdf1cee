#pragma once

#include <Eigen/Core>

namespace leamvd {

/// Row-major so that each individual / image is one contiguous row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace leamvd
