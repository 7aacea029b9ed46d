#pragma once

#include <Eigen/Core>

namespace dlfd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

}  // namespace dlfd
