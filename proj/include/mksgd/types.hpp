#pragma once

#include <Eigen/Core>

namespace mksgd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace mksgd
