#pragma once

#include <Eigen/Dense>

namespace vbspca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace vbspca
