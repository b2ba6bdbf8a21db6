#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gmn {

// Row-major so that one row is one token / node / timestep.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

} // namespace gmn
