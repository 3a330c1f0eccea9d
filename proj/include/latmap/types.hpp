#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace latmap {

/// Dense row-major storage shared by every numeric module.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using SparseX = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using SparseMatrix = SparseX<double>;
using Index = Eigen::Index;

}  // namespace latmap
