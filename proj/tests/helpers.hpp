#pragma once

#include <complex>
#include <random>
#include <vector>

#include "fdeq/matcore.hpp"
#include "fdeq/weingarten.hpp"

namespace testutil {

using fdeq::CMatrix;
using fdeq::cplx;

inline CMatrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix A(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) A(i, j) = cplx(g(rng), g(rng));
  return A;
}

inline CMatrix random_hermitian(int n, std::mt19937_64& rng) {
  CMatrix A = random_matrix(n, n, rng);
  return (A + A.adjoint()) * 0.5;
}

inline CMatrix diag(std::initializer_list<double> v) {
  CMatrix D = CMatrix::Zero(static_cast<int>(v.size()), static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) D(i, i) = x, ++i;
  return D;
}

// A tensor I_M: normalized traces of products do not depend on M
inline CMatrix kron_identity(const CMatrix& A, int M) {
  CMatrix K = CMatrix::Zero(A.rows() * M, A.cols() * M);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) K.block(i * M, j * M, M, M).diagonal().setConstant(A(i, j));
  return K;
}

using fdeq::block_of;

inline fdeq::MomentComparison full_block_moment(const CMatrix& D, const CMatrix& C, const std::vector<int>& sizes,
                                                int n, int b) {
  return fdeq::block_path_moment(D, C, sizes, n, b);
}

}  // namespace testutil
