#pragma once

#include <numeric>
#include <vector>

#include "matcore.hpp"

namespace fdeq {

// Orthogonal projections p_0..p_k summing to 1 in M x M matrices, p_i of rank N_i.
struct RectSpace {
  std::vector<int> sizes;

  RectSpace() = default;
  explicit RectSpace(std::vector<int> s) : sizes(std::move(s)) {
    if (sizes.empty()) fail(ErrorKind::Size, "RectSpace: no blocks");
    for (int v : sizes)
      if (v < 1) fail(ErrorKind::Size, "RectSpace: block sizes must be positive");
  }

  int blocks() const { return static_cast<int>(sizes.size()); }
  int M() const { return std::accumulate(sizes.begin(), sizes.end(), 0); }
  int offset(int i) const { return std::accumulate(sizes.begin(), sizes.begin() + i, 0); }
  double weight(int i) const { return static_cast<double>(sizes.at(i)) / M(); }
  std::vector<double> weights() const {
    std::vector<double> w;
    for (int i = 0; i < blocks(); ++i) w.push_back(weight(i));
    return w;
  }

  CMatrix projection(int i) const {
    CMatrix P = CMatrix::Zero(M(), M());
    P.block(offset(i), offset(i), sizes.at(i), sizes.at(i)).setIdentity();
    return P;
  }

  void check_block(int i) const {
    if (i < 0 || i >= blocks()) fail(ErrorKind::Bounds, "RectSpace: block index " + std::to_string(i));
  }

  bool operator==(const RectSpace& o) const { return sizes == o.sizes; }
};

// a = p_i a p_j, stored as its N_i x N_j block only
struct SimpleElement {
  RectSpace space;
  int row_block = 0;
  int col_block = 0;
  CMatrix data;
  bool zero = false;  // product of incompatible blocks

  CMatrix ambient() const {
    CMatrix A = CMatrix::Zero(space.M(), space.M());
    if (!zero) A.block(space.offset(row_block), space.offset(col_block), data.rows(), data.cols()) = data;
    return A;
  }

  SimpleElement adjoint() const { return {space, col_block, row_block, data.adjoint(), zero}; }
};

inline SimpleElement embed(const RectSpace& space, int i, int j, const CMatrix& A) {
  space.check_block(i);
  space.check_block(j);
  if (A.rows() != space.sizes[i] || A.cols() != space.sizes[j])
    fail(ErrorKind::Dimension, "embed: matrix is " + std::to_string(A.rows()) + "x" +
                                   std::to_string(A.cols()) + ", block (" + std::to_string(i) + "," +
                                   std::to_string(j) + ") needs " + std::to_string(space.sizes[i]) +
                                   "x" + std::to_string(space.sizes[j]));
  return {space, i, j, A, false};
}

inline SimpleElement block_identity(const RectSpace& space, int i) {
  space.check_block(i);
  return {space, i, i, CMatrix::Identity(space.sizes[i], space.sizes[i]), false};
}

inline SimpleElement multiply(const SimpleElement& a, const SimpleElement& b) {
  if (!(a.space == b.space)) fail(ErrorKind::Dimension, "multiply: elements of different spaces");
  const auto& sp = a.space;
  if (a.zero || b.zero || a.col_block != b.row_block)
    return {sp, a.row_block, b.col_block,
            CMatrix::Zero(sp.sizes[a.row_block], sp.sizes[b.col_block]), true};
  return {sp, a.row_block, b.col_block, a.data * b.data, false};
}

// F(A) = sum_i p_i tau(p_i)^{-1} tau(p_i A) with tau = Tr/M
inline CMatrix cond_exp(const RectSpace& space, const CMatrix& A) {
  const int M = space.M();
  if (A.rows() != M || A.cols() != M)
    fail(ErrorKind::Dimension, "cond_exp: expected " + std::to_string(M) + "x" + std::to_string(M));
  CMatrix out = CMatrix::Zero(M, M);
  for (int i = 0; i < space.blocks(); ++i) {
    int o = space.offset(i), s = space.sizes[i];
    cplx v = A.block(o, o, s, s).trace() / static_cast<double>(s);
    out.block(o, o, s, s).diagonal().setConstant(v);
  }
  return out;
}

// tau^{(i)}(a) = tau(p_i)^{-1} tau(a) = (1/N_i) Tr(a)
inline cplx compressed_trace(const RectSpace& space, int i, const SimpleElement& a) {
  space.check_block(i);
  if (a.row_block != i || a.col_block != i)
    fail(ErrorKind::Block, "compressed_trace: element is not in diagonal block " + std::to_string(i));
  if (a.zero) return 0.0;
  return a.data.trace() / static_cast<double>(space.sizes[i]);
}

}  // namespace fdeq
