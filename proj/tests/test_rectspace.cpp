#include <gtest/gtest.h>

#include <random>

#include "fdeq/rectspace.hpp"
#include "helpers.hpp"

using namespace fdeq;
using namespace testutil;

namespace {

RectSpace example_space() { return RectSpace({4, 2, 3}); }

CMatrix ambient_block(const RectSpace& sp, const CMatrix& A, int i, int j) {
  return A.block(sp.offset(i), sp.offset(j), sp.sizes[i], sp.sizes[j]);
}

// block-diagonal scalar matrix sum_i b_i p_i
CMatrix scalar_blocks(const RectSpace& sp, const std::vector<cplx>& b) {
  CMatrix out = CMatrix::Zero(sp.M(), sp.M());
  for (int i = 0; i < sp.blocks(); ++i) out += b[i] * sp.projection(i);
  return out;
}

}  // namespace

TEST(RectSpace, WeightsSumToOne) {
  auto sp = example_space();
  EXPECT_EQ(sp.M(), 9);
  double s = 0.0;
  for (double w : sp.weights()) s += w;
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_NEAR(sp.weight(1), 2.0 / 9.0, 1e-15);
  CMatrix sum = CMatrix::Zero(9, 9);
  for (int i = 0; i < sp.blocks(); ++i) sum += sp.projection(i);
  EXPECT_EQ(max_abs(sum - CMatrix::Identity(9, 9)), 0.0);
  EXPECT_THROW(RectSpace({3, 0}), Error);
  EXPECT_THROW(RectSpace(std::vector<int>{}), Error);
}

TEST(Embed, PlacesBlockAndZerosElsewhere) {
  std::mt19937_64 rng(1);
  auto sp = example_space();
  CMatrix A = random_matrix(4, 3, rng);
  auto a = embed(sp, 0, 2, A);
  CMatrix amb = a.ambient();
  EXPECT_EQ(max_abs(ambient_block(sp, amb, 0, 2) - A), 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (!(i == 0 && j == 2)) EXPECT_EQ(max_abs(ambient_block(sp, amb, i, j)), 0.0);
  try {
    embed(sp, 0, 1, A);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
  EXPECT_THROW(embed(sp, 3, 0, A), Error);
}

TEST(Multiply, IncompatibleBlocksGiveFlaggedZero) {
  std::mt19937_64 rng(2);
  auto sp = example_space();
  auto h1 = embed(sp, 0, 1, random_matrix(4, 2, rng));
  auto h2 = embed(sp, 0, 2, random_matrix(4, 3, rng));
  auto prod = multiply(h1, h2);
  EXPECT_TRUE(prod.zero);
  EXPECT_EQ(max_abs(prod.ambient()), 0.0);
  EXPECT_EQ(max_abs(h1.ambient() * h2.ambient()), 0.0);
}

TEST(Multiply, IdentityOfColumnBlock) {
  std::mt19937_64 rng(3);
  auto sp = example_space();
  CMatrix A = random_matrix(4, 2, rng);
  auto a = embed(sp, 0, 1, A);
  auto b = multiply(a, block_identity(sp, 1));
  EXPECT_FALSE(b.zero);
  EXPECT_EQ(max_abs(b.data - A), 0.0);
  EXPECT_TRUE(multiply(a, block_identity(sp, 0)).zero);
}

TEST(Multiply, MatchesAmbientProduct) {
  std::mt19937_64 rng(4);
  auto sp = example_space();
  auto h = embed(sp, 0, 2, random_matrix(4, 3, rng));
  auto t = embed(sp, 2, 2, random_hermitian(3, rng));
  auto ht = multiply(h, t);
  auto hth = multiply(ht, h.adjoint());
  EXPECT_EQ(hth.row_block, 0);
  EXPECT_EQ(hth.col_block, 0);
  CMatrix dense = h.ambient() * t.ambient() * h.ambient().adjoint();
  EXPECT_LE(max_abs(hth.ambient() - dense), 1e-12);
}

TEST(CondExp, Examples) {
  std::mt19937_64 rng(5);
  auto sp = example_space();
  const int M = sp.M();
  CMatrix I = CMatrix::Identity(M, M);
  EXPECT_LE(max_abs(cond_exp(sp, I) - I), 1e-15);
  for (int i = 0; i < sp.blocks(); ++i) EXPECT_LE(max_abs(cond_exp(sp, sp.projection(i)) - sp.projection(i)), 1e-15);
  // traceless diagonal blocks
  CMatrix A = random_matrix(M, M, rng);
  for (int i = 0; i < sp.blocks(); ++i) {
    int o = sp.offset(i), s = sp.sizes[i];
    cplx t = A.block(o, o, s, s).trace() / double(s);
    A.block(o, o, s, s).diagonal().array() -= t;
  }
  EXPECT_LE(max_abs(cond_exp(sp, A)), 1e-14);
  EXPECT_THROW(cond_exp(sp, CMatrix::Identity(M - 1, M - 1)), Error);
}

TEST(CondExp, MatchesDefiningFormula) {
  std::mt19937_64 rng(6);
  auto sp = example_space();
  const int M = sp.M();
  CMatrix A = random_matrix(M, M, rng);
  CMatrix expect = CMatrix::Zero(M, M);
  for (int i = 0; i < sp.blocks(); ++i) {
    CMatrix p = sp.projection(i);
    expect += p * ((p * A).trace() / double(M)) / sp.weight(i);
  }
  EXPECT_LE(max_abs(cond_exp(sp, A) - expect), 1e-13);
}

TEST(CondExp, IdempotentTracePreservingBimodule) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  auto sp = example_space();
  const int M = sp.M();
  for (int rep = 0; rep < 20; ++rep) {
    CMatrix A = random_matrix(M, M, rng);
    CMatrix F = cond_exp(sp, A);
    EXPECT_LE(max_abs(cond_exp(sp, F) - F), 1e-12);
    EXPECT_LE(std::abs(F.trace() / double(M) - A.trace() / double(M)), 1e-12);
    std::vector<cplx> b(3), bp(3);
    for (auto& v : b) v = cplx(g(rng), g(rng));
    for (auto& v : bp) v = cplx(g(rng), g(rng));
    CMatrix B = scalar_blocks(sp, b), Bp = scalar_blocks(sp, bp);
    EXPECT_LE(max_abs(cond_exp(sp, B * A * Bp) - B * F * Bp), 1e-12);
  }
}

TEST(CompressedTrace, Examples) {
  std::mt19937_64 rng(8);
  auto sp = example_space();
  EXPECT_NEAR(std::abs(compressed_trace(sp, 1, block_identity(sp, 1)) - 1.0), 0.0, 1e-15);
  CMatrix T = random_hermitian(3, rng);
  auto t = embed(sp, 2, 2, T);
  EXPECT_NEAR(std::abs(compressed_trace(sp, 2, t) - T.trace() / 3.0), 0.0, 1e-15);
  // tau(a) = tau(p_i) tau^{(i)}(a)
  for (int i = 0; i < sp.blocks(); ++i) {
    auto a = embed(sp, i, i, random_matrix(sp.sizes[i], sp.sizes[i], rng));
    cplx tau = a.ambient().trace() / double(sp.M());
    EXPECT_NEAR(std::abs(tau - sp.weight(i) * compressed_trace(sp, i, a)), 0.0, 1e-14);
  }
  try {
    compressed_trace(sp, 0, embed(sp, 0, 1, random_matrix(4, 2, rng)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Block);
  }
}
