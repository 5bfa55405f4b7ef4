#include <gtest/gtest.h>

#include <random>

#include "fdeq/fdesolver.hpp"
#include "helpers.hpp"

using namespace fdeq;
using namespace testutil;

namespace {

ModelSpec point_mass_model(int N) {
  ModelSpec m;
  m.N = N;
  m.sizes = {N};
  m.H = {CMatrix::Identity(N, N)};
  m.T = {CMatrix::Identity(N, N)};
  return m;
}

CMatrix half_projection(int N) {
  CMatrix P = CMatrix::Zero(N, N);
  for (int i = N / 2; i < N; ++i) P(i, i) = 1.0;
  return P;
}

ModelSpec two_projection_model(int N) {
  ModelSpec m;
  m.N = N;
  m.sizes = {N, N};
  m.H = {CMatrix::Identity(N, N), CMatrix::Identity(N, N)};
  m.T = {half_projection(N), half_projection(N)};
  return m;
}

// Cauchy transform of the arcsine law on [0, 2], the free sum of two projections of trace 1/2
cplx arcsine_G(cplx z) { return 1.0 / (std::sqrt(z) * std::sqrt(z - 2.0)); }

// generic two-term rectangular model with non-commuting H_i H_i^*
ModelSpec generic_model(int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelSpec m;
  m.N = N;
  m.sizes = {N / 2, N};
  m.H = {random_matrix(N, N / 2, rng) / std::sqrt(double(N)), random_matrix(N, N, rng) / std::sqrt(double(N))};
  CMatrix T1 = CMatrix::Zero(N / 2, N / 2);
  for (int i = 0; i < N / 2; ++i) T1(i, i) = i % 2 ? 1.0 : -0.5;
  m.T = {T1, random_hermitian(N, rng) / std::sqrt(double(N))};
  return m;
}

}  // namespace

TEST(ModelSpec, Validation) {
  auto m = point_mass_model(4);
  EXPECT_NO_THROW(m.validate());
  auto bad = m;
  bad.H[0] = CMatrix::Identity(4, 3);
  EXPECT_THROW(bad.validate(), Error);
  bad = m;
  bad.T[0](0, 1) = 1.0;
  try {
    bad.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
  bad = m;
  bad.sizes.push_back(2);
  EXPECT_THROW(bad.validate(), Error);
}

TEST(PadRectangularT, Examples) {
  auto p = pad_rectangular_T(CMatrix::Identity(2, 2), 4);
  auto mu = matrix_measure(p.T);
  ASSERT_EQ(mu.atoms(), 2u);
  EXPECT_NEAR(mu.loc[0], 0.0, 1e-15);
  EXPECT_NEAR(mu.weight[0], 0.5, 1e-15);
  EXPECT_NEAR(mu.loc[1], 1.0, 1e-15);
  EXPECT_NEAR(mu.weight[1], 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(p.scale, 0.5);

  std::mt19937_64 rng(1);
  CMatrix T = random_hermitian(3, rng);
  EXPECT_EQ(max_abs(pad_rectangular_T(T, 3).T - T), 0.0);
  auto q = pad_rectangular_T(T, 7);
  CMatrix Pm = CMatrix::Identity(3, 3), Qm = CMatrix::Identity(7, 7);
  for (int m = 1; m <= 5; ++m) {
    Pm = Pm * T;
    Qm = Qm * q.T;
    EXPECT_NEAR(std::abs(Qm.trace() / 7.0 - q.scale * Pm.trace() / 3.0), 0.0, 1e-12);
  }
  EXPECT_THROW(pad_rectangular_T(T, 2), Error);
}

TEST(SolvePoint, PointMassModel) {
  auto m = point_mass_model(6);
  for (cplx z : {cplx(0.3, 0.1), cplx(1.0, 1e-3), cplx(-2.0, 2.0)}) {
    auto s = solve_point(m, z);
    EXPECT_NEAR(std::abs(s.G - 1.0 / (z - 1.0)), 0.0, 1e-10 * std::abs(1.0 / (z - 1.0)));
    EXPECT_NEAR(std::abs(s.f[0] - 1.0 / (z - 1.0)), 0.0, 1e-10 * std::abs(1.0 / (z - 1.0)));
  }
  EXPECT_THROW(solve_point(m, cplx(0.5, 0.0)), Error);
}

TEST(SolvePoint, RotatedMatrixKeepsItsSpectrum) {
  std::mt19937_64 rng(2);
  const int N = 64;
  CMatrix T = random_hermitian(N, rng) / std::sqrt(double(N));
  ModelSpec m;
  m.N = N;
  m.sizes = {N};
  m.H = {CMatrix::Identity(N, N)};
  m.T = {T};
  auto mu = matrix_measure(T);
  FdeSystem sys(m);
  LineGrid g{-3.0, 3.0, 200, 0.05};
  auto res = solve_grid(sys, g.points_z());
  ASSERT_TRUE(res.failed.empty());
  for (std::size_t i = 0; i < res.spectral.z.size(); ++i) {
    cplx expect = cauchy(mu, res.spectral.z[i]);
    EXPECT_LE(std::abs(res.spectral.G[i] - expect), 1e-8 * std::max(1.0, std::abs(expect)));
  }
}

TEST(SolvePoint, TwoProjectionsGiveArcsineLaw) {
  FdeSystem sys(two_projection_model(16));
  for (double eta : {0.05, 1e-3})
    for (double x : {-0.5, 0.0, 0.4, 1.0, 1.7, 2.0, 2.5}) {
      cplx z(x, eta);
      auto s = solve_point(sys, z);
      EXPECT_LE(std::abs(s.G - arcsine_G(z)), 1e-8 * std::abs(arcsine_G(z))) << z;
    }
}

TEST(SolvePoint, HerglotzTailAndResidual) {
  for (std::uint64_t seed : {3u, 4u}) {
    auto m = generic_model(24, seed);
    FdeSystem sys(m);
    EXPECT_FALSE(sys.diagonal());
    for (cplx z : {cplx(-1.0, 0.05), cplx(0.0, 0.01), cplx(0.7, 0.2), cplx(2.0, 1.0)}) {
      auto s = solve_point(sys, z);
      EXPECT_LT(s.G.imag(), 0.0);
      for (auto f : s.f) EXPECT_LE(f.imag(), 0.0);
      EXPECT_LE(sys.check_residual(s), 1e-8);
    }
    for (cplx z : {cplx(100.0, 1.0), cplx(0.0, 300.0), cplx(-150.0, 50.0)}) {
      auto s = solve_point(sys, z);
      EXPECT_LE(std::abs(z * s.G - 1.0), 10.0 / std::abs(z));
    }
  }
}

TEST(SolvePoint, PicardAgreesWithNewton) {
  auto m = generic_model(16, 5);
  FdeSystem sys(m);
  SolveOptions pic;
  pic.method = SolverMethod::Picard;
  // plain Picard in f only reaches the physical branch when started away from the spectrum
  for (cplx z : {cplx(-0.5, 1.0), cplx(0.5, 2.0), cplx(3.0, 0.3), cplx(3.0, 5.0)}) {
    auto a = solve_point(sys, z);
    auto b = solve_point(sys, z, pic);
    EXPECT_LE(std::abs(a.G - b.G), 1e-9) << z;
    for (int j = 0; j < m.k(); ++j) EXPECT_LE(std::abs(a.f[j] - b.f[j]), 1e-9);
  }
}

TEST(SolvePoint, DiagonalAndDensePathsAgree) {
  // conjugating H_i by a common unitary keeps the spectrum but defeats the commuting fast path
  std::mt19937_64 rng(6);
  const int N = 12;
  ModelSpec m;
  m.N = N;
  m.sizes = {N / 2, N};
  CMatrix H1 = CMatrix::Zero(N, N / 2);
  for (int i = 0; i < N / 2; ++i) H1(2 * i, i) = 1.0 + 0.1 * i;
  CMatrix H2 = CMatrix::Zero(N, N);
  for (int i = 0; i < N; ++i) H2(i, i) = 0.5 + 0.05 * i;
  CMatrix T2 = CMatrix::Zero(N, N);
  for (int i = 0; i < N; ++i) T2(i, i) = i % 3 == 0 ? 1.0 : -1.0;
  m.H = {H1, H2};
  m.T = {CMatrix::Identity(N / 2, N / 2), T2};
  FdeSystem diag_sys(m);
  EXPECT_TRUE(diag_sys.diagonal());
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(N, N, rng));
  CMatrix V = qr.householderQ() * CMatrix::Identity(N, N);
  CMatrix W = random_matrix(N, N, rng);
  auto rot = m;
  rot.H = {V * H1, V * H2 + 1e-3 * W};  // breaks commutation slightly
  auto exact = m;
  exact.H = {V * H1, V * H2};
  FdeSystem dense_sys(exact);
  SolveOptions opt;
  opt.store_W = true;
  for (cplx z : {cplx(0.2, 0.05), cplx(1.5, 0.01), cplx(-1.0, 0.3)}) {
    auto a = solve_point(diag_sys, z, opt);
    auto b = solve_point(dense_sys, z, opt);
    EXPECT_LE(std::abs(a.G - b.G), 1e-9);
    EXPECT_NEAR(std::abs(a.W.trace() / double(N) - a.G), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(b.W.trace() / double(N) - b.G), 0.0, 1e-12);
  }
  FdeSystem perturbed(rot);
  EXPECT_FALSE(perturbed.diagonal());
  EXPECT_LE(std::abs(solve_point(perturbed, cplx(0.2, 0.05)).G - solve_point(diag_sys, cplx(0.2, 0.05)).G), 0.05);
}

TEST(SolvePoint, DegenerateTermsDropOut) {
  const int N = 8;
  auto base = point_mass_model(N);
  auto m = base;
  m.sizes.push_back(N);
  m.H.push_back(CMatrix::Zero(N, N));
  m.T.push_back(half_projection(N));
  auto s = solve_point(m, cplx(0.4, 0.1));
  EXPECT_EQ(s.f[1], cplx(0.0));
  EXPECT_LE(std::abs(s.G - 1.0 / (cplx(0.4, 0.1) - 1.0)), 1e-10);
  auto m2 = base;
  m2.sizes.push_back(N);
  m2.H.push_back(CMatrix::Identity(N, N));
  m2.T.push_back(CMatrix::Zero(N, N));
  auto s2 = solve_point(m2, cplx(0.4, 0.1));
  EXPECT_LE(std::abs(s2.G - 1.0 / (cplx(0.4, 0.1) - 1.0)), 1e-10);
  EXPECT_LE(std::abs(s2.f[1] - s2.G), 1e-10);
}

TEST(SolveGrid, SinglePointEqualsSolvePoint) {
  FdeSystem sys(generic_model(16, 7));
  cplx z(0.3, 0.02);
  auto g = solve_grid(sys, std::vector<cplx>{z});
  ASSERT_TRUE(g.points[0].has_value());
  EXPECT_EQ(g.points[0]->G, solve_point(sys, z).G);
}

TEST(SolveGrid, WarmStartMatchesColdStart) {
  FdeSystem sys(generic_model(16, 8));
  auto zs = LineGrid{-3.0, 3.0, 120, 0.02}.points_z();
  SolveOptions warm, cold;
  cold.warm_start = false;
  auto a = solve_grid(sys, zs, warm);
  auto b = solve_grid(sys, zs, cold);
  ASSERT_TRUE(a.failed.empty());
  ASSERT_TRUE(b.failed.empty());
  std::vector<int> ia, ib;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    EXPECT_LE(std::abs(a.spectral.G[i] - b.spectral.G[i]), 1e-9 * std::max(1.0, std::abs(b.spectral.G[i])));
    ia.push_back(a.points[i]->iterations);
    ib.push_back(b.points[i]->iterations);
  }
  std::sort(ia.begin(), ia.end());
  std::sort(ib.begin(), ib.end());
  EXPECT_LE(ia[ia.size() / 2], ib[ib.size() / 2]);
}

TEST(SolveGrid, DensityIsNonNegativeAndThreadIndependent) {
  FdeSystem sys(two_projection_model(32));
  auto zs = LineGrid{-0.5, 2.5, 301, 0.05}.points_z();
  set_threads(1);
  auto a = solve_grid(sys, zs);
  set_threads(3);
  auto b = solve_grid(sys, zs);
  set_threads(0);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    EXPECT_EQ(a.spectral.G[i], b.spectral.G[i]);
    EXPECT_GE(-a.spectral.G[i].imag() / M_PI, -1e-12);
  }
  auto raw = stieltjes_density_raw(a.spectral);
  for (double d : raw) EXPECT_GE(d, -1e-12);
  EXPECT_THROW(solve_grid(sys, std::vector<cplx>{cplx(0.0, 0.0)}), Error);
  EXPECT_THROW((LineGrid{1.0, 0.0, 10, 0.1}.points_z()), Error);
}

TEST(SolveGrid, MultistartAgrees) {
  FdeSystem sys(generic_model(16, 9));
  EXPECT_LE(multistart_disagreement(sys, cplx(0.1, 0.05)), 1e-8);
}

TEST(FdeMoments, PointMassAndTwoProjections) {
  auto pm = fde_moments(FdeSystem(point_mass_model(4)), 4);
  for (double v : pm.moments) EXPECT_NEAR(v, 1.0, 1e-2);
  auto tp = fde_moments(FdeSystem(two_projection_model(16)), 2);
  EXPECT_NEAR(tp.moments[0], 1.0, 1e-2);
  EXPECT_NEAR(tp.moments[1], 1.5, 2e-2);
  EXPECT_THROW(fde_moments(FdeSystem(point_mass_model(4)), 7), Error);
  try {
    fde_moments(FdeSystem(point_mass_model(4)), 2, {}, 0.02, -0.4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Coverage);
  }
}

TEST(FdeMoments, GenericModelMatchesTraceFormula) {
  // first moment is linear: tau(Phi) = sum_i (1/N) Tr(H_i H_i^*) (1/N_i) Tr(T_i)
  auto m = generic_model(16, 10);
  double expect = 0.0;
  for (int i = 0; i < m.k(); ++i)
    expect += (m.H[i] * m.H[i].adjoint()).trace().real() / m.N * m.T[i].trace().real() / m.sizes[i];
  auto est = fde_moments(FdeSystem(m), 1, {}, 0.05);
  EXPECT_NEAR(est.moments[0], expect, 1e-2);
}
