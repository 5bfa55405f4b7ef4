#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fdeq/montecarlo.hpp"
#include "fdeq/weingarten.hpp"
#include "helpers.hpp"

using namespace fdeq;
using namespace testutil;

namespace {

ModelSpec identity_model(const CMatrix& T) {
  ModelSpec m;
  m.N = static_cast<int>(T.rows());
  m.sizes = {m.N};
  m.H = {CMatrix::Identity(m.N, m.N)};
  m.T = {T};
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

struct Stats {
  double mean = 0.0, se = 0.0;
};

template <class F>
Stats sample_stats(int n, std::mt19937_64& rng, F draw) {
  double s = 0.0, s2 = 0.0;
  for (int t = 0; t < n; ++t) {
    double v = draw(rng);
    s += v;
    s2 += v * v;
  }
  Stats out;
  out.mean = s / n;
  out.se = std::sqrt(std::max(0.0, s2 / n - out.mean * out.mean) / (n - 1));
  return out;
}

// two-sample Kolmogorov-Smirnov statistic
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST(SampleHaar, IsUnitary) {
  std::mt19937_64 rng(1);
  for (int N : {1, 2, 5, 16, 40}) {
    CMatrix U = sample_haar(N, rng);
    EXPECT_LE(max_abs(U * U.adjoint() - CMatrix::Identity(N, N)), 1e-12) << N;
  }
  EXPECT_THROW(sample_haar(0, rng), Error);
}

TEST(SampleHaar, EntryMomentsWithinThreeSigma) {
  std::mt19937_64 rng(2);
  const int N = 4, n = 100000;
  auto second = sample_stats(n, rng, [&](auto& r) { return std::norm(sample_haar(N, r)(0, 0)); });
  EXPECT_LE(std::abs(second.mean - 0.25), 3 * second.se);
  auto mixed = sample_stats(n, rng, [&](auto& r) {
    CMatrix U = sample_haar(N, r);
    return std::norm(U(0, 0) * U(1, 1));
  });
  double exact = haar_mixed_moment({1, 2}, {1, 2}, {1, 2}, {1, 2}, N);
  EXPECT_NEAR(exact, 1.0 / 15.0, 1e-14);
  EXPECT_LE(std::abs(mixed.mean - exact), 3 * mixed.se);
}

TEST(SampleHaar, PhaseCorrectionGivesUniformPhase) {
  // without the correction the diagonal of Q has a biased phase; E[u11] must vanish
  std::mt19937_64 rng(3);
  const int n = 40000;
  auto re = sample_stats(n, rng, [](auto& r) { return sample_haar(3, r)(0, 0).real(); });
  EXPECT_LE(std::abs(re.mean), 3 * re.se);
}

TEST(SamplePhi, DeterministicModels) {
  std::mt19937_64 rng(4);
  auto s = sample_phi(identity_model(CMatrix::Identity(6, 6)), rng, true);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(s.eigenvalues(i), 1.0, 1e-13);
  EXPECT_EQ(s.phi.rows(), 6);
  auto t = sample_phi(identity_model(diag({3.0, -1.0, 0.5, 2.0})), rng);
  EXPECT_EQ(t.phi.size(), 0);
  std::vector<double> expect = {-1.0, 0.5, 2.0, 3.0};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(t.eigenvalues(i), expect[i], 1e-13);
}

TEST(SamplePhi, MatchesExplicitConstruction) {
  std::mt19937_64 gen(5);
  ModelSpec m;
  m.N = 5;
  m.sizes = {3, 5};
  m.H = {random_matrix(5, 3, gen), random_matrix(5, 5, gen)};
  m.T = {random_hermitian(3, gen), random_hermitian(5, gen)};
  std::mt19937_64 a(9), b(9);
  auto s = sample_phi(m, a, true);
  CMatrix U1 = sample_haar(3, b), U2 = sample_haar(5, b);
  CMatrix phi = m.H[0] * U1 * m.T[0] * U1.adjoint() * m.H[0].adjoint() +
                m.H[1] * U2 * m.T[1] * U2.adjoint() * m.H[1].adjoint();
  EXPECT_LE(max_abs(s.phi - phi), 1e-12);
  for (int i = 1; i < 5; ++i) EXPECT_LE(s.eigenvalues(i - 1), s.eigenvalues(i));
}

TEST(SamplePhi, TwoProjectionSpectrumIsSymmetricAboutOne) {
  // P + Q with two half-rank projections has eigenvalue pairs 1 +- cos(theta) in every
  // draw, so the symmetry holds sample by sample
  auto m = two_projection_model(32);
  auto spectra = simulate_spectra(m, McConfig{200, 11});
  for (const auto& ev : spectra) {
    EXPECT_GE(ev.minCoeff(), -1e-12);
    EXPECT_LE(ev.maxCoeff(), 2.0 + 1e-12);
    const auto n = ev.size();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(ev(i) + ev(n - 1 - i) - 2.0));
    EXPECT_LE(worst, 1e-12);
  }
}

TEST(McConfig, RejectsZeroTrials) {
  EXPECT_THROW(simulate_spectra(identity_model(CMatrix::Identity(2, 2)), McConfig{0, 1}), Error);
}

TEST(EmpiricalCauchy, DeterministicModelIsExact) {
  auto m = identity_model(CMatrix::Identity(4, 4));
  std::vector<cplx> zs = {{0.0, 0.1}, {2.0, 0.5}, {-3.0, 1.0}};
  auto e = empirical_cauchy(m, McConfig{1, 3}, zs);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    EXPECT_LE(std::abs(e.spectral.G[i] - 1.0 / (zs[i] - 1.0)), 1e-14);
    EXPECT_EQ(e.se_re[i], 0.0);
  }
}

TEST(EmpiricalCauchy, FarFieldAndStandardErrors) {
  CMatrix T = CMatrix::Zero(8, 8);
  for (int i = 0; i < 8; ++i) T(i, i) = i % 2 ? 1.0 : -1.0;
  ModelSpec m = identity_model(T);
  std::mt19937_64 gen(6);
  m.H = {random_matrix(8, 8, gen) / std::sqrt(8.0)};
  McConfig cfg{50, 7};
  auto spectra = simulate_spectra(m, cfg);
  std::vector<cplx> zs = {{1e6, 1.0}, {0.3, 0.2}};
  auto e = empirical_cauchy(spectra, zs);
  EXPECT_LE(std::abs(zs[0] * e.spectral.G[0] - 1.0), 1e-4);
  // standard error = sample std / sqrt(trials)
  std::vector<double> re;
  for (const auto& ev : spectra) {
    cplx g = 0.0;
    for (int l = 0; l < ev.size(); ++l) g += 1.0 / (zs[1] - ev(l));
    re.push_back((g / double(ev.size())).real());
  }
  double mean = 0.0;
  for (double v : re) mean += v;
  mean /= re.size();
  double var = 0.0;
  for (double v : re) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / (re.size() - 1));
  EXPECT_NEAR(e.spectral.G[1].real(), mean, 1e-13);
  EXPECT_NEAR(e.se_re[1], sd / std::sqrt(double(re.size())), 1e-13);
  EXPECT_GT(e.se_im[1], 0.0);
}

TEST(EmpiricalCdf, StepAndMonotone) {
  auto pm = identity_model(CMatrix::Identity(3, 3));
  // computed eigenvalues carry round-off, so the step is probed just around 1
  auto F = empirical_cdf(pm, McConfig{2, 1}, {0.0, 1.0 - 1e-12, 1.0 + 1e-12, 2.0});
  EXPECT_EQ(F, (std::vector<double>{0.0, 0.0, 1.0, 1.0}));
  auto spectra = simulate_spectra(two_projection_model(16), McConfig{20, 2});
  std::vector<double> xs;
  for (int i = 0; i <= 100; ++i) xs.push_back(-0.5 + 3.0 * i / 100);
  auto G = empirical_cdf(spectra, xs);
  for (std::size_t i = 1; i < G.size(); ++i) EXPECT_GE(G[i], G[i - 1]);
  EXPECT_EQ(G.front(), 0.0);
  EXPECT_EQ(G.back(), 1.0);
}

TEST(Reproducibility, IndependentOfThreadCount) {
  std::mt19937_64 gen(8);
  ModelSpec m = identity_model(random_hermitian(12, gen));
  m.H = {random_matrix(12, 12, gen)};
  McConfig cfg{24, 42};
  set_threads(1);
  auto a = simulate_spectra(m, cfg);
  set_threads(4);
  auto b = simulate_spectra(m, cfg);
  set_threads(0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(a[t], b[t]);
  // a single trial can be regenerated from its own stream
  auto rng = trial_stream(42, 5);
  EXPECT_EQ(sample_phi(m, rng).eigenvalues, a[5]);
  McConfig other{24, 43};
  EXPECT_NE(simulate_spectra(m, other)[0], a[0]);
}

TEST(Invariance, RightUnitaryOnHIsAbsorbed) {
  // the largest eigenvalue per trial is an independent sample; compare with a 1% KS test
  std::mt19937_64 gen(9);
  const int N = 10;
  ModelSpec m;
  m.N = N;
  m.sizes = {6, N};
  m.H = {random_matrix(N, 6, gen), random_matrix(N, N, gen) / std::sqrt(double(N))};
  m.T = {random_hermitian(6, gen), random_hermitian(N, gen)};
  ModelSpec mv = m;
  mv.H[0] = m.H[0] * sample_haar(6, gen);
  mv.H[1] = m.H[1] * sample_haar(N, gen);
  const int trials = 800;
  auto top = [](const std::vector<RVector>& s) {
    std::vector<double> v;
    for (const auto& ev : s) v.push_back(ev(ev.size() - 1));
    return v;
  };
  auto a = top(simulate_spectra(m, McConfig{trials, 1}));
  auto b = top(simulate_spectra(mv, McConfig{trials, 2}));
  double crit = 1.628 * std::sqrt(2.0 / trials);
  EXPECT_LE(ks_statistic(a, b), crit);
  // sanity: the test does see a changed model
  ModelSpec scaled = m;
  scaled.H[0] *= 1.3;
  auto c = top(simulate_spectra(scaled, McConfig{trials, 3}));
  EXPECT_GT(ks_statistic(a, c), crit);
}
