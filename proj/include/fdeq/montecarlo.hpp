#pragma once

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fdesolver.hpp"
#include "matcore.hpp"
#include "parallel.hpp"
#include "transforms.hpp"

namespace fdeq {

struct McConfig {
  int trials = 100;
  std::uint64_t seed = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// independent stream per (seed, trial), so trials can run in any order
inline std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)), static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                    static_cast<std::uint32_t>(splitmix64(trial ^ 0xA5A5A5A5ULL)),
                    static_cast<std::uint32_t>(splitmix64(trial ^ 0xA5A5A5A5ULL) >> 32)};
  return std::mt19937_64(seq);
}

inline CMatrix complex_gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CMatrix Z(rows, cols);
  // filled in a fixed order so results depend on the stream only
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      double re = g(rng);
      double im = g(rng);
      Z(i, j) = cplx(re, im);
    }
  return Z;
}

// Gaussian matrix, QR, then columns rotated by the phases of diag(R)
inline CMatrix sample_haar(int N, std::mt19937_64& rng) {
  if (N < 1) fail(ErrorKind::Size, "sample_haar: N must be positive");
  CMatrix Z = complex_gaussian(N, N, rng);
  Eigen::HouseholderQR<CMatrix> qr(Z);
  CMatrix Q = qr.householderQ() * CMatrix::Identity(N, N);
  const CMatrix& R = qr.matrixQR();
  for (int j = 0; j < N; ++j) {
    cplx d = R(j, j);
    double a = std::abs(d);
    if (a > 0) Q.col(j) *= d / a;
  }
  return Q;
}

struct PhiSample {
  RVector eigenvalues;  // ascending
  CMatrix phi;          // empty unless requested
};

inline PhiSample sample_phi(const ModelSpec& model, std::mt19937_64& rng, bool keep_matrix = false) {
  model.validate();
  CMatrix phi = CMatrix::Zero(model.N, model.N);
  for (int i = 0; i < model.k(); ++i) {
    CMatrix U = sample_haar(model.sizes[i], rng);
    CMatrix X = model.H[i] * U;
    phi += X * model.T[i] * X.adjoint();
  }
  PhiSample s;
  s.eigenvalues = hermitian_eig(phi, false).values;
  if (keep_matrix) s.phi = std::move(phi);
  return s;
}

// eigenvalues of Phi for every trial, index-aligned with the trial number
inline std::vector<RVector> simulate_spectra(const ModelSpec& model, const McConfig& cfg) {
  if (cfg.trials < 1) fail(ErrorKind::Parameter, "Monte Carlo needs at least one trial");
  model.validate();
  std::vector<RVector> out(static_cast<std::size_t>(cfg.trials));
  parallel_for(out.size(), [&](std::size_t t) {
    auto rng = trial_stream(cfg.seed, t);
    out[t] = sample_phi(model, rng).eigenvalues;
  });
  return out;
}

struct EmpiricalCauchy {
  SpectralFunction spectral;
  std::vector<double> se_re;  // standard error of Re G across trials
  std::vector<double> se_im;
};

inline EmpiricalCauchy empirical_cauchy(const std::vector<RVector>& spectra, const std::vector<cplx>& zs) {
  const std::size_t T = spectra.size();
  EmpiricalCauchy out;
  out.spectral.z = zs;
  out.spectral.G.assign(zs.size(), 0.0);
  out.se_re.assign(zs.size(), 0.0);
  out.se_im.assign(zs.size(), 0.0);
  parallel_for(zs.size(), [&](std::size_t p) {
    cplx z = zs[p];
    cplx sum = 0.0;
    double sre = 0.0, sim = 0.0;
    std::vector<cplx> per(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& ev = spectra[t];
      cplx g = 0.0;
      for (Eigen::Index l = 0; l < ev.size(); ++l) g += 1.0 / (z - ev(l));
      per[t] = g / static_cast<double>(ev.size());
      sum += per[t];
    }
    cplx mean = sum / static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) {
      sre += std::pow(per[t].real() - mean.real(), 2);
      sim += std::pow(per[t].imag() - mean.imag(), 2);
    }
    out.spectral.G[p] = mean;
    if (T > 1) {
      out.se_re[p] = std::sqrt(sre / (T - 1)) / std::sqrt(static_cast<double>(T));
      out.se_im[p] = std::sqrt(sim / (T - 1)) / std::sqrt(static_cast<double>(T));
    }
  });
  return out;
}

inline EmpiricalCauchy empirical_cauchy(const ModelSpec& model, const McConfig& cfg, const std::vector<cplx>& zs) {
  return empirical_cauchy(simulate_spectra(model, cfg), zs);
}

// pooled eigenvalue CDF across trials: fraction of eigenvalues <= x
inline std::vector<double> empirical_cdf(const std::vector<RVector>& spectra, const std::vector<double>& xs) {
  std::vector<double> pool;
  for (const auto& ev : spectra) pool.insert(pool.end(), ev.data(), ev.data() + ev.size());
  std::sort(pool.begin(), pool.end());
  std::vector<double> F(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    F[i] = static_cast<double>(std::upper_bound(pool.begin(), pool.end(), xs[i]) - pool.begin()) /
           static_cast<double>(pool.size());
  return F;
}

inline std::vector<double> empirical_cdf(const ModelSpec& model, const McConfig& cfg, const std::vector<double>& xs) {
  return empirical_cdf(simulate_spectra(model, cfg), xs);
}

}  // namespace fdeq
