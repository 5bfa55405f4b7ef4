#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "matcore.hpp"
#include "nclattice.hpp"

namespace fdeq {

struct SpectralMeasure {
  std::vector<double> loc;
  std::vector<double> weight;

  SpectralMeasure() = default;
  SpectralMeasure(std::vector<double> l, std::vector<double> w) : loc(std::move(l)), weight(std::move(w)) {
    if (loc.size() != weight.size() || loc.empty())
      fail(ErrorKind::Shape, "SpectralMeasure: locations and weights differ in length or are empty");
    double total = 0.0;
    for (std::size_t i = 0; i < loc.size(); ++i) {
      if (!std::isfinite(loc[i]) || !(weight[i] > 0.0))
        fail(ErrorKind::Domain, "SpectralMeasure: atoms need finite locations and positive weights");
      total += weight[i];
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::Domain, "SpectralMeasure: weights do not sum to 1");
  }

  static SpectralMeasure point_mass(double c) { return SpectralMeasure({c}, {1.0}); }

  std::size_t atoms() const { return loc.size(); }
  double lo() const { return *std::min_element(loc.begin(), loc.end()); }
  double hi() const { return *std::max_element(loc.begin(), loc.end()); }
  double spread() const { return hi() - lo(); }

  double moment(int k) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < loc.size(); ++i) acc += weight[i] * std::pow(loc[i], k);
    return acc;
  }
  double mean() const { return moment(1); }
};

// G(z) = sum w / (z - t)
inline cplx cauchy(const SpectralMeasure& mu, cplx z) {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < mu.loc.size(); ++i) {
    cplx d = z - mu.loc[i];
    if (d == 0.0) fail(ErrorKind::Pole, "cauchy: z = " + format_complex(z) + " is an atom");
    acc += mu.weight[i] / d;
  }
  return acc;
}

// (G(z), G'(z))
inline std::pair<cplx, cplx> cauchy_with_derivative(const SpectralMeasure& mu, cplx z) {
  cplx g = 0.0, dg = 0.0;
  for (std::size_t i = 0; i < mu.loc.size(); ++i) {
    cplx inv = 1.0 / (z - mu.loc[i]);
    g += mu.weight[i] * inv;
    dg -= mu.weight[i] * inv * inv;
  }
  return {g, dg};
}

struct RInversion {
  cplx R = 0.0;
  cplx x = 0.0;  // G(x) = w
  int iterations = 0;
  double residual = 0.0;
};

struct RTransformOptions {
  double tol = 1e-12;
  int max_iter = 200;
  double series_radius = 1e-3;  // times 1/spread
  int series_order = 8;
};

// R(w) = K(w) - 1/w with G(K(w)) = w, found by damped Newton on x
inline RInversion r_transform_newton(const SpectralMeasure& mu, cplx w, const RTransformOptions& opt = {},
                                     std::optional<cplx> start = std::nullopt) {
  if (w == 0.0) fail(ErrorKind::Inversion, "r_transform_newton: w = 0");
  RInversion out;
  cplx x = start ? *start : 1.0 / w + mu.mean();
  // stay on the side of the real axis that G maps onto w's half-plane
  const double side = w.imag() < 0 ? 1.0 : (w.imag() > 0 ? -1.0 : 0.0);
  auto residual_at = [&](cplx y) { return std::abs(cauchy(mu, y) - w); };
  double res = residual_at(x);
  for (int it = 0; it < opt.max_iter; ++it) {
    if (res <= opt.tol) {
      out.x = x;
      out.R = x - 1.0 / w;
      out.iterations = it;
      out.residual = res;
      return out;
    }
    auto [g, dg] = cauchy_with_derivative(mu, x);
    if (dg == 0.0) break;
    cplx step = (g - w) / dg;
    double lam = 1.0;
    cplx next = x - step;
    double next_res = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      next = x - lam * step;
      bool side_ok = side == 0.0 || next.imag() * side > 0.0;
      if (side_ok) {
        next_res = residual_at(next);
        if (next_res < res) break;
      }
      lam *= 0.5;
    }
    if (lam < 1e-17) break;
    x = next;
    res = next_res;
  }
  fail(ErrorKind::Inversion, "r_transform_newton: no convergence at w = " + format_complex(w) +
                                 ", residual " + format_double(res));
}

// R(w) = sum_n kappa_n w^{n-1}
inline cplx r_transform_series(const std::vector<cplx>& kappa, cplx w, int order = -1) {
  int m = order < 0 ? static_cast<int>(kappa.size()) : order;
  if (m > static_cast<int>(kappa.size())) fail(ErrorKind::Size, "r_transform_series: order exceeds cumulants");
  cplx acc = 0.0;
  for (int n = m; n >= 1; --n) acc = acc * w + kappa[n - 1];
  return acc;
}

inline std::vector<cplx> measure_cumulants(const SpectralMeasure& mu, int order) {
  std::vector<cplx> m(order);
  for (int k = 1; k <= order; ++k) m[k - 1] = mu.moment(k);
  return moments_to_cumulants(m, order);
}

// Newton inversion with series fallback close to w = 0
inline cplx r_transform(const SpectralMeasure& mu, cplx w, const RTransformOptions& opt = {}) {
  double spread = mu.spread();
  if (spread == 0.0) return mu.loc.front();
  if (std::abs(w) <= opt.series_radius / spread)
    return r_transform_series(measure_cumulants(mu, opt.series_order), w);
  return r_transform_newton(mu, w, opt).R;
}

// ---- spectral functions ---------------------------------------------------

struct SpectralFunction {
  std::vector<cplx> z;
  std::vector<cplx> G;
  std::vector<double> density;  // optional
  std::vector<double> cdf;      // optional
  double raw_mass = 0.0;        // integral of the density before renormalization
};

inline void check_line_grid(const std::vector<cplx>& z) {
  if (z.empty()) fail(ErrorKind::Grid, "empty grid");
  double eta = z.front().imag();
  if (!(eta > 0.0)) fail(ErrorKind::Grid, "grid height must be positive");
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (std::abs(z[i].imag() - eta) > 1e-12 * std::max(1.0, eta))
      fail(ErrorKind::Grid, "grid height is not uniform");
    if (i && !(z[i].real() > z[i - 1].real())) fail(ErrorKind::Grid, "grid abscissae are not ascending");
  }
}

// -(1/pi) Im G(x + i eta) before clipping
inline std::vector<double> stieltjes_density_raw(const SpectralFunction& f) {
  check_line_grid(f.z);
  std::vector<double> d(f.G.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = -f.G[i].imag() / M_PI;
  return d;
}

inline std::vector<double> stieltjes_invert(const SpectralFunction& f) {
  auto d = stieltjes_density_raw(f);
  for (double& v : d) v = std::max(0.0, v);
  return d;
}

struct CdfResult {
  std::vector<double> cdf;
  double raw_total = 0.0;
};

// trapezoid cumulative integral; rescaled to end at 1 only when it overshoots
inline CdfResult cdf_from_density(const std::vector<double>& x, const std::vector<double>& density) {
  if (x.size() != density.size()) fail(ErrorKind::Shape, "cdf_from_density: grid and density differ in length");
  CdfResult out;
  out.cdf.assign(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) fail(ErrorKind::Grid, "cdf_from_density: grid is not ascending");
    out.cdf[i] = out.cdf[i - 1] + 0.5 * (x[i] - x[i - 1]) * (std::max(0.0, density[i]) + std::max(0.0, density[i - 1]));
  }
  out.raw_total = x.empty() ? 0.0 : out.cdf.back();
  if (out.raw_total > 1.0)
    for (double& v : out.cdf) v /= out.raw_total;
  return out;
}

inline void attach_density_and_cdf(SpectralFunction& f) {
  f.density = stieltjes_invert(f);
  std::vector<double> x;
  for (auto z : f.z) x.push_back(z.real());
  auto c = cdf_from_density(x, f.density);
  f.cdf = std::move(c.cdf);
  f.raw_mass = c.raw_total;
}

// eigenvalues with weight 1/N each; coincident eigenvalues are merged
inline SpectralMeasure matrix_measure(const CMatrix& T, double merge_tol = 1e-12) {
  if (T.rows() != T.cols() || T.rows() == 0) fail(ErrorKind::Dimension, "matrix_measure: need a non-empty square matrix");
  if (!is_hermitian(T)) fail(ErrorKind::Domain, "matrix_measure: matrix is not hermitian");
  auto ev = hermitian_eig(T, false).values;
  const double N = static_cast<double>(ev.size());
  double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<double> loc, w;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (!loc.empty() && ev(i) - loc.back() <= merge_tol * scale) {
      w.back() += 1.0 / N;
    } else {
      loc.push_back(ev(i));
      w.push_back(1.0 / N);
    }
  }
  return SpectralMeasure(std::move(loc), std::move(w));
}

}  // namespace fdeq
