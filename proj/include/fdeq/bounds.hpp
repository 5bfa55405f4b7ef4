#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "matcore.hpp"
#include "parallel.hpp"
#include "transforms.hpp"

namespace fdeq {

using ComplexFn = std::function<cplx(cplx)>;

// conformal map of the unit disc onto the upper half-plane
inline cplx psi_a(double a, cplx z) {
  if (z == 1.0) fail(ErrorKind::Pole, "psi_a: z = 1");
  if (std::abs(z) > 1.0) fail(ErrorKind::Domain, "psi_a: |z| > 1");
  return cplx(0.0, a) * (1.0 + z) / (1.0 - z);
}

struct ExtensionParams {
  double beta = 0.5;
  double c = 0.5;
  double R = 10.0;
  double T = 1.0;
  double r0 = std::exp(-0.5);
  double a = 4.0;
  double eta0 = 0.0;
  double m0 = 0.0;
};

namespace detail {
// l(s2) for the chord through (s0, -m) and (s1, log 1/(1 - e^{s1}))
inline double chord_value(double m, double beta) {
  const double s0 = -0.5;
  const double mb = std::pow(m, beta);
  const double s1 = s0 / mb, s2 = 2.0 * s0 / mb;
  const double w1 = -std::log1p(-std::exp(s1));
  return -m + (s2 - s0) * (w1 + m) / (s1 - s0);
}
}  // namespace detail

// whether the scan condition l(s2) <= -c m^{1-beta} holds (with s0 < s2 < s1)
inline bool chord_condition(double m, double beta, double c) {
  if (!(std::pow(m, beta) > 2.0)) return false;
  return detail::chord_value(m, beta) <= -c * std::pow(m, 1.0 - beta);
}

inline ExtensionParams choose_constants(double beta, double c, double R, double T) {
  if (!(beta > 0 && beta < 1) || !(c > 0 && c < 1) || !(R > 0) || !(T > 0))
    fail(ErrorKind::Parameter, "choose_constants: need beta, c in (0,1) and R, T > 0");
  ExtensionParams p;
  p.beta = beta;
  p.c = c;
  p.R = R;
  p.T = T;
  p.r0 = std::exp(-0.5);
  p.a = std::max(4.0, 1.01 * R * (1.0 + p.r0) / (1.0 - p.r0));
  p.eta0 = 1.01 * 2.0 * (p.a * p.a + T * T) / p.a;
  for (double m = 1; m <= 1e6; m += 1) {
    if (chord_condition(m, beta, c)) {
      p.m0 = m;
      return p;
    }
  }
  fail(ErrorKind::Parameter, "choose_constants: no m0 below 1e6");
}

struct ExtensionBound {
  double x_lo = 0.0, x_hi = 0.0;  // I(m) = i*height + [x_lo, x_hi]
  double height = 0.0;
  double bound = 0.0;
};

inline double extension_height(const ExtensionParams& p, double m) {
  double q = std::exp(-1.0 / std::pow(m, p.beta));
  return p.eta0 * (1.0 - q) / (1.0 + q);
}

inline ExtensionBound extension_bound(const ExtensionParams& p, double m) {
  if (!(m > p.m0)) fail(ErrorKind::Domain, "extension_bound: m must exceed m0 = " + format_double(p.m0));
  return {-p.T, p.T, extension_height(p, m), std::exp(-p.c * std::pow(m, 1.0 - p.beta))};
}

struct SupEstimate {
  double sup = 0.0;
  double m = std::numeric_limits<double>::infinity();  // -log sup
  cplx argmax = 0.0;
  double circle_R = 0.0;    // max on |z| = R
  double segments = 0.0;    // max on the real rays R <= |x| <= 3R
  double circle_3R = 0.0;   // max on |z| = 3R, bounds everything farther out
};

// Boundary sampling of sup over {|z| > R, Im z > 0} of |diff|. diff is
// holomorphic off [-A, A] and vanishes at infinity, so its modulus on the
// region is controlled by the boundary.
inline SupEstimate sup_on_delta_R(const ComplexFn& diff, double R, double A) {
  if (!(A < R)) fail(ErrorKind::Support, "sup_on_delta_R: support radius A must be below R");
  SupEstimate s;
  auto take = [&](cplx z, double& slot) {
    double v = std::abs(diff(z));
    if (!std::isfinite(v)) fail(ErrorKind::Domain, "sup_on_delta_R: non-finite value at " + format_complex(z));
    slot = std::max(slot, v);
    if (v > s.sup) {
      s.sup = v;
      s.argmax = z;
    }
  };
  const int arc = 2000;
  for (int i = 1; i <= arc; ++i) take(std::polar(R, M_PI * i / (arc + 1)), s.circle_R);
  const int seg = 1000;
  for (int i = 0; i < seg; ++i) {
    double x = R + 2.0 * R * i / (seg - 1);
    take(cplx(x, 1e-9), s.segments);
    take(cplx(-x, 1e-9), s.segments);
  }
  for (int i = 1; i <= arc; ++i) take(std::polar(3.0 * R, M_PI * i / (arc + 1)), s.circle_3R);
  s.m = s.sup > 0.0 ? -std::log(s.sup) : std::numeric_limits<double>::infinity();
  return s;
}

inline SupEstimate sup_on_delta_R(const ComplexFn& Gmu, const ComplexFn& Gnu, double R, double A) {
  return sup_on_delta_R([&](cplx z) { return Gmu(z) - Gnu(z); }, R, A);
}

struct DistanceReport {
  double m = 0.0;
  double x_lo = 0.0, x_hi = 0.0, height = 0.0;  // I(m)
  double bound = 0.0;
  double measured_max = 0.0;
  double kolmogorov = std::numeric_limits<double>::quiet_NaN();
  bool applicable = false;  // m > m0
  bool violation = false;
};

inline DistanceReport verify_extension(const ComplexFn& diff, const ExtensionParams& p, double m) {
  DistanceReport r;
  r.m = m;
  r.applicable = m > p.m0;
  r.x_lo = -p.T;
  r.x_hi = p.T;
  r.height = std::isinf(m) ? 0.0 : extension_height(p, m);
  r.bound = std::isinf(m) ? 0.0 : std::exp(-p.c * std::pow(m, 1.0 - p.beta));
  const int pts = 2001;
  std::vector<double> vals(pts);
  double h = std::isinf(m) ? extension_height(p, 1e12) : r.height;
  parallel_for(pts, [&](std::size_t i) {
    double x = -p.T + 2.0 * p.T * static_cast<double>(i) / (pts - 1);
    vals[i] = std::abs(diff(cplx(x, h)));
  });
  r.measured_max = *std::max_element(vals.begin(), vals.end());
  r.violation = r.applicable && r.measured_max > r.bound;
  return r;
}

inline DistanceReport verify_extension(const ComplexFn& Gmu, const ComplexFn& Gnu, const ExtensionParams& p, double m) {
  return verify_extension([&](cplx z) { return Gmu(z) - Gnu(z); }, p, m);
}

namespace detail {
inline double max_modulus(const ComplexFn& f, double r, int samples) {
  std::vector<double> v(samples);
  for (int i = 0; i < samples; ++i) v[i] = std::abs(f(std::polar(r, 2.0 * M_PI * i / samples)));
  int best = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  // golden-section refinement around the best sample
  double lo = 2.0 * M_PI * (best - 1) / samples, hi = 2.0 * M_PI * (best + 1) / samples;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  auto val = [&](double t) { return std::abs(f(std::polar(r, t))); };
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = val(x1), f2 = val(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = val(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = val(x1);
    }
  }
  return std::max({v[best], f1, f2});
}
}  // namespace detail

// Largest amount by which s -> log M(f, e^s) rises above the chord of its
// neighbours; Hardy's theorem says this is zero for holomorphic f.
inline double hardy_convexity_check(const ComplexFn& f, const std::vector<double>& s, int samples = 4096) {
  for (double v : s)
    if (!(v < 0.0)) fail(ErrorKind::Domain, "hardy_convexity_check: grid must lie in s < 0");
  std::vector<double> logM(s.size());
  parallel_for(s.size(), [&](std::size_t i) { logM[i] = std::log(detail::max_modulus(f, std::exp(s[i]), samples)); });
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (!std::isfinite(logM[i - 1]) || !std::isfinite(logM[i]) || !std::isfinite(logM[i + 1])) continue;
    double t = (s[i] - s[i - 1]) / (s[i + 1] - s[i - 1]);
    double chord = (1.0 - t) * logM[i - 1] + t * logM[i + 1];
    worst = std::max(worst, logM[i] - chord);
  }
  return worst;
}

// growth function of the disc-case theorem and its admissibility quantity
inline double omega_growth(double r) { return 1.0 / (1.0 - r); }
// s^alpha log omega(e^{-s}), with log omega(e^{-s}) = -log(1 - e^{-s}) kept accurate for tiny s
inline double omega_condition(double alpha, double s) { return -std::pow(s, alpha) * std::log(-std::expm1(-s)); }

struct BaiBound {
  double integral = 0.0;    // int |G_mu - G_nu|(t + i eta) dt over [-c2 A, c2 A]
  double regularity = 0.0;  // (1/eta) sup_x int_{|t|<=4eta} |F(x+t) - F(x)| dt <= 16 rho eta
  double bound = 0.0;       // c1 (integral + regularity)
};

inline BaiBound bai_bound(const ComplexFn& diff, double rho, double eta, double c1, double c2, double A,
                          int points = 4001) {
  if (!(eta > 0)) fail(ErrorKind::Domain, "bai_bound: eta must be positive");
  if (points < 2) fail(ErrorKind::Grid, "bai_bound: need at least two quadrature points");
  BaiBound b;
  const double L = c2 * A;
  double acc = 0.0, prev = 0.0;
  for (int i = 0; i < points; ++i) {
    double t = -L + 2.0 * L * i / (points - 1);
    double v = std::abs(diff(cplx(t, eta)));
    if (i) acc += 0.5 * (2.0 * L / (points - 1)) * (v + prev);
    prev = v;
  }
  b.integral = acc;
  b.regularity = 16.0 * rho * eta;
  b.bound = c1 * (b.integral + b.regularity);
  return b;
}

// sup over common grid points of |F1 - F2|
inline double kolmogorov_distance(const std::vector<double>& F1, const std::vector<double>& F2) {
  if (F1.size() != F2.size() || F1.empty()) fail(ErrorKind::Grid, "kolmogorov_distance: CDFs are not on a common grid");
  double d = 0.0;
  for (std::size_t i = 0; i < F1.size(); ++i) d = std::max(d, std::abs(F1[i] - F2[i]));
  return d;
}

// exact distance between two atomic measures: both one-sided limits at every jump
inline double kolmogorov_distance(const SpectralMeasure& mu, const SpectralMeasure& nu) {
  std::vector<std::pair<double, double>> ev;  // (location, signed weight)
  for (std::size_t i = 0; i < mu.atoms(); ++i) ev.emplace_back(mu.loc[i], mu.weight[i]);
  for (std::size_t i = 0; i < nu.atoms(); ++i) ev.emplace_back(nu.loc[i], -nu.weight[i]);
  std::sort(ev.begin(), ev.end());
  double d = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < ev.size();) {
    d = std::max(d, std::abs(acc));  // left limit
    double x = ev[i].first;
    while (i < ev.size() && ev[i].first == x) acc += ev[i++].second;
    d = std::max(d, std::abs(acc));
  }
  return d;
}

}  // namespace fdeq
