#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "matcore.hpp"
#include "parallel.hpp"
#include "transforms.hpp"

namespace fdeq {

// Phi = sum_i H_i U_i T_i U_i^* H_i^*, H_i of size N x N_i, T_i hermitian N_i x N_i
struct ModelSpec {
  int N = 0;
  std::vector<int> sizes;
  std::vector<CMatrix> H;
  std::vector<CMatrix> T;

  int k() const { return static_cast<int>(H.size()); }

  void validate() const {
    if (N < 1) fail(ErrorKind::Dimension, "model: N must be positive");
    if (H.size() != T.size() || H.size() != sizes.size() || H.empty())
      fail(ErrorKind::Dimension, "model: H, T and sizes must all have k >= 1 entries");
    for (int i = 0; i < k(); ++i) {
      std::string tag = "model term " + std::to_string(i + 1) + ": ";
      if (sizes[i] < 1) fail(ErrorKind::Dimension, tag + "N_i must be positive");
      if (H[i].rows() != N || H[i].cols() != sizes[i])
        fail(ErrorKind::Dimension, tag + "H is " + std::to_string(H[i].rows()) + "x" +
                                       std::to_string(H[i].cols()) + ", expected " + std::to_string(N) +
                                       "x" + std::to_string(sizes[i]));
      if (T[i].rows() != sizes[i] || T[i].cols() != sizes[i])
        fail(ErrorKind::Dimension, tag + "T must be " + std::to_string(sizes[i]) + "x" + std::to_string(sizes[i]));
      if (!is_hermitian(T[i])) fail(ErrorKind::Domain, tag + "T is not hermitian");
    }
  }
};

struct PaddedT {
  CMatrix T;
  double scale = 1.0;  // n / N_i: factor applied to every normalized moment
};

// embeds an n x n T in the top-left corner of an N_i x N_i zero matrix
inline PaddedT pad_rectangular_T(const CMatrix& T, int target) {
  if (T.rows() != T.cols()) fail(ErrorKind::Dimension, "pad_rectangular_T: T is not square");
  if (T.rows() > target) fail(ErrorKind::Size, "pad_rectangular_T: target smaller than T");
  PaddedT out;
  out.T = CMatrix::Zero(target, target);
  out.T.topLeftCorner(T.rows(), T.cols()) = T;
  out.scale = static_cast<double>(T.rows()) / target;
  return out;
}

enum class SolverMethod { Newton, Picard };

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 2000;      // Picard iterations
  int newton_max_iter = 60;
  double damping = 0.5;     // Picard relaxation theta
  SolverMethod method = SolverMethod::Newton;
  bool store_W = false;
  bool warm_start = true;   // grid sweeps reuse the previous point
  int levels_per_decade = 4;
  int chunk = 32;           // grid points per independently seeded sweep
  RTransformOptions rtrans;
};

struct FDESolution {
  cplx z = 0.0;
  std::vector<cplx> f;
  std::vector<cplx> omega;  // subordination points, f_j = G_{T_j}(omega_j)
  cplx G = 0.0;
  CMatrix W;                // empty unless requested
  int iterations = 0;
  double residual = 0.0;
  bool continuation = false;  // reached through the eta ladder
};

class FdeSystem {
 public:
  explicit FdeSystem(const ModelSpec& model) : model_(model) {
    model_.validate();
    const int k = model_.k();
    B_.resize(k);
    trB_.resize(k);
    for (int i = 0; i < k; ++i) {
      B_[i] = model_.H[i] * model_.H[i].adjoint();
      trB_[i] = B_[i].trace().real();
      mu_.push_back(matrix_measure(model_.T[i]));
      bool t_zero = mu_[i].atoms() == 1 && mu_[i].loc[0] == 0.0;
      bool b_zero = max_abs(B_[i]) == 0.0;
      if (!t_zero && !b_zero) active_.push_back(i);
      b_is_zero_.push_back(b_zero);
    }
    detect_commuting();
    double S = 0.0;
    lo_ = hi_ = 0.0;
    for (int i = 0; i < k; ++i) {
      double nb = norm_B(i);
      S += nb * std::max(std::abs(mu_[i].lo()), std::abs(mu_[i].hi()));
      lo_ += nb * std::min(0.0, mu_[i].lo());
      hi_ += nb * std::max(0.0, mu_[i].hi());
    }
    scale_ = std::max(1.0, S);
    r_guard_ = 1e6 * scale_;
  }

  const ModelSpec& model() const { return model_; }
  bool diagonal() const { return diagonal_; }
  const SpectralMeasure& measure(int i) const { return mu_[i]; }
  // interval containing the spectrum of Phi
  std::pair<double, double> support_bound() const { return {lo_, hi_}; }
  double scale() const { return scale_; }
  int unknowns() const { return static_cast<int>(active_.size()); }

  // ---- Newton in the subordination variables ----------------------------

  // Solve at z starting from omega (over active terms). Returns nullopt when
  // Newton fails or lands on a non-physical root.
  std::optional<FDESolution> newton(cplx z, std::vector<cplx> omega, const SolveOptions& opt) const {
    const int a = unknowns();
    Eval e;
    if (!evaluate(z, omega, true, e)) return std::nullopt;
    double res = max_residual(e);
    int it = 0;
    for (;; ++it) {
      double scale = 1.0;
      for (auto v : e.f) scale = std::max(scale, std::abs(v));
      if (res <= opt.tol * 1e-2 * scale || (a == 0)) break;
      if (it >= opt.newton_max_iter) return std::nullopt;
      Eigen::VectorXcd r(a);
      for (int j = 0; j < a; ++j) r(j) = e.res[j];
      Eigen::VectorXcd step = e.J.partialPivLu().solve(-r);
      if (!step.allFinite()) return std::nullopt;
      double lam = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls, lam *= 0.5) {
        std::vector<cplx> trial(omega);
        bool upper = true;
        for (int j = 0; j < a; ++j) {
          trial[j] += lam * step(j);
          upper = upper && trial[j].imag() > 0.0;
        }
        if (!upper) continue;
        Eval et;
        if (!evaluate(z, trial, true, et)) continue;
        double rt = max_residual(et);
        if (rt < res) {
          omega = std::move(trial);
          e = std::move(et);
          res = rt;
          moved = true;
          break;
        }
      }
      if (!moved) {
        // stalled at round-off level is still a solution
        double scale2 = 1.0;
        for (auto v : e.f) scale2 = std::max(scale2, std::abs(v));
        if (res <= opt.tol * scale2) break;
        return std::nullopt;
      }
    }
    double scale = 1.0;
    for (auto v : e.f) scale = std::max(scale, std::abs(v));
    if (res > opt.tol * scale) return std::nullopt;
    if (!physical(z, e)) return std::nullopt;
    return finish(z, omega, e, it, res, opt);
  }

  // leading-order guess f_j ~ Tr(B_j) / (N_j z)
  std::vector<cplx> initial_omega(cplx z) const {
    std::vector<cplx> om;
    for (int i : active_) {
      cplx f0 = trB_[i] / (static_cast<double>(model_.sizes[i]) * z);
      om.push_back(1.0 / f0 + mu_[i].mean());
    }
    return om;
  }

  // eta continuation at fixed Re z from a height where the leading-order guess
  // is accurate, optionally seeded with omega at that top height
  std::optional<FDESolution> ladder(cplx z, const SolveOptions& opt,
                                    std::optional<std::vector<cplx>> top_seed = std::nullopt) const {
    const double eta = z.imag();
    double top = std::max(eta, scale_);
    std::optional<FDESolution> cur;
    int total = 0;
    for (int attempt = 0; attempt < 8 && !cur; ++attempt, top *= 10.0) {
      cplx zt(z.real(), top);
      auto seed = (attempt == 0 && top_seed) ? *top_seed : initial_omega(zt);
      cur = newton(zt, seed, opt);
      if (!cur && top_seed && attempt == 0) cur = newton(zt, initial_omega(zt), opt);
    }
    if (!cur) return std::nullopt;
    total += cur->iterations;
    double h = cur->z.imag();
    const double step = std::pow(10.0, -1.0 / std::max(1, opt.levels_per_decade));
    double factor = step;
    while (h > eta) {
      double next = std::max(eta, h * factor);
      if (next > eta && next < eta * 1.0000001) next = eta;
      auto sol = newton(cplx(z.real(), next), cur->omega, opt);
      if (!sol) {
        factor = std::sqrt(factor);
        if (factor > 0.999) return std::nullopt;
        continue;
      }
      total += sol->iterations;
      cur = std::move(sol);
      h = next;
      factor = std::min(step, factor * factor);
    }
    cur->iterations = total;
    cur->continuation = true;
    return cur;
  }

  // ---- damped Picard in f ------------------------------------------------

  std::optional<FDESolution> picard(cplx z, const SolveOptions& opt) const {
    const int k = model_.k();
    std::vector<cplx> f(k), xs(k);
    std::vector<bool> have_x(k, false);
    for (int i = 0; i < k; ++i) f[i] = trB_[i] / (static_cast<double>(model_.sizes[i]) * z);
    std::vector<cplx> R(k, 0.0);
    for (int it = 1; it <= opt.max_iter; ++it) {
      for (int i : active_) {
        if (mu_[i].spread() == 0.0) {
          R[i] = mu_[i].loc[0];
          continue;
        }
        try {
          auto inv = r_transform_newton(mu_[i], f[i], opt.rtrans,
                                        have_x[i] ? std::optional<cplx>(xs[i]) : std::nullopt);
          R[i] = inv.R;
          xs[i] = inv.x;
          have_x[i] = true;
        } catch (const Error&) {
          return std::nullopt;
        }
      }
      cplx G;
      std::vector<cplx> F;
      CMatrix W;
      if (!apply(z, R, F, G, opt.store_W ? &W : nullptr)) return std::nullopt;
      double change = 0.0, res = 0.0;
      for (int i = 0; i < k; ++i) {
        res = std::max(res, std::abs(f[i] - F[i]));
        cplx nf = (1.0 - opt.damping) * f[i] + opt.damping * F[i];
        change = std::max(change, std::abs(nf - f[i]) / std::max(1e-300, std::abs(nf)));
        f[i] = nf;
      }
      if (change <= opt.tol) {
        FDESolution s;
        s.z = z;
        s.f = f;
        s.G = G;
        s.W = std::move(W);
        s.iterations = it;
        s.residual = res;
        for (int i : active_) s.omega.push_back(R[i] + 1.0 / f[i]);
        return s;
      }
    }
    return std::nullopt;
  }

  // residual max_j |f_j - Phi_j(f)| of a reported solution, recomputed through the
  // R-transform route. G_T is not injective on the upper half-plane, so the
  // inversion starts from the solution's own subordination point to stay on its branch.
  double check_residual(const FDESolution& s, const RTransformOptions& ro = {}) const {
    std::vector<cplx> R(model_.k(), 0.0);
    for (std::size_t t = 0; t < active_.size(); ++t) {
      int i = active_[t];
      std::optional<cplx> start;
      if (t < s.omega.size()) start = s.omega[t];
      R[i] = mu_[i].spread() == 0.0 ? cplx(mu_[i].loc[0]) : r_transform_newton(mu_[i], s.f[i], ro, start).R;
    }
    std::vector<cplx> F;
    cplx G;
    if (!apply(s.z, R, F, G, nullptr)) return std::numeric_limits<double>::infinity();
    double res = 0.0;
    for (int i = 0; i < model_.k(); ++i) res = std::max(res, std::abs(s.f[i] - F[i]));
    return res;
  }

 private:
  struct Eval {
    std::vector<cplx> f;    // all k terms
    std::vector<cplx> R;    // all k terms
    std::vector<cplx> res;  // active terms
    Eigen::MatrixXcd J;
    cplx G = 0.0;
    CMatrix W;
  };

  double norm_B(int i) const {
    if (diagonal_) {
      double m = 0.0;
      for (const auto& g : groups_) m = std::max(m, g.b[i]);
      return m;
    }
    return hermitian_eig(B_[i], false).values.maxCoeff();
  }

  void detect_commuting() {
    const int k = model_.k();
    const int N = model_.N;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        double s = max_abs(B_[i]) * max_abs(B_[j]);
        if (s > 0 && max_abs(B_[i] * B_[j] - B_[j] * B_[i]) > 1e-10 * s * N) return;
      }
    CMatrix mix = CMatrix::Zero(N, N);
    for (int i = 0; i < k; ++i) {
      double a = 1.0 / (1.0 + 0.6180339887498949 * i + 0.1 * i * i);
      double s = max_abs(B_[i]);
      if (s > 0) mix += (a / s) * B_[i];
    }
    auto ed = hermitian_eig(mix, true);
    std::vector<std::vector<double>> diag(k, std::vector<double>(N));
    for (int i = 0; i < k; ++i) {
      CMatrix D = ed.vectors.adjoint() * B_[i] * ed.vectors;
      double s = std::max(1e-300, max_abs(B_[i]));
      CMatrix off = D;
      off.diagonal().setZero();
      if (max_abs(off) > 1e-9 * s) return;
      for (int l = 0; l < N; ++l) diag[i][l] = D(l, l).real();
    }
    // merge profiles (b_1, ..., b_k) that agree to round-off into weighted groups
    std::vector<int> idx(N);
    for (int l = 0; l < N; ++l) idx[l] = l;
    auto row = [&](int l) {
      std::vector<double> r(k);
      for (int i = 0; i < k; ++i) r[i] = diag[i][l];
      return r;
    };
    std::vector<double> tol(k);
    for (int i = 0; i < k; ++i) tol[i] = 1e-12 * std::max(1e-300, max_abs(B_[i]));
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return row(a) < row(b); });
    for (int l : idx) {
      auto r = row(l);
      bool same = !groups_.empty();
      for (int i = 0; i < k && same; ++i) same = std::abs(groups_.back().b[i] - r[i]) <= tol[i];
      if (same) {
        auto& g = groups_.back();
        g.count += 1.0;
        for (int i = 0; i < k; ++i) g.b[i] += (r[i] - g.b[i]) / g.count;
      } else {
        groups_.push_back({r, 1.0});
      }
    }
    eigvecs_ = ed.vectors;
    bdiag_ = std::move(diag);
    diagonal_ = true;
  }

  // F_j = (1/N_j) Tr(W B_j) and G = (1/N) Tr W for W = (z - sum B_i R_i)^{-1};
  // also dF_j/dR_i when jac is given
  bool apply(cplx z, const std::vector<cplx>& R, std::vector<cplx>& F, cplx& G, CMatrix* W,
             Eigen::MatrixXcd* jac = nullptr) const {
    const int k = model_.k();
    const int N = model_.N;
    F.assign(k, 0.0);
    if (jac) *jac = Eigen::MatrixXcd::Zero(k, k);
    if (diagonal_) {
      G = 0.0;
      std::vector<cplx> wdiag;
      if (W) wdiag.reserve(N);
      for (const auto& g : groups_) {
        cplx d = z;
        for (int i = 0; i < k; ++i) d -= g.b[i] * R[i];
        if (d == 0.0) return false;
        cplx w = 1.0 / d;
        G += g.count * w;
        for (int j = 0; j < k; ++j) F[j] += g.count * g.b[j] * w;
        if (jac)
          for (int j = 0; j < k; ++j)
            for (int i = 0; i < k; ++i) (*jac)(j, i) += g.count * g.b[j] * g.b[i] * w * w;
      }
      G /= static_cast<double>(N);
      for (int j = 0; j < k; ++j) F[j] /= static_cast<double>(model_.sizes[j]);
      if (jac)
        for (int j = 0; j < k; ++j) jac->row(j) /= static_cast<double>(model_.sizes[j]);
      if (W) *W = dense_W(z, R);
      return std::isfinite(G.real()) && std::isfinite(G.imag());
    }
    CMatrix A = z * CMatrix::Identity(N, N);
    for (int i = 0; i < k; ++i)
      if (R[i] != 0.0) A -= R[i] * B_[i];
    CMatrix Winv;
    try {
      Winv = solve_linear(A, CMatrix::Identity(N, N));
    } catch (const Error&) {
      return false;
    }
    G = Winv.trace() / static_cast<double>(N);
    std::vector<CMatrix> X(k);
    for (int j = 0; j < k; ++j) {
      F[j] = Winv.cwiseProduct(B_[j].transpose()).sum() / static_cast<double>(model_.sizes[j]);
      if (jac) X[j] = Winv * B_[j];
    }
    if (jac)
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i)
          (*jac)(j, i) = X[i].cwiseProduct(X[j].transpose()).sum() / static_cast<double>(model_.sizes[j]);
    if (W) *W = std::move(Winv);
    return std::isfinite(G.real()) && std::isfinite(G.imag());
  }

  CMatrix dense_W(cplx z, const std::vector<cplx>& R) const {
    const int N = model_.N;
    if (!diagonal_) {
      CMatrix A = z * CMatrix::Identity(N, N);
      for (int i = 0; i < model_.k(); ++i) A -= R[i] * B_[i];
      return solve_linear(A, CMatrix::Identity(N, N));
    }
    CVector d(N);
    for (int l = 0; l < N; ++l) {
      cplx v = z;
      for (int i = 0; i < model_.k(); ++i) v -= bdiag_[i][l] * R[i];
      d(l) = 1.0 / v;
    }
    return eigvecs_ * d.asDiagonal() * eigvecs_.adjoint();
  }

  bool evaluate(cplx z, const std::vector<cplx>& omega, bool want_jac, Eval& e) const {
    const int k = model_.k();
    const int a = unknowns();
    e.f.assign(k, 0.0);
    e.R.assign(k, 0.0);
    std::vector<cplx> df(k, 0.0), dR(k, 0.0);
    for (int t = 0; t < a; ++t) {
      int i = active_[t];
      auto [g, dg] = cauchy_with_derivative(mu_[i], omega[t]);
      if (g == 0.0 || !std::isfinite(g.real()) || !std::isfinite(g.imag())) return false;
      e.f[i] = g;
      df[i] = dg;
      e.R[i] = omega[t] - 1.0 / g;
      dR[i] = 1.0 + dg / (g * g);
    }
    std::vector<cplx> F;
    Eigen::MatrixXcd dF;
    if (!apply(z, e.R, F, e.G, nullptr, want_jac ? &dF : nullptr)) return false;
    e.res.resize(a);
    for (int t = 0; t < a; ++t) e.res[t] = e.f[active_[t]] - F[active_[t]];
    // terms without an unknown report their trace directly
    for (int i = 0; i < k; ++i)
      if (std::find(active_.begin(), active_.end(), i) == active_.end()) e.f[i] = b_is_zero_[i] ? cplx(0.0) : F[i];
    if (want_jac) {
      e.J = Eigen::MatrixXcd::Zero(a, a);
      for (int s = 0; s < a; ++s)
        for (int t = 0; t < a; ++t) {
          int j = active_[s], i = active_[t];
          e.J(s, t) = (s == t ? df[j] : cplx(0.0)) - dF(j, i) * dR[i];
        }
    }
    return true;
  }

  static double max_residual(const Eval& e) {
    double r = 0.0;
    for (auto v : e.res) r = std::max(r, std::abs(v));
    return r;
  }

  // rejects the spurious root where some f_j collapses to 0 and R_j escapes to infinity
  // The true W is a conditional expectation of (z - Phi)^{-1} with the spectrum of Phi in
  // [lo, hi], so -Im W >= eta / (d^2 + eta^2) with d the farthest distance to the
  // support; the spurious root violates this by orders of magnitude.
  bool physical(cplx z, const Eval& e) const {
    const double eta = z.imag();
    if (!(eta > 0)) return true;
    const double d = std::max(std::abs(z.real() - lo_), std::abs(z.real() - hi_));
    const double floor = 0.5 * eta / (d * d + eta * eta);
    for (int i : active_) {
      if (!(e.f[i].imag() < 0.0)) return false;
      if (-e.f[i].imag() < floor * trB_[i] / model_.sizes[i]) return false;
      if (std::abs(e.R[i]) > r_guard_) return false;
      if (e.R[i].imag() > 1e-8 * (1.0 + std::abs(e.R[i]))) return false;
    }
    return -e.G.imag() >= floor;
  }

  FDESolution finish(cplx z, const std::vector<cplx>& omega, const Eval& e, int it, double res,
                     const SolveOptions& opt) const {
    FDESolution s;
    s.z = z;
    s.f = e.f;
    s.omega = omega;
    s.G = e.G;
    s.iterations = it;
    s.residual = res;
    if (opt.store_W) s.W = dense_W(z, e.R);
    return s;
  }

  struct Group {
    std::vector<double> b;
    double count;
  };

  ModelSpec model_;
  std::vector<CMatrix> B_;
  std::vector<double> trB_;
  std::vector<SpectralMeasure> mu_;
  std::vector<int> active_;
  std::vector<bool> b_is_zero_;
  bool diagonal_ = false;
  std::vector<Group> groups_;
  CMatrix eigvecs_;
  std::vector<std::vector<double>> bdiag_;
  double lo_ = 0.0, hi_ = 0.0, scale_ = 1.0, r_guard_ = 1e6;
};

// ---- public entry points ----------------------------------------------------

inline FDESolution solve_point(const FdeSystem& sys, cplx z, const SolveOptions& opt = {},
                               std::optional<std::vector<cplx>> omega_start = std::nullopt) {
  if (!(z.imag() > 0)) fail(ErrorKind::Domain, "solve_point: Im z must be positive");
  std::optional<FDESolution> s;
  if (opt.method == SolverMethod::Picard) {
    s = sys.picard(z, opt);
  } else {
    if (omega_start) s = sys.newton(z, *omega_start, opt);
    if (!s) s = sys.ladder(z, opt);
  }
  if (!s) fail(ErrorKind::FixedPoint, "no convergence at z = " + format_complex(z));
  return *s;
}

inline FDESolution solve_point(const ModelSpec& model, cplx z, const SolveOptions& opt = {}) {
  return solve_point(FdeSystem(model), z, opt);
}

struct LineGrid {
  double x_min = -1.0, x_max = 1.0;
  int points = 101;
  double eta = 0.05;

  std::vector<cplx> points_z() const {
    if (points < 1 || !(eta > 0) || (points > 1 && !(x_max > x_min)))
      fail(ErrorKind::Grid, "grid needs points >= 1, eta > 0 and x_min < x_max");
    std::vector<cplx> z(points);
    for (int i = 0; i < points; ++i) {
      double x = points == 1 ? x_min : x_min + (x_max - x_min) * i / (points - 1);
      z[i] = cplx(x, eta);
    }
    return z;
  }
};

struct GridResult {
  SpectralFunction spectral;
  std::vector<std::optional<FDESolution>> points;
  std::vector<std::size_t> failed;
};

// Sweeps in fixed-size chunks: the first point of each chunk is reached by eta
// continuation, the rest are warm-started from their left neighbour. Chunks are
// independent, so the output does not depend on the thread count.
inline GridResult solve_grid(const FdeSystem& sys, const std::vector<cplx>& zs, const SolveOptions& opt = {}) {
  for (auto z : zs)
    if (!(z.imag() > 0)) fail(ErrorKind::Grid, "solve_grid: every grid point needs Im z > 0");
  GridResult out;
  out.points.resize(zs.size());
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, opt.chunk));
  const std::size_t nchunks = (zs.size() + chunk - 1) / chunk;
  parallel_for(nchunks, [&](std::size_t c) {
    std::optional<std::vector<cplx>> prev;
    for (std::size_t i = c * chunk; i < std::min(zs.size(), (c + 1) * chunk); ++i) {
      std::optional<FDESolution> s;
      if (opt.method == SolverMethod::Picard) {
        s = sys.picard(zs[i], opt);
      } else {
        if (opt.warm_start && prev) s = sys.newton(zs[i], *prev, opt);
        if (!s) s = sys.ladder(zs[i], opt);
      }
      if (s) prev = s->omega;
      out.points[i] = std::move(s);
    }
  });
  out.spectral.z = zs;
  out.spectral.G.resize(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    if (out.points[i]) {
      out.spectral.G[i] = out.points[i]->G;
    } else {
      out.spectral.G[i] = cplx(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
      out.failed.push_back(i);
    }
  }
  bool line = true;
  for (auto z : zs) line = line && std::abs(z.imag() - zs.front().imag()) <= 1e-12 * zs.front().imag();
  for (std::size_t i = 1; i < zs.size(); ++i) line = line && zs[i].real() > zs[i - 1].real();
  if (line && !zs.empty()) attach_density_and_cdf(out.spectral);
  return out;
}

inline GridResult solve_grid(const ModelSpec& model, const LineGrid& grid, const SolveOptions& opt = {}) {
  return solve_grid(FdeSystem(model), grid.points_z(), opt);
}

// Largest |G| disagreement between the standard solve and three randomly
// perturbed starts. Reported as a diagnostic, never used to pick a root.
inline double multistart_disagreement(const FdeSystem& sys, cplx z, const SolveOptions& opt = {},
                                      std::uint64_t seed = 7) {
  FDESolution base = solve_point(sys, z, opt);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = 0.0;
  for (int t = 0; t < 3; ++t) {
    auto om = base.omega;
    for (auto& w : om) w = cplx(w.real() * (1.0 + u(rng)), std::abs(w.imag()) * (1.0 + u(rng)) + 1e-3);
    auto s = sys.newton(z, om, opt);
    if (!s) continue;
    worst = std::max(worst, std::abs(s->G - base.G));
  }
  return worst;
}

struct MomentEstimate {
  std::vector<double> moments;  // k = 1..m
  double captured_mass = 0.0;
  double x_lo = 0.0, x_hi = 0.0, eta = 0.0;
};

// int x^k dmu with mu recovered from -Im G / pi at heights eta and eta/2,
// combined by Richardson extrapolation
inline MomentEstimate fde_moments(const FdeSystem& sys, int m, const SolveOptions& opt = {}, double eta = 0.02,
                                  double pad = 2.0) {
  if (m < 1 || m > 6) fail(ErrorKind::Size, "fde_moments: order outside 1..6");
  auto [lo, hi] = sys.support_bound();
  MomentEstimate est;
  est.x_lo = lo - pad;
  est.x_hi = hi + pad;
  est.eta = eta;
  auto integrate = [&](double h, double* mass) {
    LineGrid g{est.x_lo, est.x_hi, static_cast<int>(std::ceil((est.x_hi - est.x_lo) / (h / 8.0))) + 1, h};
    auto res = solve_grid(sys, g.points_z(), opt);
    if (!res.failed.empty()) fail(ErrorKind::FixedPoint, "fde_moments: solver failed on the quadrature grid");
    const auto& z = res.spectral.z;
    const auto& d = res.spectral.density;
    std::vector<double> mom(m + 1, 0.0);
    for (std::size_t i = 1; i < z.size(); ++i) {
      double x0 = z[i - 1].real(), x1 = z[i].real(), dx = x1 - x0;
      for (int k = 0; k <= m; ++k) mom[k] += 0.5 * dx * (std::pow(x0, k) * d[i - 1] + std::pow(x1, k) * d[i]);
    }
    *mass = mom[0];
    return mom;
  };
  double m1 = 0.0, m2 = 0.0;
  auto coarse = integrate(eta, &m1);
  auto fine = integrate(eta / 2.0, &m2);
  est.captured_mass = 2.0 * m2 - m1;
  if (m2 < 0.98)
    fail(ErrorKind::Coverage, "fde_moments: only " + format_double(m2) + " of the mass lies in the window");
  for (int k = 1; k <= m; ++k) est.moments.push_back(2.0 * fine[k] - coarse[k]);
  return est;
}

}  // namespace fdeq
