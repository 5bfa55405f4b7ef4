#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "matcore.hpp"
#include "nclattice.hpp"
#include "parallel.hpp"

namespace fdeq {

struct WeingartenTable {
  int n = 0;
  int N = 0;
  std::vector<Perm> perms;           // all of S_n, lexicographic
  std::vector<double> values;        // Wg(N, perms[i])
  std::map<std::vector<int>, double> by_type;  // cycle type -> value

  double operator()(const Perm& a) const { return of_type(cycle_type(a)); }
  double of_type(const std::vector<int>& type) const {
    auto it = by_type.find(type);
    if (it == by_type.end()) fail(ErrorKind::Size, "WeingartenTable: cycle type of wrong order");
    return it->second;
  }
};

// Wg(N, a) := (G^{-1})_{a, id} with G(a, b) = N^{#(a b^{-1})}
inline WeingartenTable build_weingarten_table(int n, int N) {
  if (n < 1 || n > 6) fail(ErrorKind::Size, "weingarten_table: n=" + std::to_string(n) + " outside 1..6");
  if (N < n)
    fail(ErrorKind::Singular, "weingarten_table: Gram matrix is singular for N=" + std::to_string(N) +
                                  " < n=" + std::to_string(n));
  WeingartenTable t;
  t.n = n;
  t.N = N;
  t.perms = all_perms(n);
  const auto m = static_cast<Eigen::Index>(t.perms.size());
  std::vector<Perm> inv;
  for (const auto& p : t.perms) inv.push_back(p.inverse());
  // scale by N^{-n} so the diagonal is 1 and entries stay O(1)
  Eigen::MatrixXd G(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      G(a, b) = std::pow(static_cast<double>(N), perm_cycles(compose(t.perms[a], inv[b])) - n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
  e(0) = 1.0;  // identity is first in lexicographic order
  Eigen::VectorXd col = G.partialPivLu().solve(e) * std::pow(static_cast<double>(N), -n);
  t.values.assign(col.data(), col.data() + m);
  for (Eigen::Index a = 0; a < m; ++a) t.by_type.emplace(cycle_type(t.perms[a]), t.values[a]);
  return t;
}

inline const WeingartenTable& weingarten_table(int n, int N) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<WeingartenTable>> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto& slot = cache[{n, N}];
  if (!slot) slot = std::make_unique<WeingartenTable>(build_weingarten_table(n, N));
  return *slot;
}

// E[u_{i1 j1} ... u_{in jn} conj(u_{i'1 j'1}) ... conj(u_{i'n j'n})], indices 1-based
inline double haar_mixed_moment(const std::vector<int>& i, const std::vector<int>& j,
                                const std::vector<int>& ip, const std::vector<int>& jp, int N) {
  if (i.size() != j.size() || ip.size() != jp.size())
    fail(ErrorKind::Shape, "haar_mixed_moment: row and column index lists differ in length");
  for (const auto* v : {&i, &j, &ip, &jp})
    for (int x : *v)
      if (x < 1 || x > N) fail(ErrorKind::Bounds, "haar_mixed_moment: index outside 1..N");
  if (i.size() != ip.size()) return 0.0;  // phase invariance
  const int n = static_cast<int>(i.size());
  if (n == 0) return 1.0;
  const auto& wg = weingarten_table(n, N);
  std::vector<const Perm*> rows, cols;
  for (const auto& a : wg.perms) {
    bool ok_r = true, ok_c = true;
    for (int k = 1; k <= n; ++k) {
      ok_r = ok_r && i[k - 1] == ip[a(k) - 1];
      ok_c = ok_c && j[k - 1] == jp[a(k) - 1];
    }
    if (ok_r) rows.push_back(&a);
    if (ok_c) cols.push_back(&a);
  }
  double acc = 0.0;
  for (const Perm* a : rows)
    for (const Perm* b : cols) acc += wg(compose(*a, b->inverse()));
  return acc;
}

// ---- block-structured moments ---------------------------------------------

// F(U D1 U* C1 ... U Dn U* Cn) = coefficient * p_block
struct BlockMoment {
  int block = 0;
  cplx coefficient = 0.0;

  // the value as a block-diagonal ambient matrix
  CMatrix ambient(const std::vector<int>& sizes) const {
    int M = 0;
    for (int s : sizes) M += s;
    CMatrix out = CMatrix::Zero(M, M);
    int off = 0;
    for (int m = 1; m <= static_cast<int>(sizes.size()); ++m) {
      if (m == block)
        out.block(off, off, sizes[m - 1], sizes[m - 1]).diagonal().setConstant(coefficient);
      off += sizes[m - 1];
    }
    return out;
  }
};

namespace detail {

inline void check_simple_shapes(const std::vector<CMatrix>& D, const std::vector<CMatrix>& C,
                                const IndexProfile& pr, const std::vector<int>& sizes) {
  const int n = pr.n;
  if (static_cast<int>(D.size()) != n || static_cast<int>(C.size()) != n)
    fail(ErrorKind::Profile, "expected " + std::to_string(n) + " D and C matrices");
  pr.check_labels(static_cast<int>(sizes.size()));
  for (int j = 1; j <= n; ++j) {
    int rj = pr.at(j), rpj = pr.at_p(j), rn = pr.at(j % n + 1);
    if (D[j - 1].rows() != sizes[rj - 1] || D[j - 1].cols() != sizes[rpj - 1])
      fail(ErrorKind::Profile, "D(" + std::to_string(j) + ") does not match blocks (" +
                                   std::to_string(rj) + "," + std::to_string(rpj) + ")");
    if (C[j - 1].rows() != sizes[rpj - 1] || C[j - 1].cols() != sizes[rn - 1])
      fail(ErrorKind::Profile, "C(" + std::to_string(j) + ") does not match blocks (" +
                                   std::to_string(rpj) + "," + std::to_string(rn) + ")");
  }
}

// unnormalized trace of the product along each cycle, multiplied over cycles
inline cplx cycle_trace_product(const std::vector<CMatrix>& X, const Perm& a) {
  cplx out = 1.0;
  for (const auto& c : a.cycles()) {
    CMatrix prod = X[c[0] - 1];
    for (std::size_t t = 1; t < c.size(); ++t) prod = prod * X[c[t] - 1];
    out *= prod.trace();
  }
  return out;
}

// members of S_n with r'(i) = r(a(i)) for all i
inline std::vector<Perm> label_compatible_perms(const IndexProfile& pr) {
  std::vector<Perm> out;
  for (auto& a : all_perms(pr.n)) {
    bool ok = true;
    for (int i = 1; i <= pr.n && ok; ++i) ok = pr.at_p(i) == pr.at(a(i));
    if (ok) out.push_back(std::move(a));
  }
  return out;
}

}  // namespace detail

// Exact E[(1/N_{r(1)}) Tr(U D1 U* C1 ... U Dn U* Cn)] for block-diagonal Haar U.
// D_j sits in block (r(j), r'(j)) and C_j in block (r'(j), r(j+1)).
inline BlockMoment finite_n_opvalued_moment(const std::vector<CMatrix>& D, const std::vector<CMatrix>& C,
                                            const IndexProfile& pr, const std::vector<int>& sizes) {
  const int n = pr.n;
  if (n < 1 || n > 6) fail(ErrorKind::Size, "finite_n_opvalued_moment: n outside 1..6");
  detail::check_simple_shapes(D, C, pr, sizes);
  const int k = static_cast<int>(sizes.size());
  std::vector<int> count(k + 1, 0);
  for (int v : pr.r) ++count[v];
  for (int m = 1; m <= k; ++m)
    if (count[m] > sizes[m - 1])
      fail(ErrorKind::Singular, "finite_n_opvalued_moment: block " + std::to_string(m) +
                                    " is smaller than the number of its factors");

  BlockMoment out;
  out.block = pr.at(1);
  auto A = detail::label_compatible_perms(pr);
  if (A.empty()) return out;
  const Perm gamma = Perm::long_cycle(n);
  std::vector<cplx> trD(A.size()), trC(A.size());
  std::vector<Perm> inv;
  for (std::size_t a = 0; a < A.size(); ++a) {
    trD[a] = detail::cycle_trace_product(D, A[a]);
    trC[a] = detail::cycle_trace_product(C, compose(A[a].inverse(), gamma));
    inv.push_back(A[a].inverse());
  }
  std::vector<cplx> partial(A.size());
  parallel_for(A.size(), [&](std::size_t a) {
    cplx acc = 0.0;
    for (std::size_t b = 0; b < A.size(); ++b) {
      Perm ba = compose(A[b], inv[a]);
      // cycles of b a^{-1} stay inside a single label class
      std::vector<std::vector<int>> types(k + 1);
      for (const auto& c : ba.cycles()) types[pr.at(c[0])].push_back(static_cast<int>(c.size()));
      double wg = 1.0;
      for (int m = 1; m <= k; ++m) {
        if (types[m].empty()) continue;
        std::sort(types[m].rbegin(), types[m].rend());
        wg *= weingarten_table(count[m], sizes[m - 1]).of_type(types[m]);
      }
      acc += trD[a] * trC[b] * wg;
    }
    partial[a] = acc;
  });
  cplx total = 0.0;
  for (const auto& p : partial) total += p;
  out.coefficient = total / static_cast<double>(sizes[out.block - 1]);
  return out;
}

// compressed trace of a product of simple elements along a cycle (cycle given as
// 1-based factor indices, starting at its smallest element)
using CycleTrace = std::function<cplx(const std::vector<int>&)>;

inline CycleTrace matrix_cycle_trace(std::vector<CMatrix> X) {
  return [X = std::move(X)](const std::vector<int>& c) {
    CMatrix prod = X[c[0] - 1];
    for (std::size_t t = 1; t < c.size(); ++t) prod = prod * X[c[t] - 1];
    return prod.trace() / static_cast<double>(prod.rows());
  };
}

enum class WeightRule {
  LeadingOrder,    // coefficient obtained from the large-N Weingarten asymptotics
  OmegaSigmaPi,    // omega(sigma, pi) as defined for admissible pairs
  OmegaSigmaKPi,   // omega(sigma, K(pi)), the variant written in the moment formula
};

namespace detail {
inline double omega_unchecked(const Perm& s, const Perm& kp, const IndexProfile& pr,
                              const std::vector<double>& w) {
  const int n = pr.n;
  double out = 1.0;
  for (int i = 1; i <= n; ++i)
    if (i < s(i)) out /= w[pr.at_p(i) - 1];
  for (int j = 1; j <= n; ++j)
    if (j < kp(j)) out /= w[pr.at(j % n + 1) - 1];
  return out;
}
}  // namespace detail

// Sum over admissible (sigma, pi) of weight * mu[sigma, pi] * tau_sigma[D] * tau_{K(pi)}[C].
// Traces are ambient (tau = c_m times the compressed trace of block m); the result
// is the compressed coefficient of p_{r(1)}.
inline BlockMoment asymptotic_nc_moment(const CycleTrace& trD, const CycleTrace& trC,
                                        const IndexProfile& pr, const std::vector<double>& weights,
                                        WeightRule rule = WeightRule::LeadingOrder) {
  if (pr.n < 1 || pr.n > 6) fail(ErrorKind::Size, "asymptotic_nc_moment: n outside 1..6");
  pr.check_labels(static_cast<int>(weights.size()));
  for (double w : weights)
    if (!(w > 0.0)) fail(ErrorKind::Degenerate, "asymptotic_nc_moment: block weight must be positive");
  const int n = pr.n;
  const int k = static_cast<int>(weights.size());
  BlockMoment out;
  out.block = pr.at(1);
  auto& L = nc_lattice(n);
  cplx total = 0.0;
  for (const auto& [sigma, pi] : nc_pairs_rrp(pr)) {
    Perm s = sigma.as_perm(), p = pi.as_perm();
    Perm kp = kreweras(pi).as_perm();
    cplx term = static_cast<double>(L.mobius(L.index_of(sigma), L.index_of(pi)));
    for (const auto& c : s.cycles()) term *= weights[pr.at(c[0]) - 1] * trD(c);
    for (const auto& c : kp.cycles()) term *= weights[pr.at_p(c[0]) - 1] * trC(c);
    double w = 1.0;
    switch (rule) {
      case WeightRule::LeadingOrder: {
        std::vector<int> cyc(k + 1, 0), size(k + 1, 0);
        for (int v : pr.r) ++size[v];
        for (const auto& c : compose(p, s.inverse()).cycles()) ++cyc[pr.at(c[0])];
        for (int m = 1; m <= k; ++m) w *= std::pow(weights[m - 1], cyc[m] - 2 * size[m]);
        break;
      }
      case WeightRule::OmegaSigmaPi:
        w = detail::omega_unchecked(s, kp, pr, weights);
        break;
      case WeightRule::OmegaSigmaKPi:
        w = detail::omega_unchecked(s, kreweras(kreweras(pi)).as_perm(), pr, weights);
        break;
    }
    total += term * w;
  }
  out.coefficient = total / weights[out.block - 1];
  return out;
}

struct LeadingOrderReport {
  int exponent = 0;              // 2n - #(a)
  double coefficient = 0.0;      // product over cycles of (-1)^{|c|-1} Cat(|c|-1)
  std::vector<std::pair<int, double>> scaled;  // (N, N^{2n-#(a)} Wg(N,a))
  double observed_order = 0.0;   // fitted decay exponent of the correction
};

inline LeadingOrderReport wg_leading_order(const Perm& a, const std::vector<int>& Ns) {
  LeadingOrderReport rep;
  const int n = a.n;
  rep.exponent = 2 * n - perm_cycles(a);
  rep.coefficient = 1.0;
  for (int len : cycle_type(a))
    rep.coefficient *= ((len - 1) % 2 ? -1.0 : 1.0) * static_cast<double>(catalan(len - 1));
  for (int N : Ns) {
    double v = std::pow(static_cast<double>(N), rep.exponent) * weingarten_table(n, N)(a);
    rep.scaled.emplace_back(N, v);
  }
  if (rep.scaled.size() >= 2) {
    auto [N1, v1] = rep.scaled[rep.scaled.size() - 2];
    auto [N2, v2] = rep.scaled.back();
    double e1 = std::abs(v1 - rep.coefficient), e2 = std::abs(v2 - rep.coefficient);
    if (e1 > 0 && e2 > 0)
      rep.observed_order = std::log(e1 / e2) / std::log(static_cast<double>(N2) / N1);
  }
  return rep;
}

// block (i, j) of A for the given block sizes, 1-based
inline CMatrix block_of(const CMatrix& A, const std::vector<int>& sizes, int i, int j) {
  int oi = 0, oj = 0;
  for (int t = 1; t < i; ++t) oi += sizes[t - 1];
  for (int t = 1; t < j; ++t) oj += sizes[t - 1];
  return A.block(oi, oj, sizes[i - 1], sizes[j - 1]);
}

struct MomentComparison {
  cplx finite = 0.0;
  cplx asymptotic = 0.0;
};

// E[(1/N_b) Tr(p_b U D U* C ... U D U* C)] with n factors of D and C, summed over
// all block paths starting in block b, both exactly and from the large-N formula
inline MomentComparison block_path_moment(const CMatrix& D, const CMatrix& C, const std::vector<int>& sizes, int n, int b) {
  const int k = static_cast<int>(sizes.size());
  std::vector<double> w;
  int M = 0;
  for (int s : sizes) M += s;
  for (int s : sizes) w.push_back(static_cast<double>(s) / M);
  MomentComparison out;
  std::vector<int> labels(2 * n, 1);
  while (true) {
    std::vector<int> r(n), rp(n);
    for (int j = 0; j < n; ++j) r[j] = labels[2 * j], rp[j] = labels[2 * j + 1];
    if (r[0] == b) {
      IndexProfile pr(r, rp);
      std::vector<CMatrix> Ds, Cs;
      for (int j = 1; j <= n; ++j) {
        Ds.push_back(block_of(D, sizes, pr.at(j), pr.at_p(j)));
        Cs.push_back(block_of(C, sizes, pr.at_p(j), pr.at(j % n + 1)));
      }
      out.finite += finite_n_opvalued_moment(Ds, Cs, pr, sizes).coefficient;
      out.asymptotic +=
          asymptotic_nc_moment(matrix_cycle_trace(Ds), matrix_cycle_trace(Cs), pr, w).coefficient;
    }
    int pos = 0;
    while (pos < 2 * n && labels[pos] == k) labels[pos++] = 1;
    if (pos == 2 * n) break;
    ++labels[pos];
  }
  return out;
}

}  // namespace fdeq
