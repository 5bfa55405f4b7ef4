#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"

namespace fdeq {

// ---- permutations ---------------------------------------------------------

// images[i-1] = alpha(i), ground set [n] = {1..n}
struct Perm {
  int n = 0;
  std::vector<int> images;

  Perm() = default;
  explicit Perm(std::vector<int> img) : n(static_cast<int>(img.size())), images(std::move(img)) {
    std::vector<char> seen(n + 1, 0);
    for (int v : images) {
      if (v < 1 || v > n || seen[v]) fail(ErrorKind::Domain, "Perm: images do not form a bijection");
      seen[v] = 1;
    }
  }

  int operator()(int i) const { return images[i - 1]; }

  static Perm identity(int n) {
    std::vector<int> img(n);
    std::iota(img.begin(), img.end(), 1);
    return Perm(std::move(img));
  }

  // gamma = (1 2 ... n)
  static Perm long_cycle(int n) {
    std::vector<int> img(n);
    for (int i = 0; i < n; ++i) img[i] = (i + 1) % n + 1;
    return Perm(std::move(img));
  }

  // each cycle listed as (a b c ...) meaning a->b->c->...->a
  static Perm from_cycles(int n, const std::vector<std::vector<int>>& cycles) {
    std::vector<int> img(n);
    std::iota(img.begin(), img.end(), 1);
    for (const auto& c : cycles)
      for (std::size_t t = 0; t < c.size(); ++t) img[c[t] - 1] = c[(t + 1) % c.size()];
    return Perm(std::move(img));
  }

  Perm inverse() const {
    std::vector<int> img(n);
    for (int i = 1; i <= n; ++i) img[images[i - 1] - 1] = i;
    return Perm(std::move(img));
  }

  // cycles in order of their smallest element, each starting at it
  std::vector<std::vector<int>> cycles() const {
    std::vector<std::vector<int>> out;
    std::vector<char> seen(n + 1, 0);
    for (int s = 1; s <= n; ++s) {
      if (seen[s]) continue;
      std::vector<int> c;
      for (int t = s; !seen[t]; t = images[t - 1]) {
        seen[t] = 1;
        c.push_back(t);
      }
      out.push_back(std::move(c));
    }
    return out;
  }

  bool operator==(const Perm& o) const { return images == o.images; }
  bool operator<(const Perm& o) const { return images < o.images; }
};

// (a*b)(i) = a(b(i))
inline Perm compose(const Perm& a, const Perm& b) {
  if (a.n != b.n) fail(ErrorKind::Size, "compose: permutations of different size");
  std::vector<int> img(a.n);
  for (int i = 1; i <= a.n; ++i) img[i - 1] = a(b(i));
  return Perm(std::move(img));
}

inline int perm_cycles(const Perm& a) {
  int count = 0;
  std::vector<char> seen(a.n + 1, 0);
  for (int s = 1; s <= a.n; ++s) {
    if (seen[s]) continue;
    ++count;
    for (int t = s; !seen[t]; t = a(t)) seen[t] = 1;
  }
  return count;
}

// sorted cycle lengths, descending
inline std::vector<int> cycle_type(const Perm& a) {
  std::vector<int> t;
  for (const auto& c : a.cycles()) t.push_back(static_cast<int>(c.size()));
  std::sort(t.rbegin(), t.rend());
  return t;
}

inline std::vector<Perm> all_perms(int n) {
  std::vector<int> img(n);
  std::iota(img.begin(), img.end(), 1);
  std::vector<Perm> out;
  do out.emplace_back(img);
  while (std::next_permutation(img.begin(), img.end()));
  return out;
}

// ---- non-crossing partitions ----------------------------------------------

struct NonCrossingPartition {
  int n = 0;
  std::vector<std::vector<int>> blocks;  // canonical: sorted by minimum, ascending inside

  std::size_t size() const { return blocks.size(); }
  bool operator==(const NonCrossingPartition& o) const { return n == o.n && blocks == o.blocks; }
  bool operator<(const NonCrossingPartition& o) const {
    return n != o.n ? n < o.n : blocks < o.blocks;
  }

  // block index (0-based, canonical order) of every element
  std::vector<int> labels() const {
    std::vector<int> lab(n, -1);
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (int e : blocks[b]) lab[e - 1] = static_cast<int>(b);
    return lab;
  }

  // the permutation whose cycles are the blocks traversed increasingly
  Perm as_perm() const {
    std::vector<int> img(n);
    for (const auto& b : blocks)
      for (std::size_t t = 0; t < b.size(); ++t) img[b[t] - 1] = b[(t + 1) % b.size()];
    return Perm(std::move(img));
  }

  std::string str() const {
    std::string s = "{";
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      s += b ? ",{" : "{";
      for (std::size_t t = 0; t < blocks[b].size(); ++t)
        s += (t ? "," : "") + std::to_string(blocks[b][t]);
      s += "}";
    }
    return s + "}";
  }
};

inline bool labels_noncrossing(const std::vector<int>& lab) {
  const int n = static_cast<int>(lab.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      if (lab[b] == lab[a]) continue;
      for (int c = b + 1; c < n; ++c) {
        if (lab[c] != lab[a]) continue;
        for (int d = c + 1; d < n; ++d)
          if (lab[d] == lab[b]) return false;
      }
    }
  return true;
}

inline NonCrossingPartition partition_from_labels(const std::vector<int>& lab) {
  NonCrossingPartition p;
  p.n = static_cast<int>(lab.size());
  std::map<int, int> slot;
  for (int i = 0; i < p.n; ++i) {
    auto [it, fresh] = slot.emplace(lab[i], static_cast<int>(p.blocks.size()));
    if (fresh) p.blocks.emplace_back();
    p.blocks[it->second].push_back(i + 1);
  }
  return p;
}

inline NonCrossingPartition make_partition(int n, std::vector<std::vector<int>> blocks) {
  std::vector<int> lab(n, -1);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (int e : blocks[b]) {
      if (e < 1 || e > n || lab[e - 1] >= 0)
        fail(ErrorKind::Domain, "make_partition: blocks do not partition [" + std::to_string(n) + "]");
      lab[e - 1] = static_cast<int>(b);
    }
  for (int v : lab)
    if (v < 0) fail(ErrorKind::Domain, "make_partition: blocks do not cover [" + std::to_string(n) + "]");
  if (!labels_noncrossing(lab)) fail(ErrorKind::Domain, "make_partition: blocks cross");
  return partition_from_labels(lab);
}

inline NonCrossingPartition zero_partition(int n) {
  NonCrossingPartition p{n, {}};
  for (int i = 1; i <= n; ++i) p.blocks.push_back({i});
  return p;
}

inline NonCrossingPartition one_partition(int n) {
  NonCrossingPartition p{n, {std::vector<int>(n)}};
  std::iota(p.blocks[0].begin(), p.blocks[0].end(), 1);
  return p;
}

inline std::uint64_t catalan(int n) {
  std::uint64_t c = 1;
  for (int i = 0; i < n; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
  return c;
}

namespace detail {

// Depth-first generation in lexicographic order of block labels. A new
// element may join any block still open on the stack; joining a block closes
// everything opened after it.
inline void nc_generate(int n, int i, std::vector<int>& lab, std::vector<int>& stack, int nblocks,
                        std::vector<std::vector<int>>& out) {
  if (i == n) {
    out.push_back(lab);
    return;
  }
  std::vector<int> open = stack;
  std::sort(open.begin(), open.end());
  for (int b : open) {
    auto pos = std::find(stack.begin(), stack.end(), b);
    std::vector<int> saved(pos + 1, stack.end());
    stack.erase(pos + 1, stack.end());
    lab[i] = b;
    nc_generate(n, i + 1, lab, stack, nblocks, out);
    stack.insert(stack.end(), saved.begin(), saved.end());
  }
  lab[i] = nblocks;
  stack.push_back(nblocks);
  nc_generate(n, i + 1, lab, stack, nblocks + 1, out);
  stack.pop_back();
}

}  // namespace detail

inline std::vector<std::vector<int>> enumerate_nc_labels(int n) {
  if (n < 1 || n > 10) fail(ErrorKind::Size, "enumerate_nc: n=" + std::to_string(n) + " outside 1..10");
  std::vector<std::vector<int>> out;
  std::vector<int> lab(n, 0), stack;
  detail::nc_generate(n, 0, lab, stack, 0, out);
  return out;
}

inline std::vector<NonCrossingPartition> enumerate_nc(int n) {
  std::vector<NonCrossingPartition> out;
  for (const auto& lab : enumerate_nc_labels(n)) out.push_back(partition_from_labels(lab));
  return out;
}

inline bool nc_leq(const NonCrossingPartition& s, const NonCrossingPartition& p) {
  if (s.n != p.n) fail(ErrorKind::Size, "nc_leq: partitions of different n");
  auto lp = p.labels();
  for (const auto& b : s.blocks)
    for (int e : b)
      if (lp[e - 1] != lp[b.front() - 1]) return false;
  return true;
}

// partition given by the cycles of a permutation (no geodesic check)
inline NonCrossingPartition cycles_partition(const Perm& a) {
  std::vector<int> lab(a.n);
  int b = 0;
  for (const auto& c : a.cycles()) {
    for (int e : c) lab[e - 1] = b;
    ++b;
  }
  return partition_from_labels(lab);
}

inline NonCrossingPartition kreweras(const NonCrossingPartition& p) {
  return cycles_partition(compose(p.as_perm().inverse(), Perm::long_cycle(p.n)));
}

inline std::optional<NonCrossingPartition> perm_to_nc(const Perm& a) {
  if (a.n == 0) return NonCrossingPartition{};
  if (perm_cycles(a) + perm_cycles(compose(a.inverse(), Perm::long_cycle(a.n))) != a.n + 1)
    return std::nullopt;
  return cycles_partition(a);
}

// ---- lattice with memoized Moebius function ---------------------------------

class NcLattice {
 public:
  explicit NcLattice(int n) : n_(n), labels_(enumerate_nc_labels(n)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      index_.emplace(key(labels_[i]), static_cast<int>(i));
      nblocks_.push_back(1 + *std::max_element(labels_[i].begin(), labels_[i].end()));
    }
    // finer elements first: every strict lower bound precedes its upper bound
    order_.resize(labels_.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int a, int b) { return nblocks_[a] > nblocks_[b]; });
  }

  int n() const { return n_; }
  std::size_t size() const { return labels_.size(); }
  const std::vector<int>& labels(int i) const { return labels_[i]; }
  NonCrossingPartition element(int i) const { return partition_from_labels(labels_[i]); }

  int index_of(const NonCrossingPartition& p) const {
    if (p.n != n_) fail(ErrorKind::Size, "NcLattice: partition of different n");
    auto it = index_.find(key(p.labels()));
    if (it == index_.end()) fail(ErrorKind::Domain, "NcLattice: not a non-crossing partition");
    return it->second;
  }

  bool leq(int s, int p) const {
    const auto& ls = labels_[s];
    const auto& lp = labels_[p];
    // labels are restricted growth strings, so the first element of each block of s
    // is where its label first appears
    std::array<int, 16> rep;
    rep.fill(-1);
    for (int i = 0; i < n_; ++i) {
      int b = ls[i];
      if (rep[b] < 0) rep[b] = lp[i];
      else if (rep[b] != lp[i]) return false;
    }
    return true;
  }

  // mu[s, p] via mu[s,s] = 1, mu[s,p] = -sum_{s <= r < p} mu[s,r]
  long long mobius(int s, int p) {
    if (!leq(s, p)) fail(ErrorKind::Order, "mobius: sigma is not below pi");
    return row(s)[p];
  }

  // mu[s, 1_n] for every s, via the dual recursion over upper intervals
  const std::vector<long long>& mobius_to_top() {
    std::lock_guard<std::mutex> lk(mu_);
    if (!top_.empty()) return top_;
    std::vector<long long> col(size(), 0);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      int s = *it;
      if (nblocks_[s] == 1) {
        col[s] = 1;
        continue;
      }
      long long acc = 0;
      for (std::size_t r = 0; r < size(); ++r)
        if (static_cast<int>(r) != s && nblocks_[r] < nblocks_[s] && leq(s, static_cast<int>(r)))
          acc += col[r];
      col[s] = -acc;
    }
    top_ = std::move(col);
    return top_;
  }

 private:
  static std::uint64_t key(const std::vector<int>& lab) {
    std::uint64_t k = 0;
    for (int v : lab) k = (k << 4) | static_cast<std::uint64_t>(v);
    return k;
  }

  const std::vector<long long>& row(int s) {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = rows_.find(s);
    if (it != rows_.end()) return it->second;
    std::vector<long long> r(size(), 0);
    std::vector<int> above;
    for (int p : order_)
      if (leq(s, p)) above.push_back(p);
    // `above` is finer-first, so every r < p is already filled when p is reached
    for (int p : above) {
      if (p == s) {
        r[p] = 1;
        continue;
      }
      long long acc = 0;
      for (int q : above) {
        if (q == p) break;
        if (nblocks_[q] > nblocks_[p] && leq(q, p)) acc += r[q];
      }
      r[p] = -acc;
    }
    return rows_.emplace(s, std::move(r)).first->second;
  }

  int n_;
  std::vector<std::vector<int>> labels_;
  std::unordered_map<std::uint64_t, int> index_;
  std::vector<int> nblocks_;
  std::vector<int> order_;
  std::mutex mu_;
  std::unordered_map<int, std::vector<long long>> rows_;
  std::vector<long long> top_;
};

inline NcLattice& nc_lattice(int n) {
  static std::mutex mu;
  static std::array<std::unique_ptr<NcLattice>, 11> cache;
  if (n < 1 || n > 10) fail(ErrorKind::Size, "nc_lattice: n=" + std::to_string(n) + " outside 1..10");
  std::lock_guard<std::mutex> lk(mu);
  if (!cache[n]) cache[n] = std::make_unique<NcLattice>(n);
  return *cache[n];
}

inline long long mobius(const NonCrossingPartition& s, const NonCrossingPartition& p) {
  if (s.n != p.n) fail(ErrorKind::Size, "mobius: partitions of different n");
  auto& L = nc_lattice(s.n);
  return L.mobius(L.index_of(s), L.index_of(p));
}

// ---- moments and free cumulants -------------------------------------------

using cplx_t = std::complex<double>;

namespace detail {
using cplx_wide = std::complex<long double>;

// product of seq[|V|-1] over the blocks V, in extended precision: the sums
// below cancel heavily for n around 8
inline cplx_wide multiplicative(const std::vector<cplx_t>& seq, const std::vector<int>& lab) {
  std::array<int, 16> sizes{};
  for (int v : lab) ++sizes[v];
  cplx_wide prod = 1.0L;
  for (int s : sizes)
    if (s) prod *= cplx_wide(seq[s - 1]);
  return prod;
}
}  // namespace detail

// kappa_k = sum_{sigma in NC(k)} m_sigma mu[sigma, 1_k], k = 1..n
inline std::vector<cplx_t> moments_to_cumulants(const std::vector<cplx_t>& m, int n) {
  if (n > 10) fail(ErrorKind::Size, "moments_to_cumulants: order above 10");
  if (static_cast<int>(m.size()) < n) fail(ErrorKind::Size, "moments_to_cumulants: too few moments");
  std::vector<cplx_t> k(n);
  for (int j = 1; j <= n; ++j) {
    auto& L = nc_lattice(j);
    const auto& mu = L.mobius_to_top();
    detail::cplx_wide acc = 0.0L;
    for (std::size_t s = 0; s < L.size(); ++s)
      if (mu[s]) acc += static_cast<long double>(mu[s]) * detail::multiplicative(m, L.labels(static_cast<int>(s)));
    k[j - 1] = cplx_t(acc);
  }
  return k;
}

// m_k = sum_{pi in NC(k)} kappa_pi, k = 1..n
inline std::vector<cplx_t> cumulants_to_moments(const std::vector<cplx_t>& kappa, int n) {
  if (n > 10) fail(ErrorKind::Size, "cumulants_to_moments: order above 10");
  if (static_cast<int>(kappa.size()) < n) fail(ErrorKind::Size, "cumulants_to_moments: too few cumulants");
  std::vector<cplx_t> m(n);
  for (int j = 1; j <= n; ++j) {
    auto& L = nc_lattice(j);
    detail::cplx_wide acc = 0.0L;
    for (std::size_t p = 0; p < L.size(); ++p) acc += detail::multiplicative(kappa, L.labels(static_cast<int>(p)));
    m[j - 1] = cplx_t(acc);
  }
  return m;
}

// ---- block-labelled pairs -------------------------------------------------

struct IndexProfile {
  int n = 0;
  std::vector<int> r;   // r(1..n), labels in 1..k
  std::vector<int> rp;  // r'(1..n)

  IndexProfile() = default;
  IndexProfile(std::vector<int> r_, std::vector<int> rp_)
      : n(static_cast<int>(r_.size())), r(std::move(r_)), rp(std::move(rp_)) {
    if (rp.size() != r.size()) fail(ErrorKind::Profile, "IndexProfile: r and r' differ in length");
  }
  int at(int i) const { return r[i - 1]; }
  int at_p(int i) const { return rp[i - 1]; }
  void check_labels(int k) const {
    for (int v : r)
      if (v < 1 || v > k) fail(ErrorKind::Profile, "IndexProfile: label outside 1.." + std::to_string(k));
    for (int v : rp)
      if (v < 1 || v > k) fail(ErrorKind::Profile, "IndexProfile: label outside 1.." + std::to_string(k));
  }
};

inline bool pair_admissible(const Perm& sigma, const Perm& kpi, const IndexProfile& pr) {
  const int n = pr.n;
  for (int i = 1; i <= n; ++i) {
    if (pr.at_p(i) != pr.at(sigma(i))) return false;
    int prev = i == 1 ? n : i - 1;
    if (pr.at(i) != pr.at_p(kpi(prev))) return false;
  }
  return true;
}

// all sigma <= pi in NC(n) with r'(i) = r(sigma(i)) and r(i) = r'(K(pi)(i-1)), i-1 taken mod n
inline std::vector<std::pair<NonCrossingPartition, NonCrossingPartition>> nc_pairs_rrp(
    const IndexProfile& pr) {
  if (pr.n < 1 || pr.n > 8) fail(ErrorKind::Size, "nc_pairs_rrp: n outside 1..8");
  auto& L = nc_lattice(pr.n);
  std::vector<Perm> perms, kperms;
  for (std::size_t i = 0; i < L.size(); ++i) {
    auto p = L.element(static_cast<int>(i));
    perms.push_back(p.as_perm());
    kperms.push_back(kreweras(p).as_perm());
  }
  std::vector<std::pair<NonCrossingPartition, NonCrossingPartition>> out;
  for (std::size_t p = 0; p < L.size(); ++p)
    for (std::size_t s = 0; s < L.size(); ++s)
      if (L.leq(static_cast<int>(s), static_cast<int>(p)) && pair_admissible(perms[s], kperms[p], pr))
        out.emplace_back(L.element(static_cast<int>(s)), L.element(static_cast<int>(p)));
  return out;
}

// Product over i < sigma(i) of 1/tau(p_{r'(i)}) times product over j < K(pi)(j)
// of 1/tau(p_{r(j+1)}), with j+1 taken mod n. weights[m-1] = tau(p_m).
inline double weight_omega(const NonCrossingPartition& sigma, const NonCrossingPartition& pi,
                           const IndexProfile& pr, const std::vector<double>& weights) {
  if (sigma.n != pr.n || pi.n != pr.n) fail(ErrorKind::Size, "weight_omega: size mismatch");
  pr.check_labels(static_cast<int>(weights.size()));
  Perm s = sigma.as_perm(), kp = kreweras(pi).as_perm();
  if (!nc_leq(sigma, pi) || !pair_admissible(s, kp, pr))
    fail(ErrorKind::Profile, "weight_omega: pair is not admissible for the profile");
  for (const auto* labels : {&pr.r, &pr.rp})
    for (int label : *labels)
      if (!(weights[label - 1] > 0.0))
        fail(ErrorKind::Degenerate, "weight_omega: tau(p_" + std::to_string(label) + ") = 0");
  auto inv = [&](int label) { return 1.0 / weights[label - 1]; };
  const int n = pr.n;
  double out = 1.0;
  for (int i = 1; i <= n; ++i)
    if (i < s(i)) out *= inv(pr.at_p(i));
  for (int j = 1; j <= n; ++j)
    if (j < kp(j)) out *= inv(pr.at(j % n + 1));
  return out;
}

}  // namespace fdeq
