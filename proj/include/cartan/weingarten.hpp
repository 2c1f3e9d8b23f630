#pragma once

// Haar moments over U(N), O(N), SP(2N) and the embedded subgroups U^CI and
// SP(2N) x SP(2N).
//
// Three independent routes:
//  * build_weingarten_table: Gram matrix of invariant tensors, assembled by
//    pairing explicit tensors, inverted in exact rational arithmetic;
//  * analytic_moment: closed-form trace averages for the standard patterns;
//  * mc_moment: brute-force Monte Carlo over Haar samples.
// weingarten_moment links the first two by summing weingarten_integrate over
// all index tuples of a trace word.
//
// Order conventions. Orthogonal and symplectic tables are indexed by the
// number k of matrix entries (k = 2 or 4, pair partitions of {1..k}).
// Unitary tables are indexed by the number k of (U, conj U) pairs, k = 1 or
// 2, and use permutations of S_k; "k = 2" there means U U conj(U) conj(U).

#include "cartan/haar.hpp"

#include <boost/rational.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace cartan {

using Rational = boost::rational<long long>;
using RatMat = std::vector<std::vector<Rational>>;

enum class WgFamily { Unitary, Orthogonal, Symplectic };

inline std::string_view to_string(WgFamily f) {
  switch (f) {
    case WgFamily::Unitary: return "unitary";
    case WgFamily::Orthogonal: return "orthogonal";
    case WgFamily::Symplectic: return "symplectic";
  }
  return "?";
}

// ---- exact linear algebra ----------------------------------------------------

inline RatMat rat_identity(size_t n) {
  RatMat m(n, std::vector<Rational>(n, Rational(0)));
  for (size_t i = 0; i < n; ++i) m[i][i] = 1;
  return m;
}

inline RatMat rat_mul(const RatMat& a, const RatMat& b) {
  const size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  RatMat c(n, std::vector<Rational>(m, Rational(0)));
  for (size_t i = 0; i < n; ++i)
    for (size_t l = 0; l < k; ++l)
      for (size_t j = 0; j < m; ++j) c[i][j] += a[i][l] * b[l][j];
  return c;
}

// Gauss-Jordan. Returns nullopt for a singular matrix.
inline std::optional<RatMat> rat_inverse(RatMat a) {
  const size_t n = a.size();
  RatMat inv = rat_identity(n);
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    while (piv < n && a[piv][col] == Rational(0)) ++piv;
    if (piv == n) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    const Rational p = a[col][col];
    for (size_t j = 0; j < n; ++j) {
      a[col][j] /= p;
      inv[col][j] /= p;
    }
    for (size_t r = 0; r < n; ++r) {
      if (r == col || a[r][col] == Rational(0)) continue;
      const Rational f = a[r][col];
      for (size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// ---- index sets --------------------------------------------------------------

// Blocks (m, n) with m < n, ordered by m. Points are 0-based.
struct PairPartition {
  std::vector<std::pair<int, int>> blocks;
  bool operator==(const PairPartition&) const = default;
};

// All pair partitions of {0..k-1} in canonical order. For k = 4 this is
// {12|34}, {13|24}, {14|23}.
inline std::vector<PairPartition> pair_partitions(int k) {
  if (k < 0 || k % 2 != 0) throw ParameterError("pair partitions need an even number of points");
  std::vector<PairPartition> out;
  std::vector<std::pair<int, int>> cur;
  std::vector<bool> used(static_cast<size_t>(k), false);
  auto rec = [&](auto&& self) -> void {
    int first = -1;
    for (int i = 0; i < k; ++i)
      if (!used[static_cast<size_t>(i)]) {
        first = i;
        break;
      }
    if (first < 0) {
      out.push_back({cur});
      return;
    }
    used[static_cast<size_t>(first)] = true;
    for (int j = first + 1; j < k; ++j) {
      if (used[static_cast<size_t>(j)]) continue;
      used[static_cast<size_t>(j)] = true;
      cur.emplace_back(first, j);
      self(self);
      cur.pop_back();
      used[static_cast<size_t>(j)] = false;
    }
    used[static_cast<size_t>(first)] = false;
  };
  rec(rec);
  return out;
}

inline std::vector<std::vector<int>> permutations(int k) {
  std::vector<int> p(static_cast<size_t>(k));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

// ---- invariant tensors ---------------------------------------------------------

namespace detail {

// Sparse tensor in V^{(x) k}: multi-index (base dim) -> integer coefficient.
using SparseTensor = std::map<std::vector<int>, long long>;

// Orthogonal invariant for a pair partition: sum over indices equal on blocks.
inline SparseTensor orthogonal_tensor(const PairPartition& p, int n, int k) {
  SparseTensor t;
  const int npairs = k / 2;
  std::vector<int> eta(static_cast<size_t>(npairs), 0);
  for (;;) {
    std::vector<int> idx(static_cast<size_t>(k));
    for (int r = 0; r < npairs; ++r) {
      idx[static_cast<size_t>(p.blocks[r].first)] = eta[r];
      idx[static_cast<size_t>(p.blocks[r].second)] = eta[r];
    }
    t[idx] += 1;
    int r = 0;
    while (r < npairs && ++eta[r] == n) eta[r++] = 0;
    if (r == npairs) break;
  }
  return t;
}

// Symplectic invariant: the m-slot of a block carries e_{eta + eps N}, the
// n-slot carries (-1)^eps e_{eta + (1 - eps) N}.
inline SparseTensor symplectic_tensor(const PairPartition& p, int n, int k) {
  SparseTensor t;
  const int npairs = k / 2;
  std::vector<int> eta(static_cast<size_t>(npairs), 0), eps(static_cast<size_t>(npairs), 0);
  for (;;) {
    std::vector<int> idx(static_cast<size_t>(k));
    long long sign = 1;
    for (int r = 0; r < npairs; ++r) {
      idx[static_cast<size_t>(p.blocks[r].first)] = eta[r] + eps[r] * n;
      idx[static_cast<size_t>(p.blocks[r].second)] = eta[r] + (1 - eps[r]) * n;
      if (eps[r]) sign = -sign;
    }
    t[idx] += sign;
    int r = 0;
    for (; r < npairs; ++r) {
      if (++eps[r] < 2) break;
      eps[r] = 0;
      if (++eta[r] < n) break;
      eta[r] = 0;
    }
    if (r == npairs) break;
  }
  return t;
}

// b(v, w) = sum v_i w_i extended to tensors.
inline long long pair_orthogonal(const SparseTensor& a, const SparseTensor& b) {
  long long s = 0;
  for (const auto& [idx, c] : a) {
    auto it = b.find(idx);
    if (it != b.end()) s += c * it->second;
  }
  return s;
}

// a(v, w) = v^t I w with I = [[0, -1], [1, 0]] extended to tensors. I is a
// signed permutation: I_{x, y} != 0 only for x = partner(y).
inline long long pair_symplectic(const SparseTensor& a, const SparseTensor& b, int n) {
  long long s = 0;
  for (const auto& [jdx, cb] : b) {
    std::vector<int> idx(jdx.size());
    long long sign = 1;
    for (size_t r = 0; r < jdx.size(); ++r) {
      const int y = jdx[r];
      if (y < n) {
        idx[r] = y + n;  // I_{y+N, y} = 1
      } else {
        idx[r] = y - n;  // I_{y-N, y} = -1
        sign = -sign;
      }
    }
    auto it = a.find(idx);
    if (it != a.end()) s += it->second * cb * sign;
  }
  return s;
}

// <theta_sigma, theta_tau> on V^{(x)k} (x) (V^*)^{(x)k}: the number of index
// tuples i with i_sigma(r) = i_tau(r) for all r.
inline long long pair_unitary(const std::vector<int>& sigma, const std::vector<int>& tau, int n) {
  const int k = static_cast<int>(sigma.size());
  std::vector<int> i(static_cast<size_t>(k), 0);
  long long count = 0;
  for (;;) {
    bool ok = true;
    for (int r = 0; r < k && ok; ++r) ok = i[sigma[r]] == i[tau[r]];
    count += ok;
    int r = 0;
    while (r < k && ++i[r] == n) i[r++] = 0;
    if (r == k) break;
  }
  return count;
}

}  // namespace detail

struct WeingartenTable {
  WgFamily family = WgFamily::Orthogonal;
  int k = 0;  // entries (O, SP) or (U, conj U) pairs (U)
  int n = 0;
  std::vector<PairPartition> partitions;      // O and SP
  std::vector<std::vector<int>> perms;        // U
  RatMat gram;
  RatMat wg;

  size_t size() const { return gram.size(); }
};

inline WeingartenTable build_weingarten_table(WgFamily family, int k, int n) {
  if (n < 1) throw ParameterError("build_weingarten_table: n must be positive");
  WeingartenTable t;
  t.family = family;
  t.k = k;
  t.n = n;
  if (family == WgFamily::Unitary) {
    if (k < 1 || k > 2)
      throw ParameterError("unitary tables support k = 1, 2 pairs of (U, conj U)");
    t.perms = permutations(k);
    const size_t s = t.perms.size();
    t.gram.assign(s, std::vector<Rational>(s, Rational(0)));
    for (size_t a = 0; a < s; ++a)
      for (size_t b = 0; b < s; ++b) t.gram[a][b] = detail::pair_unitary(t.perms[a], t.perms[b], n);
  } else {
    if (k != 2 && k != 4) throw ParameterError("orthogonal/symplectic tables support k = 2, 4");
    t.partitions = pair_partitions(k);
    const size_t s = t.partitions.size();
    std::vector<detail::SparseTensor> theta;
    for (const auto& p : t.partitions)
      theta.push_back(family == WgFamily::Orthogonal ? detail::orthogonal_tensor(p, n, k)
                                                     : detail::symplectic_tensor(p, n, k));
    t.gram.assign(s, std::vector<Rational>(s, Rational(0)));
    for (size_t a = 0; a < s; ++a)
      for (size_t b = 0; b < s; ++b)
        t.gram[a][b] = family == WgFamily::Orthogonal ? detail::pair_orthogonal(theta[a], theta[b])
                                                      : detail::pair_symplectic(theta[a], theta[b], n);
  }
  auto inv = rat_inverse(t.gram);
  if (!inv)
    throw DomainError("Gram matrix is singular for " + std::string(to_string(family)) +
                      " k=" + std::to_string(k) + " at n=" + std::to_string(n));
  t.wg = std::move(*inv);
  return t;
}

// ---- entry integrals -------------------------------------------------------------

// Cache of tables keyed by (family, k, n); the integrators below build tables
// on demand.
class WeingartenCache {
 public:
  const WeingartenTable& get(WgFamily f, int k, int n) {
    auto key = std::make_tuple(static_cast<int>(f), k, n);
    auto it = tables_.find(key);
    if (it == tables_.end()) it = tables_.emplace(key, build_weingarten_table(f, k, n)).first;
    return it->second;
  }

 private:
  std::map<std::tuple<int, int, int>, WeingartenTable> tables_;
};

// int prod_r O_{phi(r), psi(r)} dO over O(n).
inline double integrate_orthogonal(const std::vector<int>& phi, const std::vector<int>& psi, int n,
                                   WeingartenCache& cache) {
  const int k = static_cast<int>(phi.size());
  if (psi.size() != phi.size()) throw ParameterError("index lists differ in length");
  for (int r = 0; r < k; ++r)
    if (phi[r] < 0 || phi[r] >= n || psi[r] < 0 || psi[r] >= n)
      throw ParameterError("orthogonal entry index out of range");
  if (k == 0) return 1.0;
  if (k % 2) return 0.0;
  const auto& t = cache.get(WgFamily::Orthogonal, k, n);
  auto delta = [](const PairPartition& p, const std::vector<int>& f) {
    for (auto [a, b] : p.blocks)
      if (f[a] != f[b]) return false;
    return true;
  };
  Rational s(0);
  for (size_t a = 0; a < t.size(); ++a) {
    if (!delta(t.partitions[a], phi)) continue;
    for (size_t b = 0; b < t.size(); ++b)
      if (delta(t.partitions[b], psi)) s += t.wg[a][b];
  }
  return to_double(s);
}

// int prod_r U_{x(r), y(r)} dU over SP(2n); x, y in [0, 2n). Writing
// x = i + alpha n, the sign of a matching pair partition is
// (-1)^{sum alpha(m_nu) + beta(m_nu)} and the blocks require
// i_m = i_n, alpha_m = 1 - alpha_n (likewise for the columns).
inline double integrate_symplectic(const std::vector<int>& x, const std::vector<int>& y, int n,
                                   WeingartenCache& cache) {
  const int k = static_cast<int>(x.size());
  if (y.size() != x.size()) throw ParameterError("index lists differ in length");
  for (int r = 0; r < k; ++r)
    if (x[r] < 0 || x[r] >= 2 * n || y[r] < 0 || y[r] >= 2 * n)
      throw ParameterError("symplectic entry index out of range");
  if (k == 0) return 1.0;
  if (k % 2) return 0.0;
  const auto& t = cache.get(WgFamily::Symplectic, k, n);
  // Returns 0 if the partition does not match, else the sign.
  auto weight = [n](const PairPartition& p, const std::vector<int>& f) {
    int sign = 1;
    for (auto [a, b] : p.blocks) {
      const int ia = f[a] % n, ib = f[b] % n, al = f[a] / n, bl = f[b] / n;
      if (ia != ib || al != 1 - bl) return 0;
      if (al) sign = -sign;
    }
    return sign;
  };
  Rational s(0);
  for (size_t a = 0; a < t.size(); ++a) {
    const int wa = weight(t.partitions[a], x);
    if (!wa) continue;
    for (size_t b = 0; b < t.size(); ++b) {
      const int wb = weight(t.partitions[b], y);
      if (wb) s += t.wg[a][b] * Rational(wa * wb);
    }
  }
  return to_double(s);
}

// int prod_r U_{i(r), j(r)} conj(U_{ib(r), jb(r)}) dU over U(n).
inline double integrate_unitary(const std::vector<int>& i, const std::vector<int>& j,
                                const std::vector<int>& ib, const std::vector<int>& jb, int n,
                                WeingartenCache& cache) {
  if (i.size() != j.size() || ib.size() != jb.size())
    throw ParameterError("index lists differ in length");
  for (auto* v : {&i, &j, &ib, &jb})
    for (int x : *v)
      if (x < 0 || x >= n) throw ParameterError("unitary entry index out of range");
  if (i.size() != ib.size()) return 0.0;
  const int k = static_cast<int>(i.size());
  if (k == 0) return 1.0;
  const auto& t = cache.get(WgFamily::Unitary, k, n);
  auto match = [k](const std::vector<int>& sig, const std::vector<int>& a, const std::vector<int>& b) {
    for (int r = 0; r < k; ++r)
      if (a[r] != b[sig[r]]) return false;
    return true;
  };
  Rational s(0);
  for (size_t a = 0; a < t.size(); ++a) {
    if (!match(t.perms[a], i, ib)) continue;
    for (size_t b = 0; b < t.size(); ++b)
      if (match(t.perms[b], j, jb)) s += t.wg[a][b];
  }
  return to_double(s);
}

// ---- trace words ---------------------------------------------------------------------

enum class Factor { U, Ustar, Ut, Ubar, Const };

struct Token {
  Factor f;
  char name = 0;  // constant slot letter for Factor::Const
  bool operator==(const Token&) const = default;
};

// A single-trace word such as Tr(U*AUBU*CUD). Syntax: "U", "U*", "Ut",
// "Ub" (entrywise conjugate) and single capital letters for constant
// slots. Whitespace is ignored and an optional "Tr( )" wrapper is accepted.
struct MomentPattern {
  std::vector<Token> word;

  static MomentPattern parse(std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
            s.end());
    if (s.rfind("Tr(", 0) == 0 && s.back() == ')') s = s.substr(3, s.size() - 4);
    MomentPattern p;
    for (size_t i = 0; i < s.size(); ++i) {
      const char c = s[i];
      if (c == 'U') {
        Factor f = Factor::U;
        if (i + 1 < s.size()) {
          if (s[i + 1] == '*') f = Factor::Ustar, ++i;
          else if (s[i + 1] == 't') f = Factor::Ut, ++i;
          else if (s[i + 1] == 'b') f = Factor::Ubar, ++i;
        }
        p.word.push_back({f, 0});
      } else if (c >= 'A' && c <= 'Z') {
        p.word.push_back({Factor::Const, c});
      } else {
        throw ParameterError("bad character '" + std::string(1, c) + "' in moment pattern");
      }
    }
    if (p.u_count() > 4) throw ParameterError("moment patterns support at most 4 U factors");
    if (p.u_count() == 0) throw ParameterError("moment pattern has no U factor");
    return p;
  }

  int u_count() const {
    int c = 0;
    for (auto& t : word) c += t.f != Factor::Const;
    return c;
  }

  std::string str() const {
    std::string s = "Tr(";
    for (auto& t : word) switch (t.f) {
        case Factor::U: s += "U"; break;
        case Factor::Ustar: s += "U*"; break;
        case Factor::Ut: s += "Ut"; break;
        case Factor::Ubar: s += "Ub"; break;
        case Factor::Const: s += t.name; break;
      }
    return s + ")";
  }

  // Replace every U by conj(U).
  MomentPattern conjugate_swapped() const {
    MomentPattern p = *this;
    for (auto& t : p.word) switch (t.f) {
        case Factor::U: t.f = Factor::Ubar; break;
        case Factor::Ubar: t.f = Factor::U; break;
        case Factor::Ustar: t.f = Factor::Ut; break;
        case Factor::Ut: t.f = Factor::Ustar; break;
        case Factor::Const: break;
      }
    return p;
  }

  bool operator==(const MomentPattern&) const = default;
};

using MatrixSlots = std::map<char, Mat>;

inline cplx evaluate_word(const MomentPattern& p, const Mat& u, const MatrixSlots& mats) {
  Mat acc = Mat::Identity(u.rows(), u.cols());
  for (auto& t : p.word) {
    switch (t.f) {
      case Factor::U: acc = acc * u; break;
      case Factor::Ustar: acc = acc * u.adjoint(); break;
      case Factor::Ut: acc = acc * u.transpose(); break;
      case Factor::Ubar: acc = acc * u.conjugate(); break;
      case Factor::Const: {
        auto it = mats.find(t.name);
        if (it == mats.end()) throw ParameterError(std::string("no matrix for slot ") + t.name);
        acc = acc * it->second;
      }
    }
  }
  return acc.trace();
}

// ---- Monte Carlo -----------------------------------------------------------------------

struct MomentEstimate {
  cplx mean;
  cplx stderr_;  // per component: (stderr of real part, stderr of imaginary part)
  long samples = 0;
};

// Deviation in units of the standard error, taken per component. Deviations
// at roundoff level count as zero, so deterministic averages (where the
// standard error is itself roundoff) do not produce spurious outliers.
inline double z_score(cplx analytic, const MomentEstimate& e) {
  auto comp = [](double d, double s, double scale) {
    if (std::abs(d) <= 1e-10 * std::max(1.0, scale)) return 0.0;
    return s > 0.0 ? std::abs(d) / s : INFINITY;
  };
  const double scale = std::abs(analytic);
  return std::max(comp(analytic.real() - e.mean.real(), e.stderr_.real(), scale),
                  comp(analytic.imag() - e.mean.imag(), e.stderr_.imag(), scale));
}

class ComponentStats {
 public:
  void add(cplx x) {
    ++n_;
    const cplx d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    const cplx d2 = x - mean_;
    m2_ += cplx(d.real() * d2.real(), d.imag() * d2.imag());
  }
  MomentEstimate result() const {
    MomentEstimate e;
    e.mean = mean_;
    e.samples = n_;
    if (n_ > 1) {
      const double f = 1.0 / (static_cast<double>(n_ - 1) * static_cast<double>(n_));
      e.stderr_ = cplx(std::sqrt(m2_.real() * f), std::sqrt(m2_.imag() * f));
    }
    return e;
  }

 private:
  long n_ = 0;
  cplx mean_{0.0, 0.0};
  cplx m2_{0.0, 0.0};
};

inline MomentEstimate mc_moment(const CompactGroupSpec& g, const MomentPattern& p,
                                const MatrixSlots& mats, long samples, Rng& rng) {
  if (samples < 100) throw ParameterError("mc_moment needs at least 100 samples");
  ComponentStats st;
  for (long s = 0; s < samples; ++s) st.add(evaluate_word(p, sample_compact(g, rng), mats));
  return st.result();
}

// Several inputs against the same Haar sample stream.
inline std::vector<MomentEstimate> mc_moment_batch(const CompactGroupSpec& g, const MomentPattern& p,
                                                   const std::vector<MatrixSlots>& inputs,
                                                   long samples, Rng& rng) {
  if (samples < 100) throw ParameterError("mc_moment needs at least 100 samples");
  std::vector<ComponentStats> st(inputs.size());
  for (long s = 0; s < samples; ++s) {
    const Mat u = sample_compact(g, rng);
    for (size_t i = 0; i < inputs.size(); ++i) st[i].add(evaluate_word(p, u, inputs[i]));
  }
  std::vector<MomentEstimate> out;
  for (auto& s : st) out.push_back(s.result());
  return out;
}

// ---- generic Weingarten evaluation of a trace word --------------------------------------

namespace detail {

// One matrix entry of the Haar variable: (U)_{r c}, possibly conjugated.
struct Entry {
  int r, c;
  bool conj;
};

// Entry of the compact-group element U at (r, c) expressed through the
// underlying factor(s). Returns false if the entry vanishes identically.
struct FactorEntry {
  int which;  // 0: V, 1: W
  int r, c;
  bool conj;
};

inline bool resolve_entry(const CompactGroupSpec& g, const Entry& e, FactorEntry& out) {
  switch (g.family) {
    case CompactFamily::Unitary:
    case CompactFamily::Orthogonal:
    case CompactFamily::Symplectic:
      out = {0, e.r, e.c, e.conj};
      return true;
    case CompactFamily::ProductUU:
    case CompactFamily::ProductOO: {
      const bool top = e.r < g.n, left = e.c < g.n;
      if (top != left) return false;
      out = top ? FactorEntry{0, e.r, e.c, e.conj} : FactorEntry{1, e.r - g.n, e.c - g.n, e.conj};
      return true;
    }
    case CompactFamily::ProductSpSp: {
      const int b = 2 * g.n;
      const bool top = e.r < b, left = e.c < b;
      if (top != left) return false;
      out = top ? FactorEntry{0, e.r, e.c, e.conj} : FactorEntry{1, e.r - b, e.c - b, e.conj};
      return true;
    }
    case CompactFamily::EmbeddedU_CI:
    case CompactFamily::EmbeddedU_DIII: {
      if (g.alternate) throw ParameterError("alternate DIII realization has no entry resolver");
      const bool top = e.r < g.n, left = e.c < g.n;
      if (top != left) return false;
      // Lower block is conj(V).
      out = top ? FactorEntry{0, e.r, e.c, e.conj} : FactorEntry{0, e.r - g.n, e.c - g.n, !e.conj};
      return true;
    }
  }
  return false;
}

inline WgFamily base_family(const CompactGroupSpec& g, int which) {
  switch (g.family) {
    case CompactFamily::Unitary:
    case CompactFamily::ProductUU:
    case CompactFamily::EmbeddedU_CI:
    case CompactFamily::EmbeddedU_DIII: return WgFamily::Unitary;
    case CompactFamily::Orthogonal:
    case CompactFamily::ProductOO: return WgFamily::Orthogonal;
    case CompactFamily::Symplectic:
    case CompactFamily::ProductSpSp: return WgFamily::Symplectic;
  }
  (void)which;
  return WgFamily::Unitary;
}

inline int base_size(const CompactGroupSpec& g, int which) {
  switch (g.family) {
    case CompactFamily::ProductUU:
    case CompactFamily::ProductOO:
    case CompactFamily::ProductSpSp: return which == 0 ? g.n : g.m;
    default: return g.n;
  }
}

// Haar integral of a product of entries of the compact-group element.
inline double integrate_entries(const CompactGroupSpec& g, const std::vector<Entry>& entries,
                                WeingartenCache& cache) {
  std::vector<FactorEntry> fe[2];
  for (auto& e : entries) {
    FactorEntry f;
    if (!resolve_entry(g, e, f)) return 0.0;
    fe[f.which].push_back(f);
  }
  double result = 1.0;
  for (int w = 0; w < 2; ++w) {
    if (fe[w].empty()) continue;
    const int n = base_size(g, w);
    switch (base_family(g, w)) {
      case WgFamily::Unitary: {
        std::vector<int> i, j, ib, jb;
        for (auto& f : fe[w]) {
          if (f.conj) ib.push_back(f.r), jb.push_back(f.c);
          else i.push_back(f.r), j.push_back(f.c);
        }
        if (i.size() != ib.size()) return 0.0;
        result *= integrate_unitary(i, j, ib, jb, n, cache);
        break;
      }
      case WgFamily::Orthogonal: {
        std::vector<int> x, y;
        for (auto& f : fe[w]) x.push_back(f.r), y.push_back(f.c);
        result *= integrate_orthogonal(x, y, n, cache);
        break;
      }
      case WgFamily::Symplectic: {
        // conj(U)_{xy} = sigma(x) sigma(y) U_{x~ y~} with x~ the index in the
        // other half and sigma(x) = +1 for the lower half, -1 for the upper.
        std::vector<int> x, y;
        int sign = 1;
        for (auto& f : fe[w]) {
          int r = f.r, c = f.c;
          if (f.conj) {
            sign *= (r >= n ? 1 : -1) * (c >= n ? 1 : -1);
            r = r >= n ? r - n : r + n;
            c = c >= n ? c - n : c + n;
          }
          x.push_back(r), y.push_back(c);
        }
        result *= sign * integrate_symplectic(x, y, n, cache);
        break;
      }
    }
    if (result == 0.0) return 0.0;
  }
  return result;
}

}  // namespace detail

// Exact Haar average of a trace word by expansion over matrix entries. The
// constants between consecutive U-type factors are multiplied first, then the
// sum runs over the 2k row/column indices of the k U-type factors.
inline cplx weingarten_moment(const CompactGroupSpec& g, const MomentPattern& p,
                              const MatrixSlots& mats) {
  const int d = g.dim();
  // Rotate so that the word starts with a U-type factor.
  std::vector<Token> w = p.word;
  auto first = std::find_if(w.begin(), w.end(), [](const Token& t) { return t.f != Factor::Const; });
  std::rotate(w.begin(), first, w.end());
  std::vector<Factor> factors;
  std::vector<Mat> between;
  for (auto& t : w) {
    if (t.f != Factor::Const) {
      factors.push_back(t.f);
      between.push_back(Mat::Identity(d, d));
    } else {
      auto it = mats.find(t.name);
      if (it == mats.end()) throw ParameterError(std::string("no matrix for slot ") + t.name);
      if (it->second.rows() != d || it->second.cols() != d)
        throw ParameterError(std::string("matrix for slot ") + t.name + " has the wrong size");
      between.back() = between.back() * it->second;
    }
  }
  const int k = static_cast<int>(factors.size());
  WeingartenCache cache;
  std::vector<int> idx(static_cast<size_t>(2 * k), 0);  // (row_j, col_j) per factor
  std::vector<detail::Entry> entries(static_cast<size_t>(k));
  cplx total(0.0, 0.0);
  // Depth-first over idx with pruning on vanishing constants and on entries
  // that vanish identically (off-block entries of product groups).
  auto rec = [&](auto&& self, int pos, cplx coef) -> void {
    if (pos == 2 * k) {
      coef *= between[k - 1](idx[2 * k - 1], idx[0]);
      if (coef == cplx(0.0)) return;
      const double v = detail::integrate_entries(g, entries, cache);
      if (v != 0.0) total += coef * v;
      return;
    }
    const int j = pos / 2;
    for (int x = 0; x < d; ++x) {
      idx[pos] = x;
      cplx c = coef;
      if (pos % 2 == 0 && j > 0) {
        c *= between[j - 1](idx[pos - 1], x);
        if (c == cplx(0.0)) continue;
      }
      if (pos % 2 == 1) {
        const int r = idx[pos - 1];
        switch (factors[j]) {
          case Factor::U: entries[j] = {r, x, false}; break;
          case Factor::Ubar: entries[j] = {r, x, true}; break;
          case Factor::Ut: entries[j] = {x, r, false}; break;
          case Factor::Ustar: entries[j] = {x, r, true}; break;
          case Factor::Const: break;
        }
        detail::FactorEntry fe;
        if (!detail::resolve_entry(g, entries[j], fe)) continue;
      }
      self(self, pos + 1, c);
    }
  };
  rec(rec, 0, cplx(1.0, 0.0));
  return total;
}

// ---- closed-form lemmas --------------------------------------------------------------------

enum class AnalyticFamily { Unitary, Orthogonal, Symplectic, EmbeddedCI, ProductSpSp };

inline std::string_view to_string(AnalyticFamily f) {
  switch (f) {
    case AnalyticFamily::Unitary: return "unitary";
    case AnalyticFamily::Orthogonal: return "orthogonal";
    case AnalyticFamily::Symplectic: return "symplectic";
    case AnalyticFamily::EmbeddedCI: return "embedded_ci";
    case AnalyticFamily::ProductSpSp: return "product_spsp";
  }
  return "?";
}

inline AnalyticFamily parse_analytic_family(std::string_view s) {
  for (auto f : {AnalyticFamily::Unitary, AnalyticFamily::Orthogonal, AnalyticFamily::Symplectic,
                 AnalyticFamily::EmbeddedCI, AnalyticFamily::ProductSpSp})
    if (to_string(f) == s) return f;
  throw ParameterError("unknown moment family '" + std::string(s) + "'");
}

inline CompactGroupSpec compact_of(AnalyticFamily f, int n) {
  switch (f) {
    case AnalyticFamily::Unitary: return {CompactFamily::Unitary, n, n};
    case AnalyticFamily::Orthogonal: return {CompactFamily::Orthogonal, n, n};
    case AnalyticFamily::Symplectic: return {CompactFamily::Symplectic, n, n};
    case AnalyticFamily::EmbeddedCI: return {CompactFamily::EmbeddedU_CI, n, n};
    case AnalyticFamily::ProductSpSp: return {CompactFamily::ProductSpSp, n, n};
  }
  return {};
}

// Matrix size on which the constant slots act.
inline int slot_dim(AnalyticFamily f, int n) { return compact_of(f, n).dim(); }

struct LemmaItem {
  AnalyticFamily family;
  const char* pattern;
  const char* id;  // short identifier used in reports
};

// Every closed-form item. The unitary items also apply to their conjugate
// swaps.
inline const std::vector<LemmaItem>& lemma_items() {
  static const std::vector<LemmaItem> items{
      {AnalyticFamily::Unitary, "U*AUB", "U.i"},
      {AnalyticFamily::Unitary, "UbAUB", "U.ii.a"},
      {AnalyticFamily::Unitary, "UtAUB", "U.ii.b"},
      {AnalyticFamily::Unitary, "U*AUBU*CUD", "U.iii"},
      {AnalyticFamily::Unitary, "U*AUBUtCUbD", "U.iv"},
      {AnalyticFamily::Unitary, "U*AUbBUtCUD", "U.v"},
      {AnalyticFamily::Orthogonal, "UtAUB", "O.i.a"},
      {AnalyticFamily::Orthogonal, "UAUB", "O.i.b"},
      {AnalyticFamily::Orthogonal, "UtAUBUtCUD", "O.ii"},
      {AnalyticFamily::Orthogonal, "UtAUtBUCUD", "O.iii"},
      {AnalyticFamily::Symplectic, "U*AUB", "SP.i.a"},
      {AnalyticFamily::Symplectic, "UtAUB", "SP.i.b"},
      {AnalyticFamily::Symplectic, "UAUB", "SP.i.c"},
      {AnalyticFamily::Symplectic, "U*AU*B", "SP.i.d"},
      {AnalyticFamily::Symplectic, "UbAUB", "SP.i.e"},
      {AnalyticFamily::Symplectic, "U*AUBU*CUD", "SP.ii"},
      {AnalyticFamily::EmbeddedCI, "U*AUB", "CI.i"},
      {AnalyticFamily::EmbeddedCI, "U*AUBU*AUB", "CI.ii"},
      {AnalyticFamily::EmbeddedCI, "U*AUBU*AUB", "CI.iii"},
      {AnalyticFamily::ProductSpSp, "U*AUB", "CII.i"},
      {AnalyticFamily::ProductSpSp, "U*AUBU*AUB", "CII.ii"},
  };
  return items;
}

namespace detail {

inline cplx tr(const Mat& m) { return m.trace(); }

inline const Mat& slot(const MatrixSlots& m, char c) {
  auto it = m.find(c);
  if (it == m.end()) throw ParameterError(std::string("missing matrix for slot ") + c);
  return it->second;
}

inline void need(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

inline void precondition(double residual, double tol, const std::string& what) {
  if (!(residual <= tol))
    throw PreconditionError(what + " violated (residual " + std::to_string(residual) + ")");
}

}  // namespace detail

// Closed-form average of the lemma item `id`. The pattern determines the
// item except for CI.ii vs CI.iii, which share a word; CI.iii is the
// antisymmetric special case.
inline cplx analytic_moment_item(const std::string& id, const MatrixSlots& s, int n) {
  using detail::tr;
  const double N = n;
  auto A = [&] { return detail::slot(s, 'A'); };
  auto B = [&] { return detail::slot(s, 'B'); };
  auto C = [&] { return detail::slot(s, 'C'); };
  auto D = [&] { return detail::slot(s, 'D'); };
  auto check_size = [&](int d) {
    for (auto& [c, m] : s)
      if (m.rows() != d || m.cols() != d)
        throw ParameterError(std::string("matrix ") + c + " must be " + std::to_string(d) + "x" +
                             std::to_string(d));
  };

  if (id.rfind("U.", 0) == 0 || id.rfind("O.", 0) == 0) check_size(n);
  if (id.rfind("SP.", 0) == 0 || id.rfind("CI.", 0) == 0) check_size(2 * n);
  if (id.rfind("CII.", 0) == 0) check_size(4 * n);

  if (id == "U.i") return tr(A()) * tr(B()) / N;
  if (id == "U.ii.a") return tr(A() * B().transpose()) / N;
  if (id == "U.ii.b") return 0.0;
  if (id == "U.iii" || id == "U.iv" || id == "U.v") {
    detail::need(n >= 2, "unitary fourth moments need N >= 2 (factor N^2 - 1 vanishes)");
    const Mat &a = A(), &b = B(), &c = C(), &d = D();
    const double w1 = 1.0 / (N * N - 1.0), w2 = 1.0 / (N * (N * N - 1.0));
    if (id == "U.iii")
      return w1 * (tr(a) * tr(c) * tr(b * d) + tr(a * c) * tr(b) * tr(d)) -
             w2 * (tr(a * c) * tr(b * d) + tr(a) * tr(b) * tr(c) * tr(d));
    if (id == "U.iv")
      return w1 * (tr(a) * tr(c) * tr(b * d) + tr(a * c.transpose()) * tr(b * d.transpose())) -
             w2 * (tr(a * c.transpose()) * tr(b * d) + tr(a) * tr(c) * tr(b * d.transpose()));
    return w1 * (tr(a * c.transpose()) * tr(b * d.transpose()) + tr(a * c) * tr(b) * tr(d)) -
           w2 * (tr(a * c) * tr(b * d.transpose()) + tr(a * c.transpose()) * tr(b) * tr(d));
  }
  if (id == "O.i.a") return tr(A()) * tr(B()) / N;
  if (id == "O.i.b") return tr(A() * B().transpose()) / N;
  if (id == "O.ii" || id == "O.iii") {
    detail::need(n >= 2, "orthogonal fourth moments need N >= 2 (factor N - 1 vanishes)");
    const Mat &a = A(), &b = B(), &c = C(), &d = D();
    const Mat at = a.transpose(), ct = c.transpose(), dt = d.transpose();
    const double w1 = (N + 1.0) / (N * (N - 1.0) * (N + 2.0)), w2 = 1.0 / (N * (N - 1.0) * (N + 2.0));
    if (id == "O.ii")
      return w1 * (tr(a) * tr(c) * tr(b * d) + tr(a * ct) * tr(b * dt) + tr(a * c) * tr(b) * tr(d)) -
             w2 * (tr(a) * tr(c) * tr(b * dt) + tr(a) * tr(c) * tr(b) * tr(d) + tr(a * ct) * tr(b * d) +
                   tr(a * ct) * tr(b) * tr(d) + tr(a * c) * tr(b * d) + tr(a * c) * tr(b * dt));
    // The sixth subtracted term is Tr(CAD)Tr(B); see the Weingarten
    // expansion test, which derives it independently.
    return w1 * (tr(at * b * ct * d) + tr(d * c * b * a) + tr(a * c) * tr(b) * tr(d)) -
           w2 * (tr(at * b * ct * dt) + tr(at * b * ct) * tr(d) + tr(c * b * a * dt) +
                 tr(c * b * a) * tr(d) + tr(c * a * dt) * tr(b) + tr(c * a * d) * tr(b));
  }
  if (id.rfind("SP.", 0) == 0) {
    const Mat I = sym_I(n).cast<cplx>();
    const Mat Is = I.adjoint();
    if (id == "SP.i.a") return tr(A()) * tr(B()) / (2.0 * N);
    if (id == "SP.i.b") return tr(I * A()) * tr(Is * B()) / (2.0 * N);
    if (id == "SP.i.c" || id == "SP.i.d") return tr(A() * I * B().transpose() * I) / (2.0 * N);
    if (id == "SP.i.e") return tr(A() * B().transpose()) / (2.0 * N);
    if (id == "SP.ii") {
      detail::need(n >= 2, "symplectic fourth moments need N >= 2 (factor N - 1 vanishes)");
      const Mat &a = A(), &b = B(), &c = C(), &d = D();
      const cplx x = tr(Is * a.transpose() * I * c), y = tr(Is * b.transpose() * I * d);
      const cplx ta = tr(a), tb = tr(b), tc = tr(c), td = tr(d), tac = tr(a * c), tbd = tr(b * d);
      const double m = 2.0 * N - 1.0;
      return (m * ta * tc * tbd + ta * tc * y - ta * tc * tb * td - x * tbd + x * tb * td - tac * tbd -
              m * x * y - tac * y + m * tac * tb * td) /
             (4.0 * N * (N - 1.0) * (2.0 * N + 1.0));
    }
  }
  if (id.rfind("CI.", 0) == 0) {
    const Mat& a_ = A();
    if (id == "CI.i") {
      const Mat& b_ = B();
      return (tr(a_.topLeftCorner(n, n)) * tr(b_.topLeftCorner(n, n)) +
              tr(a_.bottomRightCorner(n, n)) * tr(b_.bottomRightCorner(n, n))) /
             N;
    }
    const Mat& b_ = B();
    const double sa = std::max(1.0, a_.cwiseAbs().maxCoeff()), sb = std::max(1.0, b_.cwiseAbs().maxCoeff());
    const Mat a = a_.topRightCorner(n, n);
    detail::precondition(
        std::max(a_.topLeftCorner(n, n).cwiseAbs().maxCoeff(), a_.bottomRightCorner(n, n).cwiseAbs().maxCoeff()) / sa,
        1e-12, "A must be off-diagonal");
    detail::precondition((a_.bottomLeftCorner(n, n) - a.adjoint()).cwiseAbs().maxCoeff() / sa, 1e-12,
                         "A must have lower block a^*");
    detail::precondition(
        std::max(b_.topRightCorner(n, n).cwiseAbs().maxCoeff(), b_.bottomLeftCorner(n, n).cwiseAbs().maxCoeff()) / sb,
        1e-12, "B must be block diagonal");
    const Mat b = b_.topLeftCorner(n, n), c = b_.bottomRightCorner(n, n);
    if (id == "CI.ii") {
      detail::need(n >= 2, "U^CI fourth moments need N >= 2 (factor N^2 - 1 vanishes)");
      return (2.0 * tr(a.adjoint() * a) * (N * tr(b) * tr(c) - tr(b * c.transpose())) +
              2.0 * tr(a.conjugate() * a) * (N * tr(b * c.transpose()) - tr(b) * tr(c))) /
             (N * (N * N - 1.0));
    }
    if (id == "CI.iii") {
      detail::need(n >= 2, "U^CI fourth moments need N >= 2 (factor N - 1 vanishes)");
      detail::precondition((a.transpose() + a).cwiseAbs().maxCoeff() / sa, 1e-12, "a^t = -a");
      return tr(a_ * a_) * (tr(b) * tr(c) - tr(b * c.transpose())) / (N * (N - 1.0));
    }
  }
  if (id.rfind("CII.", 0) == 0) {
    const int h = 2 * n;
    if (id == "CII.i") {
      const Mat &a_ = A(), &b_ = B();
      return (tr(a_.topLeftCorner(h, h)) * tr(b_.topLeftCorner(h, h)) +
              tr(a_.bottomRightCorner(h, h)) * tr(b_.bottomRightCorner(h, h))) /
             (2.0 * N);
    }
    if (id == "CII.ii") {
      const Mat &a_ = A(), &b_ = B();
      const double sa = std::max(1.0, a_.cwiseAbs().maxCoeff()), sb = std::max(1.0, b_.cwiseAbs().maxCoeff());
      const Mat I = sym_I(n).cast<cplx>();
      const Mat a = a_.topRightCorner(h, h);
      detail::precondition(std::max(a_.topLeftCorner(h, h).cwiseAbs().maxCoeff(),
                                    a_.bottomRightCorner(h, h).cwiseAbs().maxCoeff()) / sa,
                           1e-12, "A must be off-diagonal");
      detail::precondition((a_.bottomLeftCorner(h, h) - a.adjoint()).cwiseAbs().maxCoeff() / sa, 1e-12,
                           "A must have lower block a^*");
      detail::precondition((I * a.conjugate() * I - a).cwiseAbs().maxCoeff() / sa, 1e-12,
                           "I conj(a) I = a");
      detail::precondition(std::max((b_.adjoint() - b_).cwiseAbs().maxCoeff(),
                                    (b_.transpose() - b_).cwiseAbs().maxCoeff()) / sb,
                           1e-12, "B^* = B^t = B");
      const Mat e = b_.topLeftCorner(h, h), f = b_.topRightCorner(h, h);
      detail::precondition(std::max((b_.bottomRightCorner(h, h) - e).cwiseAbs().maxCoeff(),
                                    (b_.bottomLeftCorner(h, h) - f).cwiseAbs().maxCoeff()) / sb,
                           1e-12, "B = [[e, f], [f, e]]");
      const cplx te = tr(e);
      return tr(a_ * a_) * (te * te + tr(I.adjoint() * f * I * f)) / (4.0 * N * N);
    }
  }
  throw ParameterError("unknown lemma item '" + id + "'");
}

// Finds the lemma item for (family, pattern), trying the conjugate swap for
// the unitary family. For the shared CI word the general item CI.ii is used.
inline std::optional<std::string> find_lemma(AnalyticFamily f, const MomentPattern& p) {
  for (int swap = 0; swap < 2; ++swap) {
    const MomentPattern q = swap ? p.conjugate_swapped() : p;
    for (auto& it : lemma_items())
      if (it.family == f && MomentPattern::parse(it.pattern) == q) {
        if (swap && f != AnalyticFamily::Unitary) continue;
        return std::string(it.id);
      }
  }
  return std::nullopt;
}

inline cplx analytic_moment(AnalyticFamily f, const MomentPattern& p, const MatrixSlots& s, int n) {
  auto id = find_lemma(f, p);
  if (!id)
    throw ParameterError("no closed form for " + p.str() + " over " + std::string(to_string(f)));
  return analytic_moment_item(*id, s, n);
}

inline AnalyticFamily lemma_family(const std::string& id) {
  for (auto& it : lemma_items())
    if (it.id == id) return it.family;
  throw ParameterError("unknown lemma item '" + id + "'");
}

// Random inputs satisfying the structural preconditions of item `id`:
// Ginibre matrices, or the block shapes the CI and CII items require.
inline MatrixSlots random_lemma_inputs(const std::string& id, int n, Rng& rng) {
  MatrixSlots s;
  if (id.rfind("CI.", 0) == 0 && id != "CI.i") {
    Mat a = ginibre(n, rng);
    if (id == "CI.iii") a = (a - a.transpose()).eval();
    Mat A = Mat::Zero(2 * n, 2 * n), B = Mat::Zero(2 * n, 2 * n);
    A.topRightCorner(n, n) = a;
    A.bottomLeftCorner(n, n) = a.adjoint();
    B.topLeftCorner(n, n) = ginibre(n, rng);
    B.bottomRightCorner(n, n) = ginibre(n, rng);
    s['A'] = A;
    s['B'] = B;
    return s;
  }
  if (id == "CII.ii") {
    const int h = 2 * n;
    const Mat I = sym_I(n).cast<cplx>();
    Mat a = ginibre(h, rng);
    a = ((a + I * a.conjugate() * I) / 2.0).eval();
    RMat e = real_ginibre(h, rng), f = real_ginibre(h, rng);
    e = (e + e.transpose()).eval();
    f = (f + f.transpose()).eval();
    Mat A = Mat::Zero(2 * h, 2 * h), B(2 * h, 2 * h);
    A.topRightCorner(h, h) = a;
    A.bottomLeftCorner(h, h) = a.adjoint();
    B << e.cast<cplx>(), f.cast<cplx>(), f.cast<cplx>(), e.cast<cplx>();
    s['A'] = A;
    s['B'] = B;
    return s;
  }
  const int d = slot_dim(lemma_family(id), n);
  for (char c : {'A', 'B', 'C', 'D'}) s[c] = ginibre(d, rng);
  return s;
}

}  // namespace cartan
