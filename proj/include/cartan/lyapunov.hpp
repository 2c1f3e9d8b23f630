#pragma once

// Lyapunov spectra of i.i.d. products T_n ... T_1.
//
// qr_lyapunov runs the Gram-Schmidt (QR) cocycle; perturbative_lyapunov and
// friends evaluate the second-order closed forms in the coupling lambda for
// T = R exp(lambda P); birkhoff_expansion_estimate evaluates the expansion
//   (lambda/2) Tr(U*QU pi) + (lambda^2/4) Tr(U*SU pi) - (lambda^2/4) Tr(U*QU pi U*QU pi)
// by Monte Carlo over the Haar measure of the compact subgroup, with
// Q = P + P^*, S = P^2 + 2 P^*P + P^*^2.

#include "cartan/haar.hpp"
#include "cartan/weingarten.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cartan {

// ---- samplers -------------------------------------------------------------------

enum class SamplerMode { RppToy, Dirac, Custom };

inline std::string_view to_string(SamplerMode m) {
  switch (m) {
    case SamplerMode::RppToy: return "rpp_toy";
    case SamplerMode::Dirac: return "dirac";
    case SamplerMode::Custom: return "custom";
  }
  return "?";
}

// Draws T = R exp(lambda P). draw_r and draw_p are independent pieces so that
// moment estimates can reuse the P distribution.
struct MatrixSampler {
  GroupSpec spec;
  SamplerMode mode = SamplerMode::Custom;
  double lambda = 0.0;
  int dim = 0;
  std::function<Mat(Rng&)> draw_r;  // unitary element of the group
  std::function<Mat(Rng&)> draw_p;  // Lie algebra element
  // Overrides is_in_group(., spec) for samplers whose matrices live in a
  // group with no GroupSpec of their own (block-diagonal transfer groups).
  std::function<MembershipReport(const Mat&)> membership;

  Mat draw(Rng& rng) const {
    Mat r = draw_r(rng);
    if (lambda == 0.0) return r;
    return r * expm(lambda * draw_p(rng));
  }
};

// Gaussian Lie algebra element: projection of a complex Ginibre matrix with
// E|G_ij|^2 = sigma^2.
inline std::function<Mat(Rng&)> gaussian_lie_algebra(const GroupSpec& g, double sigma) {
  auto proj = std::make_shared<LieProjector>(g);
  const int d = g.total_dim();
  return [proj, d, sigma](Rng& rng) { return (*proj)(sigma * ginibre(d, d, rng)); };
}

// Random-phase toy model: R Haar on the maximal compact subgroup, P
// Gaussian-projected. sigma = 0 selects the default 1/sqrt(dim).
inline MatrixSampler rpp_toy(const GroupSpec& g, double lambda, double sigma = 0.0) {
  if (!std::isfinite(lambda)) throw ParameterError("lambda must be finite");
  if (sigma < 0.0) throw ParameterError("sigma must be non-negative");
  const int d = g.total_dim();
  if (sigma == 0.0) sigma = 1.0 / std::sqrt(static_cast<double>(d));
  MatrixSampler s;
  s.spec = g;
  s.mode = SamplerMode::RppToy;
  s.lambda = lambda;
  s.dim = d;
  const CompactGroupSpec c = compact_of(g);
  s.draw_r = [c](Rng& rng) { return sample_compact(c, rng); };
  s.draw_p = gaussian_lie_algebra(g, sigma);
  return s;
}

// Emits the same matrix every step.
inline MatrixSampler constant_sampler(const Mat& t, const GroupSpec& g) {
  if (t.rows() != t.cols()) throw ParameterError("constant sampler needs a square matrix");
  MatrixSampler s;
  s.spec = g;
  s.mode = SamplerMode::Custom;
  s.lambda = 0.0;
  s.dim = static_cast<int>(t.rows());
  s.draw_r = [t](Rng&) { return t; };
  s.draw_p = [d = s.dim](Rng&) { return Mat::Zero(d, d).eval(); };
  return s;
}

// ---- QR cocycle ------------------------------------------------------------------

struct LyapunovEstimate {
  RVec gamma;   // descending
  RVec stderr_;
  long steps = 0;
  long burn_in = 0;
  int batches = 0;
  int replicas = 1;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  GroupSpec spec;

  int dim() const { return static_cast<int>(gamma.size()); }
  // Partial sum over the first p exponents, 1 <= p <= dim.
  double partial_sum(int p) const { return gamma.head(p).sum(); }
};

// Resumable chain state. batch_sums holds the per-batch log-diagonal sums of
// completed batches; current holds the running batch.
struct QrState {
  long step = 0;  // steps done, burn-in included
  Mat frame;
  std::vector<RVec> batch_sums;
  RVec current;
  std::string rng_state;
};

struct QrOptions {
  long burn_in = -1;  // -1: max(1000, steps / 100)
  int batches = 20;
  long checkpoint_every = 100000;
  std::function<void(const QrState&)> checkpoint;  // called every checkpoint_every steps
  const QrState* resume = nullptr;
  bool verify_membership = false;  // check each T against the sampler's group
};

inline long default_burn_in(long steps) { return std::max<long>(1000, steps / 100); }

namespace detail {

// One cocycle step: T Q = Q' R with diag(R) > 0. Returns false if a
// diagonal entry vanishes or is not finite.
inline bool qr_step(const Mat& t, Mat& frame, RVec& logs) {
  Eigen::HouseholderQR<Mat> qr(t * frame);
  const Mat& r = qr.matrixQR();
  const int d = static_cast<int>(t.rows());
  Mat q = qr.householderQ();
  for (int i = 0; i < d; ++i) {
    const double a = std::abs(r(i, i));
    if (!(a > 0.0) || !std::isfinite(a)) return false;
    logs(i) = std::log(a);
    q.col(i) *= r(i, i) / a;
  }
  frame = std::move(q);
  return true;
}

inline LyapunovEstimate summarize(const std::vector<RVec>& batch_sums, long per_batch) {
  const int b = static_cast<int>(batch_sums.size());
  const int d = static_cast<int>(batch_sums[0].size());
  LyapunovEstimate e;
  e.gamma = RVec::Zero(d);
  e.stderr_ = RVec::Zero(d);
  std::vector<RVec> means;
  for (auto& s : batch_sums) means.push_back(s / static_cast<double>(per_batch));
  for (auto& m : means) e.gamma += m / b;
  for (auto& m : means) e.stderr_ += (m - e.gamma).cwiseAbs2();
  e.stderr_ = (e.stderr_ / (b * (b - 1.0))).cwiseSqrt();
  return e;
}

inline void sort_descending(LyapunovEstimate& e) {
  std::vector<int> idx(static_cast<size_t>(e.dim()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return e.gamma(a) > e.gamma(b); });
  RVec g(e.dim()), s(e.dim());
  for (int i = 0; i < e.dim(); ++i) g(i) = e.gamma(idx[i]), s(i) = e.stderr_(idx[i]);
  e.gamma = g;
  e.stderr_ = s;
}

}  // namespace detail

// Lyapunov spectrum of a single chain. steps counts post-burn-in steps and
// must satisfy steps >= 10 burn_in >= 100; steps is rounded down to a
// multiple of the batch count.
inline LyapunovEstimate qr_lyapunov(const MatrixSampler& sampler, long steps, Rng& rng,
                                    const QrOptions& opt = {}) {
  const long burn = opt.burn_in < 0 ? default_burn_in(steps) : opt.burn_in;
  if (burn < 10 || steps < 10 * burn)
    throw ParameterError("qr_lyapunov needs steps >= 10 * burn_in >= 100 (steps " + std::to_string(steps) +
                         ", burn_in " + std::to_string(burn) + ")");
  if (opt.batches < 2) throw ParameterError("qr_lyapunov needs at least 2 batches");
  const int d = sampler.dim;
  const long per_batch = steps / opt.batches;
  const long total = burn + per_batch * opt.batches;

  QrState st;
  if (opt.resume) {
    st = *opt.resume;
    rng.set_state(st.rng_state);
    if (st.frame.rows() != d) throw DataError("checkpoint frame has the wrong size");
  } else {
    st.frame = sample_unitary(d, rng);  // generic initial flag
    st.current = RVec::Zero(d);
  }
  RVec logs(d);
  while (st.step < total) {
    Mat t;
    bool ok = false;
    for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
      t = sampler.draw(rng);
      if (opt.verify_membership) {
        auto rep = sampler.membership ? sampler.membership(t) : is_in_group(t, sampler.spec, 1e-9);
        if (!rep.member)
          throw VerificationError("sampler emitted a matrix outside the group at step " + std::to_string(st.step) +
                                  " (residual " + std::to_string(rep.max_residual()) + ")");
      }
      ok = detail::qr_step(t, st.frame, logs);
    }
    if (!ok) throw NumericError("non-finite log in the QR cocycle at step " + std::to_string(st.step));
    ++st.step;
    if (st.step > burn) {
      st.current += logs;
      if ((st.step - burn) % per_batch == 0) {
        st.batch_sums.push_back(st.current);
        st.current.setZero();
      }
    }
    if (opt.checkpoint && opt.checkpoint_every > 0 && st.step % opt.checkpoint_every == 0) {
      st.rng_state = rng.state();
      opt.checkpoint(st);
    }
  }
  LyapunovEstimate e = detail::summarize(st.batch_sums, per_batch);
  e.steps = per_batch * opt.batches;
  e.burn_in = burn;
  e.batches = opt.batches;
  e.lambda = sampler.lambda;
  e.seed = rng.seed();
  e.spec = sampler.spec;
  detail::sort_descending(e);
  return e;
}

// Independent replicas on split streams, combined by averaging. Replica r
// uses Rng(seed).split(r), whatever the number of worker threads.
inline LyapunovEstimate qr_lyapunov_replicas(const MatrixSampler& sampler, long steps, int replicas,
                                             std::uint64_t seed, QrOptions opt = {}, int workers = 0) {
  if (replicas < 1) throw ParameterError("replicas must be positive");
  opt.checkpoint = nullptr;
  opt.resume = nullptr;
  std::vector<std::optional<LyapunovEstimate>> out(static_cast<size_t>(replicas));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(replicas));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r; (r = next++) < replicas;) {
      try {
        Rng rng = Rng(seed).split(static_cast<std::uint64_t>(r));
        out[r] = qr_lyapunov(sampler, steps, rng, opt);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, replicas);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  LyapunovEstimate e = *out[0];
  const int d = e.dim();
  e.gamma = RVec::Zero(d);
  RVec var = RVec::Zero(d);
  for (auto& o : out) {
    e.gamma += o->gamma / replicas;
    var += o->stderr_.cwiseAbs2();
  }
  e.stderr_ = var.cwiseSqrt() / replicas;
  e.replicas = replicas;
  e.seed = seed;
  return e;
}

// Sum of the first p exponents by iterating the normalized p-fold wedge
// product, with Lambda^p T represented by its p x p minors. A cross-check for
// the QR cocycle at small sizes.
inline Mat exterior_power(const Mat& t, int p) {
  const int d = static_cast<int>(t.rows());
  if (p < 1 || p > d) throw ParameterError("exterior power order out of range");
  std::vector<std::vector<int>> subsets;
  std::vector<int> cur;
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == p) {
      subsets.push_back(cur);
      return;
    }
    for (int i = start; i < d; ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  const int s = static_cast<int>(subsets.size());
  Mat out(s, s);
  Mat sub(p, p);
  for (int a = 0; a < s; ++a)
    for (int b = 0; b < s; ++b) {
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) sub(i, j) = t(subsets[a][i], subsets[b][j]);
      out(a, b) = sub.determinant();
    }
  return out;
}

inline double exterior_power_partial_sum(const MatrixSampler& sampler, int p, long steps, long burn_in, Rng& rng) {
  if (sampler.dim > 4 || p > 2) throw ParameterError("exterior-power cross-check supports d <= 4 and p <= 2");
  Mat frame = sample_unitary(sampler.dim, rng);
  // Start from the wedge of the first p columns of a random unitary.
  Vec v = exterior_power(frame, p).col(0);
  v.normalize();
  double acc = 0.0;
  for (long k = 0; k < burn_in + steps; ++k) {
    v = exterior_power(sampler.draw(rng), p) * v;
    const double nv = v.norm();
    if (!(nv > 0.0) || !std::isfinite(nv)) throw NumericError("degenerate wedge vector at step " + std::to_string(k));
    v /= nv;
    if (k >= burn_in) acc += std::log(nv);
  }
  return acc / static_cast<double>(steps);
}

// ---- perturbative formulas -------------------------------------------------------------

struct MomentInputs {
  double e_trQ = 0.0;
  double e_trQ2 = 0.0;
  double e_trQ_sq = 0.0;
  // Standard errors when estimated by sampling.
  double se_trQ = 0.0, se_trQ2 = 0.0, se_trQ_sq = 0.0;
};

inline MomentInputs moment_inputs_mc(const std::function<Mat(Rng&)>& draw_p, long samples, Rng& rng) {
  if (samples < 2) throw ParameterError("moment_inputs_mc needs at least 2 samples");
  double s[3] = {0, 0, 0}, s2[3] = {0, 0, 0};
  for (long k = 0; k < samples; ++k) {
    const Mat p = draw_p(rng);
    const Mat q = p + p.adjoint();
    const double tq = q.trace().real();
    const double v[3] = {tq, (q * q).trace().real(), tq * tq};
    for (int i = 0; i < 3; ++i) s[i] += v[i], s2[i] += v[i] * v[i];
  }
  const double n = static_cast<double>(samples);
  MomentInputs m;
  double se[3];
  double mean[3];
  for (int i = 0; i < 3; ++i) {
    mean[i] = s[i] / n;
    se[i] = std::sqrt(std::max(0.0, s2[i] / n - mean[i] * mean[i]) / (n - 1.0));
  }
  m.e_trQ = mean[0], m.e_trQ2 = mean[1], m.e_trQ_sq = mean[2];
  m.se_trQ = se[0], m.se_trQ2 = se[1], m.se_trQ_sq = se[2];
  return m;
}

// gamma_p = lambda * lin * E Tr Q + lambda^2 (q2 * E Tr Q^2 + qsq * E (Tr Q)^2).
struct PerturbativeCoefficients {
  Rational lin{0};
  Rational q2{0};
  Rational qsq{0};

  bool operator==(const PerturbativeCoefficients&) const = default;
  PerturbativeCoefficients operator-() const { return {-lin, -q2, -qsq}; }
  PerturbativeCoefficients& operator+=(const PerturbativeCoefficients& o) {
    lin += o.lin, q2 += o.q2, qsq += o.qsq;
    return *this;
  }
  double evaluate(double lambda, const MomentInputs& m) const {
    return lambda * to_double(lin) * m.e_trQ + lambda * lambda * (to_double(q2) * m.e_trQ2 + to_double(qsq) * m.e_trQ_sq);
  }
};

namespace detail {

inline Rational R(long long a, long long b = 1) { return Rational(a, b); }

inline int sign_pow(int p) { return p % 2 == 0 ? 1 : -1; }

// The per-class displays for 1 <= p <= half (or the full range where the
// formula covers it). n is the group parameter N, m the second size of
// rectangular classes.
inline PerturbativeCoefficients printed_coefficients(Cartan g, long long n, long long m, long long p) {
  PerturbativeCoefficients c;
  const long long s = sign_pow(static_cast<int>(p));
  switch (g) {
    case Cartan::A: {
      c.lin = R(1, 2 * n);
      const Rational k = R(n + 1 - 2 * p, 4 * (n * n - 1));
      c.q2 = k;
      c.qsq = -k / Rational(n);
      break;
    }
    case Cartan::AI: {
      c.lin = R(1, 2 * n);
      const Rational k = R(n + 1 - 2 * p, 4 * (n - 1) * (n + 2));
      c.q2 = k;
      c.qsq = -k / Rational(n);
      break;
    }
    case Cartan::AII: {
      c.lin = R(1, 4 * n);
      const Rational k = R(2 * n + 1 - 2 * p + s, 8 * (n - 1) * (2 * n + 1));
      c.q2 = k;
      c.qsq = -k / Rational(2 * n);
      break;
    }
    case Cartan::AIII:
    case Cartan::BDI:
      // N - p + 1/2 over 8 N M (N^2 when square).
      c.q2 = R(2 * n - 2 * p + 1, 16 * n * m);
      break;
    case Cartan::CI: c.q2 = R(n - p + 1, 8 * n * (n + 1)); break;
    case Cartan::DIII: c.q2 = R(2 * n - 2 * p + 1 + s, 16 * n * (n - 1)); break;
    case Cartan::CII:
      // (2N - p + 1 + (-1)^p / 2) / (32 N^2), N^2 -> N M for rectangular.
      c.q2 = R(4 * n - 2 * p + 2 + s, 64 * n * m);
      break;
    case Cartan::D: {
      const Rational k = R(n + 1 - 2 * p, 4 * n * (n - 1));
      c.q2 = k;
      c.qsq = -k / Rational(n + 2);
      break;
    }
    case Cartan::C: c.q2 = R(n + 1 - p, 4 * n * (2 * n + 1)); break;
  }
  return c;
}

}  // namespace detail

// Exponent dimension of the group.
inline int spectrum_dim(Cartan g, int n, int m) { return make_group(g, n, m).total_dim(); }

// Coefficients of gamma_p over the whole spectrum 1 <= p <= dim: the printed
// display on the first part, exact zeros in the middle of rectangular
// classes, reflection gamma_p = -gamma_{dim+1-p} beyond.
inline PerturbativeCoefficients perturbative_coefficients(Cartan g, int n, int m, int p) {
  if (m <= 0) m = n;
  const GroupSpec spec = make_group(g, n, m);
  const int d = spec.total_dim();
  if (p < 1 || p > d)
    throw ParameterError("exponent index p=" + std::to_string(p) + " out of range 1.." + std::to_string(d) +
                         " for class " + std::string(to_string(g)));
  auto need = [&](bool ok, const char* factor) {
    if (!ok)
      throw DomainError(std::string("perturbative formula for class ") + std::string(to_string(g)) +
                        " is singular at N=" + std::to_string(n) + " (factor " + factor + ")");
  };
  switch (g) {
    case Cartan::A:
    case Cartan::AI: need(n >= 2, "N - 1"); return detail::printed_coefficients(g, n, m, p);
    case Cartan::AII: need(n >= 2, "N - 1"); return detail::printed_coefficients(g, n, m, p);
    case Cartan::D: need(n >= 2, "N - 1"); return detail::printed_coefficients(g, n, m, p);
    case Cartan::DIII: need(n >= 2, "N - 1"); [[fallthrough]];
    case Cartan::CI:
    case Cartan::C:
      if (p <= n) return detail::printed_coefficients(g, n, m, p);
      return -detail::printed_coefficients(g, n, m, d + 1 - p);
    case Cartan::AIII:
    case Cartan::BDI:
    case Cartan::CII: {
      const int head = g == Cartan::CII ? 2 * n : n;  // non-zero exponents on each side
      if (p <= head) return detail::printed_coefficients(g, n, m, p);
      if (p > d - head) return -detail::printed_coefficients(g, n, m, d + 1 - p);
      return {};
    }
  }
  return {};
}

inline double perturbative_lyapunov(Cartan g, int n, int m, int p, double lambda, const MomentInputs& mom) {
  return perturbative_coefficients(g, n, m, p).evaluate(lambda, mom);
}

inline RVec perturbative_spectrum(Cartan g, int n, int m, double lambda, const MomentInputs& mom) {
  if (m <= 0) m = n;
  const int d = spectrum_dim(g, n, m);
  RVec out(d);
  for (int p = 1; p <= d; ++p) out(p - 1) = perturbative_lyapunov(g, n, m, p, lambda, mom);
  return out;
}

// Coefficients of sum_{q <= p} gamma_q.
inline PerturbativeCoefficients partial_sum_coefficients(Cartan g, int n, int m, int p) {
  PerturbativeCoefficients c;
  for (int q = 1; q <= p; ++q) c += perturbative_coefficients(g, n, m, q);
  return c;
}

// gamma_p = lambda^2 C_N (N_eff - eta p + eta') / N_eff at centered P, with
// C_N = kappa * E(q2 Tr Q^2 + qsq (Tr Q)^2).
struct UnifiedForm {
  Rational eta, eta_prime, kappa;
  long long n_eff;
  Rational q2{1}, qsq{0};  // moment functional inside C_N
};

inline UnifiedForm unified_form(Cartan g, int n, int p) {
  const long long N = n;
  const int s = detail::sign_pow(p);
  using detail::R;
  switch (g) {
    case Cartan::A: return {R(2), R(1), R(N, 4 * (N * N - 1)), N, R(1), R(-1, N)};
    case Cartan::AI: return {R(2), R(1), R(N, 4 * (N - 1) * (N + 2)), N, R(1), R(-1, N)};
    case Cartan::AII: return {R(1), R(1 + s, 2), R(N, 4 * (N - 1) * (2 * N + 1)), N, R(1), R(-1, 2 * N)};
    case Cartan::AIII:
    case Cartan::BDI: return {R(1), R(1, 2), R(1, 8 * N), N};
    case Cartan::CI: return {R(1), R(1), R(1, 8 * (N + 1)), N};
    case Cartan::DIII: return {R(1), R(1 + s, 2), R(1, 8 * (N - 1)), N};
    case Cartan::CII: return {R(1), R(2 + s, 2), R(1, 16 * N), 2 * N};
    case Cartan::D: return {R(2), R(1), R(1, 4 * (N - 1)), N, R(1), R(-1, N + 2)};
    case Cartan::C: return {R(1), R(1), R(1, 4 * (2 * N + 1)), N};
  }
  return {};
}

// Order-lambda^2 coefficients rebuilt from the unified-form triple.
inline PerturbativeCoefficients from_unified_form(const UnifiedForm& r, int p) {
  const Rational shape = (Rational(r.n_eff) - r.eta * Rational(p) + r.eta_prime) / Rational(r.n_eff);
  PerturbativeCoefficients c;
  c.q2 = r.kappa * shape * r.q2;
  c.qsq = r.kappa * shape * r.qsq;
  return c;
}

// ---- symmetry-enforced zeros -------------------------------------------------------------

struct ZeroCount {
  int count = 0;
  int multiplicity = 1;  // degeneracy of the whole spectrum
};

inline ZeroCount zero_exponent_count(const GroupSpec& s) {
  ZeroCount z;
  switch (s.g_class) {
    case Cartan::AIII:
    case Cartan::BDI: z.count = s.m - s.n; break;
    case Cartan::CII: z.count = 2 * (s.m - s.n); break;
    case Cartan::DIII: z.count = s.n % 2 ? 2 : 0; break;
    case Cartan::D: z.count = s.n % 2 ? 1 : 0; break;
    default: break;
  }
  if (s.g_class == Cartan::AII || s.g_class == Cartan::DIII || s.g_class == Cartan::CII) z.multiplicity = 2;
  return z;
}

// ---- expansion estimator -------------------------------------------------------------------

// Orthonormal frame v_1..v_p whose span carries the invariant measure in the
// expansion for class g.
inline Mat lyapunov_frame(const GroupSpec& g, int p) {
  const int d = g.total_dim(), n = g.n;
  Mat v = Mat::Zero(d, p);
  const double h = 1.0 / std::sqrt(2.0);
  auto bad = [&](const std::string& why) {
    return ParameterError("no expansion frame for class " + std::string(to_string(g.g_class)) + ": " + why);
  };
  if (g.realization == Realization::Alternate) throw bad("alternate realization");
  switch (g.g_class) {
    case Cartan::A:
    case Cartan::AI:
    case Cartan::D:
      if (p > d) throw bad("p out of range");
      for (int q = 0; q < p; ++q) v(q, q) = 1.0;
      break;
    case Cartan::C:
      if (p > n) throw bad("p > N");
      for (int q = 0; q < p; ++q) v(q, q) = 1.0;
      break;
    case Cartan::AII:
      if (p > d) throw bad("p out of range");
      for (int k = 0; k < p; ++k) v(k % 2 == 0 ? k / 2 : k / 2 + n, k) = 1.0;
      break;
    case Cartan::AIII:
    case Cartan::BDI:
    case Cartan::CI:
      if (p > n) throw bad("p > N");
      for (int q = 0; q < p; ++q) v(q, q) = h, v(q + n, q) = h;
      break;
    case Cartan::DIII:
      if (p > n) throw bad("p > N");
      for (int k = 0; k < p; ++k) {
        const int q = k / 2;
        if (k % 2 == 0) v(q, k) = h, v(q + n, k) = h;
        else v(q + n, k) = h, v(q, k) = -h;
      }
      break;
    case Cartan::CII:
      if (g.rectangular()) throw bad("rectangular CII");
      if (p > 2 * n) throw bad("p > 2N");
      for (int k = 0; k < p; ++k) {
        const int q = k / 2;
        if (k % 2 == 0) v(q, k) = h, v(q + 2 * n, k) = h;
        else v(q + n, k) = h, v(q + 3 * n, k) = -h;
      }
      break;
  }
  return v;
}

// The frames above for D and DIII do not span subspaces that can carry the
// top eigenvectors of a positive group element: in O(N,C) those come in
// isotropic pairs (v, conj v) with v^t v = 0, and in DIII a Kramers pair
// (v, I conj v) for a real eigenvalue != 1 must be J-isotropic as a whole.
// admissible_frame uses such pairs; it covers the non-negative half of the
// spectrum (p <= N/2 for D, p <= 2 floor(N/2) for DIII) and defers to
// lyapunov_frame for the other classes.
inline Mat admissible_frame(const GroupSpec& g, int p) {
  const int n = g.n;
  const double h = 1.0 / std::sqrt(2.0);
  if (g.realization == Realization::Standard && g.g_class == Cartan::D) {
    if (p < 1 || p > n / 2) throw ParameterError("admissible D frame needs 1 <= p <= N/2");
    Mat v = Mat::Zero(n, p);
    for (int k = 0; k < p; ++k) v(2 * k, k) = h, v(2 * k + 1, k) = cplx(0.0, h);
    return v;
  }
  if (g.realization == Realization::Standard && g.g_class == Cartan::DIII) {
    if (p < 1 || p > 2 * (n / 2)) throw ParameterError("admissible DIII frame needs 1 <= p <= 2 floor(N/2)");
    Mat v = Mat::Zero(2 * n, p);
    for (int k = 0; k < p; ++k) {
      const int q = 2 * (k / 2);
      if (k % 2 == 0) v(q, k) = h, v(n + q + 1, k) = h;  // v
      else v(n + q, k) = h, v(q + 1, k) = -h;            // I conj(v)
    }
    return v;
  }
  return lyapunov_frame(g, p);
}

struct ExpansionEstimate {
  double first = 0.0, first_se = 0.0;    // coefficient of lambda
  double second = 0.0, second_se = 0.0;  // coefficient of lambda^2
  long samples = 0;
};

// Monte Carlo of the lambda and lambda^2 coefficients of sum_{q<=p} gamma_q
// under the random phase property, over the orbit of `frame` (default
// lyapunov_frame).
inline ExpansionEstimate birkhoff_expansion_estimate(const GroupSpec& g, int p, const std::function<Mat(Rng&)>& draw_p,
                                                     long samples, Rng& rng, const Mat* frame = nullptr) {
  if (samples < 2) throw ParameterError("birkhoff_expansion_estimate needs at least 2 samples");
  if (frame && (frame->rows() != g.total_dim() || frame->cols() != p))
    throw ParameterError("expansion frame has the wrong shape");
  const Mat v = frame ? *frame : lyapunov_frame(g, p);
  const Mat pi = v * v.adjoint();
  const CompactGroupSpec c = compact_of(g);
  double s1 = 0, s1q = 0, s2 = 0, s2q = 0;
  for (long k = 0; k < samples; ++k) {
    const Mat u = sample_compact(c, rng);
    const Mat pp = draw_p(rng);
    const Mat q = pp + pp.adjoint();
    const Mat sm = pp * pp + 2.0 * pp.adjoint() * pp + pp.adjoint() * pp.adjoint();
    const Mat uqu = u.adjoint() * q * u * pi;
    const double a = 0.5 * uqu.trace().real();
    const double b = 0.25 * (u.adjoint() * sm * u * pi).trace().real() - 0.25 * (uqu * uqu).trace().real();
    s1 += a, s1q += a * a, s2 += b, s2q += b * b;
  }
  const double n = static_cast<double>(samples);
  ExpansionEstimate e;
  e.samples = samples;
  e.first = s1 / n;
  e.second = s2 / n;
  e.first_se = std::sqrt(std::max(0.0, s1q / n - e.first * e.first) / (n - 1.0));
  e.second_se = std::sqrt(std::max(0.0, s2q / n - e.second * e.second) / (n - 1.0));
  return e;
}

}  // namespace cartan
