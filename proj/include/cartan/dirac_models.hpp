#pragma once

// Quasi-one-dimensional Dirac operators  H = Kin i d/dx - lambda V  with a
// delta-peak potential, one model per Hamiltonian symmetry class, and their
// one-cell transfer matrices T = R exp(lambda P).
//
// Kinetic forms: J-form uses T = e^{iEJ} e^{lambda iJV}, I-form
// T = e^{EI} e^{lambda IV}, K-form T = e^{iEK} e^{lambda iKV}, G-form is the
// J-form with J replaced by diag(1_n, -1_m). Classes C, CI and CII carry an
// extra C^2 and live at size 4n (or 2(n+m) for rectangular C).
//
// Symmetry constraints on V. Writing the operator relations out:
//   TRS   S^* conj(H) S = H   needs S^* conj(V) S =  V
//   PHS   S^* conj(H) S = -H  needs S^* conj(V) S = -V
//   SLS   S^* H S = -H        needs S^* V S       = -V
// Every class with a PHS or an SLS maps E to -E, so those models run at E = 0.

#include "cartan/lyapunov.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cartan {

enum class Kinetic { J, I, K, G };

inline std::string_view to_string(Kinetic k) {
  switch (k) {
    case Kinetic::J: return "J";
    case Kinetic::I: return "I";
    case Kinetic::K: return "K";
    case Kinetic::G: return "G";
  }
  return "?";
}

inline Kinetic default_kinetic(Cartan h) {
  switch (h) {
    case Cartan::AIII:
    case Cartan::BDI:
    case Cartan::CII: return Kinetic::I;
    case Cartan::DIII:
    case Cartan::CI: return Kinetic::K;
    default: return Kinetic::J;
  }
}

// Classes whose Hamiltonian symmetries pin the energy to zero.
inline bool energy_pinned(Cartan h) { return !(h == Cartan::A || h == Cartan::AI || h == Cartan::AII); }

inline bool allows_chiral_edge(Cartan h) { return h == Cartan::A || h == Cartan::C || h == Cartan::D; }

inline bool needs_extra_grading(Cartan h) { return h == Cartan::C || h == Cartan::CI || h == Cartan::CII; }

// Gaussian potential: Hermitian with E|V_ij|^2 = sigma^2 before the symmetry
// projection.
struct PotentialDist {
  double sigma = 1.0;
};

struct DiracModelSpec {
  Cartan h_class = Cartan::A;
  Kinetic kinetic = Kinetic::J;
  int n = 1;
  int m = 1;
  double energy = 0.0;
  double lambda = 0.1;
  PotentialDist dist;

  int dim() const {
    const int base = kinetic == Kinetic::G ? n + m : 2 * n;
    return needs_extra_grading(h_class) ? 2 * base : base;
  }
};

inline constexpr double default_energy = 0.7;

// energy = NaN selects the class default (0.7, or 0 where pinned). m <= 0
// means m = n; m > n switches to the G-form.
inline DiracModelSpec make_dirac_model(Cartan h, int n, int m = 0, double lambda = 0.1,
                                       double energy = std::numeric_limits<double>::quiet_NaN(),
                                       PotentialDist dist = {}) {
  if (n < 1) throw ParameterError("channel count n must be positive");
  if (m <= 0) m = n;
  if (m < n) throw ParameterError("chiral edge models use m > n");
  if (m != n && !allows_chiral_edge(h))
    throw ParameterError("class " + std::string(to_string(h)) +
                         " has a TRS or SLS and needs equal left and right channel counts");
  if (!std::isfinite(lambda)) throw ParameterError("lambda must be finite");
  if (!(dist.sigma > 0.0)) throw ParameterError("potential sigma must be positive");
  if (std::isnan(energy)) energy = energy_pinned(h) ? 0.0 : default_energy;
  if (!std::isfinite(energy)) throw ParameterError("energy must be finite");
  if (energy != 0.0 && energy_pinned(h))
    throw ParameterError("class " + std::string(to_string(h)) + " maps E to -E; only E = 0 is allowed");
  DiracModelSpec s;
  s.h_class = h;
  s.kinetic = m != n ? Kinetic::G : default_kinetic(h);
  s.n = n;
  s.m = m;
  s.energy = energy;
  s.lambda = lambda;
  s.dist = dist;
  return s;
}

// V -> sign * S^* V' S with V' = conj(V) for antiunitary S. A potential is
// admissible when it is Hermitian and fixed by every involution.
struct PotentialInvolution {
  RMat s;
  bool antiunitary = false;
  int sign = 1;
  std::string name;

  Mat apply(const Mat& v) const {
    const Mat sc = s.cast<cplx>();
    return double(sign) * (sc.adjoint() * (antiunitary ? Mat(v.conjugate()) : v) * sc);
  }
};

namespace detail {

inline void check_model(const DiracModelSpec& s) {
  if (s.n < 1 || s.m < s.n) throw ParameterError("invalid channel counts");
  if (s.m != s.n && !allows_chiral_edge(s.h_class))
    throw ParameterError("class " + std::string(to_string(s.h_class)) + " cannot have m > n");
  const bool g = s.kinetic == Kinetic::G;
  if (g != (s.m != s.n)) throw ParameterError("the G-form is used exactly when m > n");
  if (!g && s.kinetic != default_kinetic(s.h_class))
    throw ParameterError("class " + std::string(to_string(s.h_class)) + " is modelled with the " +
                         std::string(to_string(default_kinetic(s.h_class))) + "-form, not the " +
                         std::string(to_string(s.kinetic)) + "-form");
  if (s.energy != 0.0 && energy_pinned(s.h_class))
    throw ParameterError("class " + std::string(to_string(s.h_class)) + " requires E = 0");
}

// Rectangular analogue of J (x) I for the C^2-graded G-form.
inline RMat graded_quaternion(int n, int m) { return cii_quaternion(n, m); }

}  // namespace detail

// The matrix multiplying the derivative: J, I, K, G, or their (x) 1 versions.
inline RMat kinetic_matrix(const DiracModelSpec& s) {
  detail::check_model(s);
  const bool graded = needs_extra_grading(s.h_class);
  const int n = s.n;
  switch (s.kinetic) {
    case Kinetic::J: return graded ? tensor(sym_J(1), one2(), n) : sym_J(n);
    case Kinetic::I: return graded ? tensor(sym_I(1), one2(), n) : sym_I(n);
    case Kinetic::K: return graded ? tensor(sym_K(1), one2(), n) : sym_K(n);
    case Kinetic::G: return graded ? signature(2 * n, 2 * s.m) : signature(n, s.m);
  }
  return {};
}

inline std::vector<PotentialInvolution> potential_involutions(const DiracModelSpec& s) {
  detail::check_model(s);
  const int n = s.n, d = s.dim();
  std::vector<PotentialInvolution> out;
  switch (s.h_class) {
    case Cartan::A: break;
    case Cartan::AI: out.push_back({sym_K(n), true, 1, "TRS K^* conj(V) K = V"}); break;
    case Cartan::AII: out.push_back({sym_I(n), true, 1, "TRS I^* conj(V) I = V"}); break;
    case Cartan::AIII: out.push_back({sym_J(n), false, -1, "SLS J V J = -V"}); break;
    case Cartan::BDI:
      out.push_back({RMat::Identity(d, d), true, 1, "TRS conj(V) = V"});
      out.push_back({sym_J(n), false, -1, "SLS J V J = -V"});
      break;
    case Cartan::CII:
      out.push_back({tensor(sym_J(1), one2(), n), false, -1, "SLS (J x 1) V (J x 1) = -V"});
      out.push_back({tensor(one2(), sym_I(1), n), true, 1, "TRS (1 x I)^* conj(V) (1 x I) = V"});
      break;
    case Cartan::D: out.push_back({RMat::Identity(d, d), true, -1, "PHS conj(V) = -V"}); break;
    case Cartan::C:
      out.push_back({s.m != s.n ? detail::graded_quaternion(n, s.m) : tensor(sym_J(1), sym_I(1), n), true, -1,
                     "PHS (J x I)^* conj(V) (J x I) = -V"});
      break;
    case Cartan::DIII:
      out.push_back({sym_I(n), true, 1, "TRS I^* conj(V) I = V"});
      out.push_back({sym_K(n), true, -1, "PHS K^* conj(V) K = -V"});
      break;
    case Cartan::CI:
      out.push_back({tensor(sym_I(1), sym_I(1), n), true, 1, "TRS (I x I)^* conj(V) (I x I) = V"});
      out.push_back({tensor(sym_K(1), sym_I(1), n), true, -1, "PHS (K x I)^* conj(V) (K x I) = -V"});
      break;
  }
  return out;
}

// Largest defect of V against Hermiticity and each involution, relative to
// max(1, |V|).
inline MembershipReport potential_residual(const DiracModelSpec& s, const Mat& v, double tol = 1e-10) {
  if (v.rows() != s.dim() || v.cols() != s.dim())
    throw ParameterError("potential has size " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                         ", model needs " + std::to_string(s.dim()));
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  MembershipReport rep;
  rep.residuals.push_back({"V = V^*", (v - v.adjoint()).cwiseAbs().maxCoeff() / scale});
  for (const auto& inv : potential_involutions(s))
    rep.residuals.push_back({inv.name, (inv.apply(v) - v).cwiseAbs().maxCoeff() / scale});
  for (auto& r : rep.residuals)
    if (!(r.residual <= tol)) rep.member = false;
  return rep;
}

// Averages over the group generated by the involutions. They commute for every
// class, so sequential averaging is the orthogonal projection.
inline Mat project_potential(const DiracModelSpec& s, const Mat& x) {
  Mat v = 0.5 * (x + x.adjoint());
  for (const auto& inv : potential_involutions(s)) v = 0.5 * (v + inv.apply(v));
  return v;
}

inline Mat sample_potential(const DiracModelSpec& s, Rng& rng) {
  const int d = s.dim();
  const Mat x = ginibre(d, rng) * (s.dist.sigma * std::sqrt(2.0));
  Mat v = project_potential(s, x);
  auto rep = potential_residual(s, v, 1e-14);
  if (!rep.member)
    throw NumericError("potential projection left residual " + std::to_string(rep.max_residual()));
  return v;
}

struct TransferStep {
  Mat R;  // kinetic rotation
  Mat P;  // Lie algebra increment
  Mat T;  // R exp(lambda P)
};

inline Mat kinetic_rotation(const DiracModelSpec& s) {
  const Mat k = kinetic_matrix(s).cast<cplx>();
  if (s.energy == 0.0) return Mat::Identity(k.rows(), k.cols());
  if (s.kinetic == Kinetic::I) return expm(s.energy * k);
  return expm(cplx(0.0, s.energy) * k);
}

inline Mat lie_increment(const DiracModelSpec& s, const Mat& v) {
  const Mat k = kinetic_matrix(s).cast<cplx>();
  if (s.kinetic == Kinetic::I) return k * v;
  return cplx(0.0, 1.0) * k * v;
}

inline TransferStep transfer_step(const DiracModelSpec& s, const Mat& v) {
  auto rep = potential_residual(s, v, 1e-10);
  if (!rep.member) {
    std::string worst;
    for (auto& r : rep.residuals)
      if (!(r.residual <= 1e-10)) worst = r.relation;
    throw PreconditionError("potential violates " + worst + " (residual " + std::to_string(rep.max_residual()) +
                            ")");
  }
  TransferStep t;
  t.R = kinetic_rotation(s);
  t.P = lie_increment(s, v);
  t.T = s.lambda == 0.0 ? t.R : Mat(t.R * expm(s.lambda * t.P));
  return t;
}

// ---- transfer groups ---------------------------------------------------------------

// Transfer group of an H class. For the chiral and BdG-with-SLS classes the
// transfer matrices are diag(A, (A^{-1})^*) and `group` is the group of the
// upper block A; otherwise `group` is the group of T itself.
struct TransferGroup {
  Cartan h_class = Cartan::A;
  Cartan g_class = Cartan::AIII;
  GroupSpec group;
  std::string group_name;
  bool block = false;
  int block_size = 0;  // size of A when block
  int full_dim = 0;
};

inline TransferGroup transfer_group_of(Cartan h, int n = 1, int m = 0) {
  if (n < 1) throw ParameterError("channel count n must be positive");
  if (m <= 0) m = n;
  TransferGroup tg;
  tg.h_class = h;
  const bool edge = m != n;
  if (edge && !allows_chiral_edge(h))
    throw ParameterError("class " + std::string(to_string(h)) + " cannot have m > n");
  switch (h) {
    case Cartan::A: tg.g_class = Cartan::AIII, tg.group_name = "U(N,M)"; break;
    case Cartan::AI: tg.g_class = Cartan::CI, tg.group_name = "SP(2N,R)"; break;
    case Cartan::AII: tg.g_class = Cartan::DIII, tg.group_name = "SO*(2N)"; break;
    case Cartan::AIII: tg.g_class = Cartan::A, tg.group_name = "GL(N,C)"; break;
    case Cartan::BDI: tg.g_class = Cartan::AI, tg.group_name = "GL(N,R)"; break;
    case Cartan::CII: tg.g_class = Cartan::AII, tg.group_name = "U*(2N)"; break;
    case Cartan::D: tg.g_class = Cartan::BDI, tg.group_name = "O(N,M)"; break;
    case Cartan::C: tg.g_class = Cartan::CII, tg.group_name = "SP(2N,2M)"; break;
    case Cartan::DIII: tg.g_class = Cartan::D, tg.group_name = "O(N,C)"; break;
    case Cartan::CI: tg.g_class = Cartan::C, tg.group_name = "SP(2N,C)"; break;
  }
  tg.group = make_group(tg.g_class, n, allows_signature(tg.g_class) ? m : 0);
  tg.block = h == Cartan::AIII || h == Cartan::BDI || h == Cartan::CII || h == Cartan::DIII || h == Cartan::CI;
  if (tg.block) {
    tg.block_size = tg.group.total_dim();
    tg.full_dim = 2 * tg.block_size;
  } else {
    tg.full_dim = tg.group.total_dim();
  }
  return tg;
}

inline TransferGroup transfer_group_of(const DiracModelSpec& s) { return transfer_group_of(s.h_class, s.n, s.m); }

// Lyapunov multiplicity: exact, and to lowest order for centered potentials.
struct Multiplicity {
  int exact = 1;
  int lowest_order = 1;
};

inline Multiplicity expected_multiplicity(Cartan h) {
  switch (h) {
    case Cartan::AII:
    case Cartan::DIII:
    case Cartan::CI: return {2, 2};
    case Cartan::C: return {2, 2};  // quaternionic: J (x) I squares to -1 under conjugation
    case Cartan::AIII:
    case Cartan::BDI: return {1, 2};
    case Cartan::CII: return {2, 4};
    default: return {1, 1};
  }
}

// Number of exponents forced to vanish for the full transfer matrix.
inline int expected_zero_count(const TransferGroup& tg) {
  if (!tg.block) return zero_exponent_count(tg.group).count;
  return 2 * zero_exponent_count(tg.group).count;
}

namespace detail {

struct FullRelations {
  RMat form;                      // T^* F T = F
  std::vector<RMat> commuting;    // S T S^* = T
  std::vector<RMat> antiunitary;  // S^* conj(T) S = T
  std::vector<std::string> names;  // form, commuting..., antiunitary...
};

// Relations of the block transfer groups, written for the full matrix.
inline FullRelations block_relations(Cartan h, int n) {
  FullRelations r;
  switch (h) {
    case Cartan::AIII:
      r.form = sym_I(n), r.names = {"T^* I T = I"};
      r.commuting = {sym_J(n)}, r.names.push_back("J T J = T");
      break;
    case Cartan::BDI:
      r.form = sym_I(n), r.names = {"T^* I T = I"};
      r.commuting = {sym_J(n)}, r.names.push_back("J T J = T");
      r.antiunitary = {RMat::Identity(2 * n, 2 * n)}, r.names.push_back("conj(T) = T");
      break;
    case Cartan::CII:
      r.form = tensor(sym_I(1), one2(), n), r.names = {"T^* (I x 1) T = I x 1"};
      r.commuting = {tensor(sym_J(1), one2(), n)}, r.names.push_back("(J x 1) T (J x 1) = T");
      r.antiunitary = {tensor(one2(), sym_I(1), n)}, r.names.push_back("(1 x I)^* conj(T) (1 x I) = T");
      break;
    case Cartan::DIII:
      r.form = sym_K(n), r.names = {"T^* K T = K"};
      r.antiunitary = {sym_I(n), sym_K(n)};
      r.names.push_back("I^* conj(T) I = T");
      r.names.push_back("K^* conj(T) K = T");
      break;
    case Cartan::CI:
      r.form = tensor(sym_K(1), one2(), n), r.names = {"T^* (K x 1) T = K x 1"};
      r.commuting = {tensor(sym_J(1), one2(), n)}, r.names.push_back("(J x 1) T (J x 1) = T");
      r.antiunitary = {tensor(sym_K(1), sym_I(1), n)}, r.names.push_back("(K x I)^* conj(T) (K x I) = T");
      break;
    default: throw ParameterError("class " + std::string(to_string(h)) + " has no block transfer group");
  }
  return r;
}

}  // namespace detail

// Membership of a full transfer matrix in the transfer group of its H class.
// Block classes also report the block-diagonal shape, the lower block
// (A^{-1})^* and the membership of A in its own group.
inline MembershipReport transfer_membership(const Mat& t, const TransferGroup& tg, double tol = tau_mem) {
  if (t.rows() != tg.full_dim || t.cols() != tg.full_dim)
    throw ParameterError("transfer matrix has size " + std::to_string(t.rows()) + ", group needs " +
                         std::to_string(tg.full_dim));
  if (!tg.block) return is_in_group(t, tg.group, tol);
  const int b = tg.block_size;
  const int n = tg.group.n;
  const auto rel = detail::block_relations(tg.h_class, n);
  MembershipReport rep;
  size_t k = 0;
  const Mat f = rel.form.cast<cplx>();
  rep.residuals.push_back({rel.names[k++], opnorm(t.adjoint() * f * t - f)});
  for (const auto& s : rel.commuting) {
    const Mat sc = s.cast<cplx>();
    rep.residuals.push_back({rel.names[k++], opnorm(sc * t * sc.adjoint() - t)});
  }
  for (const auto& s : rel.antiunitary) {
    const Mat sc = s.cast<cplx>();
    rep.residuals.push_back({rel.names[k++], opnorm(sc.adjoint() * t.conjugate() * sc - t)});
  }
  const Mat a = t.topLeftCorner(b, b);
  const double off = std::max(t.topRightCorner(b, b).cwiseAbs().maxCoeff(),
                              t.bottomLeftCorner(b, b).cwiseAbs().maxCoeff());
  rep.residuals.push_back({"block diagonal", off});
  rep.residuals.push_back({"lower block = (A^{-1})^*", opnorm(t.bottomRightCorner(b, b) * a.adjoint() -
                                                               Mat::Identity(b, b))});
  for (auto& r : is_in_group(a, tg.group, tol).residuals)
    rep.residuals.push_back({"block: " + r.relation, r.residual});
  for (auto& r : rep.residuals)
    if (!(r.residual <= tol)) rep.member = false;
  return rep;
}

inline Mat extract_block(const Mat& t, const TransferGroup& tg) {
  if (!tg.block) throw ParameterError("class " + std::string(to_string(tg.h_class)) + " has no block form");
  return t.topLeftCorner(tg.block_size, tg.block_size);
}

// Random products of transfer steps in the QR cocycle.
inline MatrixSampler dirac_sampler(const DiracModelSpec& s) {
  detail::check_model(s);
  const TransferGroup tg = transfer_group_of(s);
  MatrixSampler out;
  out.spec = tg.group;
  out.mode = SamplerMode::Dirac;
  out.lambda = s.lambda;
  out.dim = s.dim();
  const Mat r = kinetic_rotation(s);
  out.draw_r = [r](Rng&) { return r; };
  out.draw_p = [s](Rng& rng) { return lie_increment(s, sample_potential(s, rng)); };
  out.membership = [tg](const Mat& t) { return transfer_membership(t, tg, 1e-9); };
  return out;
}

// The same product restricted to the upper block A, which lives in the
// transfer group G. Only for block classes (where E = 0, so R = 1).
inline MatrixSampler dirac_block_sampler(const DiracModelSpec& s) {
  const TransferGroup tg = transfer_group_of(s);
  if (!tg.block) throw ParameterError("class " + std::string(to_string(s.h_class)) + " has no block form");
  const int b = tg.block_size;
  MatrixSampler out;
  out.spec = tg.group;
  out.mode = SamplerMode::Dirac;
  out.lambda = s.lambda;
  out.dim = b;
  out.draw_r = [b](Rng&) { return Mat::Identity(b, b).eval(); };
  out.draw_p = [s, b](Rng& rng) { return lie_increment(s, sample_potential(s, rng)).topLeftCorner(b, b).eval(); };
  return out;
}

struct Table1Report {
  TransferGroup group;
  int samples = 0;
  std::vector<RelationResidual> max_residuals;  // per relation, over all samples
  Multiplicity multiplicity;
  int zero_count = 0;
  double max_residual() const {
    double r = 0.0;
    for (auto& x : max_residuals) r = std::max(r, x.residual);
    return r;
  }
};

// Draws transfer steps and checks them against the class table. Throws
// VerificationError naming the relation if any residual exceeds 10 tau_mem.
inline Table1Report verify_table1(const DiracModelSpec& s, int samples, Rng& rng) {
  if (samples < 1) throw ParameterError("verify_table1 needs at least one sample");
  Table1Report rep;
  rep.group = transfer_group_of(s);
  rep.samples = samples;
  rep.multiplicity = expected_multiplicity(s.h_class);
  rep.zero_count = expected_zero_count(rep.group);
  for (int k = 0; k < samples; ++k) {
    const TransferStep st = transfer_step(s, sample_potential(s, rng));
    const auto m = transfer_membership(st.T, rep.group, 10 * tau_mem);
    if (rep.max_residuals.empty()) {
      rep.max_residuals = m.residuals;
    } else {
      for (size_t i = 0; i < m.residuals.size(); ++i)
        rep.max_residuals[i].residual = std::max(rep.max_residuals[i].residual, m.residuals[i].residual);
    }
  }
  for (auto& r : rep.max_residuals)
    if (!(r.residual <= 10 * tau_mem))
      throw VerificationError("H class " + std::string(to_string(s.h_class)) + ": relation '" + r.relation +
                              "' fails with residual " + std::to_string(r.residual));
  return rep;
}

}  // namespace cartan
