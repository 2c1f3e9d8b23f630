#pragma once

// Fixed symmetry matrices, the ten classical groups in their standard
// realizations, membership validators and Lie algebra projections.
//
// Block conventions. J, I, K are 2x2 block matrices with n x n blocks.
// Classes that need an extra C^2 grading live at size 4n and use
// X (x) Y := kron(X_2, kron(Y_2, 1_n)), so the first factor is the outer
// 2x2 block structure. With this choice J (x) 1 = diag(1, -1) in 2n blocks,
// J (x) I = diag(I_2n, -I_2n) and the block groups of the chiral and BdG
// models come out in the standard 2n realization.

#include "cartan/types.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>
#include <vector>

namespace cartan {

enum class Realization { Standard, Alternate };

struct GroupSpec {
  Cartan g_class = Cartan::A;
  int n = 1;
  int m = 1;  // equals n except for U(n,m), O(n,m), SP(2n,2m)
  Realization realization = Realization::Standard;

  bool rectangular() const { return m != n; }

  int total_dim() const {
    switch (g_class) {
      case Cartan::A:
      case Cartan::AI:
      case Cartan::D: return n;
      case Cartan::AII:
      case Cartan::C:
      case Cartan::CI: return 2 * n;
      case Cartan::DIII: return realization == Realization::Alternate ? 4 * n : 2 * n;
      case Cartan::AIII:
      case Cartan::BDI: return n + m;
      case Cartan::CII: return 2 * (n + m);
    }
    return 0;
  }

  bool operator==(const GroupSpec&) const = default;
};

inline bool allows_signature(Cartan c) {
  return c == Cartan::AIII || c == Cartan::BDI || c == Cartan::CII;
}

// Validated constructor. m <= 0 means "same as n".
inline GroupSpec make_group(Cartan c, int n, int m = 0,
                            Realization r = Realization::Standard) {
  if (n < 1) throw ParameterError("group size n must be positive, got " + std::to_string(n));
  if (m <= 0) m = n;
  if (m != n && !allows_signature(c))
    throw ParameterError(std::string("class ") + std::string(to_string(c)) +
                         " has no rectangular signature variant");
  if (m < n) throw ParameterError("signature groups use the convention m >= n");
  if (r == Realization::Alternate && c != Cartan::DIII)
    throw ParameterError("the alternate realization exists only for DIII");
  return GroupSpec{c, n, m, r};
}

// ---- fixed matrices -------------------------------------------------------

inline RMat kron(const RMat& a, const RMat& b) {
  RMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline RMat sym_J(int n) {
  RMat j = RMat::Identity(2 * n, 2 * n);
  j.bottomRightCorner(n, n) *= -1.0;
  return j;
}

inline RMat sym_I(int n) {
  RMat i = RMat::Zero(2 * n, 2 * n);
  i.topRightCorner(n, n) = -RMat::Identity(n, n);
  i.bottomLeftCorner(n, n) = RMat::Identity(n, n);
  return i;
}

inline RMat sym_K(int n) {
  RMat k = RMat::Zero(2 * n, 2 * n);
  k.topRightCorner(n, n) = RMat::Identity(n, n);
  k.bottomLeftCorner(n, n) = RMat::Identity(n, n);
  return k;
}

inline RMat signature(int n, int m) {
  RMat g = RMat::Identity(n + m, n + m);
  g.bottomRightCorner(m, m) *= -1.0;
  return g;
}

// X (x) Y for 2x2 factors, size 4n.
inline RMat tensor(const RMat& x2, const RMat& y2, int n) {
  return kron(x2, kron(y2, RMat::Identity(n, n)));
}

inline RMat one2() { return RMat::Identity(2, 2); }

inline Mat cayley(int n) {
  const double s = 1.0 / std::sqrt(2.0);
  const cplx i(0.0, 1.0);
  Mat c(2 * n, 2 * n);
  c.setZero();
  for (int q = 0; q < n; ++q) {
    c(q, q) = s;
    c(q, q + n) = -i * s;
    c(q + n, q) = s;
    c(q + n, q + n) = i * s;
  }
  return c;
}

// Conjugator to the commuting-symmetry realization of DIII at size 4n:
// B = 2^{-1/2} [[-i I, 1], [1, i I]] with 2n blocks.
inline Mat conj_B(int n) {
  const cplx i(0.0, 1.0);
  Mat b = (-i * tensor(sym_J(1), sym_I(1), n).cast<cplx>() +
           tensor(sym_K(1), one2(), n).cast<cplx>()) /
          std::sqrt(2.0);
  return b;
}

// Conjugator D = 2^{-1/2} [[1, I], [I, 1]] for the U*(4n) picture of CII.
inline Mat conj_D(int n) {
  Mat d = (tensor(one2(), one2(), n) + tensor(sym_K(1), sym_I(1), n)).cast<cplx>() /
          std::sqrt(2.0);
  return d;
}

struct SymmetryMatrices {
  RMat J, I, K;  // size 2b where b is the block size of the spec
  RMat G_sig;    // signature matrix of the spec (if any)
  Mat C;         // Cayley matrix at the same size as J
  Mat B_conj;    // DIII alternate conjugator (size 4n, standard DIII only)
  Mat D_conj;    // CII conjugator (size 4n, square CII only)
};

inline SymmetryMatrices standard_matrices(const GroupSpec& s) {
  if (s.n < 1 || s.m < 1) throw ParameterError("invalid group size");
  SymmetryMatrices out;
  int b = s.n;
  if (s.g_class == Cartan::CII) b = 2 * s.n;
  out.J = sym_J(b);
  out.I = sym_I(b);
  out.K = sym_K(b);
  out.C = cayley(b);
  if (s.g_class == Cartan::CII)
    out.G_sig = signature(2 * s.n, 2 * s.m);
  else if (allows_signature(s.g_class))
    out.G_sig = signature(s.n, s.m);
  else
    out.G_sig = sym_J(s.n);
  out.B_conj = conj_B(s.n);
  out.D_conj = conj_D(s.n);
  return out;
}

// ---- membership -------------------------------------------------------------

inline constexpr double tau_mem = 1e-10;

struct RelationResidual {
  std::string relation;
  double residual;  // operator norm of the defect; "invertible" reports 1
                    // when sigma_min / sigma_max <= tol and 0 otherwise
};

struct MembershipReport {
  bool member = true;
  std::vector<RelationResidual> residuals;

  double max_residual() const {
    double r = 0.0;
    for (auto& x : residuals) r = std::max(r, x.residual);
    return r;
  }
};

namespace detail {

inline void check_square(const Mat& t, int dim, const char* what) {
  if (t.rows() != dim || t.cols() != dim)
    throw ParameterError(std::string(what) + ": expected " + std::to_string(dim) + "x" +
                         std::to_string(dim) + " matrix, got " + std::to_string(t.rows()) +
                         "x" + std::to_string(t.cols()));
  if (!t.allFinite()) throw DataError(std::string(what) + ": non-finite matrix entries");
}

// Quaternionic structure for CII: J (x) I in the square case, and its
// rectangular analogue diag(I_2n, -I_2m).
inline RMat cii_quaternion(int n, int m) {
  RMat q = RMat::Zero(2 * (n + m), 2 * (n + m));
  q.topLeftCorner(2 * n, 2 * n) = sym_I(n);
  q.bottomRightCorner(2 * m, 2 * m) = -sym_I(m);
  return q;
}

// Antiunitary symmetry S with S^* conj(T) S = T, and the form G with
// T^* G T = G (or T^t G T = G), for each class.
struct Relations {
  RMat form;          // empty if none
  bool transpose_form = false;  // T^t G T = G instead of T^* G T = G
  std::vector<RMat> antiunitary;  // each S: S^* conj(T) S = T
  bool needs_invertible = false;
  std::string form_name;
  std::vector<std::string> anti_names;
};

inline Relations relations_of(const GroupSpec& s) {
  Relations r;
  const int n = s.n, m = s.m;
  switch (s.g_class) {
    case Cartan::A:
      r.needs_invertible = true;
      break;
    case Cartan::AI:
      r.needs_invertible = true;
      r.antiunitary.push_back(RMat::Identity(n, n));
      r.anti_names.push_back("conj(T) = T");
      break;
    case Cartan::AII:
      r.needs_invertible = true;
      r.antiunitary.push_back(sym_I(n));
      r.anti_names.push_back("I^* conj(T) I = T");
      break;
    case Cartan::AIII:
      r.form = signature(n, m);
      r.form_name = "T^* G T = G";
      break;
    case Cartan::CI:
      r.form = sym_J(n);
      r.form_name = "T^* J T = J";
      r.antiunitary.push_back(sym_K(n));
      r.anti_names.push_back("K^* conj(T) K = T");
      break;
    case Cartan::DIII:
      if (s.realization == Realization::Alternate) {
        r.form = tensor(sym_I(1), one2(), n);
        r.form_name = "T^* (I x 1) T = I x 1";
        r.antiunitary.push_back(tensor(one2(), sym_I(1), n));
        r.anti_names.push_back("(1 x I)^* conj(T) (1 x I) = T");
      } else {
        r.form = sym_J(n);
        r.form_name = "T^* J T = J";
        r.antiunitary.push_back(sym_I(n));
        r.anti_names.push_back("I^* conj(T) I = T");
      }
      break;
    case Cartan::BDI:
      r.form = signature(n, m);
      r.form_name = "T^* G T = G";
      r.antiunitary.push_back(RMat::Identity(n + m, n + m));
      r.anti_names.push_back("conj(T) = T");
      break;
    case Cartan::CII:
      r.form = signature(2 * n, 2 * m);
      r.form_name = "T^* (J x 1) T = J x 1";
      r.antiunitary.push_back(cii_quaternion(n, m));
      r.anti_names.push_back("(J x I)^* conj(T) (J x I) = T");
      break;
    case Cartan::D:
      r.form = RMat::Identity(n, n);
      r.transpose_form = true;
      r.form_name = "T^t T = 1";
      break;
    case Cartan::C:
      r.form = sym_I(n);
      r.transpose_form = true;
      r.form_name = "T^t I T = I";
      break;
  }
  return r;
}

}  // namespace detail

inline MembershipReport is_in_group(const Mat& t, const GroupSpec& s, double tol = tau_mem) {
  detail::check_square(t, s.total_dim(), "is_in_group");
  const auto rel = detail::relations_of(s);
  MembershipReport rep;
  if (rel.needs_invertible) {
    Eigen::JacobiSVD<Mat> svd(t);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1), smax = sv(0);
    double res = (smax == 0.0) ? INFINITY : (smin / smax <= tol ? 1.0 : 0.0);
    rep.residuals.push_back({"invertible", res});
  }
  if (rel.form.size() > 0) {
    const Mat g = rel.form.cast<cplx>();
    const Mat lhs = rel.transpose_form ? Mat(t.transpose() * g * t) : Mat(t.adjoint() * g * t);
    rep.residuals.push_back({rel.form_name, opnorm(lhs - g)});
  }
  for (size_t k = 0; k < rel.antiunitary.size(); ++k) {
    const Mat sm = rel.antiunitary[k].cast<cplx>();
    rep.residuals.push_back({rel.anti_names[k], opnorm(sm.adjoint() * t.conjugate() * sm - t)});
  }
  for (auto& r : rep.residuals)
    if (!(r.residual <= tol)) rep.member = false;
  return rep;
}

inline MembershipReport is_in_lie_algebra(const Mat& p, const GroupSpec& s,
                                          double tol = tau_mem) {
  detail::check_square(p, s.total_dim(), "is_in_lie_algebra");
  const auto rel = detail::relations_of(s);
  MembershipReport rep;
  if (rel.form.size() > 0) {
    const Mat g = rel.form.cast<cplx>();
    const Mat lhs = rel.transpose_form ? Mat(p.transpose() * g + g * p)
                                       : Mat(p.adjoint() * g + g * p);
    rep.residuals.push_back({"linearized " + rel.form_name, opnorm(lhs)});
  }
  for (size_t k = 0; k < rel.antiunitary.size(); ++k) {
    const Mat sm = rel.antiunitary[k].cast<cplx>();
    rep.residuals.push_back({rel.anti_names[k], opnorm(sm.adjoint() * p.conjugate() * sm - p)});
  }
  for (auto& r : rep.residuals)
    if (!(r.residual <= tol)) rep.member = false;
  return rep;
}

// Averages X over the involutions defining the Lie algebra. The form
// involution is applied first, then the antiunitary ones in the order listed
// by the class relations. Holds the fixed matrices so that repeated
// projections (one per step of a random product) stay cheap.
class LieProjector {
 public:
  explicit LieProjector(const GroupSpec& s) : spec_(s) {
    const auto rel = detail::relations_of(s);
    if (rel.form.size() > 0) {
      g_ = rel.form.cast<cplx>();
      ginv_ = g_.inverse();
      transpose_form_ = rel.transpose_form;
    }
    for (const auto& sr : rel.antiunitary) anti_.push_back(sr.cast<cplx>());
  }

  Mat operator()(const Mat& x) const {
    detail::check_square(x, spec_.total_dim(), "project_to_lie_algebra");
    Mat out = x;
    if (g_.size() > 0) {
      // X^* G + G X = 0  <=>  X = -G^{-1} X^* G ; likewise for transposes.
      const Mat theta = transpose_form_ ? Mat(-ginv_ * out.transpose() * g_)
                                        : Mat(-ginv_ * out.adjoint() * g_);
      out = 0.5 * (out + theta);
    }
    for (const auto& sm : anti_) out = 0.5 * (out + sm.adjoint() * out.conjugate() * sm);
    return out;
  }

  const GroupSpec& spec() const { return spec_; }

 private:
  GroupSpec spec_;
  Mat g_, ginv_;
  bool transpose_form_ = false;
  std::vector<Mat> anti_;
};

// Projection with an idempotence check on the way out.
inline Mat project_to_lie_algebra(const Mat& x, const GroupSpec& s) {
  const LieProjector proj(s);
  Mat p = proj(x);
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  if ((proj(p) - p).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NumericError("Lie algebra projection is not idempotent for class " +
                       std::string(to_string(s.g_class)));
  return p;
}

// Pade scaling-and-squaring exponential.
inline Mat expm(const Mat& a) { return a.exp(); }

// ---- Cayley conjugation -----------------------------------------------------

enum class CayleyDirection { JtoI, ItoJ, JtoK, KtoJ };

inline Mat cayley_conjugate(const Mat& t, CayleyDirection dir) {
  if (t.rows() != t.cols() || t.rows() % 2 != 0)
    throw ParameterError("cayley_conjugate needs a square matrix of even size");
  const Mat c = cayley(static_cast<int>(t.rows() / 2));
  switch (dir) {
    case CayleyDirection::JtoI:
    case CayleyDirection::KtoJ: return c.adjoint() * t * c;
    case CayleyDirection::ItoJ:
    case CayleyDirection::JtoK: return c * t * c.adjoint();
  }
  return t;
}

}  // namespace cartan
