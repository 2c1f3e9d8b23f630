#pragma once

// Haar sampling on U(n), O(n), SP(2n) and on the maximal compact subgroups
// of the ten classical groups.

#include "cartan/classical_groups.hpp"
#include "cartan/rng.hpp"

#include <cmath>
#include <string>

namespace cartan {

// QR of a Ginibre matrix; columns rescaled so that R has positive diagonal.
inline Mat sample_unitary(int n, Rng& rng) {
  if (n < 1) throw ParameterError("sample_unitary: n must be positive");
  Mat z = ginibre(n, n, rng);
  Eigen::HouseholderQR<Mat> qr(z);
  Mat q = qr.householderQ();
  const Mat& r = qr.matrixQR();
  for (int j = 0; j < n; ++j) {
    const cplx d = r(j, j);
    const double a = std::abs(d);
    q.col(j) *= (a > 0.0) ? d / a : cplx(1.0);
  }
  return q;
}

inline RMat sample_orthogonal_real(int n, Rng& rng) {
  if (n < 1) throw ParameterError("sample_orthogonal: n must be positive");
  RMat z = real_ginibre(n, n, rng);
  Eigen::HouseholderQR<RMat> qr(z);
  RMat q = qr.householderQ();
  const RMat& r = qr.matrixQR();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

inline Mat sample_orthogonal(int n, Rng& rng) { return sample_orthogonal_real(n, rng).cast<cplx>(); }

// Quaternionic Gram-Schmidt. Column q is a Gaussian vector orthogonalized
// against the span of all earlier columns, column q+n is I conj(v_q). The
// span of earlier columns is closed under v -> I conj(v), so the pair stays
// orthonormal and the result satisfies U^*U = 1 and I^* conj(U) I = U.
inline Mat sample_symplectic(int n, Rng& rng) {
  if (n < 1) throw ParameterError("sample_symplectic: n must be positive");
  const int d = 2 * n;
  Mat u = Mat::Zero(d, d);
  int breakdowns = 0;
  for (int q = 0; q < n; ++q) {
    for (;;) {
      Vec v(d);
      for (int i = 0; i < d; ++i) v(i) = rng.cnormal();
      const double n0 = v.norm();
      // Two passes of classical Gram-Schmidt keep the columns orthogonal
      // to working precision.
      for (int pass = 0; pass < 2; ++pass)
        for (int k = 0; k < q; ++k) {
          v -= u.col(k) * u.col(k).dot(v);
          v -= u.col(k + n) * u.col(k + n).dot(v);
        }
      const double n1 = v.norm();
      if (n1 > 1e-8 * n0) {
        v /= n1;
        u.col(q) = v;
        // I conj(v): top half -conj(v_bottom), bottom half conj(v_top).
        u.col(q + n).head(n) = -v.tail(n).conjugate();
        u.col(q + n).tail(n) = v.head(n).conjugate();
        break;
      }
      if (++breakdowns > 8)
        throw NumericError("sample_symplectic: Gram-Schmidt breakdown repeated more than 8 times");
    }
  }
  return u;
}

enum class CompactFamily {
  Unitary,
  Orthogonal,
  Symplectic,
  ProductUU,
  ProductOO,
  ProductSpSp,
  EmbeddedU_CI,
  EmbeddedU_DIII,
};

struct CompactGroupSpec {
  CompactFamily family = CompactFamily::Unitary;
  int n = 1;
  int m = 1;  // second factor for product families
  // DIII alternate realization: conjugate the embedded sample by CB. n is
  // then the block size of the standard realization.
  bool alternate = false;

  int dim() const {
    switch (family) {
      case CompactFamily::Unitary:
      case CompactFamily::Orthogonal: return n;
      case CompactFamily::Symplectic: return 2 * n;
      case CompactFamily::ProductUU:
      case CompactFamily::ProductOO: return n + m;
      case CompactFamily::ProductSpSp: return 2 * (n + m);
      case CompactFamily::EmbeddedU_CI:
      case CompactFamily::EmbeddedU_DIII: return 2 * n;
    }
    return 0;
  }
};

// Maximal compact subgroup of a classical group in its standard realization.
inline CompactGroupSpec compact_of(const GroupSpec& s) {
  switch (s.g_class) {
    case Cartan::A: return {CompactFamily::Unitary, s.n, s.n};
    case Cartan::AI:
    case Cartan::D: return {CompactFamily::Orthogonal, s.n, s.n};
    case Cartan::AII:
    case Cartan::C: return {CompactFamily::Symplectic, s.n, s.n};
    case Cartan::AIII: return {CompactFamily::ProductUU, s.n, s.m};
    case Cartan::BDI: return {CompactFamily::ProductOO, s.n, s.m};
    case Cartan::CII: return {CompactFamily::ProductSpSp, s.n, s.m};
    case Cartan::CI: return {CompactFamily::EmbeddedU_CI, s.n, s.n};
    case Cartan::DIII:
      if (s.realization == Realization::Alternate)
        return {CompactFamily::EmbeddedU_DIII, 2 * s.n, 2 * s.n, true};
      return {CompactFamily::EmbeddedU_DIII, s.n, s.n};
  }
  return {};
}

inline Mat block_diag(const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

inline Mat sample_compact(const CompactGroupSpec& s, Rng& rng) {
  if (s.n < 1 || s.m < 1) throw ParameterError("sample_compact: sizes must be positive");
  switch (s.family) {
    case CompactFamily::Unitary: return sample_unitary(s.n, rng);
    case CompactFamily::Orthogonal: return sample_orthogonal(s.n, rng);
    case CompactFamily::Symplectic: return sample_symplectic(s.n, rng);
    case CompactFamily::ProductUU: {
      Mat v = sample_unitary(s.n, rng);
      return block_diag(v, sample_unitary(s.m, rng));
    }
    case CompactFamily::ProductOO: {
      Mat v = sample_orthogonal(s.n, rng);
      return block_diag(v, sample_orthogonal(s.m, rng));
    }
    case CompactFamily::ProductSpSp: {
      Mat v = sample_symplectic(s.n, rng);
      return block_diag(v, sample_symplectic(s.m, rng));
    }
    case CompactFamily::EmbeddedU_CI:
    case CompactFamily::EmbeddedU_DIII: {
      Mat v = sample_unitary(s.n, rng);
      Mat u = block_diag(v, v.conjugate());
      if (s.alternate) {
        // s.n is the block size of the standard realization here (2n').
        const Mat cb = cayley(s.n) * conj_B(s.n / 2);
        u = cb.adjoint() * u * cb;
      }
      return u;
    }
  }
  return {};
}

inline Mat sample_compact(const GroupSpec& g, Rng& rng) { return sample_compact(compact_of(g), rng); }

// A generic (noncompact) group element U1 exp(scale P) U2 with P a projected
// Gaussian. Used for closure and spectral tests.
inline Mat sample_group_element(const GroupSpec& g, Rng& rng, double scale = 0.5) {
  const int d = g.total_dim();
  Mat p = project_to_lie_algebra(ginibre(d, d, rng), g);
  return sample_compact(g, rng) * expm(scale * p) * sample_compact(g, rng);
}

}  // namespace cartan
