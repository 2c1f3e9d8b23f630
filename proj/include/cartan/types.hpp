#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cartan {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

// Error taxonomy. The CLI maps ParameterError to exit code 1 and
// VerificationError to exit code 2.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Cartan { A, AI, AII, AIII, BDI, CII, D, C, DIII, CI };

inline constexpr std::array<Cartan, 10> all_classes{
    Cartan::A,  Cartan::AI, Cartan::AII, Cartan::AIII, Cartan::BDI,
    Cartan::CII, Cartan::D, Cartan::C,   Cartan::DIII, Cartan::CI};

inline std::string_view to_string(Cartan c) {
  switch (c) {
    case Cartan::A: return "A";
    case Cartan::AI: return "AI";
    case Cartan::AII: return "AII";
    case Cartan::AIII: return "AIII";
    case Cartan::BDI: return "BDI";
    case Cartan::CII: return "CII";
    case Cartan::D: return "D";
    case Cartan::C: return "C";
    case Cartan::DIII: return "DIII";
    case Cartan::CI: return "CI";
  }
  return "?";
}

inline Cartan parse_cartan(std::string_view s) {
  for (Cartan c : all_classes)
    if (to_string(c) == s) return c;
  throw ParameterError("unknown Cartan class '" + std::string(s) + "'");
}

// The same label is used for Hamiltonian symmetry classes and for transfer
// groups; the role tag keeps the two usages apart where it matters.
enum class Role { H, G };

struct CartanLabel {
  Cartan label;
  Role role;
  bool operator==(const CartanLabel&) const = default;
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }

// Largest singular value.
inline double opnorm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

}  // namespace cartan
