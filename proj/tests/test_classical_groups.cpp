#include "cartan/classical_groups.hpp"
#include "cartan/haar.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

using namespace cartan;

namespace {

const cplx I1(0.0, 1.0);

double dist(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

std::vector<GroupSpec> specs_under_test() {
  std::vector<GroupSpec> v;
  for (Cartan c : all_classes)
    for (int n : {1, 2, 3}) v.push_back(make_group(c, n));
  v.push_back(make_group(Cartan::AIII, 1, 2));
  v.push_back(make_group(Cartan::AIII, 2, 3));
  v.push_back(make_group(Cartan::BDI, 1, 3));
  v.push_back(make_group(Cartan::CII, 1, 2));
  v.push_back(make_group(Cartan::DIII, 1, 0, Realization::Alternate));
  v.push_back(make_group(Cartan::DIII, 2, 0, Realization::Alternate));
  return v;
}

std::string name(const GroupSpec& g) {
  return std::string(to_string(g.g_class)) + "(" + std::to_string(g.n) + "," +
         std::to_string(g.m) + (g.realization == Realization::Alternate ? ",alt" : "") + ")";
}

// Sorted real eigenvalues of a Hermitian matrix.
std::vector<double> herm_eigs(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (h + h.adjoint()));
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + h.rows());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(SymmetryMatrices, BasicIdentities) {
  for (int n : {1, 2, 3}) {
    const RMat J = sym_J(n), I = sym_I(n), K = sym_K(n);
    const RMat one = RMat::Identity(2 * n, 2 * n);
    EXPECT_EQ(J.transpose(), J);
    EXPECT_EQ(K.transpose(), K);
    EXPECT_EQ(I.transpose(), RMat(-I));
    EXPECT_EQ(J * J, one);
    EXPECT_EQ(K * K, one);
    EXPECT_EQ(I * I, RMat(-one));
    EXPECT_EQ(K * J, I);
  }
}

TEST(SymmetryMatrices, CayleyIdentities) {
  for (int n : {1, 2, 3}) {
    const Mat J = sym_J(n).cast<cplx>(), I = sym_I(n).cast<cplx>(), K = sym_K(n).cast<cplx>();
    const Mat C = cayley(n);
    const Mat one = Mat::Identity(2 * n, 2 * n);
    EXPECT_LT(dist(C.adjoint() * J * C, I1 * I), 1e-15);
    EXPECT_LT(dist(C * J * C.adjoint(), K), 1e-15);
    EXPECT_LT(dist(C.transpose() * K * C, one), 1e-15);
    EXPECT_LT(dist(C.transpose() * I * C, I1 * I), 1e-15);
    // These three come with the opposite sign to the one usually quoted.
    EXPECT_LT(dist(C.adjoint() * I * C, -I1 * K), 1e-15);
    EXPECT_LT(dist(C * K * C.transpose(), -I1 * J), 1e-15);
    EXPECT_LT(dist(C * I * C.transpose(), I1 * I), 1e-15);
    EXPECT_LT(dist(C.adjoint() * C, one), 1e-15);
  }
}

TEST(SymmetryMatrices, StandardMatricesExamples) {
  auto s = standard_matrices(make_group(Cartan::AIII, 1));
  EXPECT_EQ(s.J, (RMat(2, 2) << 1, 0, 0, -1).finished());
  Mat expect(2, 2);
  expect << 0, -I1, I1, 0;
  EXPECT_LT(dist(s.C.adjoint() * s.J.cast<cplx>() * s.C, expect), 1e-15);
  auto s4 = standard_matrices(make_group(Cartan::AIII, 2));
  EXPECT_EQ(s4.K * s4.J, s4.I);
  EXPECT_THROW(make_group(Cartan::A, 0), ParameterError);
  EXPECT_THROW(make_group(Cartan::D, 2, 3), ParameterError);
  EXPECT_THROW(make_group(Cartan::AIII, 3, 2), ParameterError);
}

TEST(SymmetryMatrices, AuxiliaryConjugatorB) {
  for (int n : {1, 2}) {
    const Mat B = conj_B(n);
    const Mat one = Mat::Identity(4 * n, 4 * n);
    const Mat IxOne = tensor(sym_I(1), one2(), n).cast<cplx>();
    const Mat OnexI = tensor(one2(), sym_I(1), n).cast<cplx>();
    EXPECT_LT(dist(B.adjoint(), B), 1e-15);
    EXPECT_LT(dist(B * B, one), 1e-15);
    EXPECT_LT(dist(B.conjugate() * OnexI * B, I1 * IxOne), 1e-15);
    EXPECT_LT(dist(B.adjoint() * IxOne * B, -IxOne), 1e-15);
  }
}

TEST(SymmetryMatrices, TensorConvention) {
  const int n = 2;
  const RMat JxOne = tensor(sym_J(1), one2(), n);
  const RMat JxI = tensor(sym_J(1), sym_I(1), n);
  RMat expect = RMat::Zero(4 * n, 4 * n);
  expect.topLeftCorner(2 * n, 2 * n) = sym_I(n);
  expect.bottomRightCorner(2 * n, 2 * n) = -sym_I(n);
  EXPECT_EQ(JxOne, sym_J(2 * n));
  EXPECT_EQ(JxI, expect);
}

TEST(Membership, IdentityInEveryGroup) {
  for (const auto& g : specs_under_test()) {
    const int d = g.total_dim();
    auto rep = is_in_group(Mat::Identity(d, d), g);
    EXPECT_TRUE(rep.member) << name(g);
  }
}

TEST(Membership, ExponentialOfLieAlgebraElement) {
  Rng rng(11);
  for (const auto& g : specs_under_test()) {
    const int d = g.total_dim();
    Mat p = project_to_lie_algebra(ginibre(d, d, rng), g);
    EXPECT_TRUE(is_in_lie_algebra(p, g, 1e-12).member) << name(g);
    auto rep = is_in_group(expm(0.7 * p), g, 1e-8);
    EXPECT_TRUE(rep.member) << name(g) << " residual " << rep.max_residual();
  }
}

TEST(Membership, ClosureUnderProductsAndInverses) {
  Rng rng(12);
  for (const auto& g : specs_under_test()) {
    Mat t1 = sample_group_element(g, rng), t2 = sample_group_element(g, rng);
    ASSERT_TRUE(is_in_group(t1, g).member) << name(g);
    ASSERT_TRUE(is_in_group(t2, g).member) << name(g);
    EXPECT_TRUE(is_in_group(t1 * t2, g, 10 * tau_mem).member) << name(g);
    EXPECT_TRUE(is_in_group(t1.inverse(), g, 10 * tau_mem).member) << name(g);
  }
}

TEST(Membership, DefectReportNamesRelations) {
  const auto g = make_group(Cartan::DIII, 2);
  Mat t = Mat::Identity(4, 4);
  t(0, 0) = 2.0;
  auto rep = is_in_group(t, g);
  EXPECT_FALSE(rep.member);
  ASSERT_EQ(rep.residuals.size(), 2u);
  EXPECT_EQ(rep.residuals[0].relation, "T^* J T = J");
  EXPECT_NEAR(rep.residuals[0].residual, 3.0, 1e-12);
  EXPECT_GT(rep.residuals[1].residual, 0.5);
}

TEST(Membership, Errors) {
  const auto g = make_group(Cartan::AIII, 2);
  EXPECT_THROW(is_in_group(Mat::Identity(3, 3), g), ParameterError);
  Mat bad = Mat::Identity(4, 4);
  bad(1, 1) = cplx(std::nan(""), 0.0);
  EXPECT_THROW(is_in_group(bad, g), DataError);
  EXPECT_FALSE(is_in_group(Mat::Zero(2, 2), make_group(Cartan::A, 2)).member);
}

TEST(Membership, CayleyImageOfRealSymplectic) {
  // S lies in SP(2, R); C S C^* then lies in the CI group while C^* S C
  // does not.
  Mat s(2, 2);
  s << 2.0, 1.0, 0.0, 0.5;
  const Mat c = cayley(1);
  const auto ci = make_group(Cartan::CI, 1);
  EXPECT_TRUE(is_in_group(c * s * c.adjoint(), ci).member);
  auto rep = is_in_group(c.adjoint() * s * c, ci);
  EXPECT_FALSE(rep.member);
  EXPECT_GT(rep.max_residual(), 0.1);
}

TEST(Membership, AlternateDIIIRealization) {
  Rng rng(13);
  for (int n : {1, 2}) {
    const auto std_g = make_group(Cartan::DIII, 2 * n);
    const auto alt_g = make_group(Cartan::DIII, n, 0, Realization::Alternate);
    const Mat cb = cayley(2 * n) * conj_B(n);
    for (int k = 0; k < 5; ++k) {
      Mat t = sample_group_element(std_g, rng);
      auto rep = is_in_group(cb.adjoint() * t * cb, alt_g, 1e-9);
      EXPECT_TRUE(rep.member) << rep.max_residual();
    }
  }
}

TEST(Membership, CIIConjugatorD) {
  Rng rng(14);
  for (int n : {1, 2}) {
    const auto g = make_group(Cartan::CII, n);
    const Mat d = conj_D(n);
    const Mat IxI = tensor(sym_I(1), sym_I(1), n).cast<cplx>();
    const Mat IxOne = tensor(sym_I(1), one2(), n).cast<cplx>();
    for (int k = 0; k < 5; ++k) {
      Mat t = sample_group_element(g, rng);
      Mat u = d.adjoint() * t * d;
      EXPECT_LT(opnorm(u.adjoint() * IxI * u - IxI), 1e-9);
      EXPECT_LT(opnorm(IxOne.adjoint() * u.conjugate() * IxOne - u), 1e-9);
    }
  }
}

TEST(LieAlgebra, ProjectionExamples) {
  Rng rng(15);
  const auto d3 = make_group(Cartan::D, 3);
  EXPECT_LT(project_to_lie_algebra(Mat::Identity(3, 3), d3).norm(), 1e-15);

  const auto aiii = make_group(Cartan::AIII, 2);
  const Mat J = sym_J(2).cast<cplx>();
  Mat p = project_to_lie_algebra(ginibre(4, 4, rng), aiii);
  EXPECT_LT((J * p + p.adjoint() * J).cwiseAbs().maxCoeff(), 1e-14);

  EXPECT_TRUE(is_in_lie_algebra(Mat::Zero(4, 4), aiii).member);
  Mat h = ginibre(3, 3, rng);
  h = h + h.adjoint();
  EXPECT_TRUE(is_in_lie_algebra(h, make_group(Cartan::A, 3)).member);

  const auto diii = make_group(Cartan::DIII, 3);
  EXPECT_TRUE(is_in_lie_algebra(project_to_lie_algebra(ginibre(6, 6, rng), diii), diii).member);
}

TEST(LieAlgebra, ProjectionIsIdempotentEverywhere) {
  Rng rng(16);
  for (const auto& g : specs_under_test()) {
    const int d = g.total_dim();
    Mat p = project_to_lie_algebra(ginibre(d, d, rng), g);
    EXPECT_LT(dist(project_to_lie_algebra(p, g), p), 1e-14) << name(g);
  }
}

TEST(LieAlgebra, SmallExponentialsStayInGroup) {
  Rng rng(17);
  for (const auto& g : specs_under_test()) {
    const int d = g.total_dim();
    Mat p = project_to_lie_algebra(ginibre(d, d, rng), g);
    for (double t : {1e-3, 1e-1})
      EXPECT_TRUE(is_in_group(expm(t * p), g).member) << name(g);
  }
}

TEST(Cayley, Conjugation) {
  Rng rng(18);
  const auto g = make_group(Cartan::AIII, 2);
  EXPECT_LT(dist(cayley_conjugate(Mat::Identity(4, 4), CayleyDirection::JtoI), Mat::Identity(4, 4)),
            1e-15);
  Mat t = sample_group_element(g, rng);
  Mat ti = cayley_conjugate(t, CayleyDirection::JtoI);
  const Mat I = sym_I(2).cast<cplx>();
  EXPECT_LT(opnorm(ti.adjoint() * I * ti - I), 1e-10);
  EXPECT_LT(dist(cayley_conjugate(ti, CayleyDirection::ItoJ), t), 1e-13);
  Mat tk = cayley_conjugate(t, CayleyDirection::JtoK);
  const Mat K = sym_K(2).cast<cplx>();
  EXPECT_LT(opnorm(tk.adjoint() * K * tk - K), 1e-10);
  EXPECT_LT(dist(cayley_conjugate(tk, CayleyDirection::KtoJ), t), 1e-13);
  EXPECT_THROW(cayley_conjugate(Mat::Identity(3, 3), CayleyDirection::JtoI), ParameterError);
}

TEST(Spectral, ReflectionForJUnitaryClasses) {
  Rng rng(19);
  for (Cartan c : {Cartan::AIII, Cartan::CI, Cartan::DIII, Cartan::BDI, Cartan::CII}) {
    for (int n : {1, 2}) {
      const auto g = make_group(c, n);
      Mat t = sample_group_element(g, rng, 0.8);
      auto ev = herm_eigs(t.adjoint() * t);
      const size_t d = ev.size();
      for (size_t k = 0; k < d; ++k)
        EXPECT_NEAR(ev[k] * ev[d - 1 - k], 1.0, 1e-8) << to_string(c) << " n=" << n;
    }
  }
}

TEST(Spectral, KramersDegeneracy) {
  Rng rng(20);
  for (int n : {1, 2, 3}) {
    const auto g = make_group(Cartan::AII, n);
    Mat t = sample_group_element(g, rng, 0.8);
    auto ev = herm_eigs(t.adjoint() * t);
    // Cluster at relative distance 1e-6; every cluster has even size.
    size_t k = 0;
    while (k < ev.size()) {
      size_t j = k + 1;
      while (j < ev.size() && std::abs(ev[j] - ev[k]) <= 1e-6 * std::abs(ev[k])) ++j;
      EXPECT_EQ((j - k) % 2, 0u) << "n=" << n;
      k = j;
    }
  }
}

TEST(Spectral, SignatureGroupsHaveUnitEigenvalues) {
  Rng rng(21);
  for (auto [n, m] : {std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 3}}) {
    const auto g = make_group(Cartan::AIII, n, m);
    Mat t = sample_group_element(g, rng, 0.8);
    auto ev = herm_eigs(t.adjoint() * t);
    int ones = 0;
    for (double e : ev) ones += std::abs(e - 1.0) <= 1e-8;
    EXPECT_GE(ones, m - n);
  }
}
