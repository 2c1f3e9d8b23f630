#include "cartan/dirac_models.hpp"

#include <gtest/gtest.h>

using namespace cartan;

namespace {

double dist(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

std::vector<DiracModelSpec> all_models() {
  std::vector<DiracModelSpec> v;
  for (Cartan h : all_classes)
    for (int n : {1, 2, 3}) v.push_back(make_dirac_model(h, n, 0, 0.3));
  v.push_back(make_dirac_model(Cartan::A, 1, 2, 0.3));
  v.push_back(make_dirac_model(Cartan::D, 1, 3, 0.3));
  v.push_back(make_dirac_model(Cartan::C, 1, 2, 0.3));
  return v;
}

std::string name(const DiracModelSpec& s) {
  return std::string(to_string(s.h_class)) + " n=" + std::to_string(s.n) + " m=" + std::to_string(s.m);
}

}  // namespace

TEST(DiracSpec, DefaultsAndErrors) {
  auto a = make_dirac_model(Cartan::A, 2);
  EXPECT_EQ(a.kinetic, Kinetic::J);
  EXPECT_EQ(a.energy, default_energy);
  EXPECT_EQ(a.dim(), 4);
  auto d = make_dirac_model(Cartan::DIII, 2);
  EXPECT_EQ(d.kinetic, Kinetic::K);
  EXPECT_EQ(d.energy, 0.0);
  EXPECT_EQ(make_dirac_model(Cartan::CII, 2).dim(), 8);
  EXPECT_EQ(make_dirac_model(Cartan::C, 1, 3).dim(), 8);
  EXPECT_EQ(make_dirac_model(Cartan::A, 1, 3).kinetic, Kinetic::G);

  EXPECT_THROW(make_dirac_model(Cartan::AI, 1, 2), ParameterError);
  EXPECT_THROW(make_dirac_model(Cartan::AIII, 2, 0, 0.1, 0.5), ParameterError);
  EXPECT_THROW(make_dirac_model(Cartan::A, 0), ParameterError);
  EXPECT_THROW(make_dirac_model(Cartan::A, 2, 0, 0.1, 0.7, PotentialDist{0.0}), ParameterError);
  auto bad = make_dirac_model(Cartan::AIII, 2);
  bad.kinetic = Kinetic::J;
  EXPECT_THROW(kinetic_matrix(bad), ParameterError);
  EXPECT_NO_THROW(make_dirac_model(Cartan::A, 2, 0, 0.1, 0.0));
}

TEST(Potential, ClassDIsPurelyImaginary) {
  Rng rng(1);
  auto s = make_dirac_model(Cartan::D, 3);
  for (int k = 0; k < 10; ++k) {
    Mat v = sample_potential(s, rng);
    EXPECT_LT(dist(v.conjugate(), -v), 1e-15);
    EXPECT_LT(dist(v, v.adjoint()), 1e-15);
    EXPECT_GT(v.cwiseAbs().maxCoeff(), 0.1);
  }
}

TEST(Potential, ClassAIsUnconstrainedHermitian) {
  Rng rng(2);
  auto s = make_dirac_model(Cartan::A, 2);
  Mat v = sample_potential(s, rng);
  EXPECT_LT(dist(v, v.adjoint()), 1e-15);
  EXPECT_GT(v.real().cwiseAbs().maxCoeff(), 0.05);
  EXPECT_GT(v.imag().cwiseAbs().maxCoeff(), 0.05);
  EXPECT_GT(v.topRightCorner(2, 2).cwiseAbs().minCoeff(), 0.0);
  EXPECT_TRUE(potential_involutions(s).empty());
}

TEST(Potential, ChiralPotentialIsOffDiagonal) {
  Rng rng(3);
  Mat v = sample_potential(make_dirac_model(Cartan::AIII, 3), rng);
  EXPECT_EQ(v.topLeftCorner(3, 3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(v.bottomRightCorner(3, 3).cwiseAbs().maxCoeff(), 0.0);
  Mat w = sample_potential(make_dirac_model(Cartan::BDI, 2), rng);
  EXPECT_EQ(w.imag().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Potential, ProjectionIsIdempotentAndInvolutionsCommute) {
  Rng rng(4);
  for (const auto& s : all_models()) {
    Mat v = sample_potential(s, rng);
    EXPECT_LT(dist(project_potential(s, v), v), 1e-15) << name(s);
    EXPECT_TRUE(potential_residual(s, v, 1e-14).member) << name(s);
    const auto inv = potential_involutions(s);
    Mat x = ginibre(s.dim(), rng);
    x = x + x.adjoint();
    for (auto& a : inv) {
      EXPECT_LT(dist(a.apply(a.apply(x)), x), 1e-13) << name(s) << " " << a.name;
      for (auto& b : inv) EXPECT_LT(dist(a.apply(b.apply(x)), b.apply(a.apply(x))), 1e-13) << name(s);
    }
  }
}

TEST(Potential, VarianceBeforeProjection) {
  // Class A is unprojected: off-diagonal E|V_ij|^2 = sigma^2.
  Rng rng(5);
  auto s = make_dirac_model(Cartan::A, 2, 0, 0.1, 0.7, PotentialDist{0.5});
  double acc = 0;
  const int samples = 20000;
  for (int k = 0; k < samples; ++k) acc += std::norm(sample_potential(s, rng)(0, 3));
  EXPECT_NEAR(acc / samples, 0.25, 0.01);
}

TEST(TransferStep, ZeroPotentialGivesKineticRotation) {
  auto s = make_dirac_model(Cartan::A, 2);
  auto st = transfer_step(s, Mat::Zero(4, 4));
  EXPECT_LT(dist(st.T, st.R), 1e-15);
  EXPECT_LT(dist(st.T.adjoint() * st.T, Mat::Identity(4, 4)), 1e-14);
}

TEST(TransferStep, JFormAtZeroEnergyIsInUNN) {
  Rng rng(6);
  auto s = make_dirac_model(Cartan::A, 2, 0, 0.5, 0.0);
  auto st = transfer_step(s, sample_potential(s, rng));
  EXPECT_LT(dist(st.R, Mat::Identity(4, 4)), 0.0 + 1e-300);
  EXPECT_TRUE(is_in_group(st.T, make_group(Cartan::AIII, 2)).member);
  const Mat j = sym_J(2).cast<cplx>();
  EXPECT_LT(dist(st.T.adjoint() * j * st.T, j), 1e-12);
}

TEST(TransferStep, ClassAIStepHasTheRealStructure) {
  Rng rng(7);
  auto s = make_dirac_model(Cartan::AI, 3, 0, 0.4);
  auto st = transfer_step(s, sample_potential(s, rng));
  const Mat k = sym_K(3).cast<cplx>();
  EXPECT_LT(dist(k.adjoint() * st.T.conjugate() * k, st.T), 1e-12);
}

TEST(TransferStep, RejectsUnprojectedPotential) {
  Rng rng(8);
  auto s = make_dirac_model(Cartan::AIII, 2);
  Mat x = ginibre(4, rng);
  x = x + x.adjoint();
  EXPECT_THROW(transfer_step(s, x), PreconditionError);
  EXPECT_THROW(transfer_step(s, Mat::Zero(3, 3)), ParameterError);
}

TEST(TransferGroup, TableExamples) {
  auto a = transfer_group_of(Cartan::AIII, 3);
  EXPECT_TRUE(a.block);
  EXPECT_EQ(a.g_class, Cartan::A);
  EXPECT_EQ(a.block_size, 3);
  EXPECT_EQ(a.full_dim, 6);
  auto d = transfer_group_of(Cartan::DIII, 2);
  EXPECT_EQ(d.g_class, Cartan::D);
  EXPECT_EQ(d.group_name, "O(N,C)");
  auto c = transfer_group_of(Cartan::C, 2);
  EXPECT_FALSE(c.block);
  EXPECT_EQ(c.g_class, Cartan::CII);
  EXPECT_EQ(c.group.total_dim(), 8);
  auto ci = transfer_group_of(Cartan::CI, 2);
  EXPECT_EQ(ci.block_size, 4);
  EXPECT_EQ(ci.full_dim, 8);
  EXPECT_EQ(transfer_group_of(Cartan::A, 1, 2).group, make_group(Cartan::AIII, 1, 2));
  EXPECT_EQ(transfer_group_of(Cartan::AII, 3).g_class, Cartan::DIII);
  EXPECT_EQ(transfer_group_of(Cartan::AI, 3).g_class, Cartan::CI);
  EXPECT_EQ(transfer_group_of(Cartan::BDI, 3).g_class, Cartan::AI);
  EXPECT_EQ(transfer_group_of(Cartan::CII, 3).g_class, Cartan::AII);
  EXPECT_EQ(transfer_group_of(Cartan::D, 1, 4).group, make_group(Cartan::BDI, 1, 4));
  EXPECT_THROW(transfer_group_of(Cartan::DIII, 1, 2), ParameterError);
}

TEST(TransferGroup, ZeroCountsAndMultiplicities) {
  EXPECT_EQ(expected_zero_count(transfer_group_of(Cartan::A, 1, 2)), 1);
  EXPECT_EQ(expected_zero_count(transfer_group_of(Cartan::D, 1, 3)), 2);
  EXPECT_EQ(expected_zero_count(transfer_group_of(Cartan::C, 1, 2)), 2);
  EXPECT_EQ(expected_zero_count(transfer_group_of(Cartan::AII, 3)), 2);
  EXPECT_EQ(expected_zero_count(transfer_group_of(Cartan::AII, 2)), 0);
  EXPECT_EQ(expected_zero_count(transfer_group_of(Cartan::DIII, 3)), 2);
  EXPECT_EQ(expected_zero_count(transfer_group_of(Cartan::AIII, 3)), 0);
  EXPECT_EQ(expected_multiplicity(Cartan::CII).lowest_order, 4);
  EXPECT_EQ(expected_multiplicity(Cartan::AIII).exact, 1);
}

TEST(Table1, EveryClassPassesMembership) {
  Rng rng(9);
  for (const auto& s : all_models()) {
    Table1Report rep;
    ASSERT_NO_THROW(rep = verify_table1(s, 100, rng)) << name(s);
    EXPECT_LT(rep.max_residual(), 1e-10) << name(s);
    EXPECT_EQ(rep.samples, 100);
  }
}

TEST(Table1, BdiUpperBlockIsReal) {
  Rng rng(10);
  auto s = make_dirac_model(Cartan::BDI, 3, 0, 0.5);
  auto tg = transfer_group_of(s);
  for (int k = 0; k < 100; ++k) {
    Mat a = extract_block(transfer_step(s, sample_potential(s, rng)).T, tg);
    EXPECT_EQ(a.imag().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(is_in_group(a, make_group(Cartan::AI, 3)).member);
  }
}

TEST(Table1, RectangularAHasOneZero) {
  Rng rng(11);
  auto rep = verify_table1(make_dirac_model(Cartan::A, 1, 2, 0.3), 100, rng);
  EXPECT_EQ(rep.group.group, make_group(Cartan::AIII, 1, 2));
  EXPECT_EQ(rep.zero_count, 1);
}

TEST(Table1, DetectsForeignMatrices) {
  Rng rng(12);
  auto tg = transfer_group_of(Cartan::DIII, 2);
  Mat t = sample_group_element(make_group(Cartan::AIII, 2), rng);
  EXPECT_FALSE(transfer_membership(t, tg).member);
  auto s = make_dirac_model(Cartan::DIII, 2, 0, 0.3);
  Mat ok = transfer_step(s, sample_potential(s, rng)).T;
  EXPECT_TRUE(transfer_membership(ok, tg).member);
  ok(0, 3) += 1e-6;
  EXPECT_FALSE(transfer_membership(ok, tg).member);
}

TEST(Table1, ZeroCouplingGivesZeroExponents) {
  auto s = make_dirac_model(Cartan::AII, 2, 0, 0.0);
  Rng rng(13);
  auto st = transfer_step(s, sample_potential(s, rng));
  EXPECT_LT(dist(st.T.adjoint() * st.T, Mat::Identity(4, 4)), 1e-14);
  QrOptions opt;
  opt.burn_in = 100;
  auto e = qr_lyapunov(dirac_sampler(s), 2000, rng, opt);
  EXPECT_LT(e.gamma.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BlockStructure, IsMultiplicative) {
  Rng rng(14);
  for (Cartan h : {Cartan::AIII, Cartan::BDI, Cartan::CII, Cartan::DIII, Cartan::CI}) {
    auto s = make_dirac_model(h, 2, 0, 0.2);
    auto tg = transfer_group_of(s);
    Mat full = Mat::Identity(tg.full_dim, tg.full_dim);
    Mat blk = Mat::Identity(tg.block_size, tg.block_size);
    for (int k = 0; k < 50; ++k) {
      Mat t = transfer_step(s, sample_potential(s, rng)).T;
      full = t * full;
      blk = extract_block(t, tg) * blk;
    }
    const double scale = std::max(1.0, blk.cwiseAbs().maxCoeff());
    EXPECT_LT(dist(extract_block(full, tg), blk) / scale, 1e-10) << to_string(h);
    EXPECT_LT(full.topRightCorner(tg.block_size, tg.block_size).cwiseAbs().maxCoeff() / scale, 1e-10);
  }
}

TEST(BlockStructure, FullSpectrumIsBlockSpectrumAndItsNegative) {
  for (Cartan h : {Cartan::AIII, Cartan::DIII, Cartan::CI}) {
    auto s = make_dirac_model(h, h == Cartan::DIII ? 3 : 2, 0, 0.3);
    auto full = qr_lyapunov_replicas(dirac_sampler(s), 50000, 2, 21);
    auto blk = qr_lyapunov_replicas(dirac_block_sampler(s), 50000, 2, 22);
    const int b = blk.dim();
    ASSERT_EQ(full.dim(), 2 * b);
    std::vector<double> u, su;
    for (int i = 0; i < b; ++i) u.push_back(blk.gamma(i)), su.push_back(blk.stderr_(i));
    for (int i = 0; i < b; ++i) u.push_back(-blk.gamma(i)), su.push_back(blk.stderr_(i));
    std::vector<int> idx(u.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int x, int y) { return u[x] > u[y]; });
    for (int i = 0; i < 2 * b; ++i) {
      const double se = std::hypot(full.stderr_(i), su[idx[i]]);
      EXPECT_LT(std::abs(full.gamma(i) - u[idx[i]]), 4 * se + 1e-12) << to_string(h) << " i=" << i;
    }
  }
}

TEST(BlockStructure, ChiralMiddleExponentsVanishToSecondOrder) {
  // AIII with N = 3 and an even potential distribution: the two middle
  // exponents are O(lambda^4). Fit c at lambda = 0.6 and check the bound at
  // lambda = 0.3, where a lambda^2 term of the size of gamma_1 would be ~100x
  // larger than the lambda^4 allowance.
  auto mid = [](double lambda, std::uint64_t seed) {
    auto s = make_dirac_model(Cartan::AIII, 3, 0, lambda);
    auto e = qr_lyapunov_replicas(dirac_block_sampler(s), 200000, 2, seed);
    return std::make_tuple(e.gamma(1), e.stderr_(1), e.gamma(0));
  };
  auto [g6, s6, top6] = mid(0.6, 31);
  auto [g3, s3, top3] = mid(0.3, 32);
  const double c = (std::abs(g6) + 4 * s6) / std::pow(0.6, 4);
  EXPECT_LT(std::abs(g3), c * std::pow(0.3, 4) + 4 * s3);
  EXPECT_LT(std::abs(g3), 0.05 * top3);
  EXPECT_GT(top3, 20 * s3);
}

TEST(Lyapunov, SymmetryZerosInDiracModels) {
  struct Case {
    Cartan h;
    int n, m;
  };
  for (auto [h, n, m] : std::vector<Case>{{Cartan::A, 1, 2}, {Cartan::AII, 3, 3}, {Cartan::D, 1, 2}}) {
    auto s = make_dirac_model(h, n, m, 0.5);
    auto e = qr_lyapunov_replicas(dirac_sampler(s), 40000, 2, 41);
    int zeros = 0;
    for (int i = 0; i < e.dim(); ++i) zeros += std::abs(e.gamma(i)) <= 4 * e.stderr_(i) + 1e-12;
    EXPECT_EQ(zeros, expected_zero_count(transfer_group_of(s))) << to_string(h) << " " << e.gamma.transpose();
  }
}

TEST(Lyapunov, KramersPairsForClassC) {
  auto s = make_dirac_model(Cartan::C, 2, 0, 0.5);
  auto e = qr_lyapunov_replicas(dirac_sampler(s), 40000, 2, 51);
  for (int i = 0; i + 1 < e.dim(); i += 2)
    EXPECT_LT(std::abs(e.gamma(i) - e.gamma(i + 1)), 4 * std::hypot(e.stderr_(i), e.stderr_(i + 1)) + 1e-12);
  EXPECT_GT(e.gamma(0) - e.gamma(2), 10 * e.stderr_(0));
}

TEST(Lyapunov, SamplerVerifiesMembership) {
  auto s = make_dirac_model(Cartan::CI, 2, 0, 0.3);
  Rng rng(15);
  QrOptions opt;
  opt.verify_membership = true;
  opt.burn_in = 100;
  EXPECT_NO_THROW(qr_lyapunov(dirac_sampler(s), 2000, rng, opt));
  auto bad = dirac_sampler(s);
  bad.draw_r = [](Rng& r) { return sample_unitary(8, r); };
  EXPECT_THROW(qr_lyapunov(bad, 2000, rng, opt), VerificationError);
}
