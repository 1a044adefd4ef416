#include <gtest/gtest.h>

#include <numbers>

#include "hypocoax/euler.hpp"
#include "hypocoax/stability.hpp"
#include "support.hpp"

using namespace hypocoax;

namespace {

LinearizedSystem negative_control() {
  Matrix l = Matrix::Zero(2, 2);
  l(1, 1) = 1.0;
  return LinearizedSystem::from_matrices({Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, l, 1);
}

Vector unit(double a, double b) {
  Vector w(2);
  w << a, b;
  return w.normalized();
}

}  // namespace

TEST(Kalman, Examples) {
  Matrix m(2, 2), n(2, 2);
  m << 0, 1, 1, 0;
  n << 0, 0, 0, 1;
  EXPECT_EQ(kalman_rank_test(m, n).rank, 2);
  EXPECT_NEAR(kalman_rank_test(m, n).min_sigma, 1.0, 1e-12);
  EXPECT_EQ(kalman_rank_test(Matrix::Identity(2, 2), n).rank, 1);
  EXPECT_EQ(kalman_rank_test(Matrix::Identity(2, 2), Matrix::Identity(2, 2)).rank, 2);
}

TEST(Kalman, RequiresUnitDirection) {
  const LinearizedSystem lin = linearize(make_euler_system(2));
  EXPECT_NO_THROW(kalman_rank_test(lin, unit(1, 1)));
  Vector w(2);
  w << 1.0, 1.0;
  EXPECT_THROW(kalman_rank_test(lin, w), Error);
}

TEST(Kalman, RankMatchesEulerStructureOnSphere) {
  const LinearizedSystem lin = linearize(make_euler_system(3));
  for (const auto& w : sphere_grid(3, 16)) EXPECT_EQ(kalman_rank_test(lin, w).rank, 4);
}

TEST(Schedule, DefaultExponents) {
  const auto s2 = make_schedule(2, 1, 1.0, 0.1);
  EXPECT_EQ(s2.exponents, (std::vector<double>{0, 3}));
  EXPECT_NEAR(s2[0], 1.0 / (4.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(s2[1], 1e-3, 1e-15);
  const auto s3 = make_schedule(3, 2, 2.0, 0.5);
  EXPECT_EQ(s3.exponents, (std::vector<double>{0, 5, 8}));
  EXPECT_NEAR(s3[0], std::pow(2.0 * std::numbers::pi, -2.0), 1e-15);
  EXPECT_NEAR(s3[2], std::pow(0.5, 8), 1e-15);
  EXPECT_NEAR(schedule_margin(s3.exponents), 1.0, 1e-15);
  EXPECT_NEAR(schedule_margin(s2.exponents), 1.5, 1e-15);
}

TEST(Schedule, InvalidMargins) {
  auto code = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code([] { make_schedule(2, 1, 1.0, 0.1, 1.6); }), ErrorCode::InvalidMargin);
  EXPECT_EQ(code([] { make_schedule(3, 1, 1.0, 0.1, 1.2); }), ErrorCode::InvalidMargin);
  EXPECT_EQ(code([] { make_schedule(3, 1, 1.0, 0.1, 0.0); }), ErrorCode::InvalidMargin);
  EXPECT_EQ(code([] { make_schedule(3, 1, 1.0, 0.1, 1.0, {0, 1, 2}); }), ErrorCode::InvalidMargin);
  EXPECT_EQ(code([] { make_schedule(3, 1, 1.0, 1.5); }), ErrorCode::InvalidInput);
  EXPECT_NO_THROW(make_schedule(2, 1, 1.0, 0.1, 1.5));
}

TEST(Schedule, MarginInequalitiesHold) {
  for (int n = 2; n <= 6; ++n) {
    for (double eps : {0.05, 0.2, 0.45}) {
      const auto s = make_schedule(n, 2, 1.0, eps);
      auto e = [&](int k) { return std::pow(eps, s.exponents[k]); };
      for (int k = 1; k + 1 < n; ++k)
        EXPECT_LE(e(k) * e(k), std::pow(eps, 2.0 * s.delta) * e(k - 1) * e(k + 1) * (1 + 1e-12));
      for (int k = 0; k < n; ++k)
        EXPECT_LE(e(n - 1) * e(n - 1), std::pow(eps, 2.0 * s.delta) * e(k) * e(n - 2) * (1 + 1e-12));
      for (int k = 1; k < n; ++k) EXPECT_LT(s[k], 1.0);
    }
  }
}

TEST(Gram, FrozenEulerExample) {
  // N = diag(0, 1), NM = [[0, 0], [w, 0]]: K = diag(eps_1, eps_0).
  const LinearizedSystem lin = linearize(make_euler_system(1));
  const auto s = make_schedule(2, 1, 1.0, 0.3);
  for (double w : {1.0, -1.0}) {
    Vector om(1);
    om << w;
    const Matrix k = gram_matrix(lin.M(om), lin.N, s.values);
    Matrix expect = Matrix::Zero(2, 2);
    expect(0, 0) = s[1];
    expect(1, 1) = s[0];
    EXPECT_LE((k - expect).norm(), 1e-15);
  }
}

TEST(SkCondition, Euler2dBoundedBelow) {
  const LinearizedSystem lin = linearize(make_euler_system(2));
  const auto s = make_schedule(3, 2, lin.kappa0, 0.3);
  const SkReport r = sk_condition(lin, s);
  EXPECT_TRUE(r.holds);
  EXPECT_GE(r.min_gram_eig, std::min(s[0], s[1]) * (1 - 1e-9));
  EXPECT_LE(r.min_gram_eig, r.grid_min_gram_eig);
  EXPECT_NEAR(r.worst_omega.norm(), 1.0, 1e-12);
  EXPECT_EQ(r.kalman_min_rank, 3);
}

TEST(SkCondition, NegativeControlFails) {
  const LinearizedSystem lin = negative_control();
  const SkReport r = sk_condition(lin, EpsilonSchedule::uniform(2));
  EXPECT_FALSE(r.holds);
  EXPECT_EQ(r.kalman_min_rank, 1);
  EXPECT_NEAR(r.min_gram_eig, 0.0, 1e-12);
}

TEST(SkCondition, InvertibleDissipationAlwaysHolds) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix b = testing_support::random_matrix(rng, 3, 3);
    const Matrix l = b * b.transpose() + Matrix::Identity(3, 3);
    std::vector<Matrix> a{Matrix::Identity(3, 3), testing_support::random_symmetric(rng, 3),
                          testing_support::random_symmetric(rng, 3)};
    const auto lin = LinearizedSystem::from_matrices(a, l, 0);
    EXPECT_TRUE(sk_condition(lin, EpsilonSchedule::uniform(3, 0.1)).holds);
  }
}

TEST(Corrector, HermitianAndBounded) {
  std::mt19937_64 rng(41);
  const auto lin = testing_support::random_linear_system(rng, 2, 4, 2);
  const auto s = make_schedule(4, 2, 1.0, 0.2);
  for (const auto& w : sphere_grid(2, 16)) {
    const Matrix m = lin.M(w);
    const CMatrix k = corrector_matrix(m, lin.N, s.values);
    EXPECT_LE((k - k.adjoint()).norm(), 1e-14 * std::max(1.0, k.norm()));
    const double top = Eigen::SelfAdjointEigenSolver<CMatrix>(k).eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_LE(top, corrector_norm_sum(m, lin.N, s.values) * (1 + 1e-12));
  }
}

TEST(Certify, Euler1dPositive) {
  const LinearizedSystem lin = linearize(make_euler_system(1));
  const auto s = make_schedule(2, 1, lin.kappa0, 0.2);
  const Certificate c = certify_hypocoercivity(lin, s, default_rho_grid(), sphere_grid(1, 8));
  EXPECT_GT(c.c_min, 0.0);
  EXPECT_TRUE(c.certified());
  EXPECT_GT(c.min_weight_eig, 0.0);
}

TEST(Certify, NoDissipationGivesZero) {
  const LinearizedSystem lin = LinearizedSystem::from_matrices(
      {Matrix::Identity(2, 2), linearize(make_euler_system(1)).Abar[1]}, Matrix::Zero(2, 2), 1);
  const auto s = make_schedule(2, 1, 1.0, 0.2);
  const Certificate c = certify_hypocoercivity(lin, s, default_rho_grid(), sphere_grid(1, 8));
  EXPECT_NEAR(c.c_min, 0.0, 1e-12);
  EXPECT_FALSE(c.certified());
}

TEST(Certify, LargeEpsilonLosesWeightPositivity) {
  const LinearizedSystem lin = linearize(make_euler_system(1));
  EpsilonSchedule s = make_schedule(2, 1, lin.kappa0, 0.2);
  s.values[1] = 50.0;
  EXPECT_THROW(certify_hypocoercivity(lin, s, default_rho_grid(), sphere_grid(1, 8)), Error);
}

class AutotuneEuler : public ::testing::TestWithParam<int> {};

TEST_P(AutotuneEuler, CertifiesWithinBudget) {
  const int d = GetParam();
  const LinearizedSystem lin = linearize(make_euler_system(d));
  const auto omega = sphere_grid(d, d == 1 ? 8 : 32);
  const auto r = autotune_epsilon(lin, lin.kappa0, default_rho_grid(), omega);
  EXPECT_LE(r.trace.size(), 40u);
  EXPECT_GT(r.certificate.c_min, 0.0);
  EXPECT_GE(r.certificate.weight_ratio, 0.5);
  EXPECT_LE(r.certificate.corrector_bound, 0.5 * std::pow(2.0 * std::numbers::pi, -d));
  double best = 0.0;
  for (const auto& step : r.trace)
    if (step.certified) best = std::max(best, step.epsilon);
  EXPECT_EQ(best, r.schedule.epsilon);
  // Halving phase: every uncertified step before the first certified one is
  // twice the next.
  for (std::size_t i = 0; i + 1 < r.trace.size() && !r.trace[i].certified; ++i)
    EXPECT_DOUBLE_EQ(r.trace[i].epsilon, 2.0 * r.trace[i + 1].epsilon);
}

INSTANTIATE_TEST_SUITE_P(Dimensions, AutotuneEuler, ::testing::Values(1, 2));

TEST(Autotune, NegativeControlCannotCertify) {
  const LinearizedSystem lin = negative_control();
  try {
    autotune_epsilon(lin, 1.0, default_rho_grid(), sphere_grid(1, 8));
    FAIL() << "expected CannotCertify";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CannotCertify);
  }
}

TEST(Autotune, RobustToStrongerDamping) {
  const LinearizedSystem lin = linearize(make_euler_system(2, 2.0, 2.0));
  const auto r = autotune_epsilon(lin, lin.kappa0, default_rho_grid(), sphere_grid(2, 32));
  EXPECT_TRUE(r.certificate.certified());
}

TEST(Grids, SphereAndRho) {
  for (const auto& w : sphere_grid(2, 64)) EXPECT_NEAR(w.norm(), 1.0, 1e-15);
  for (const auto& w : sphere_grid(3, 16)) EXPECT_NEAR(w.norm(), 1.0, 1e-15);
  EXPECT_EQ(sphere_grid(1, 64).size(), 2u);
  const auto rho = default_rho_grid();
  EXPECT_TRUE(std::is_sorted(rho.begin(), rho.end()));
  EXPECT_EQ(rho.size(), 68u);
  EXPECT_NEAR(rho.front(), 1e-2, 1e-15);
  EXPECT_NEAR(rho.back(), 1e2, 1e-12);
}
