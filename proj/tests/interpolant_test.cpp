#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "rbfx/interpolant.hpp"
#include "test_support.hpp"

using namespace rbfx;
using rbfx::testing::central_difference;
using rbfx::testing::uniform;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(v.size());
  int i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

// Independent route: assemble the full saddle-point matrix and solve it with
// a full-pivoting LU.
Eigen::VectorXd dense_saddle_solve(const Kernel& k, const PointSet& x, const Eigen::VectorXd& y) {
  const MonomialBasis basis(k.dim(), k.cpd_order());
  const int n = x.size(), q = basis.size();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + q, n + q);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) M(i, j) = k.eval(Eigen::VectorXd(x.point(i) - x.point(j)));
  }
  if (q) {
    const Eigen::MatrixXd P = basis_matrix(basis, x);
    M.topRightCorner(n, q) = P;
    M.bottomLeftCorner(q, n) = P.transpose();
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + q);
  rhs.head(n) = y;
  return M.fullPivLu().solve(rhs);
}

struct RandomProblem {
  Kernel kernel;
  PointSet nodes;
  Eigen::VectorXd values;
};

// Random problem, redrawn until the condition estimate is below 1e10.
RandomProblem random_problem(std::mt19937_64& rng, bool gaussian, int dim) {
  while (true) {
    const int n = 5 + static_cast<int>(rng() % 30);
    const PointSet x = generate_points(CubeDomain::unit(dim), PointScheme::random(n, rng()));
    const Kernel k = gaussian ? Kernel::gaussian(uniform(rng, 20, 60), dim)
                              : Kernel::multiquadric(rng() % 2 ? 1.0 : -1.0, uniform(rng, 0.05, 0.2), dim);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = uniform(rng, -3, 3);
    try {
      if (solve<double>(k, x, y).condition_estimate() < 1e6) return {k, x, y};
    } catch (const Error&) {
    }
  }
}

} // namespace

TEST(Solve, SingleGaussianCenter) {
  const auto s = solve<double>(Kernel::gaussian(1.0, 1), PointSet::from_rows({{0.0}}), vec({2.0}));
  ASSERT_EQ(s.coeffs().size(), 1);
  EXPECT_NEAR(s.coeffs()[0], 2.0, 1e-15);
  EXPECT_EQ(s.polycoeffs().size(), 0);
  EXPECT_NEAR(s.evaluate(vec({0.0})), 2.0, 1e-15);
}

TEST(Solve, TwoGaussianCenters) {
  const Kernel k = Kernel::gaussian(1.0, 1);
  const PointSet x = PointSet::from_rows({{0.0}, {1.0}});
  const auto s = solve<double>(k, x, vec({1.0, 0.0}));
  // Hand solution (1, -e^-1) / (1 - e^-2), digits from mpmath.
  EXPECT_NEAR(s.coeffs()[0], 1.1565176427496656518, 1e-14);
  EXPECT_NEAR(s.coeffs()[1], -0.42545906411966077257, 1e-14);
  const Eigen::VectorXd oracle = dense_saddle_solve(k, x, vec({1.0, 0.0}));
  EXPECT_NEAR(s.coeffs()[0], oracle[0], 1e-14);
  EXPECT_NEAR(s.coeffs()[1], oracle[1], 1e-14);
}

TEST(Solve, MultiquadricReproducesConstants) {
  const Kernel k = Kernel::multiquadric(1.0, 1.0, 1);
  const auto s = solve<double>(k, PointSet::from_rows({{0.0}, {1.0}}), vec({5.0, 5.0}));
  EXPECT_NEAR(s.coeffs()[0], 0.0, 1e-14);
  EXPECT_NEAR(s.coeffs()[1], 0.0, 1e-14);
  ASSERT_EQ(s.polycoeffs().size(), 1);
  EXPECT_NEAR(s.polycoeffs()[0], 5.0, 1e-14);
  EXPECT_LT(s.node_residual(vec({5.0, 5.0})), 1e-13);
}

TEST(Solve, MatchesDenseSaddleSolver) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + trial % 2;
    const PointSet x = generate_points(CubeDomain::unit(dim), PointScheme::halton(8 + trial));
    const Kernel k = trial % 3 == 0 ? Kernel::multiquadric(3.0, 0.1, dim)
                     : trial % 3 == 1 ? Kernel::multiquadric(1.0, 0.1, dim)
                                      : Kernel::gaussian(40.0, dim);
    Eigen::VectorXd y(x.size());
    for (int i = 0; i < y.size(); ++i) y[i] = uniform(rng, -1, 1);
    const auto s = solve<double>(k, x, y);
    const Eigen::VectorXd oracle = dense_saddle_solve(k, x, y);
    // Coefficient agreement degrades with conditioning.
    const double tol = 1e-13 * s.condition_estimate() * (1.0 + oracle.cwiseAbs().maxCoeff());
    EXPECT_LT((s.coeffs() - oracle.head(x.size())).cwiseAbs().maxCoeff(), tol);
    if (s.polycoeffs().size()) {
      EXPECT_LT((s.polycoeffs() - oracle.tail(s.polycoeffs().size())).cwiseAbs().maxCoeff(), tol);
    }
  }
}

TEST(Solve, Errors) {
  const Kernel mq3 = Kernel::multiquadric(3.0, 1.0, 1);
  try {
    solve<double>(mq3, PointSet::from_rows({{0.0}}), vec({1.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotDeterminingSet);
  }
  try {
    solve<double>(Kernel::gaussian(1.0, 1), PointSet::from_rows({{0.0}, {1e-9}}), vec({1.0, 2.0}));
    FAIL();
  } catch (const SingularSystemError& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularSystem);
    EXPECT_GT(e.condition_estimate(), 1e15);
  }
  EXPECT_THROW(solve<double>(Kernel::gaussian(1.0, 1), PointSet::from_rows({{0.0}}), vec({1.0, 2.0})), Error);
  EXPECT_THROW(solve<double>(Kernel::gaussian(1.0, 2), PointSet::from_rows({{0.0}}), vec({1.0})), Error);
  // A tighter user limit turns a mildly conditioned system into an error.
  SolveOptions strict;
  strict.max_condition = 2.0;
  EXPECT_THROW(solve<double>(Kernel::gaussian(1.0, 1), PointSet::from_rows({{0.0}, {0.5}}), vec({1.0, 2.0}), strict),
               SingularSystemError);
}

TEST(Solve, ConditionEstimateIsReported) {
  const auto s = solve<double>(Kernel::gaussian(1.0, 1), PointSet::from_rows({{0.0}, {1.0}}), vec({1.0, 0.0}));
  // Exact 1-norm condition of [[1, e^-1], [e^-1, 1]] is (1 + e^-1)^2 / (1 - e^-2).
  const double r = std::exp(-1.0);
  EXPECT_NEAR(s.condition_estimate(), (1 + r) * (1 + r) / (1 - r * r), 1e-12);
}

TEST(Evaluate, ZeroDataGivesZeroFunction) {
  std::mt19937_64 rng(42);
  const PointSet x = generate_points(CubeDomain::unit(2), PointScheme::halton(20));
  const auto s = solve<double>(Kernel::gaussian(5.0, 2), x, Eigen::VectorXd::Zero(20));
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(s.evaluate(vec({uniform(rng, 0, 1), uniform(rng, 0, 1)})), 0.0);
  }
}

TEST(EvaluateDerivative, Examples) {
  const KernelExpansion<double> single(Kernel::gaussian(1.5, 1), PointSet::from_rows({{0.0}}), vec({1.0}));
  EXPECT_EQ(single.evaluate_derivative({0}, vec({0.3})), single.evaluate(vec({0.3})));
  EXPECT_EQ(single.evaluate_derivative({1}, vec({0.0})), 0.0);
  EXPECT_NEAR(single.evaluate_derivative({2}, vec({0.0})), -2 * 1.5, 1e-15);
  EXPECT_THROW(single.evaluate_derivative({7}, vec({0.0})), Error);

  const auto s = solve<double>(Kernel::gaussian(1.0, 1), PointSet::from_rows({{0.0}}), vec({1.0}));
  EXPECT_NEAR(s.evaluate_derivative({2}, vec({0.0})), -2.0, 1e-15);
}

TEST(EvaluateDerivative, PolynomialPartIsDifferentiated) {
  // MQ beta = 3 reproduces linear polynomials; s = 2 + 3x exactly.
  const Kernel k = Kernel::multiquadric(3.0, 0.5, 1);
  const PointSet x = generate_points(CubeDomain::unit(1), PointScheme::grid(0.25));
  Eigen::VectorXd y(x.size());
  for (int i = 0; i < x.size(); ++i) y[i] = 2 + 3 * x.matrix()(i, 0);
  const auto s = solve<double>(k, x, y);
  EXPECT_NEAR(s.evaluate_derivative({1}, vec({0.37})), 3.0, 1e-9);
  EXPECT_NEAR(s.evaluate_derivative({2}, vec({0.37})), 0.0, 1e-8);
}

// Oracle: the solved double interpolant lifted to 160 digits and
// differentiated numerically.
TEST(InterpolantProperty, DerivativesAgreeWithFiniteDifferences) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 6; ++trial) {
    const int dim = 1 + trial % 2;
    auto p = random_problem(rng, trial % 3 == 0, dim);
    const auto s = solve<double>(p.kernel, p.nodes, p.values);
    const KernelExpansion<HighPrecision> lifted(p.kernel, p.nodes, s.coeffs().cast<HighPrecision>(),
                                                s.polycoeffs().cast<HighPrecision>());
    const std::function<HighPrecision(const Vector<HighPrecision>&)> f = [&](const Vector<HighPrecision>& y) {
      return lifted.evaluate(y);
    };
    const auto alphas = rbfx::testing::multi_indices_up_to(dim, 2);
    for (int point = 0; point < 50; ++point) {
      Eigen::VectorXd x(dim);
      for (int i = 0; i < dim; ++i) x[i] = uniform(rng, 0, 1);
      const auto& alpha = alphas[point % alphas.size()];
      const double fd = to_double(central_difference<HighPrecision>(f, alpha, x.cast<HighPrecision>(), 1e-3));
      const double analytic = s.evaluate_derivative(alpha, x);
      EXPECT_LE(std::abs(analytic - fd), 1e-4 * std::max(std::abs(fd), 1e-6)) << to_string(alpha);
    }
  }
}

TEST(InterpolantProperty, ExactnessAndMoments) {
  std::mt19937_64 rng(44);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto p = random_problem(rng, trial % 2 == 0, 1 + trial % 2);
    const auto s = solve<double>(p.kernel, p.nodes, p.values);
    if (s.condition_estimate() >= 1e6) continue;
    ++checked;
    EXPECT_LE(s.node_residual(p.values), 1e-8 * (1 + p.values.cwiseAbs().maxCoeff()));
    EXPECT_LE(s.moment_residual(), 1e-8 * s.coeffs().norm());
  }
  EXPECT_GT(checked, 40);
}

TEST(InterpolantProperty, PolynomialReproduction) {
  std::mt19937_64 rng(45);
  for (double beta : {1.0, 3.0, 5.0}) {
    for (int dim : {1, 2}) {
      const Kernel k = Kernel::multiquadric(beta, 0.4, dim);
      const MonomialBasis basis(dim, k.cpd_order());
      const PointSet x = generate_points(CubeDomain::unit(dim), PointScheme::halton(dim == 1 ? 12 : 30));
      Eigen::VectorXd q(basis.size());
      for (int i = 0; i < q.size(); ++i) q[i] = uniform(rng, -2, 2);
      const Eigen::VectorXd y = basis_matrix(basis, x) * q;
      const auto s = solve<double>(k, x, y);
      double worst = 0, qmax = 0;
      for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd z(dim);
        for (int j = 0; j < dim; ++j) z[j] = dim == 1 ? i / 99.0 : (j == 0 ? (i % 10) / 9.0 : (i / 10) / 9.0);
        const double exact = basis.evaluate<double>(z).dot(q);
        worst = std::max(worst, std::abs(s.evaluate(z) - exact));
        qmax = std::max(qmax, std::abs(exact));
      }
      EXPECT_LE(worst, 1e-7 * (1 + qmax)) << "beta " << beta << " dim " << dim;
    }
  }
}

TEST(InterpolantProperty, PermutationInvariance) {
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_problem(rng, trial % 2 == 0, 2);
    std::vector<int> order(p.nodes.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::VectorXd y(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) y[i] = p.values[order[i]];
    const auto a = solve<double>(p.kernel, p.nodes, p.values);
    const auto b = solve<double>(p.kernel, p.nodes.permuted(order), y);
    if (a.condition_estimate() > 1e6) continue;
    for (int i = 0; i < 25; ++i) {
      const Eigen::VectorXd z = vec({(i % 5) / 4.0, (i / 5) / 4.0});
      EXPECT_LE(std::abs(a.evaluate(z) - b.evaluate(z)), 1e-10);
    }
  }
}

TEST(NativeNorm, Examples) {
  EXPECT_NEAR(native_norm(KernelExpansion<double>(Kernel::gaussian(1.0, 1), PointSet::from_rows({{0.0}}), vec({1.0}))),
              1.0, 1e-15);
  const Kernel mq = Kernel::multiquadric(1.0, 1.0, 1);
  EXPECT_EQ(native_norm(KernelExpansion<double>(mq, PointSet::from_rows({{0.0}, {1.0}}), vec({0.0, 0.0}), vec({7.0}))),
            0.0);
  // sqrt(2 - 2 e^-1) = 1.1243847729568002989 (mpmath).
  EXPECT_NEAR(native_norm(KernelExpansion<double>(Kernel::gaussian(1.0, 1), PointSet::from_rows({{0.0}, {1.0}}),
                                                  vec({1.0, -1.0}))),
              1.1243847729568002989, 1e-14);
}

TEST(NativeNorm, Errors) {
  const Kernel mq = Kernel::multiquadric(1.0, 1.0, 1);
  const KernelExpansion<double> unbalanced(mq, PointSet::from_rows({{0.0}, {1.0}}), vec({1.0, 0.0}));
  try {
    native_norm(unbalanced);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MomentViolation);
  }
  // Bypassing the moment check exposes the negative single-center form
  // Gamma(-1/2) * c < 0.
  NativeNormOptions loose;
  loose.moment_tolerance = 10.0;
  try {
    native_norm(unbalanced, loose);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeQuadraticForm);
  }
  EXPECT_THROW(KernelExpansion<double>(mq, PointSet::from_rows({{0.0}}), vec({1.0}), vec({1.0, 2.0})), Error);
}

TEST(ResidualExpansion, SelfInterpolationCancels) {
  const Kernel k = Kernel::multiquadric(1.0, 0.5, 2);
  const PointSet x = generate_points(CubeDomain::unit(2), PointScheme::halton(15));
  std::mt19937_64 rng(47);
  Eigen::VectorXd a(x.size());
  for (int i = 0; i < a.size(); ++i) a[i] = uniform(rng, -1, 1);
  a.array() -= a.mean();
  const KernelExpansion<double> f(k, x, a, vec({0.7}));
  Eigen::VectorXd y(x.size());
  for (int i = 0; i < x.size(); ++i) y[i] = f.evaluate(x.point(i));
  const auto s = solve<double>(k, x, y);
  const auto r = residual_expansion(f, s);
  EXPECT_EQ(r.size(), x.size());
  EXPECT_LT(r.weights().cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(std::abs(r.polypart()[0]), 1e-8);
}

TEST(ResidualExpansion, KernelMismatch) {
  const PointSet x = PointSet::from_rows({{0.0}, {1.0}});
  const KernelExpansion<double> f(Kernel::gaussian(1.0, 1), x, vec({1.0, 1.0}));
  const auto s = solve<double>(Kernel::gaussian(2.0, 1), x, vec({1.0, 1.0}));
  try {
    residual_expansion(f, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KernelMismatch);
  }
}

TEST(NativeNormProperty, MonotonicityAndPythagoras) {
  std::mt19937_64 rng(48);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 1 + trial % 2;
    const Kernel k = trial % 3 == 0 ? Kernel::gaussian(uniform(rng, 15, 40), dim)
                                    : Kernel::multiquadric(trial % 3 == 1 ? 1.0 : 3.0, uniform(rng, 0.1, 0.3), dim);
    const PointSet z = generate_points(CubeDomain::unit(dim), PointScheme::random(6, rng()));
    const PointSet x = generate_points(CubeDomain::unit(dim), PointScheme::halton(10 + trial % 7));
    // Project random weights onto the moment-free subspace.
    const MonomialBasis basis(dim, k.cpd_order());
    Eigen::VectorXd a(z.size());
    for (int i = 0; i < a.size(); ++i) a[i] = uniform(rng, -1, 1);
    if (!basis.empty()) {
      const Eigen::MatrixXd P = basis_matrix(basis, z);
      a -= P * P.colPivHouseholderQr().solve(a);
    }
    const KernelExpansion<double> f(k, z, a);
    Eigen::VectorXd y(x.size());
    for (int i = 0; i < x.size(); ++i) y[i] = f.evaluate(x.point(i));
    const auto s = solve<double>(k, x, y);
    const double nf = native_norm(f), ns = native_norm(s.expansion()), nr = native_norm(residual_expansion(f, s));
    EXPECT_LE(ns, nf * (1 + 1e-9));
    EXPECT_LE(nr, nf * (1 + 1e-9));
    EXPECT_LE(std::abs(nf * nf - ns * ns - nr * nr), 1e-6 * nf * nf);
  }
}

TEST(HighPrecision, SolveMatchesDoubleOnWellConditionedProblem) {
  const Kernel k = Kernel::multiquadric(1.0, 0.3, 1);
  const PointSet x = generate_points(CubeDomain::unit(1), PointScheme::grid(0.1));
  Eigen::VectorXd y(x.size());
  for (int i = 0; i < x.size(); ++i) y[i] = std::sin(3 * x.matrix()(i, 0));
  const auto sd = solve<double>(k, x, y);
  const auto sh = solve<HighPrecision>(k, x, y.cast<HighPrecision>());
  EXPECT_LT(to_double(sh.node_residual(y.cast<HighPrecision>())), 1e-100);
  Vector<HighPrecision> z(1);
  z << HighPrecision(0.4321);
  EXPECT_NEAR(sd.evaluate(vec({0.4321})), to_double(sh.evaluate(z)), 1e-9);
}
