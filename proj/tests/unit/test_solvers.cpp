#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "qmmm/error.hpp"
#include "qmmm/solvers.hpp"
#include "support/models.hpp"

using namespace qmmm;
using qmmm::testing::atomic_1d;
using qmmm::testing::pure_diffusion;
using qmmm::testing::ref1;
using qmmm::testing::vec;

namespace {

constexpr double kSigmaRef = 0.04 + 1.0 / 24.0;

template <class F>
double bisect(F f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// Reference-model root of phi_e from the closed-form antiderivative of x e^{lx}.
double ref1_lambda_e() {
  auto phi_e_closed = [](double l) {
    auto Fx = [&](double x) { return std::exp(l * x) * (x / l - 1 / (l * l)); };
    return -0.02 + 0.04 * l + 0.5 * (Fx(0.5) - Fx(-0.5));
  };
  return bisect(phi_e_closed, 0.1, 0.4);
}

/// Reference-model root of phi(., q) with Simpson quadrature.
double ref1_lambda_q(double q) {
  auto f = [q](double l) {
    return -0.02 + 0.04 * l +
           simpson([&](double x) { return 0.5 * x * std::pow((q - 1) * l * x + 1, 1 / (q - 1)); },
                   -0.5, 0.5, 2000);
  };
  return bisect(f, 0.1, 0.4);
}

}  // namespace

TEST(Phi, TrivialPoints) {
  const auto t = ref1();
  EXPECT_NEAR(phi(t, vec({0.0}), 2.0)[0], -0.02, 1e-15);
  EXPECT_NEAR(phi_e(t, vec({0.0}))[0], -0.02, 1e-15);
  const auto d = pure_diffusion(0.03, 0.2);
  EXPECT_NEAR(phi(d, vec({0.7}), 3.0)[0], 0.03 + 0.14, 1e-15);
  EXPECT_NEAR(phi_e(d, vec({0.7}))[0], 0.03 + 0.14, 1e-15);
}

TEST(Phi, ReferenceQ2IsLinear) {
  const auto t = ref1();
  const double l = 0.02 / kSigmaRef;
  EXPECT_LE(std::abs(phi(t, vec({l}), 2.0)[0]), 1e-9);
  EXPECT_NEAR(phi(t, vec({0.7}), 2.0)[0], -0.02 + kSigmaRef * 0.7, 1e-14);
}

TEST(Phi, OutsideDomainThrows) {
  const auto t = ref1();
  try {
    phi(t, vec({2.5}), 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainError);
  }
}

TEST(PhiE, NearRoot) { EXPECT_LE(std::abs(phi_e(ref1(), vec({0.2449}))[0]), 2e-3); }

TEST(PhiDlambda, ReferenceValues) {
  const auto t = ref1();
  EXPECT_NEAR(phi_dlambda(t, vec({0.0}), 1.5)(0, 0), kSigmaRef, 1e-14);
  for (double l : {-1.5, 0.0, 0.9, 1.9}) {
    EXPECT_NEAR(phi_dlambda(t, vec({l}), 2.0)(0, 0), kSigmaRef, 1e-14);
  }
}

TEST(PhiDlambda, CentralDifference) {
  const auto t = ref1();
  const double h = 1e-5;
  for (double q : {1.1, 1.5, 2.5, 3.0, -1.0}) {
    for (double l : {-0.4, 0.1, 0.3}) {
      const double fd =
          (phi(t, vec({l + h}), q)[0] - phi(t, vec({l - h}), q)[0]) / (2 * h);
      EXPECT_NEAR(phi_dlambda(t, vec({l}), q)(0, 0), fd, 1e-6) << "q=" << q << " l=" << l;
    }
    const double fd = (phi_e(t, vec({0.3 + h}))[0] - phi_e(t, vec({0.3 - h}))[0]) / (2 * h);
    EXPECT_NEAR(phi_e_dlambda(t, vec({0.3}))(0, 0), fd, 1e-6);
  }
}

TEST(PhiDlambda, PositiveDefiniteForTwoSidedJumps) {
  std::vector<Atom> atoms{{vec({0.3, -0.2}), 1.0}, {vec({-0.2, 0.4}), 0.5}, {vec({0.1, 0.1}), 2}};
  LevyTriplet t;
  t.b = vec({0.01, -0.02});
  t.c = Matrix::Zero(2, 2);
  t.K = JumpMeasure::atoms(atoms, 2);
  const Matrix J = phi_dlambda(t, vec({0.2, -0.1}), 1.5);
  EXPECT_LT((J - J.transpose()).norm(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(J);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Phi, MonotoneInLambda) {
  const auto t = ref1();
  for (double q : {1.1, 1.5, 1.9}) {
    const auto dom = lambda_domain(t.K, q);
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 1; i < 100; ++i) {
      const double l = dom.lo + (dom.hi - dom.lo) * i / 100.0;
      const double v = phi(t, vec({l}), q)[0];
      EXPECT_GT(v, prev);
      prev = v;
    }
  }
}

TEST(SolveQmmm, ReferenceQ2) {
  const auto t = ref1();
  const auto sol = solve_qmmm(t, 2.0);
  const double expected = 0.02 / kSigmaRef;
  EXPECT_NEAR(sol.lambda[0], expected, 1e-11);
  EXPECT_LE(sol.residual_norm(), 1e-11);
  EXPECT_GT(sol.lambda[0], 0.0);
  EXPECT_LE(sol.lambda[0], 0.02 / kSigmaRef + 1e-11);
  EXPECT_NEAR(sol.k_value, 0.0004 / kSigmaRef, 1e-13);
  EXPECT_NEAR(sol.divergence_or_entropy, 1.004910, 1e-6);
  EXPECT_EQ(sol.divergence_or_entropy, std::exp(t.T * sol.k_value));
  EXPECT_TRUE(std::holds_alternative<PowerTilt>(sol.tilt));
  EXPECT_EQ(sol.beta, sol.lambda);
  EXPECT_GT(sol.min_singular_value, 0.0);
}

TEST(SolveQmmm, ReferenceOtherOrders) {
  const auto t = ref1();
  struct Case {
    double q;
    double frozen;
  };
  for (auto c : {Case{1.1, 0.24476326380257926}, Case{1.5, 0.2448979591836733},
                 Case{3.0, 0.24432912828653136}}) {
    const auto sol = solve_qmmm(t, c.q);
    EXPECT_LE(sol.residual_norm(), 1e-11);
    EXPECT_NEAR(sol.lambda[0], ref1_lambda_q(c.q), 1e-10) << "q=" << c.q;
    EXPECT_NEAR(sol.lambda[0], c.frozen, 1e-10) << "q=" << c.q;
  }
}

TEST(SolveQmmm, PureDiffusionClosedForm) {
  for (double q : {1.1, 2.0, 3.0, 8.0, -2.0}) {
    const auto t = pure_diffusion(0.05, 0.2, 2.0);
    const auto sol = solve_qmmm(t, q);
    EXPECT_NEAR(sol.lambda[0], -0.25, 1e-12);
    EXPECT_NEAR(sol.divergence_or_entropy, std::exp(2.0 * q * (q - 1) * 0.0025 / 0.4), 1e-12);
  }
}

TEST(SolveQmmm, ZeroDriftGivesIdentity) {
  auto t = ref1();
  t.b[0] = 0.0;
  const auto sol = solve_qmmm(t, 2.0);
  EXPECT_EQ(sol.lambda[0], 0.0);
  EXPECT_EQ(sol.divergence_or_entropy, 1.0);
  EXPECT_EQ(tilt_eval(sol.tilt, 0.3), 1.0);
}

TEST(SolveQmmm, UniqueAcrossStarts) {
  const auto t = ref1();
  const auto a = solve_qmmm(t, 1.5);
  for (double start : {-1.0, 0.5, 1.9}) {
    const auto b = solve_qmmm(t, 1.5, {}, vec({start}));
    EXPECT_NEAR(a.lambda[0], b.lambda[0], 1e-9);
  }
}

TEST(SolveQmmm, NegativeOrder) {
  const auto t = ref1();
  const auto sol = solve_qmmm(t, -1.0);
  EXPECT_LE(sol.residual_norm(), 1e-11);
  EXPECT_TRUE(lambda_domain(t.K, -1.0).contains(sol.lambda));
}

TEST(SolveQmmm, NoSignChangeReported) {
  // One-sided positive jumps, no diffusion: phi stays positive on the domain.
  const auto t = atomic_1d(1.0, 0.0, {{0.5, 1.0}});
  try {
    solve_qmmm(t, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoSignChange);
  }
}

TEST(SolveQmmm, TwoDimensionalAtoms) {
  std::vector<Atom> atoms{{vec({0.3, -0.2}), 1.0}, {vec({-0.2, 0.4}), 0.5}, {vec({0.1, 0.1}), 2}};
  LevyTriplet t;
  t.b = vec({0.01, -0.02});
  t.c = 0.02 * Matrix::Identity(2, 2);
  t.K = JumpMeasure::atoms(atoms, 2);
  for (double q : {1.5, 2.0, 3.0}) {
    const auto sol = solve_qmmm(t, q);
    EXPECT_LE(sol.residual_norm(), 1e-11);
    const auto warm = solve_qmmm(t, q, {}, Vector(sol.lambda + vec({0.1, -0.1})));
    EXPECT_NEAR((warm.lambda - sol.lambda).norm(), 0.0, 1e-9);
  }
}

TEST(SolveQmmm, RejectsBadOptions) {
  SolverOptions o;
  o.tol_root = 0.0;
  EXPECT_THROW(solve_qmmm(ref1(), 2.0, o), Error);
  EXPECT_THROW(solve_qmmm(ref1(), 0.5), Error);
}

TEST(SolveMemm, Reference) {
  const auto t = ref1();
  const auto sol = solve_memm(t);
  EXPECT_LE(sol.residual_norm(), 1e-11);
  EXPECT_NEAR(sol.lambda[0], ref1_lambda_e(), 1e-11);
  EXPECT_NEAR(sol.lambda[0], 0.24471094423440828, 1e-11);
  EXPECT_NEAR(sol.lambda[0], 0.2449, 1e-3);
  EXPECT_TRUE(std::holds_alternative<EsscherTilt>(sol.tilt));
  EXPECT_NEAR(sol.divergence_or_entropy, entropy_rate(t, sol.beta, sol.tilt), 1e-15);
  EXPECT_TRUE(std::isnan(sol.q));
}

TEST(SolveMemm, ClosedForms) {
  const auto d = pure_diffusion(0.05, 0.2);
  EXPECT_NEAR(solve_memm(d).lambda[0], -0.25, 1e-12);
  auto t = ref1();
  t.b[0] = 0.0;
  EXPECT_EQ(solve_memm(t).lambda[0], 0.0);
}

TEST(StructureCondition, Reference) {
  const auto sc = sc_lambda(ref1());
  EXPECT_NEAR(sc.lambda_sc[0], -0.02 / kSigmaRef, 1e-14);
  EXPECT_NEAR(sc.sigma(0, 0), kSigmaRef, 1e-14);
  EXPECT_TRUE(sc.positivity);
  EXPECT_NEAR(sc.khat_T, 0.0004 / kSigmaRef, 1e-14);
}

TEST(StructureCondition, ClosedForms) {
  const auto sc = sc_lambda(pure_diffusion(0.05, 0.2));
  EXPECT_NEAR(sc.lambda_sc[0], 0.25, 1e-14);
  auto t = ref1();
  t.b[0] = 0.0;
  const auto z = sc_lambda(t);
  EXPECT_EQ(z.lambda_sc[0], 0.0);
  EXPECT_EQ(z.khat_T, 0.0);
}

TEST(StructureCondition, SingularSigmaOutsideRange) {
  LevyTriplet t;
  t.b = vec({0.01, 0.02});
  t.c = Matrix::Zero(2, 2);
  t.c(0, 0) = 0.1;
  t.K = JumpMeasure::none(2);
  try {
    sc_lambda(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularSigma);
  }
  t.b[1] = 0.0;
  const auto sc = sc_lambda(t);
  EXPECT_NEAR(sc.lambda_sc[0], 0.1, 1e-14);
  EXPECT_EQ(sc.lambda_sc[1], 0.0);
}

TEST(Vmmm, CrosscheckAgreesOnReference) {
  const auto rep = vmmm_crosscheck(ref1());
  EXPECT_TRUE(rep.sc.positivity);
  ASSERT_TRUE(rep.qmmm.has_value());
  EXPECT_TRUE(rep.agree);
  EXPECT_LE(rep.lambda_gap, 1e-8);
  for (std::size_t i = 0; i < rep.probes.size(); ++i) {
    EXPECT_NEAR(rep.y_qmmm[i], rep.y_sc[i], 1e-8);
  }
  const auto v = solve_vmmm_sc(ref1());
  EXPECT_NEAR(v.lambda[0], rep.qmmm->lambda[0], 1e-8);
  EXPECT_LE(v.residual_norm(), 1e-12);
}

TEST(Vmmm, PositivityFailureIsReported) {
  LevyTriplet t;
  t.b = vec({-0.1});
  t.c = Matrix::Zero(1, 1);
  t.K = JumpMeasure::density(Density1D(density::Uniform{-0.5, 0.5, 0.5}));
  const auto rep = vmmm_crosscheck(t);
  EXPECT_NEAR(rep.sc.lambda_sc[0], -2.4, 1e-12);
  EXPECT_FALSE(rep.sc.positivity);
  EXPECT_EQ(rep.message, "SC holds but Z_hat_T not strictly positive; VMMM != VOSMM");
  EXPECT_FALSE(rep.qmmm.has_value());
  EXPECT_THROW(solve_vmmm_sc(t), Error);
}

TEST(Oracle, MatchesSolverOnTwoAtoms) {
  const auto t = atomic_1d(-0.01, 0.01, {{0.5, 1.0}, {-0.25, 2.0}});
  const auto sol = solve_qmmm(t, 2.0);
  const auto o = oracle_pq_atoms(t, 2.0);
  EXPECT_NEAR(o.k, sol.k_value, 1e-6);
  EXPECT_NEAR(o.y[0], 1.0 + sol.lambda[0] * 0.5, 1e-4);
  EXPECT_NEAR(o.y[1], 1.0 - sol.lambda[0] * 0.25, 1e-4);
  EXPECT_NEAR(o.beta[0], sol.lambda[0], 1e-4);
  EXPECT_LE(o.constraint_violation, 1e-10);
}

TEST(Oracle, SingleAtomAndTrivialCase) {
  const auto t = atomic_1d(0.03, 0.02, {{-0.3, 0.8}});
  for (double q : {1.3, 2.0, 4.0}) {
    const auto sol = solve_qmmm(t, q);
    const auto o = oracle_pq_atoms(t, q);
    EXPECT_NEAR(o.k, sol.k_value, 1e-6) << "q=" << q;
  }
  // b_0 = 0 with atoms inside the unit ball: (0, 1, ..., 1) is optimal.
  const auto z = atomic_1d(0.0, 0.02, {{-0.3, 0.8}, {0.2, 0.5}});
  const auto o = oracle_pq_atoms(z, 2.0);
  EXPECT_NEAR(o.k, 0.0, 1e-12);
}

TEST(Oracle, RandomAtomicModels) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int compared = 0;
  for (int m = 0; m < 10; ++m) {
    const int d = 1 + m % 2;
    const int n = 2 + static_cast<int>(u(rng) * 5);
    std::vector<Atom> atoms;
    for (int i = 0; i < n; ++i) {
      Vector x(d);
      for (int j = 0; j < d; ++j) x[j] = -0.6 + 1.4 * u(rng);
      atoms.push_back(Atom{x, 0.2 + u(rng)});
    }
    LevyTriplet t;
    t.b = Vector(d);
    for (int j = 0; j < d; ++j) t.b[j] = -0.05 + 0.1 * u(rng);
    t.c = 0.05 * u(rng) * Matrix::Identity(d, d);
    t.K = JumpMeasure::atoms(atoms, d);
    const double q = std::array<double, 4>{1.5, 2.0, 3.0, 1.2}[m % 4];
    try {
      const auto sol = solve_qmmm(t, q);
      const auto o = oracle_pq_atoms(t, q);
      EXPECT_NEAR(o.k, sol.k_value, 1e-6) << "model " << m;
      for (int i = 0; i < n; ++i) {
        EXPECT_NEAR(o.y[i], tilt_eval(sol.tilt, atoms[i].x), 1e-4) << "model " << m;
      }
      ++compared;
    } catch (const Error& e) {
      ADD_FAILURE() << "model " << m << ": " << e.what();
    }
  }
  EXPECT_EQ(compared, 10);
}

TEST(Oracle, InfeasibleAndLimits) {
  const auto t = atomic_1d(2.0, 0.0, {{0.3, 1.0}, {0.5, 0.5}});
  try {
    oracle_pq_atoms(t, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
  std::vector<std::pair<double, double>> many;
  for (int i = 0; i < 13; ++i) many.emplace_back(-0.5 + 0.08 * i + 0.01, 0.1);
  try {
    oracle_pq_atoms(atomic_1d(0.0, 0.1, many), 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AtomLimit);
  }
  EXPECT_THROW(oracle_pq_atoms(ref1(), 2.0), Error);
}

TEST(Oracle, DominanceOverProjectedCompetitors) {
  const auto t = atomic_1d(-0.01, 0.01, {{0.5, 1.0}, {-0.25, 2.0}, {0.2, 0.7}});
  for (double q : {1.5, 2.0, 3.0}) {
    const auto sol = solve_qmmm(t, q);
    std::mt19937_64 rng(100);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    int checked = 0;
    for (int i = 0; i < 500 && checked < 50; ++i) {
      std::vector<double> y{std::exp(u(rng)), std::exp(u(rng)), std::exp(u(rng))};
      const auto proj = project_feasible_atoms(t, vec({u(rng)}), y);
      if (!proj) continue;
      const auto& [beta, yy] = *proj;
      const TiltFunction tilt = [&](const Vector& x) {
        for (std::size_t k = 0; k < t.K.atom_list().size(); ++k) {
          if (t.K.atom_list()[k].x == x) return yy[k];
        }
        return 1.0;
      };
      EXPECT_LE(martingale_residual(t, beta, IdentityTilt{}).size(), 1);
      const double k = k_q(t, beta, tilt, q);
      EXPECT_GE(k, sol.k_value - 1e-9);
      EXPECT_GE(std::exp(t.T * k), sol.divergence_or_entropy - 1e-9);
      ++checked;
    }
    EXPECT_EQ(checked, 50);
  }
}

TEST(LocalOptimality, PassesAtSolutions) {
  const auto t = ref1();
  for (double q : {1.5, 2.0, 3.0}) {
    const auto r = local_optimality_check(t, solve_qmmm(t, q), 64);
    EXPECT_TRUE(r.passed) << "q=" << q << " worst " << r.worst_change;
    EXPECT_EQ(r.directions, 64);
  }
  const auto r = local_optimality_check(t, solve_memm(t), 64);
  EXPECT_TRUE(r.passed) << r.worst_change;
  const auto a = atomic_1d(-0.01, 0.01, {{0.5, 1.0}, {-0.25, 2.0}});
  EXPECT_TRUE(local_optimality_check(a, solve_qmmm(a, 2.0), 64).passed);
}

TEST(LocalOptimality, FailsAtPerturbedNonSolution) {
  const auto t = ref1();
  const auto sol = solve_qmmm(t, 2.0);
  const double l2 = sol.lambda[0];
  // beta = l2 + 0.1 with Y = (1 + l2 x)(1 - s x), s chosen to restore the constraint.
  const double m2 = simpson([&](double x) { return 0.5 * x * x * (1 + l2 * x); }, -0.5, 0.5, 200);
  const double s = 0.04 * 0.1 / m2;
  const TiltFunction y = [=](const Vector& x) { return (1 + l2 * x[0]) * (1 - s * x[0]); };
  const Vector beta = vec({l2 + 0.1});
  ASSERT_LE(std::abs(t.b[0] + t.c(0, 0) * beta[0] +
                     simpson([&](double x) { return 0.5 * (x * y(vec({x})) - x); }, -0.5, 0.5,
                             200)),
            1e-12);
  const auto r = local_optimality_check(t, beta, y, 2.0, 64, {1e-3, -1e-3, 1e-2, -1e-2}, 11);
  EXPECT_FALSE(r.passed);
  EXPECT_GE(r.failing_direction, 0);
  EXPECT_LT(r.worst_change, -1e-9);
}

TEST(LocalOptimality, PureDiffusionIsTrivial) {
  const auto t = pure_diffusion(0.05, 0.2);
  const auto r = local_optimality_check(t, solve_qmmm(t, 2.0), 16);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.worst_change, 0.0);
}

TEST(SolveQmmm, FastEnough) {
  const auto t = ref1();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 20; ++i) solve_qmmm(t, 1.1 + 0.1 * i);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(ms / 20, 50.0);
}
