#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qmmm/levy_model.hpp"
#include "qmmm/tilts.hpp"

namespace qmmm {

enum class MeasureKind { QMMM, MEMM, VMMM_SC };

std::string to_string(MeasureKind kind);

struct BracketExpansion {
  double initial_step = 1.0;
  double factor = 2.0;
  int max_expansions = 64;
};

struct SolverOptions {
  double tol_root = 1e-11;
  int max_iter = 200;
  BracketExpansion expansion{};
  /// Relative margin removed from each finite end of the admissible interval.
  double domain_margin = 1e-8;
};

/// One solved martingale measure: Girsanov parameters and their diagnostics.
struct MeasureSolution {
  MeasureKind kind = MeasureKind::QMMM;
  double q = 2.0;  // NaN for MEMM
  Vector lambda;
  Vector beta;
  Tilt tilt = IdentityTilt{};
  Vector residual;
  /// k_q(beta, Y) for QMMM/VMMM_SC; the entropy rate for MEMM.
  double k_value = 0.0;
  /// exp(T k_q) for QMMM/VMMM_SC; relative entropy H(P_e | P) for MEMM.
  double divergence_or_entropy = 1.0;
  int iterations = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  /// Smallest singular value of the Jacobian at the root.
  double min_singular_value = 0.0;

  double residual_norm() const { return residual.norm(); }
};

/// b + c lambda + \int (x Y(x) - h(x)) K(dx) with Y = PowerTilt(lambda, q).
Vector phi(const LevyTriplet& triplet, const Vector& lambda, double q);
/// Same with the Esscher tilt exp(lambda.x).
Vector phi_e(const LevyTriplet& triplet, const Vector& lambda);
/// c + \int x x' ((q-1) lambda.x + 1)^{(2-q)/(q-1)} K(dx).
Matrix phi_dlambda(const LevyTriplet& triplet, const Vector& lambda, double q);
/// c + \int x x' exp(lambda.x) K(dx).
Matrix phi_e_dlambda(const LevyTriplet& triplet, const Vector& lambda);

/// Martingale-condition residual for arbitrary Girsanov parameters.
Vector martingale_residual(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt);

MeasureSolution solve_qmmm(const LevyTriplet& triplet, double q, const SolverOptions& opts = {},
                           const std::optional<Vector>& warm_start = std::nullopt);
MeasureSolution solve_memm(const LevyTriplet& triplet, const SolverOptions& opts = {},
                           const std::optional<Vector>& warm_start = std::nullopt);

struct StructureCondition {
  Vector lambda_sc;
  Vector gamma;
  Matrix sigma;
  /// 1 - lambda_sc.x > 0 on the closed support of K.
  bool positivity = false;
  double khat_T = 0.0;
};

/// Solves sigma lambda = gamma (minimum-norm least squares).
/// Throws SingularSigma when gamma is outside the range of sigma.
StructureCondition sc_lambda(const LevyTriplet& triplet);

/// The q = 2 measure built from the structure condition, lambda = -lambda_sc.
/// Throws DomainError when the positivity condition fails.
MeasureSolution solve_vmmm_sc(const LevyTriplet& triplet);

struct VmmmCrosscheck {
  StructureCondition sc;
  std::optional<MeasureSolution> qmmm;
  std::string qmmm_error;
  bool agree = false;
  double lambda_gap = 0.0;
  std::vector<double> probes;
  std::vector<double> y_qmmm;
  std::vector<double> y_sc;
  std::string message;
};

VmmmCrosscheck vmmm_crosscheck(const LevyTriplet& triplet, const SolverOptions& opts = {},
                               std::vector<double> probes = {});

inline constexpr int kOracleAtomLimit = 12;

struct OracleOptions {
  std::uint64_t seed = 7;
  int starts = 4;
  double stationarity_tol = 1e-10;
  double y_floor = 1e-9;
};

struct OracleResult {
  Vector beta;
  std::vector<double> y;
  double k = 0.0;
  double constraint_violation = 0.0;
  int starts = 0;
  /// Largest difference in k between the multi-start optima.
  double start_spread = 0.0;
};

/// Direct minimization of (q(q-1)/2) beta'c beta + sum_i w_i g_q(y_i) over the
/// affine martingale constraint with y_i > 0, for atomic K (n <= 12).
/// Throws AtomLimit, Infeasible.
OracleResult oracle_pq_atoms(const LevyTriplet& triplet, double q, const OracleOptions& opts = {});

/// Minimal-norm correction of (beta, y) onto the martingale constraint for
/// atomic K. Returns nullopt if the projection leaves y <= 0.
std::optional<std::pair<Vector, std::vector<double>>> project_feasible_atoms(
    const LevyTriplet& triplet, const Vector& beta, const std::vector<double>& y);

struct LocalOptimalityResult {
  bool passed = true;
  int directions = 0;
  /// min over directions and step sizes of k(perturbed) - k(candidate).
  double worst_change = 0.0;
  int failing_direction = -1;
  double failing_epsilon = 0.0;
  double base_value = 0.0;
};

/// Samples feasible perturbations (phi, Psi) with c phi + \int Psi x dK = 0 and
/// checks that the objective does not decrease by more than `slack`. The
/// objective is k_q for QMMM/VMMM_SC and the entropy rate for MEMM.
LocalOptimalityResult local_optimality_check(const LevyTriplet& triplet,
                                             const MeasureSolution& sol, int n_dirs = 64,
                                             std::vector<double> epsilons = {1e-3, -1e-3, 1e-2,
                                                                             -1e-2},
                                             std::uint64_t seed = 11, double slack = 1e-9);

/// Variant for a candidate that is not a root: (beta, Y) must already satisfy
/// the martingale condition.
LocalOptimalityResult local_optimality_check(const LevyTriplet& triplet, const Vector& beta,
                                             const TiltFunction& tilt,
                                             std::optional<double> q, int n_dirs,
                                             std::vector<double> epsilons, std::uint64_t seed,
                                             double slack = 1e-9);

}  // namespace qmmm
