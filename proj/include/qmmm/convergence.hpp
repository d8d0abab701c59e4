#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qmmm/levy_model.hpp"
#include "qmmm/solvers.hpp"

namespace qmmm {

struct SweepRow {
  double q = 0.0;
  Vector lambda;
  double residual = 0.0;
  double k_q = 0.0;
  double divergence = 0.0;
  /// Relative entropy H(Q_q | P_e); NaN when the MEMM solve failed.
  double H = 0.0;
  double H_gaussian = 0.0;
  double H_jump = 0.0;
  double min_singular_value = 0.0;
  /// Y_q at each probe point.
  std::vector<double> y_q;
  /// Density (or weight) ratio of K^q = Y_q.K to K at each probe point.
  std::vector<double> kq_ratio;
  int iterations = 0;
  bool ok = false;
  std::string error;
};

struct SweepDiagnostics {
  bool sorted_decreasing = true;
  bool lambda_gap_decreasing = true;
  bool lambda_gap_strict = true;
  bool probe_gap_decreasing = true;
  bool H_decreasing = true;
  bool H_strict = true;
  bool H_nonnegative = true;
  /// (q_first - 1) / (q_last - 1)
  double span_factor = 1.0;
  /// H_last / H_first (0 when H_first is 0)
  double H_ratio = 0.0;
  bool H_final_small = true;
  /// Least-squares slopes of log gap against log (q - 1).
  std::optional<double> lambda_gap_exponent;
  std::optional<double> H_exponent;
  bool singular_warning = false;
  int successful_rows = 0;
  bool passed = false;
  std::vector<std::string> messages;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  /// Probe locations (scalars for d = 1, atom locations otherwise).
  std::vector<Vector> probes;
  /// Y_e at each probe point.
  std::vector<double> y_e;
  Vector lambda_e;
  double memm_residual = 0.0;
  std::string memm_error;
  SweepDiagnostics diagnostics;
};

struct SweepOptions {
  SolverOptions solver{};
  /// Continue from the previous row's lambda.
  bool warm_start = true;
  double singular_warning_threshold = 1e-10;
};

/// q = 1 + 0.5 * 2^{-j}, j = 0..8.
std::vector<double> default_q_grid();

/// Five equally spaced interior points of the support hull (d = 1 densities) or
/// the atom locations (atomic K).
std::vector<Vector> default_probes(const JumpMeasure& K);

SweepReport q_sweep(const LevyTriplet& triplet, const std::vector<double>& q_grid,
                    std::vector<Vector> probes = {}, const SweepOptions& opts = {});

/// Recomputes the diagnostics from the rows; throws InsufficientRows when fewer
/// than three rows succeeded.
SweepDiagnostics convergence_diagnostics(const SweepReport& report);

/// Fixed column order: q, lambda, residual, k_q, divergence, H.
std::string sweep_to_csv(const SweepReport& report);

}  // namespace qmmm
