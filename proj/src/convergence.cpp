#include "qmmm/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qmmm/error.hpp"

namespace qmmm {

namespace {

constexpr double kSlack = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Weight ratio of the tilted measure to K at a probe point.
double measure_ratio(const JumpMeasure& K, const JumpMeasure& Kq, const Vector& x) {
  if (K.is_density()) {
    const double base = K.density_1d()(x[0]);
    return base == 0.0 ? kNaN : Kq.density_1d()(x[0]) / base;
  }
  for (std::size_t i = 0; i < K.atom_list().size(); ++i) {
    if (K.atom_list()[i].x == x && K.atom_list()[i].weight > 0.0) {
      return Kq.atom_list()[i].weight / K.atom_list()[i].weight;
    }
  }
  return kNaN;
}

std::optional<double> log_log_slope(const std::vector<double>& qs, const std::vector<double>& v) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (!(v[i] > 0.0) || !(qs[i] > 1.0)) continue;
    const double x = std::log(qs[i] - 1.0);
    const double y = std::log(v[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  if (n < 2) return std::nullopt;
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::vector<double> default_q_grid() {
  std::vector<double> grid;
  for (int j = 0; j <= 8; ++j) grid.push_back(1.0 + 0.5 * std::ldexp(1.0, -j));
  return grid;
}

std::vector<Vector> default_probes(const JumpMeasure& K) {
  std::vector<Vector> probes;
  if (K.empty()) return probes;
  if (K.is_atoms()) {
    for (const auto& a : K.atom_list()) {
      if (a.weight > 0.0) probes.push_back(a.x);
    }
    return probes;
  }
  const auto [lo, hi] = K.support_hull();
  for (int i = 1; i <= 5; ++i) probes.push_back(Vector::Constant(1, lo + (hi - lo) * i / 6.0));
  return probes;
}

SweepReport q_sweep(const LevyTriplet& triplet, const std::vector<double>& q_grid,
                    std::vector<Vector> probes, const SweepOptions& opts) {
  for (double q : q_grid) {
    if (!(q > 1.0) || !std::isfinite(q)) {
      throw Error(ErrorCode::InvalidArgument, "sweep grid must lie in (1, inf)");
    }
  }
  SweepReport rep;
  rep.probes = probes.empty() ? default_probes(triplet.K) : std::move(probes);
  for (const auto& x : rep.probes) {
    if (x.size() != triplet.dim()) {
      throw Error(ErrorCode::InvalidArgument, "probe dimension does not match the triplet");
    }
  }

  std::optional<MeasureSolution> memm;
  try {
    memm = solve_memm(triplet, opts.solver);
    rep.lambda_e = memm->lambda;
    rep.memm_residual = memm->residual_norm();
    for (const auto& x : rep.probes) rep.y_e.push_back(tilt_eval(memm->tilt, x));
  } catch (const Error& e) {
    rep.memm_error = e.what();
    rep.lambda_e = Vector::Constant(triplet.dim(), kNaN);
  }

  std::optional<Vector> warm;
  for (double q : q_grid) {
    SweepRow row;
    row.q = q;
    try {
      const auto sol = solve_qmmm(triplet, q, opts.solver, opts.warm_start ? warm : std::nullopt);
      row.lambda = sol.lambda;
      row.residual = sol.residual_norm();
      row.k_q = sol.k_value;
      row.divergence = sol.divergence_or_entropy;
      row.min_singular_value = sol.min_singular_value;
      row.iterations = sol.iterations;
      if (memm) {
        const auto gap = entropy_gap(triplet, sol.lambda, q, memm->lambda);
        row.H = gap.H;
        row.H_gaussian = gap.gaussian_term;
        row.H_jump = gap.jump_term;
      } else {
        row.H = row.H_gaussian = row.H_jump = kNaN;
      }
      const JumpMeasure Kq = tilted_measure(triplet.K, sol.tilt);
      for (const auto& x : rep.probes) {
        row.y_q.push_back(tilt_eval(sol.tilt, x));
        row.kq_ratio.push_back(measure_ratio(triplet.K, Kq, x));
      }
      row.ok = true;
      warm = sol.lambda;
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
      row.lambda = Vector::Constant(triplet.dim(), kNaN);
    }
    rep.rows.push_back(std::move(row));
  }

  try {
    rep.diagnostics = convergence_diagnostics(rep);
  } catch (const Error& e) {
    rep.diagnostics.passed = false;
    rep.diagnostics.messages.push_back(e.what());
  }
  for (const auto& row : rep.rows) {
    if (row.ok && row.min_singular_value < opts.singular_warning_threshold) {
      rep.diagnostics.singular_warning = true;
      rep.diagnostics.messages.push_back("smallest singular value of dPhi/dlambda below " +
                                         fmt(opts.singular_warning_threshold) + " at q = " +
                                         fmt(row.q));
    }
  }
  return rep;
}

SweepDiagnostics convergence_diagnostics(const SweepReport& report) {
  SweepDiagnostics d;
  std::vector<const SweepRow*> rows;
  for (const auto& r : report.rows) {
    if (r.ok) rows.push_back(&r);
  }
  d.successful_rows = static_cast<int>(rows.size());
  if (rows.size() < 3) {
    throw Error(ErrorCode::InsufficientRows,
                "convergence diagnostics need at least 3 successful rows, got " +
                    std::to_string(rows.size()));
  }
  if (!report.memm_error.empty() || !report.lambda_e.allFinite()) {
    d.passed = false;
    d.messages.push_back("MEMM solve failed: " + report.memm_error);
    return d;
  }

  std::vector<double> qs, lambda_gap, probe_gap, H;
  for (const auto* r : rows) {
    qs.push_back(r->q);
    lambda_gap.push_back((r->lambda - report.lambda_e).norm());
    double pg = 0.0;
    for (std::size_t i = 0; i < r->y_q.size() && i < report.y_e.size(); ++i) {
      pg = std::max(pg, std::abs(r->y_q[i] - report.y_e[i]));
    }
    probe_gap.push_back(pg);
    H.push_back(r->H);
  }

  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(qs[i] < qs[i - 1])) d.sorted_decreasing = false;
    if (lambda_gap[i] > lambda_gap[i - 1] + kSlack) d.lambda_gap_decreasing = false;
    if (!(lambda_gap[i] < lambda_gap[i - 1])) d.lambda_gap_strict = false;
    if (probe_gap[i] > probe_gap[i - 1] + kSlack) d.probe_gap_decreasing = false;
    if (H[i] > H[i - 1] + kSlack) d.H_decreasing = false;
    if (!(H[i] < H[i - 1])) d.H_strict = false;
  }
  for (double h : H) {
    if (!(h >= -kSlack)) d.H_nonnegative = false;
  }
  d.span_factor = (qs.front() - 1.0) / (qs.back() - 1.0);
  d.H_ratio = H.front() > 0.0 ? H.back() / H.front() : 0.0;
  d.H_final_small = d.span_factor < 25.0 || H.back() <= 0.05 * H.front() + kSlack;
  d.lambda_gap_exponent = log_log_slope(qs, lambda_gap);
  d.H_exponent = log_log_slope(qs, H);

  if (!d.sorted_decreasing) d.messages.push_back("rows are not sorted by decreasing q");
  if (!d.lambda_gap_decreasing) d.messages.push_back("|lambda_q - lambda_e| increases");
  if (!d.probe_gap_decreasing) d.messages.push_back("max probe |Y_q - Y_e| increases");
  if (!d.H_decreasing) d.messages.push_back("H(Q_q | P_e) increases");
  if (!d.H_nonnegative) d.messages.push_back("negative entropy gap");
  if (!d.H_final_small) {
    d.messages.push_back("final H is not below 5% of the initial H (ratio " + fmt(d.H_ratio) +
                         ")");
  }
  d.passed = d.sorted_decreasing && d.lambda_gap_decreasing && d.probe_gap_decreasing &&
             d.H_decreasing && d.H_nonnegative && d.H_final_small;
  return d;
}

std::string sweep_to_csv(const SweepReport& report) {
  std::ostringstream os;
  os.precision(17);
  const int d = report.lambda_e.size() > 0 ? static_cast<int>(report.lambda_e.size()) : 1;
  os << "q";
  if (d == 1) {
    os << ",lambda";
  } else {
    for (int i = 0; i < d; ++i) os << ",lambda_" << i;
  }
  os << ",residual,k_q,divergence,H\n";
  for (const auto& r : report.rows) {
    os << r.q;
    for (int i = 0; i < d; ++i) os << "," << (i < r.lambda.size() ? r.lambda[i] : kNaN);
    if (r.ok) {
      os << "," << r.residual << "," << r.k_q << "," << r.divergence << "," << r.H << "\n";
    } else {
      os << ",nan,nan,nan,nan\n";
    }
  }
  return os.str();
}

}  // namespace qmmm
