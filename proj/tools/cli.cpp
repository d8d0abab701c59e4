#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qmmm/convergence.hpp"
#include "qmmm/error.hpp"
#include "qmmm/mc_verify.hpp"
#include "qmmm/model_io.hpp"
#include "qmmm/solvers.hpp"

namespace qmmm::cli {

namespace {

struct RunConfig {
  std::string command;
  std::string model_path;
  double q = 2.0;
  std::string kind = "qmmm";
  std::string grid;
  std::string probes;
  int n_paths = 100000;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "table";
  std::string lambda_override;
  std::string dump_paths;
};

/// Usage problems found after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidModel:
      return kValidationFailed;
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::AtomLimit:
    case ErrorCode::NotSerializable:
      return kUsage;
    case ErrorCode::MaxIter:
      return kMaxIter;
    case ErrorCode::InsufficientRows:
    case ErrorCode::InsufficientSamples:
      return kTooFewSamples;
    case ErrorCode::NoSignChange:
    case ErrorCode::Infeasible:
    case ErrorCode::DomainError:
    case ErrorCode::NonFinite:
    case ErrorCode::NonIntegrable:
    case ErrorCode::Overflow:
    case ErrorCode::SingularSigma:
      return kNoSolution;
  }
  return kNoSolution;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError(what + ": \"" + item + "\" is not a number");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size() || !std::isfinite(v)) {
      throw UsageError(what + ": \"" + item + "\" is not a finite number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(what + " is empty");
  return out;
}

/// "a,b,c" or "geometric:q_max,n" meaning q_j = 1 + (q_max - 1) 2^{-j}, j < n.
std::vector<double> parse_grid(const std::string& text) {
  if (text.empty()) return default_q_grid();
  const std::string prefix = "geometric:";
  if (text.rfind(prefix, 0) != 0) return parse_list(text, "--grid");
  const auto args = parse_list(text.substr(prefix.size()), "--grid");
  if (args.size() != 2 || !(args[0] > 1.0) || args[1] < 1 || args[1] != std::floor(args[1])) {
    throw UsageError("--grid geometric:q_max,n needs q_max > 1 and an integer n >= 1");
  }
  std::vector<double> grid;
  for (int j = 0; j < static_cast<int>(args[1]); ++j) {
    grid.push_back(1.0 + (args[0] - 1.0) * std::ldexp(1.0, -j));
  }
  return grid;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

std::string fmt(const Vector& v) {
  if (v.size() == 1) return fmt(v[0]);
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

void row(std::ostream& out, const std::string& key, const std::string& value) {
  out << "  " << std::left << std::setw(24) << key << value << "\n";
}

void emit_json(const RunConfig& cfg, std::ostream& out, const Json& doc) {
  if (!cfg.out.empty()) write_file(cfg.out, doc.dump(2) + "\n");
  if (cfg.format == "json") out << doc.dump(2) << "\n";
}

LevyTriplet load_checked(const RunConfig& cfg, std::ostream& err, bool& ok) {
  LevyTriplet t = apply_quadrature_env(load_model(cfg.model_path));
  const auto report = validate(t);
  ok = report.passed;
  for (const auto& f : report.findings) {
    if (f.severity == Severity::Error) err << "invalid model: " << f.code << ": " << f.message << "\n";
  }
  return t;
}

MeasureKind parse_kind(const std::string& kind) {
  if (kind == "qmmm") return MeasureKind::QMMM;
  if (kind == "memm") return MeasureKind::MEMM;
  if (kind == "vmmm") return MeasureKind::VMMM_SC;
  throw UsageError("--kind must be qmmm, memm or vmmm");
}

MeasureSolution solve_kind(const LevyTriplet& t, MeasureKind kind, double q) {
  switch (kind) {
    case MeasureKind::MEMM:
      return solve_memm(t);
    case MeasureKind::VMMM_SC:
      return solve_vmmm_sc(t);
    case MeasureKind::QMMM:
      break;
  }
  return solve_qmmm(t, q);
}

bool drift_vanishes(const LevyTriplet& t) { return drift_b0(t).lpNorm<Eigen::Infinity>() == 0.0; }

void print_solution(std::ostream& out, const MeasureSolution& sol, const LevyTriplet& t) {
  const bool memm = sol.kind == MeasureKind::MEMM;
  out << "measure: " << to_string(sol.kind) << "\n";
  if (!memm) row(out, "q", fmt(sol.q));
  row(out, "lambda", fmt(sol.lambda));
  row(out, "beta", fmt(sol.beta));
  row(out, "tilt", describe(sol.tilt));
  row(out, "residual", fmt(sol.residual_norm()));
  if (memm) {
    row(out, "entropy rate", fmt(sol.k_value));
    row(out, "relative entropy", fmt(sol.divergence_or_entropy));
  } else {
    row(out, "k_q", fmt(sol.k_value));
    row(out, "divergence", fmt(sol.divergence_or_entropy));
  }
  row(out, "iterations", std::to_string(sol.iterations));
  row(out, "min singular value", fmt(sol.min_singular_value));
  if (drift_vanishes(t)) out << "b_0 = 0: " << (memm ? "P_e = P" : "Q_q = P") << "\n";
}

void print_crosscheck(std::ostream& out, const VmmmCrosscheck& check) {
  out << "structure condition:\n";
  row(out, "lambda_SC", fmt(check.sc.lambda_sc));
  row(out, "positivity", check.sc.positivity ? "holds" : "fails");
  row(out, "khat_T", fmt(check.sc.khat_T));
  if (check.qmmm) row(out, "|lambda_2 + lambda_SC|", fmt(check.lambda_gap));
  if (!check.qmmm_error.empty()) row(out, "q = 2 solve", check.qmmm_error);
  row(out, "agree", check.agree ? "yes" : "no");
  if (!check.message.empty()) out << "  " << check.message << "\n";
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const LevyTriplet t = apply_quadrature_env(load_model(cfg.model_path));
  const auto report = validate(t);
  if (cfg.format == "json" || !cfg.out.empty()) {
    emit_json(cfg, out, validation_to_json(report));
  }
  if (cfg.format != "json") {
    out << "model: d = " << t.dim() << ", T = " << fmt(t.T) << ", jump mass = "
        << fmt(t.K.total_mass()) << "\n";
    for (const auto& f : report.findings) {
      const char* sev = f.severity == Severity::Error     ? "error"
                        : f.severity == Severity::Warning ? "warning"
                                                          : "info";
      out << "  [" << sev << "] " << f.code << ": " << f.message << "\n";
    }
    out << (report.passed ? "valid" : "invalid") << "\n";
  }
  return report.passed ? kOk : kValidationFailed;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  bool ok = false;
  const LevyTriplet t = load_checked(cfg, err, ok);
  if (!ok) return kValidationFailed;
  const MeasureKind kind = parse_kind(cfg.kind);
  if (kind != MeasureKind::VMMM_SC) {
    const auto sol = solve_kind(t, kind, cfg.q);
    if (cfg.format != "json") print_solution(out, sol, t);
    emit_json(cfg, out, solution_to_json(sol, t));
    return kOk;
  }
  const auto check = vmmm_crosscheck(t);
  Json doc;
  if (check.sc.positivity) {
    const auto sol = solve_vmmm_sc(t);
    if (cfg.format != "json") print_solution(out, sol, t);
    doc = solution_to_json(sol, t);
  } else {
    doc["kind"] = to_string(MeasureKind::VMMM_SC);
    doc["model"] = model_to_json(t);
    if (check.qmmm) doc["qmmm_q2"] = solution_to_json(*check.qmmm, t);
  }
  if (cfg.format != "json") print_crosscheck(out, check);
  doc["sc_crosscheck"] = crosscheck_to_json(check);
  emit_json(cfg, out, doc);
  return kOk;
}

std::vector<Vector> parse_probes(const std::string& text, const LevyTriplet& t) {
  if (text.empty()) return {};
  if (t.dim() != 1) throw UsageError("--probes is only supported for d = 1");
  std::vector<Vector> probes;
  for (double x : parse_list(text, "--probes")) probes.push_back(Vector::Constant(1, x));
  return probes;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  bool ok = false;
  const LevyTriplet t = load_checked(cfg, err, ok);
  if (!ok) return kValidationFailed;
  const auto grid = parse_grid(cfg.grid);
  auto report = q_sweep(t, grid, parse_probes(cfg.probes, t));
  const auto diagnostics = convergence_diagnostics(report);
  report.diagnostics.passed = diagnostics.passed;

  if (cfg.format == "csv") {
    const std::string csv = sweep_to_csv(report);
    if (!cfg.out.empty()) write_file(cfg.out, csv);
    out << csv;
  } else {
    emit_json(cfg, out, sweep_to_json(report));
  }
  if (cfg.format == "table") {
    out << std::left << std::setw(14) << "q" << std::setw(14) << "lambda" << std::setw(14)
        << "residual" << std::setw(14) << "k_q" << std::setw(14) << "divergence" << "H\n";
    for (const auto& r : report.rows) {
      out << std::setw(14) << fmt(r.q);
      if (!r.ok) {
        out << "failed: " << r.error << "\n";
        continue;
      }
      out << std::setw(14) << fmt(r.lambda) << std::setw(14) << fmt(r.residual) << std::setw(14)
          << fmt(r.k_q) << std::setw(14) << fmt(r.divergence) << fmt(r.H) << "\n";
    }
    out << "lambda_e = " << fmt(report.lambda_e) << "\n";
    const auto& d = report.diagnostics;
    if (d.lambda_gap_exponent) out << "|lambda_q - lambda_e| ~ (q-1)^" << fmt(*d.lambda_gap_exponent) << "\n";
    if (d.H_exponent) out << "H ~ (q-1)^" << fmt(*d.H_exponent) << "\n";
  }
  for (const auto& m : report.diagnostics.messages) err << "sweep: " << m << "\n";
  if (cfg.format == "table") out << (report.diagnostics.passed ? "converged" : "not converged") << "\n";
  return report.diagnostics.passed ? kOk : kCheckFailed;
}

void dump_paths(const std::string& path, const LevyTriplet& t, const MeasureSolution& sol,
                int n_paths, std::uint64_t seed) {
  std::ofstream csv(path);
  if (!csv) throw Error(ErrorCode::InvalidArgument, "cannot write \"" + path + "\"");
  csv << std::setprecision(17) << "index,n_jumps,brownian_0,log_z,stochastic_exponential_0\n";
  const JumpSampler sampler(t.K);
  const Matrix factor = brownian_factor(t);
  const DensityEvaluator z(t, sol.beta, sol.tilt);
  for (int i = 0; i < n_paths; ++i) {
    const auto p = simulate_path(t, sampler, factor, seed, static_cast<std::uint64_t>(i));
    csv << i << "," << p.jumps.size() << "," << p.brownian[0] << "," << z.log_z(p) << ","
        << stochastic_exponential(p, t) << "\n";
  }
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  bool ok = false;
  const LevyTriplet t = load_checked(cfg, err, ok);
  if (!ok) return kValidationFailed;
  const MeasureKind kind = parse_kind(cfg.kind);
  MeasureSolution sol = solve_kind(t, kind, cfg.q);
  if (!cfg.lambda_override.empty()) {
    auto values = parse_list(cfg.lambda_override, "--lambda-override");
    if (static_cast<int>(values.size()) != t.dim()) {
      throw UsageError("--lambda-override needs " + std::to_string(t.dim()) + " values");
    }
    sol.lambda = Eigen::Map<Vector>(values.data(), t.dim());
    sol.beta = sol.lambda;
    if (kind == MeasureKind::MEMM) {
      sol.tilt = EsscherTilt{sol.lambda};
      sol.k_value = entropy_rate(t, sol.beta, sol.tilt);
      sol.divergence_or_entropy = t.T * sol.k_value;
    } else {
      sol.tilt = PowerTilt{sol.lambda, sol.q};
      sol.k_value = k_q(t, sol.beta, sol.tilt, sol.q);
      sol.divergence_or_entropy = std::exp(t.T * sol.k_value);
    }
    sol.residual = martingale_residual(t, sol.beta, sol.tilt);
    err << "verify: lambda overridden to " << fmt(sol.lambda) << "\n";
  }
  if (!cfg.dump_paths.empty()) dump_paths(cfg.dump_paths, t, sol, cfg.n_paths, cfg.seed);

  std::vector<MCReport> reports;
  reports.push_back(check_divergence_mc(t, sol, cfg.n_paths, cfg.seed));
  for (auto mode : {MartingaleMode::Direct, MartingaleMode::Weighted}) {
    for (int i = 0; i < t.dim(); ++i) {
      auto r = check_martingale_mc(t, sol, cfg.n_paths, cfg.seed, mode, {}, i);
      if (t.dim() > 1) r.label += " component " + std::to_string(i);
      reports.push_back(std::move(r));
    }
  }
  bool all = true;
  Json doc;
  doc["solution"] = solution_to_json(sol, t);
  doc["checks"] = Json::array();
  for (const auto& r : reports) {
    all = all && r.passed;
    doc["checks"].push_back(mc_report_to_json(r));
  }
  doc["passed"] = all;
  if (cfg.format != "json") {
    out << "measure: " << to_string(sol.kind) << ", lambda = " << fmt(sol.lambda)
        << ", n_paths = " << cfg.n_paths << ", seed = " << cfg.seed << "\n";
    for (const auto& r : reports) {
      out << "  " << (r.passed ? "PASS " : "FAIL ") << r.label << ": estimate " << fmt(r.estimate)
          << ", target " << fmt(r.target) << ", SE " << fmt(r.std_error) << ", z " << fmt(r.z_score);
      if (r.rerun) out << " (rerun with seed " << r.seed << ", first z " << fmt(r.first_z_score) << ")";
      out << "\n";
    }
  }
  emit_json(cfg, out, doc);
  return all ? kOk : kCheckFailed;
}

int cmd_oracle(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  bool ok = false;
  const LevyTriplet t = load_checked(cfg, err, ok);
  if (!ok) return kValidationFailed;
  if (!t.K.is_atoms()) throw UsageError("oracle needs an atomic jump measure");
  const auto oracle = oracle_pq_atoms(t, cfg.q);
  const auto sol = solve_qmmm(t, cfg.q);
  const double dk = std::abs(oracle.k - sol.k_value);
  const double dl = (oracle.beta - sol.lambda).norm();
  double dy = 0.0;
  std::size_t j = 0;
  for (const auto& a : t.K.atom_list()) {
    if (a.weight <= 0.0) continue;
    dy = std::max(dy, std::abs(oracle.y[j++] - tilt_eval(sol.tilt, a.x)));
  }
  if (cfg.format != "json") {
    out << "q = " << fmt(cfg.q) << "\n";
    row(out, "oracle beta", fmt(oracle.beta));
    row(out, "Newton lambda", fmt(sol.lambda));
    row(out, "oracle k_q", fmt(oracle.k));
    row(out, "Newton k_q", fmt(sol.k_value));
    row(out, "|dlambda|", fmt(dl));
    row(out, "|dk|", fmt(dk));
    row(out, "max |dy|", fmt(dy));
    row(out, "constraint violation", fmt(oracle.constraint_violation));
    out << (dk <= 1e-6 ? "agree" : "disagree") << "\n";
  }
  Json doc;
  doc["q"] = cfg.q;
  doc["oracle"] = oracle_to_json(oracle);
  doc["newton"] = solution_to_json(sol, t);
  doc["delta_lambda"] = dl;
  doc["delta_k"] = dk;
  doc["max_delta_y"] = dy;
  doc["agree"] = dk <= 1e-6;
  emit_json(cfg, out, doc);
  return dk <= 1e-6 ? kOk : kCheckFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Minimal f^q, entropy and variance martingale measures for exponential Levy models",
               "qmmm"};
  app.require_subcommand(1);
  const std::vector<std::string> formats = {"table", "json", "csv"};

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model_path, "Model JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", cfg.out, "Write the JSON (or CSV) report to this path");
    sub->add_option("--format", cfg.format, "Report format on stdout")
        ->check(CLI::IsMember(formats));
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check a model file");
  add_model(validate_cmd);

  auto* solve_cmd = app.add_subcommand("solve", "Solve for a martingale measure");
  add_model(solve_cmd);
  solve_cmd->add_option("--kind", cfg.kind, "qmmm, memm or vmmm")
      ->check(CLI::IsMember({"qmmm", "memm", "vmmm"}));
  solve_cmd->add_option("--q", cfg.q, "Power q (qmmm)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep q toward 1 and check convergence to the MEMM");
  add_model(sweep_cmd);
  sweep_cmd->add_option("--grid", cfg.grid, "\"a,b,c\" or \"geometric:q_max,n\"");
  sweep_cmd->add_option("--probes", cfg.probes, "Probe points \"x1,x2,...\"");

  auto* verify_cmd = app.add_subcommand("verify", "Monte Carlo checks of a solved measure");
  add_model(verify_cmd);
  verify_cmd->add_option("--kind", cfg.kind, "qmmm, memm or vmmm")
      ->check(CLI::IsMember({"qmmm", "memm", "vmmm"}));
  verify_cmd->add_option("--q", cfg.q, "Power q (qmmm)");
  verify_cmd->add_option("--n-paths", cfg.n_paths, "Number of simulated paths");
  verify_cmd->add_option("--seed", cfg.seed, "Base seed");
  verify_cmd->add_option("--lambda-override", cfg.lambda_override,
                         "Replace the solved lambda (testing the harness)");
  verify_cmd->add_option("--dump-paths", cfg.dump_paths, "Write per-path values as CSV");

  auto* oracle_cmd = app.add_subcommand("oracle", "Compare the Newton root with direct minimization");
  add_model(oracle_cmd);
  oracle_cmd->add_option("--q", cfg.q, "Power q");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (cfg.format == "csv" && !sweep_cmd->parsed()) {
      throw UsageError("--format csv is only available for sweep");
    }
    if (validate_cmd->parsed()) return cmd_validate(cfg, out);
    if (solve_cmd->parsed()) return cmd_solve(cfg, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(cfg, out, err);
    if (verify_cmd->parsed()) return cmd_verify(cfg, out, err);
    if (oracle_cmd->parsed()) return cmd_oracle(cfg, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.code() == ErrorCode::NoSignChange) {
      err << "the martingale condition is not satisfied on the admissible domain\n";
    }
    return exit_code(e.code());
  }
  return kUsage;
}

}  // namespace qmmm::cli
