#include "qmmm/model_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qmmm/error.hpp"

namespace qmmm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void parse_fail(const std::string& msg) { throw Error(ErrorCode::ParseError, msg); }

const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) parse_fail(where + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where + " is missing \"" + key + "\"");
  return *it;
}

double number(const Json& v, const std::string& where) {
  if (!v.is_number()) parse_fail(where + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) parse_fail(where + " must be finite");
  return x;
}

int integer(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) parse_fail(where + " must be an integer");
  return v.get<int>();
}

std::vector<double> numbers(const Json& v, const std::string& where) {
  if (!v.is_array()) parse_fail(where + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector vector_field(const Json& v, const std::string& where, int d) {
  const auto xs = numbers(v, where);
  if (static_cast<int>(xs.size()) != d) {
    parse_fail(where + " must have " + std::to_string(d) + " entries");
  }
  return to_vector(xs);
}

QuadraturePolicy quadrature_policy(const Json& doc) {
  QuadraturePolicy policy;
  auto it = doc.find("quadrature");
  if (it == doc.end()) return policy;
  if (!it->is_object()) parse_fail("\"quadrature\" must be an object");
  if (it->contains("abs_tol")) {
    policy.abs_tol = number((*it)["abs_tol"], "quadrature.abs_tol");
    if (!(policy.abs_tol > 0.0)) parse_fail("quadrature.abs_tol must be positive");
  }
  if (it->contains("panels")) {
    policy.panels = integer((*it)["panels"], "quadrature.panels");
    if (policy.panels < 1) parse_fail("quadrature.panels must be >= 1");
  }
  return policy;
}

JumpMeasure jump_measure(const Json& K, int d, const QuadraturePolicy& policy) {
  const Json& type = field(K, "type", "K");
  if (!type.is_string()) parse_fail("K.type must be a string");
  const std::string t = type.get<std::string>();
  if (t == "none") return JumpMeasure::none(d);
  if (t == "atoms") {
    const Json& list = field(K, "atoms", "K");
    if (!list.is_array()) parse_fail("K.atoms must be an array");
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "K.atoms[" + std::to_string(i) + "]";
      const Json& x = field(list[i], "x", where);
      Vector loc = d == 1 && x.is_number() ? Vector::Constant(1, number(x, where + ".x"))
                                            : vector_field(x, where + ".x", d);
      atoms.push_back(Atom{std::move(loc), number(field(list[i], "weight", where), where + ".weight")});
    }
    return JumpMeasure::atoms(std::move(atoms), d);
  }
  if (t != "density") parse_fail("K.type must be \"atoms\", \"density\" or \"none\"");
  if (d != 1) throw Error(ErrorCode::InvalidModel, "density jump measures need d = 1");
  const Json& fam = field(K, "family", "K");
  if (!fam.is_string()) parse_fail("K.family must be a string");
  const std::string f = fam.get<std::string>();
  auto num = [&K](const char* key) { return number(field(K, key, "K"), std::string("K.") + key); };
  if (f == "uniform") {
    return JumpMeasure::density(
        Density1D(density::Uniform{num("lo"), num("hi"), num("intensity")}, policy));
  }
  if (f == "truncated_double_exponential") {
    return JumpMeasure::density(Density1D(
        density::TruncatedDoubleExponential{num("eta_plus"), num("eta_minus"), num("p"),
                                            num("intensity"), num("lo"), num("hi")},
        policy));
  }
  if (f == "tabulated") {
    return JumpMeasure::density(Density1D(
        density::Tabulated{numbers(field(K, "xs", "K"), "K.xs"), numbers(field(K, "fs", "K"), "K.fs")},
        policy));
  }
  parse_fail("unknown density family \"" + f + "\"");
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json measure_to_json(const JumpMeasure& K) {
  Json out;
  if (K.is_atoms()) {
    out["type"] = "atoms";
    out["atoms"] = Json::array();
    for (const auto& a : K.atom_list()) {
      out["atoms"].push_back({{"x", vector_to_json(a.x)}, {"weight", a.weight}});
    }
    return out;
  }
  out["type"] = "density";
  std::visit(Overloaded{
                 [&](const density::Uniform& u) {
                   out["family"] = "uniform";
                   out["lo"] = u.lo;
                   out["hi"] = u.hi;
                   out["intensity"] = u.intensity;
                 },
                 [&](const density::TruncatedDoubleExponential& d) {
                   out["family"] = "truncated_double_exponential";
                   out["eta_plus"] = d.eta_plus;
                   out["eta_minus"] = d.eta_minus;
                   out["p"] = d.p;
                   out["intensity"] = d.intensity;
                   out["lo"] = d.lo;
                   out["hi"] = d.hi;
                 },
                 [&](const density::Tabulated& t) {
                   out["family"] = "tabulated";
                   out["xs"] = t.xs;
                   out["fs"] = t.fs;
                 },
                 [](const density::ExpPushforward&) {
                   throw Error(ErrorCode::NotSerializable,
                               "pushforward densities have no file representation");
                 },
                 [](const density::Reweighted&) {
                   throw Error(ErrorCode::NotSerializable,
                               "reweighted densities have no file representation");
                 },
             },
             K.density_1d().family());
  return out;
}

MeasureKind kind_from_string(const std::string& s) {
  if (s == "qmmm") return MeasureKind::QMMM;
  if (s == "memm") return MeasureKind::MEMM;
  if (s == "vmmm_sc") return MeasureKind::VMMM_SC;
  parse_fail("unknown measure kind \"" + s + "\"");
}

}  // namespace

LevyTriplet model_from_json(const Json& doc_in) {
  if (!doc_in.is_object()) parse_fail("model document must be a JSON object");
  const Json& doc = doc_in.contains("model") ? doc_in["model"] : doc_in;
  const int d = integer(field(doc, "d", "model"), "d");
  if (d < 1) parse_fail("d must be >= 1");
  LevyTriplet t;
  t.b = vector_field(field(doc, "b", "model"), "b", d);
  const Json& c = field(doc, "c", "model");
  if (!c.is_array() || static_cast<int>(c.size()) != d) {
    parse_fail("c must be a " + std::to_string(d) + "x" + std::to_string(d) + " array");
  }
  Matrix cm(d, d);
  for (int i = 0; i < d; ++i) {
    cm.row(i) = vector_field(c[i], "c[" + std::to_string(i) + "]", d).transpose();
  }
  t.c = clamp_psd(cm);
  t.T = doc.contains("T") ? number(doc["T"], "T") : 1.0;
  const QuadraturePolicy policy = quadrature_policy(doc);
  t.K = doc.contains("K") ? jump_measure(doc["K"], d, policy) : JumpMeasure::none(d);
  return t;
}

LevyTriplet parse_model(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::ordered_json::exception& e) {
    parse_fail(std::string("malformed JSON: ") + e.what());
  }
  return model_from_json(doc);
}

LevyTriplet load_model(const std::string& path) { return parse_model(read_file(path)); }

Json model_to_json(const LevyTriplet& t) {
  Json out;
  out["d"] = t.dim();
  out["b"] = vector_to_json(t.b);
  out["c"] = matrix_to_json(t.c);
  out["T"] = t.T;
  if (t.K.empty() && !t.K.is_density()) {
    out["K"] = {{"type", "none"}};
  } else {
    out["K"] = measure_to_json(t.K);
  }
  if (t.K.is_density()) {
    const auto& p = t.K.density_1d().policy();
    out["quadrature"] = {{"abs_tol", p.abs_tol}, {"panels", p.panels}};
  }
  return out;
}

LevyTriplet apply_quadrature_env(LevyTriplet triplet) {
  const char* env = std::getenv("QMMM_QUAD_TOL");
  if (env == nullptr || *env == '\0') return triplet;
  char* end = nullptr;
  errno = 0;
  const double tol = std::strtod(env, &end);
  if (errno != 0 || end == env || *end != '\0' || !(tol > 0.0) || !std::isfinite(tol)) {
    parse_fail(std::string("QMMM_QUAD_TOL must be a positive number, got \"") + env + "\"");
  }
  if (triplet.K.is_density()) {
    QuadraturePolicy p = triplet.K.density_1d().policy();
    p.abs_tol = tol;
    triplet.K = triplet.K.with_quadrature(p);
  }
  return triplet;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_or_null(v[i]));
  return out;
}

Json tilt_to_json(const Tilt& tilt) {
  Json out;
  std::visit(Overloaded{
                 [&](const PowerTilt& p) {
                   out["type"] = "power";
                   out["q"] = p.q;
                   out["lambda"] = vector_to_json(p.lambda);
                 },
                 [&](const EsscherTilt& e) {
                   out["type"] = "esscher";
                   out["lambda"] = vector_to_json(e.lambda);
                 },
                 [&](const IdentityTilt&) { out["type"] = "identity"; },
             },
             tilt);
  out["description"] = describe(tilt);
  return out;
}

Json validation_to_json(const ValidationReport& report) {
  Json out;
  out["passed"] = report.passed;
  out["findings"] = Json::array();
  for (const auto& f : report.findings) {
    const char* sev = f.severity == Severity::Error     ? "error"
                      : f.severity == Severity::Warning ? "warning"
                                                        : "info";
    out["findings"].push_back({{"code", f.code}, {"message", f.message}, {"severity", sev}});
  }
  return out;
}

Json solution_to_json(const MeasureSolution& sol, const LevyTriplet& triplet) {
  Json out;
  out["kind"] = to_string(sol.kind);
  out["q"] = number_or_null(sol.q);
  out["lambda"] = vector_to_json(sol.lambda);
  out["beta"] = vector_to_json(sol.beta);
  out["tilt"] = tilt_to_json(sol.tilt);
  out["residual"] = vector_to_json(sol.residual);
  out["residual_norm"] = sol.residual_norm();
  if (sol.kind == MeasureKind::MEMM) {
    out["entropy_rate"] = sol.k_value;
    out["relative_entropy"] = sol.divergence_or_entropy;
  } else {
    out["k_q"] = sol.k_value;
    out["divergence"] = number_or_null(sol.divergence_or_entropy);
  }
  out["iterations"] = sol.iterations;
  out["bracket"] = {number_or_null(sol.bracket_lo), number_or_null(sol.bracket_hi)};
  out["min_singular_value"] = sol.min_singular_value;
  out["model"] = model_to_json(triplet);
  return out;
}

Json crosscheck_to_json(const VmmmCrosscheck& check) {
  Json out;
  out["lambda_sc"] = vector_to_json(check.sc.lambda_sc);
  out["gamma"] = vector_to_json(check.sc.gamma);
  out["sigma"] = matrix_to_json(check.sc.sigma);
  out["positivity"] = check.sc.positivity;
  out["khat_T"] = check.sc.khat_T;
  out["agree"] = check.agree;
  out["lambda_gap"] = number_or_null(check.lambda_gap);
  out["probes"] = check.probes;
  out["y_qmmm"] = check.y_qmmm;
  out["y_sc"] = check.y_sc;
  out["message"] = check.message;
  if (!check.qmmm_error.empty()) out["qmmm_error"] = check.qmmm_error;
  return out;
}

Json sweep_to_json(const SweepReport& report) {
  Json out;
  out["rows"] = Json::array();
  for (const auto& r : report.rows) {
    Json row;
    row["q"] = r.q;
    row["ok"] = r.ok;
    if (!r.ok) {
      row["error"] = r.error;
      out["rows"].push_back(std::move(row));
      continue;
    }
    row["lambda"] = vector_to_json(r.lambda);
    row["residual"] = r.residual;
    row["k_q"] = r.k_q;
    row["divergence"] = number_or_null(r.divergence);
    row["H"] = number_or_null(r.H);
    row["H_gaussian"] = number_or_null(r.H_gaussian);
    row["H_jump"] = number_or_null(r.H_jump);
    row["min_singular_value"] = r.min_singular_value;
    row["y_q"] = r.y_q;
    row["kq_ratio"] = r.kq_ratio;
    row["iterations"] = r.iterations;
    out["rows"].push_back(std::move(row));
  }
  out["probes"] = Json::array();
  for (const auto& p : report.probes) {
    out["probes"].push_back(p.size() == 1 ? Json(p[0]) : vector_to_json(p));
  }
  out["y_e"] = report.y_e;
  out["lambda_e"] = vector_to_json(report.lambda_e);
  out["memm_residual"] = report.memm_residual;
  if (!report.memm_error.empty()) out["memm_error"] = report.memm_error;
  const auto& d = report.diagnostics;
  Json diag;
  diag["passed"] = d.passed;
  diag["sorted_decreasing"] = d.sorted_decreasing;
  diag["lambda_gap_decreasing"] = d.lambda_gap_decreasing;
  diag["lambda_gap_strict"] = d.lambda_gap_strict;
  diag["probe_gap_decreasing"] = d.probe_gap_decreasing;
  diag["H_decreasing"] = d.H_decreasing;
  diag["H_strict"] = d.H_strict;
  diag["H_nonnegative"] = d.H_nonnegative;
  diag["span_factor"] = d.span_factor;
  diag["H_ratio"] = d.H_ratio;
  diag["H_final_small"] = d.H_final_small;
  diag["lambda_gap_exponent"] =
      d.lambda_gap_exponent ? Json(*d.lambda_gap_exponent) : Json(nullptr);
  diag["H_exponent"] = d.H_exponent ? Json(*d.H_exponent) : Json(nullptr);
  diag["singular_warning"] = d.singular_warning;
  diag["successful_rows"] = d.successful_rows;
  diag["messages"] = d.messages;
  out["diagnostics"] = std::move(diag);
  return out;
}

Json mc_report_to_json(const MCReport& r) {
  return {{"label", r.label},
          {"estimate", number_or_null(r.estimate)},
          {"std_error", number_or_null(r.std_error)},
          {"target", number_or_null(r.target)},
          {"z_score", number_or_null(r.z_score)},
          {"n_paths", r.n_paths},
          {"seed", r.seed},
          {"rerun", r.rerun},
          {"first_z_score", number_or_null(r.first_z_score)},
          {"passed", r.passed}};
}

Json oracle_to_json(const OracleResult& r) {
  return {{"beta", vector_to_json(r.beta)},
          {"y", r.y},
          {"k", r.k},
          {"constraint_violation", r.constraint_violation},
          {"starts", r.starts},
          {"start_spread", r.start_spread}};
}

SavedSolution solution_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("model")) {
    parse_fail("solution document needs an embedded \"model\"");
  }
  SavedSolution s{model_from_json(doc["model"]), MeasureKind::QMMM, std::nullopt, Vector(), Vector()};
  const Json& kind = field(doc, "kind", "solution");
  if (!kind.is_string()) parse_fail("solution.kind must be a string");
  s.kind = kind_from_string(kind.get<std::string>());
  const Json& q = field(doc, "q", "solution");
  if (!q.is_null()) s.q = number(q, "solution.q");
  s.lambda = vector_field(field(doc, "lambda", "solution"), "solution.lambda", s.triplet.dim());
  s.beta = vector_field(field(doc, "beta", "solution"), "solution.beta", s.triplet.dim());
  return s;
}

SavedSolution load_solution(const std::string& path) {
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const nlohmann::ordered_json::exception& e) {
    parse_fail(std::string("malformed JSON: ") + e.what());
  }
  return solution_from_json(doc);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) parse_fail("cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write \"" + path + "\"");
  out << contents;
}

}  // namespace qmmm
