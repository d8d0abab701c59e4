#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "qmmm/model_io.hpp"

using namespace qmmm;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "qmmm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string model(const std::string& name) { return std::string(QMMM_MODELS_DIR) + "/" + name; }

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("qmmm_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name, const std::string& contents = "") const {
    const auto p = (path_ / name).string();
    if (!contents.empty()) std::ofstream(p) << contents;
    return p;
  }

 private:
  std::filesystem::path path_;
  static inline int counter_ = 0;
};

}  // namespace

TEST(CliValidate, ExitCodes) {
  EXPECT_EQ(run({"validate", "--model", model("ref1.json")}).code, 0);
  const auto bad = run({"validate", "--model", model("invalid_atom.json")});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("support_outside_domain"), std::string::npos);
  TempDir dir;
  const auto r = run({"validate", "--model", dir.file("broken.json", "{\"d\": 1, \"b\": [")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ParseError"), std::string::npos);
  EXPECT_EQ(run({"validate", "--model", dir.file("missing.json")}).code, 2);
}

TEST(CliValidate, JsonReport) {
  const auto r = run({"validate", "--model", model("invalid_atom.json"), "--format", "json"});
  const auto doc = Json::parse(r.out);
  EXPECT_FALSE(doc["passed"].get<bool>());
  EXPECT_EQ(doc["findings"][0]["code"], "support_outside_domain");
}

TEST(CliUsage, BadInvocations) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"solve"}).code, 2);
  EXPECT_EQ(run({"solve", "--model", model("ref1.json"), "--kind", "xyz"}).code, 2);
  EXPECT_EQ(run({"solve", "--model", model("ref1.json"), "--format", "csv"}).code, 2);
  EXPECT_EQ(run({"solve", "--model", model("ref1.json"), "--q", "0.5"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(CliSolve, ReferenceModel) {
  auto r = run({"solve", "--model", model("ref1.json"), "--q", "2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0.244898"), std::string::npos);
  r = run({"solve", "--model", model("ref1.json"), "--kind", "memm"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0.244711"), std::string::npos);
  r = run({"solve", "--model", model("ref1.json"), "--q", "2", "--format", "json"});
  const auto doc = Json::parse(r.out);
  EXPECT_EQ(doc["lambda"][0].get<double>(), solve_qmmm(load_model(model("ref1.json")), 2.0).lambda[0]);
}

TEST(CliSolve, ZeroDriftGivesP) {
  const auto r = run({"solve", "--model", model("zero_drift.json"), "--q", "3"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Q_q = P"), std::string::npos);
  const auto doc = Json::parse(run({"solve", "--model", model("zero_drift.json"), "--format", "json"}).out);
  EXPECT_EQ(doc["lambda"][0].get<double>(), 0.0);
  EXPECT_EQ(doc["divergence"].get<double>(), 1.0);
}

TEST(CliSolve, RoundTripThroughOutFile) {
  TempDir dir;
  for (const std::string m : {"ref1.json", "double_exponential.json", "atoms_2d.json"}) {
    for (const std::string q : {"1.1", "2", "3"}) {
      const auto path = dir.file("sol.json");
      ASSERT_EQ(run({"solve", "--model", model(m), "--q", q, "--out", path}).code, 0);
      const auto saved = load_solution(path);
      ASSERT_TRUE(saved.q.has_value());
      EXPECT_LE(phi(saved.triplet, saved.lambda, *saved.q).norm(), 1e-11) << m << " q=" << q;
      // The saved file is itself a loadable model.
      EXPECT_EQ(run({"solve", "--model", path, "--q", q}).code, 0);
    }
  }
  const auto path = dir.file("memm.json");
  ASSERT_EQ(run({"solve", "--model", model("ref1.json"), "--kind", "memm", "--out", path}).code, 0);
  const auto saved = load_solution(path);
  EXPECT_FALSE(saved.q.has_value());
  EXPECT_LE(phi_e(saved.triplet, saved.lambda).norm(), 1e-11);
}

TEST(CliSolve, NoSignChangeExits3) {
  const auto r = run({"solve", "--model", model("sc_violating.json"), "--q", "2"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("martingale condition is not satisfied"), std::string::npos);
}

TEST(CliSolve, VmmmCrosscheck) {
  auto r = run({"solve", "--model", model("ref1.json"), "--kind", "vmmm"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("agree                   yes"), std::string::npos);
  r = run({"solve", "--model", model("sc_violating.json"), "--kind", "vmmm", "--format", "json"});
  EXPECT_EQ(r.code, 0);
  const auto doc = Json::parse(r.out);
  EXPECT_FALSE(doc["sc_crosscheck"]["positivity"].get<bool>());
  EXPECT_NE(doc["sc_crosscheck"]["message"].get<std::string>().find("VMMM != VOSMM"),
            std::string::npos);
}

TEST(CliSweep, ReferenceAndDegenerate) {
  EXPECT_EQ(run({"sweep", "--model", model("ref1.json")}).code, 0);
  const auto r = run({"sweep", "--model", model("pure_diffusion.json"), "--format", "csv"});
  EXPECT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "q,lambda,residual,k_q,divergence,H");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0") << line;
  }
  EXPECT_EQ(rows, 9);
}

TEST(CliSweep, GridsAndProbes) {
  EXPECT_EQ(run({"sweep", "--model", model("ref1.json"), "--grid", "2"}).code, 5);
  EXPECT_EQ(run({"sweep", "--model", model("ref1.json"), "--grid", "1.5,abc"}).code, 2);
  EXPECT_EQ(run({"sweep", "--model", model("ref1.json"), "--grid", "geometric:0.5,3"}).code, 2);
  const auto r = run({"sweep", "--model", model("ref1.json"), "--grid", "geometric:1.5,5",
                      "--probes", "-0.3,0.1,0.4", "--format", "json"});
  EXPECT_EQ(r.code, 0);
  const auto doc = Json::parse(r.out);
  EXPECT_EQ(doc["rows"].size(), 5u);
  EXPECT_DOUBLE_EQ(doc["rows"][4]["q"].get<double>(), 1.03125);
  EXPECT_EQ(doc["probes"].size(), 3u);
  EXPECT_EQ(doc["rows"][0]["y_q"].size(), 3u);
}

TEST(CliVerify, ReferencePassesAndCorruptionFails) {
  auto r = run({"verify", "--model", model("ref1.json"), "--q", "2", "--n-paths", "100000"});
  EXPECT_EQ(r.code, 0) << r.out;
  r = run({"verify", "--model", model("ref1.json"), "--q", "2", "--n-paths", "100000",
           "--lambda-override", "0.544898"});
  EXPECT_EQ(r.code, 6) << r.out;
  EXPECT_EQ(run({"verify", "--model", model("ref1.json"), "--n-paths", "1"}).code, 5);
  EXPECT_EQ(run({"verify", "--model", model("ref1.json"), "--lambda-override", "0.1,0.2"}).code, 2);
}

TEST(CliVerify, DeterministicAndDumpsPaths) {
  TempDir dir;
  const auto dump = dir.file("paths.csv");
  const std::vector<std::string> args = {"verify", "--model", model("ref1.json"), "--n-paths",
                                         "2000", "--seed", "9", "--format", "json"};
  const auto a = run(args);
  auto with_dump = args;
  with_dump.insert(with_dump.end(), {"--dump-paths", dump});
  const auto b = run(with_dump);
  EXPECT_EQ(a.out, b.out);
  std::ifstream in(dump);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 2001);
}

TEST(CliOracle, AgreementInfeasibilityAndAtomLimit) {
  EXPECT_EQ(run({"oracle", "--model", model("two_atoms.json"), "--q", "2"}).code, 0);
  EXPECT_EQ(run({"oracle", "--model", model("atoms_2d.json"), "--q", "3"}).code, 0);
  EXPECT_EQ(run({"oracle", "--model", model("infeasible_atoms.json")}).code, 3);
  EXPECT_EQ(run({"oracle", "--model", model("ref1.json")}).code, 2);

  std::string atoms;
  for (int i = 0; i < 13; ++i) {
    atoms += (i ? "," : "") + std::string("{\"x\":[") + std::to_string(-0.31 + 0.05 * i) +
             "],\"weight\":0.1}";
  }
  TempDir dir;
  const auto path = dir.file("many.json", R"({"d":1,"b":[0.01],"c":[[0.02]],"K":{"type":"atoms","atoms":[)" +
                                              atoms + "]}}");
  const auto r = run({"oracle", "--model", path});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("AtomLimit"), std::string::npos);
}

TEST(CliEnvironment, QuadratureTolerance) {
  ::setenv("QMMM_QUAD_TOL", "-1", 1);
  EXPECT_EQ(run({"solve", "--model", model("ref1.json")}).code, 2);
  ::setenv("QMMM_QUAD_TOL", "1e-12", 1);
  EXPECT_EQ(run({"solve", "--model", model("ref1.json")}).code, 0);
  ::unsetenv("QMMM_QUAD_TOL");
}
