#include <gtest/gtest.h>

#include <cstdlib>

#include "qmmm/error.hpp"
#include "qmmm/model_io.hpp"
#include "support/models.hpp"

using namespace qmmm;
using qmmm::testing::ref1;
using qmmm::testing::vec;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no qmmm::Error thrown";
  return ErrorCode::InvalidArgument;
}

constexpr const char* kRef1 = R"({
  "d": 1, "b": [-0.02], "c": [[0.04]], "T": 1,
  "K": {"type": "density", "family": "uniform", "lo": -0.5, "hi": 0.5, "intensity": 0.5}
})";

}  // namespace

TEST(ModelIo, ParsesReferenceModel) {
  const auto t = parse_model(kRef1);
  EXPECT_EQ(t.dim(), 1);
  EXPECT_DOUBLE_EQ(t.b[0], -0.02);
  EXPECT_DOUBLE_EQ(t.c(0, 0), 0.04);
  EXPECT_DOUBLE_EQ(t.K.total_mass(), 0.5);
  EXPECT_EQ(t.K.density_1d().family_name(), "uniform");
  EXPECT_DOUBLE_EQ(t.K.density_1d().policy().abs_tol, 1e-10);
}

TEST(ModelIo, RoundTripsEveryFamily) {
  const std::vector<std::string> docs = {
      kRef1,
      R"({"d":1,"b":[0.01],"c":[[0.02]],"T":2.5,"K":{"type":"density",
          "family":"truncated_double_exponential","eta_plus":3,"eta_minus":5,"p":0.4,
          "intensity":1.2,"lo":-0.9,"hi":0.8},"quadrature":{"abs_tol":1e-12,"panels":8}})",
      R"({"d":1,"b":[0.0],"c":[[0.0]],"K":{"type":"density","family":"tabulated",
          "xs":[-0.5,0,0.3],"fs":[1,2,0.5]}})",
      R"({"d":2,"b":[0.01,-0.02],"c":[[0.04,0.01],[0.01,0.09]],"T":1,
          "K":{"type":"atoms","atoms":[{"x":[0.2,-0.1],"weight":0.3},{"x":[-0.15,0.25],"weight":0.4}]}})",
      R"({"d":1,"b":[0.03],"c":[[0.09]],"T":1,"K":{"type":"none"}})",
  };
  for (const auto& doc : docs) {
    const auto t = parse_model(doc);
    const Json once = model_to_json(t);
    const auto t2 = model_from_json(once);
    EXPECT_EQ(model_to_json(t2), once) << doc;
    EXPECT_EQ(t2.K.total_mass(), t.K.total_mass());
    EXPECT_EQ(t2.T, t.T);
  }
}

TEST(ModelIo, ScalarAtomLocationsInOneDimension) {
  const auto t = parse_model(
      R"({"d":1,"b":[0],"c":[[0.01]],"K":{"type":"atoms","atoms":[{"x":0.2,"weight":1}]}})");
  EXPECT_DOUBLE_EQ(t.K.atom_list()[0].x[0], 0.2);
  EXPECT_DOUBLE_EQ(t.T, 1.0);
}

TEST(ModelIo, RejectsMalformedInput) {
  EXPECT_EQ(code_of([] { parse_model("{\"d\": 1,"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_model(R"({"d":1,"b":[NaN],"c":[[0.04]]})"); }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_model(R"({"d":1,"b":[1e999],"c":[[0.04]]})"); }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_model(R"({"d":1,"b":[0,1],"c":[[0.04]]})"); }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_model(R"({"d":1,"c":[[0.04]]})"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_model(R"({"d":1,"b":["x"],"c":[[0.04]]})"); }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] {
              parse_model(R"({"d":1,"b":[0],"c":[[0.04]],"K":{"type":"density","family":"gamma"}})");
            }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_model("[1,2]"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { load_model("/nonexistent/model.json"); }), ErrorCode::ParseError);
}

TEST(ModelIo, DensityNeedsOneDimension) {
  EXPECT_EQ(code_of([] {
              parse_model(R"({"d":2,"b":[0,0],"c":[[1,0],[0,1]],"K":{"type":"density",
                  "family":"uniform","lo":-0.5,"hi":0.5,"intensity":1}})");
            }),
            ErrorCode::InvalidModel);
}

TEST(ModelIo, ClampsTinyNegativeEigenvalues) {
  const auto t = parse_model(R"({"d":1,"b":[0],"c":[[-1e-14]]})");
  EXPECT_EQ(t.c(0, 0), 0.0);
}

TEST(ModelIo, QuadratureEnvironmentOverride) {
  ::setenv("QMMM_QUAD_TOL", "1e-13", 1);
  const auto t = apply_quadrature_env(parse_model(kRef1));
  EXPECT_DOUBLE_EQ(t.K.density_1d().policy().abs_tol, 1e-13);
  ::setenv("QMMM_QUAD_TOL", "abc", 1);
  EXPECT_EQ(code_of([] { apply_quadrature_env(parse_model(kRef1)); }), ErrorCode::ParseError);
  ::unsetenv("QMMM_QUAD_TOL");
  EXPECT_DOUBLE_EQ(apply_quadrature_env(parse_model(kRef1)).K.density_1d().policy().abs_tol,
                   1e-10);
}

TEST(ModelIo, DerivedDensitiesAreNotSerializable) {
  const auto t = ref1();
  const auto se = exp_to_se(t.b, t.c, t.K);
  EXPECT_EQ(code_of([&] { model_to_json(se); }), ErrorCode::NotSerializable);
}

TEST(SolutionIo, RoundTripKeepsBitsAndResidual) {
  const auto t = ref1();
  for (const auto& sol : {solve_qmmm(t, 2.0), solve_qmmm(t, 1.1), solve_memm(t)}) {
    const Json doc = solution_to_json(sol, t);
    const auto saved = solution_from_json(Json::parse(doc.dump()));
    EXPECT_EQ(saved.kind, sol.kind);
    EXPECT_EQ(saved.lambda[0], sol.lambda[0]);
    EXPECT_EQ(saved.beta[0], sol.beta[0]);
    EXPECT_EQ(saved.q.has_value(), sol.kind != MeasureKind::MEMM);
    const Vector r = saved.q ? phi(saved.triplet, saved.lambda, *saved.q)
                             : phi_e(saved.triplet, saved.lambda);
    EXPECT_LE(r.norm(), 1e-11);
    // A solution file is also accepted as a model file.
    EXPECT_EQ(model_to_json(model_from_json(doc)), model_to_json(t));
  }
}

TEST(ReportIo, SweepAndMonteCarloJson) {
  const auto t = ref1();
  auto rep = q_sweep(t, default_q_grid());
  rep.diagnostics = convergence_diagnostics(rep);
  const Json j = sweep_to_json(rep);
  EXPECT_EQ(j["rows"].size(), 9u);
  EXPECT_EQ(j["probes"].size(), 5u);
  EXPECT_TRUE(j["diagnostics"]["passed"].get<bool>());
  EXPECT_EQ(j["rows"][0]["lambda"][0].get<double>(), rep.rows[0].lambda[0]);

  MCReport r;
  r.label = "x";
  r.estimate = 1.0 / 3.0;
  r.z_score = INFINITY;
  const Json m = mc_report_to_json(r);
  EXPECT_EQ(m["estimate"].get<double>(), 1.0 / 3.0);
  EXPECT_TRUE(m["z_score"].is_null());
}
