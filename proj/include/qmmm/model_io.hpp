#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "qmmm/convergence.hpp"
#include "qmmm/levy_model.hpp"
#include "qmmm/mc_verify.hpp"
#include "qmmm/solvers.hpp"

namespace qmmm {

using Json = nlohmann::ordered_json;

/// Builds a triplet from a model document. A solution document is accepted
/// too and its embedded "model" is used. c is passed through clamp_psd.
/// Throws ParseError for malformed or non-finite input, InvalidModel for
/// structurally inconsistent models.
LevyTriplet model_from_json(const Json& doc);
LevyTriplet parse_model(std::string_view text);
LevyTriplet load_model(const std::string& path);

/// Throws NotSerializable for derived densities (pushforwards, reweightings).
Json model_to_json(const LevyTriplet& triplet);

/// Overrides the quadrature tolerance of density models when QMMM_QUAD_TOL is set.
LevyTriplet apply_quadrature_env(LevyTriplet triplet);

Json vector_to_json(const Vector& v);
Json tilt_to_json(const Tilt& tilt);
Json validation_to_json(const ValidationReport& report);
/// Embeds the model so the file can be reloaded on its own.
Json solution_to_json(const MeasureSolution& sol, const LevyTriplet& triplet);
Json crosscheck_to_json(const VmmmCrosscheck& check);
Json sweep_to_json(const SweepReport& report);
Json mc_report_to_json(const MCReport& report);
Json oracle_to_json(const OracleResult& result);

struct SavedSolution {
  LevyTriplet triplet;
  MeasureKind kind = MeasureKind::QMMM;
  std::optional<double> q;
  Vector lambda;
  Vector beta;
};

SavedSolution solution_from_json(const Json& doc);
SavedSolution load_solution(const std::string& path);

/// Reads a whole file; throws ParseError when it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace qmmm
