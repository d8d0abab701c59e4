#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qmmm/levy_model.hpp"
#include "qmmm/solvers.hpp"
#include "qmmm/tilts.hpp"

namespace qmmm {

/// Characteristics under Q^{(beta, Y)}: (b + c beta + \int h (Y - 1) dK, c, Y.K).
LevyTriplet q_triplet(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt);

/// Draws jump sizes from the normalized jump measure.
class JumpSampler {
 public:
  inline static constexpr int kTableNodes = 1 << 14;

  explicit JumpSampler(const JumpMeasure& K);

  /// u in [0, 1).
  Vector sample(double u) const;
  double mass() const { return mass_; }
  /// Largest deviation of the linearly interpolated CDF table from the exact
  /// CDF at cell midpoints (densities; zero for atoms).
  double table_error_bound() const { return table_error_; }

 private:
  double invert(double target) const;

  JumpMeasure K_;
  int dim_ = 1;
  double mass_ = 0.0;
  std::vector<double> cumulative_;  // atoms: running weights; density: CDF at nodes
  std::vector<double> nodes_;
  double table_error_ = 0.0;
};

struct SimulatedPath {
  /// Terminal value of the continuous martingale part, ~ N(0, c T).
  Vector brownian;
  std::vector<double> times;
  std::vector<Vector> jumps;
};

struct PathBatch {
  std::uint64_t seed = 0;
  int n_paths = 0;
  double T = 1.0;
  std::string measure = "P";
  std::vector<SimulatedPath> paths;
  double table_error_bound = 0.0;
};

/// Independent generator for (seed, path index).
std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t index);

/// Simulates one path; depends only on (triplet, seed, index).
SimulatedPath simulate_path(const LevyTriplet& triplet, const JumpSampler& sampler,
                            const Matrix& brownian_factor, std::uint64_t seed,
                            std::uint64_t index);

/// Square root A of c T with A A' = c T.
Matrix brownian_factor(const LevyTriplet& triplet);

PathBatch simulate_paths(const LevyTriplet& triplet, int n_paths, std::uint64_t seed,
                         std::string measure = "P");

/// Z_T = exp(beta.W - beta'c beta T / 2) prod Y(dL) exp(-T \int (Y - 1) dK),
/// with the compensator integral computed once.
class DensityEvaluator {
 public:
  DensityEvaluator(const LevyTriplet& triplet, Vector beta, Tilt tilt);

  double log_z(const SimulatedPath& path) const;
  double operator()(const SimulatedPath& path) const { return std::exp(log_z(path)); }

 private:
  Vector beta_;
  Tilt tilt_;
  double constant_ = 0.0;
};

double density_zT(const SimulatedPath& path, const Vector& beta, const Tilt& tilt,
                  const LevyTriplet& triplet);

/// Doleans-Dade exponential of component i of L at T in product form:
/// exp((b - \int h dK) T + W - c T / 2) prod (1 + dL).
double stochastic_exponential(const SimulatedPath& path, const LevyTriplet& triplet,
                              int component = 0);

struct MCReport {
  std::string label;
  double estimate = 0.0;
  double std_error = 0.0;
  double target = 0.0;
  double z_score = 0.0;
  int n_paths = 0;
  std::uint64_t seed = 0;
  bool rerun = false;
  /// z-score of the first run when the rerun guard fired.
  double first_z_score = 0.0;
  bool passed = false;
};

struct MCOptions {
  double z_threshold = 3.0;
  /// Rerun once with seed + 1 when the first run exceeds the threshold.
  bool rerun_guard = true;
};

/// Mean of Z_T^q (q-measures) or Z_T log Z_T (MEMM) over P-paths against
/// exp(T k_q), respectively the relative entropy.
MCReport check_divergence_mc(const LevyTriplet& triplet, const MeasureSolution& sol,
                             int n_paths, std::uint64_t seed, const MCOptions& opts = {});

enum class MartingaleMode { Direct, Weighted };

std::string to_string(MartingaleMode mode);

/// E_Q[E(L)_T] = 1 either by simulating under Q (direct) or as E_P[Z_T E(L)_T].
MCReport check_martingale_mc(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt,
                             int n_paths, std::uint64_t seed, MartingaleMode mode,
                             const MCOptions& opts = {}, int component = 0);

MCReport check_martingale_mc(const LevyTriplet& triplet, const MeasureSolution& sol,
                             int n_paths, std::uint64_t seed, MartingaleMode mode,
                             const MCOptions& opts = {}, int component = 0);

/// Sample mean and standard error with pairwise summation.
std::pair<double, double> mean_and_std_error(const std::vector<double>& values);

}  // namespace qmmm
