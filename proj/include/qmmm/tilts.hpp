#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "qmmm/levy_model.hpp"

namespace qmmm {

/// Y(x) = ((q-1) lambda.x + 1)^{1/(q-1)}.
struct PowerTilt {
  Vector lambda;
  double q = 2.0;
};

/// Y(x) = exp(lambda.x).
struct EsscherTilt {
  Vector lambda;
};

struct IdentityTilt {};

using Tilt = std::variant<PowerTilt, EsscherTilt, IdentityTilt>;

/// Arbitrary positive jump tilt, used for perturbation and competitor checks.
using TiltFunction = std::function<double(const Vector&)>;

/// g_q(y) = y^q - 1 - q(y - 1). Throws DomainError for y <= 0.
double g_q(double y, double q);

/// Throws DomainError where a PowerTilt base (q-1) lambda.x + 1 is not positive.
double tilt_eval(const Tilt& tilt, const Vector& x);
double tilt_eval(const Tilt& tilt, double x);
/// log Y(x), computed without forming Y.
double log_tilt(const Tilt& tilt, const Vector& x);
double log_tilt(const Tilt& tilt, double x);
TiltFunction as_function(const Tilt& tilt);
std::string describe(const Tilt& tilt);

/// (q(q-1)/2) beta' c beta + \int g_q(Y) dK; +inf if the integral diverges.
double k_q(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt, double q);
double k_q(const LevyTriplet& triplet, const Vector& beta, const TiltFunction& tilt, double q);

/// Entropy rate (1/2) beta' c beta + \int (Y log Y - Y + 1) dK, so that
/// H(Q|P) = T * entropy_rate for Levy-preserving Q.
double entropy_rate(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt);
double entropy_rate(const LevyTriplet& triplet, const Vector& beta, const TiltFunction& tilt);

/// f^q(Q|P) = exp(T k_q). Throws Overflow when T k_q exceeds the double range.
double fq_divergence(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt, double q);

struct IntegrabilityCheck {
  double value = 0.0;
  bool finite = true;
  /// \int (lambda.x)^2 K(dx), reported for q = 2.
  std::optional<double> square_integral;
};

/// Integrability of g_q(Y) against K for a PowerTilt (Identity gives zero).
IntegrabilityCheck check_2_6(const JumpMeasure& K, const Tilt& tilt);

struct EntropyGapReport {
  double gaussian_term = 0.0;
  double jump_term = 0.0;
  double H = 0.0;
};

/// Relative entropy H(Q_q | P_e) between the Levy-preserving measures with
/// parameters (lambda_q, PowerTilt(lambda_q, q)) and (lambda_e, EsscherTilt(lambda_e)).
EntropyGapReport entropy_gap(const LevyTriplet& triplet, const Vector& lambda_q, double q,
                             const Vector& lambda_e);

/// The tilted jump measure Y.K (the jump compensator under the new measure).
/// Atoms keep their locations with weights w_i Y(x_i); densities are reweighted.
JumpMeasure tilted_measure(const JumpMeasure& K, const Tilt& tilt);

/// y log(y/z) - (y - z) written as z * psi(log(y/z)) with a series near zero.
double relative_entropy_density(double log_y, double log_z);

}  // namespace qmmm
