#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qmmm/quadrature.hpp"

namespace qmmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Truncation function h(x) = x 1{|x| <= 1}.
Vector truncate(const Vector& x);
inline double truncate(double x) { return std::abs(x) <= 1.0 ? x : 0.0; }

struct Atom {
  Vector x;
  double weight = 0.0;
};

struct QuadraturePolicy {
  int panels = 4;
  double abs_tol = 1e-10;
};

class Density1D;

namespace density {

/// Constant density on (lo, hi) with total mass `intensity`.
struct Uniform {
  double lo = 0.0;
  double hi = 0.0;
  double intensity = 0.0;
};

/// Kou-type double exponential shape p*eta_plus*e^{-eta_plus x} (x > 0),
/// (1-p)*eta_minus*e^{eta_minus x} (x < 0), truncated to (lo, hi) and scaled to
/// total mass `intensity`.
struct TruncatedDoubleExponential {
  double eta_plus = 1.0;
  double eta_minus = 1.0;
  double p = 0.5;
  double intensity = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Piecewise-linear density through (xs[i], fs[i]); xs strictly increasing.
struct Tabulated {
  std::vector<double> xs;
  std::vector<double> fs;
};

/// Image of `base` under x -> e^x - 1.
struct ExpPushforward {
  std::shared_ptr<const Density1D> base;
};

/// weight(x) * base(x); used for tilted measures Y.K.
struct Reweighted {
  std::shared_ptr<const Density1D> base;
  std::function<double(double)> weight;
  std::string label;
};

}  // namespace density

/// Bounded one-dimensional jump density with bounded support.
class Density1D {
 public:
  using Family = std::variant<density::Uniform, density::TruncatedDoubleExponential,
                              density::Tabulated, density::ExpPushforward, density::Reweighted>;

  explicit Density1D(Family family, QuadraturePolicy policy = {});

  double operator()(double x) const;
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double total_mass() const { return mass_; }
  /// Interior points where the density may have a kink or jump.
  const std::vector<double>& breakpoints() const { return breaks_; }
  const Family& family() const { return family_; }
  std::string family_name() const;
  const QuadraturePolicy& policy() const { return policy_; }
  Density1D with_policy(QuadraturePolicy policy) const;

 private:
  double evaluate(double x) const;

  Family family_;
  QuadraturePolicy policy_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double mass_ = 0.0;
  double scale_ = 1.0;
  std::vector<double> breaks_;
};

/// Finite-activity Levy measure: either finitely many atoms (any dimension) or
/// a one-dimensional bounded density.
class JumpMeasure {
 public:
  static JumpMeasure none(int dim);
  static JumpMeasure atoms(std::vector<Atom> atoms, int dim);
  static JumpMeasure density(Density1D density);

  bool is_atoms() const { return std::holds_alternative<std::vector<Atom>>(rep_); }
  bool is_density() const { return !is_atoms(); }
  const std::vector<Atom>& atom_list() const { return std::get<std::vector<Atom>>(rep_); }
  const Density1D& density_1d() const { return std::get<Density1D>(rep_); }
  int dim() const { return dim_; }
  double total_mass() const;
  bool empty() const { return total_mass() == 0.0; }
  /// Closed hull [min x, max x] of the support (d = 1 only).
  std::pair<double, double> support_hull() const;
  /// Same measure with a different quadrature policy (no-op for atoms).
  JumpMeasure with_quadrature(QuadraturePolicy policy) const;

 private:
  JumpMeasure(std::variant<std::vector<Atom>, Density1D> rep, int dim)
      : rep_(std::move(rep)), dim_(dim) {}

  std::variant<std::vector<Atom>, Density1D> rep_;
  int dim_ = 1;
};

/// Characteristic triplet (b, c, K) per unit time, truncation h, horizon T.
struct LevyTriplet {
  Vector b;
  Matrix c;
  JumpMeasure K = JumpMeasure::none(1);
  double T = 1.0;

  int dim() const { return static_cast<int>(b.size()); }
};

enum class Severity { Info, Warning, Error };

struct Finding {
  std::string code;
  std::string message;
  Severity severity = Severity::Error;
};

struct ValidationReport {
  bool passed = true;
  std::vector<Finding> findings;

  void add(std::string code, std::string message, Severity severity);
};

inline constexpr double kTolPsd = 1e-12;

ValidationReport validate(const LevyTriplet& triplet);

/// Symmetrizes c and clamps eigenvalues in (-kTolPsd, 0) to zero.
Matrix clamp_psd(const Matrix& c);

struct KIntegral {
  double value = 0.0;
  double abs_error = 0.0;
  bool finite = true;
  bool converged = true;
};

/// Integral of phi against K. Atoms are summed exactly; densities use adaptive
/// quadrature split at the density's breakpoints and at |x| = 1.
KIntegral integrate_k(const JumpMeasure& K, const std::function<double(const Vector&)>& phi);

/// Scalar fast path for one-dimensional measures (atoms or density).
KIntegral integrate_k_1d(const JumpMeasure& K, const std::function<double(double)>& phi,
                         std::span<const double> extra_breakpoints = {});

/// b_0 = b + \int (x - h(x)) K(dx).
Vector drift_b0(const LevyTriplet& triplet);

/// Triplet (b, c, K) of L with E(L) = exp(Ltilde), given the triplet of Ltilde.
LevyTriplet exp_to_se(const Vector& b_tilde, const Matrix& c_tilde, const JumpMeasure& K_tilde,
                      double T = 1.0);

/// Set of lambda with (q-1) lambda.x + 1 > 0 for K-a.e. x.
struct LambdaDomain {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  /// Half-spaces n_i . lambda + 1 > 0 with n_i = (q-1) x_i (atoms only).
  std::vector<Vector> normals;
  bool degenerate = false;
  int dim = 1;

  bool contains(const Vector& lambda) const;
};

LambdaDomain lambda_domain(const JumpMeasure& K, double q);

}  // namespace qmmm
