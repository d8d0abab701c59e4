#include "qmmm/levy_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
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

void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::InvalidModel, message);
}

// Mass of the untruncated double-exponential shape on (lo, hi).
double double_exponential_mass(const density::TruncatedDoubleExponential& d) {
  double mass = 0.0;
  const double plo = std::max(d.lo, 0.0);
  const double phi = std::max(d.hi, 0.0);
  if (phi > plo) {
    mass += d.p * (std::exp(-d.eta_plus * plo) - std::exp(-d.eta_plus * phi));
  }
  const double nlo = std::min(d.lo, 0.0);
  const double nhi = std::min(d.hi, 0.0);
  if (nhi > nlo) {
    mass += (1.0 - d.p) * (std::exp(d.eta_minus * nhi) - std::exp(d.eta_minus * nlo));
  }
  return mass;
}

std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ")";
  return os.str();
}

}  // namespace

Vector truncate(const Vector& x) {
  return x.norm() <= 1.0 ? x : Vector::Zero(x.size());
}

// ---------------------------------------------------------------------------
// Density1D

Density1D::Density1D(Family family, QuadraturePolicy policy)
    : family_(std::move(family)), policy_(policy) {
  std::visit(
      Overloaded{
          [&](const density::Uniform& u) {
            require(std::isfinite(u.lo) && std::isfinite(u.hi) && u.lo < u.hi,
                    "uniform density needs finite lo < hi");
            require(std::isfinite(u.intensity), "uniform intensity must be finite");
            lo_ = u.lo;
            hi_ = u.hi;
            mass_ = u.intensity;
          },
          [&](const density::TruncatedDoubleExponential& d) {
            require(std::isfinite(d.lo) && std::isfinite(d.hi) && d.lo < d.hi,
                    "truncated_double_exponential needs finite lo < hi");
            require(d.eta_plus > 0.0 && d.eta_minus > 0.0, "eta_plus and eta_minus must be > 0");
            require(d.p >= 0.0 && d.p <= 1.0, "p must lie in [0, 1]");
            require(std::isfinite(d.intensity), "intensity must be finite");
            lo_ = d.lo;
            hi_ = d.hi;
            const double z = double_exponential_mass(d);
            require(z > 0.0, "double exponential shape has no mass on (lo, hi)");
            scale_ = d.intensity / z;
            mass_ = d.intensity;
            if (lo_ < 0.0 && hi_ > 0.0) breaks_.push_back(0.0);
          },
          [&](const density::Tabulated& t) {
            require(t.xs.size() >= 2 && t.xs.size() == t.fs.size(),
                    "tabulated density needs >= 2 points and matching xs/fs");
            for (std::size_t i = 0; i < t.xs.size(); ++i) {
              require(std::isfinite(t.xs[i]) && std::isfinite(t.fs[i]),
                      "tabulated values must be finite");
              if (i > 0) require(t.xs[i] > t.xs[i - 1], "tabulated xs must increase strictly");
            }
            lo_ = t.xs.front();
            hi_ = t.xs.back();
            for (std::size_t i = 0; i + 1 < t.xs.size(); ++i) {
              mass_ += 0.5 * (t.fs[i] + t.fs[i + 1]) * (t.xs[i + 1] - t.xs[i]);
            }
            breaks_.assign(t.xs.begin() + 1, t.xs.end() - 1);
          },
          [&](const density::ExpPushforward& e) {
            require(e.base != nullptr, "pushforward needs a base density");
            lo_ = std::expm1(e.base->lo());
            hi_ = std::expm1(e.base->hi());
            mass_ = e.base->total_mass();
            for (double x : e.base->breakpoints()) breaks_.push_back(std::expm1(x));
          },
          [&](const density::Reweighted& r) {
            require(r.base != nullptr && r.weight, "reweighted density needs base and weight");
            lo_ = r.base->lo();
            hi_ = r.base->hi();
            breaks_ = r.base->breakpoints();
          },
      },
      family_);
  if (std::holds_alternative<density::Reweighted>(family_)) {
    QuadratureSettings settings{policy_.abs_tol, policy_.panels};
    mass_ = integrate_adaptive([this](double x) { return evaluate(x); }, lo_, hi_, settings,
                               breaks_)
                .value;
  }
}

double Density1D::evaluate(double x) const {
  if (x < lo_ || x > hi_) return 0.0;
  return std::visit(
      Overloaded{
          [&](const density::Uniform& u) { return u.intensity / (u.hi - u.lo); },
          [&](const density::TruncatedDoubleExponential& d) {
            const double shape = x >= 0.0 ? d.p * d.eta_plus * std::exp(-d.eta_plus * x)
                                           : (1.0 - d.p) * d.eta_minus * std::exp(d.eta_minus * x);
            return scale_ * shape;
          },
          [&](const density::Tabulated& t) {
            auto it = std::upper_bound(t.xs.begin(), t.xs.end(), x);
            if (it == t.xs.end()) return t.fs.back();
            if (it == t.xs.begin()) return t.fs.front();
            const std::size_t i = static_cast<std::size_t>(it - t.xs.begin()) - 1;
            const double w = (x - t.xs[i]) / (t.xs[i + 1] - t.xs[i]);
            return (1.0 - w) * t.fs[i] + w * t.fs[i + 1];
          },
          [&](const density::ExpPushforward& e) {
            return (*e.base)(std::log1p(x)) / (1.0 + x);
          },
          [&](const density::Reweighted& r) { return (*r.base)(x) * r.weight(x); },
      },
      family_);
}

double Density1D::operator()(double x) const { return evaluate(x); }

std::string Density1D::family_name() const {
  return std::visit(Overloaded{
                        [](const density::Uniform&) { return std::string("uniform"); },
                        [](const density::TruncatedDoubleExponential&) {
                          return std::string("truncated_double_exponential");
                        },
                        [](const density::Tabulated&) { return std::string("tabulated"); },
                        [](const density::ExpPushforward&) {
                          return std::string("exp_pushforward");
                        },
                        [](const density::Reweighted& r) {
                          return "reweighted(" + r.label + ")";
                        },
                    },
                    family_);
}

Density1D Density1D::with_policy(QuadraturePolicy policy) const {
  return Density1D(family_, policy);
}

// ---------------------------------------------------------------------------
// JumpMeasure

JumpMeasure JumpMeasure::none(int dim) { return JumpMeasure(std::vector<Atom>{}, dim); }

JumpMeasure JumpMeasure::atoms(std::vector<Atom> atoms, int dim) {
  for (const auto& a : atoms) {
    if (a.x.size() != dim) {
      throw Error(ErrorCode::InvalidModel, "atom location " + format_vector(a.x) +
                                               " does not have dimension " + std::to_string(dim));
    }
  }
  return JumpMeasure(std::move(atoms), dim);
}

JumpMeasure JumpMeasure::density(Density1D density) { return JumpMeasure(std::move(density), 1); }

double JumpMeasure::total_mass() const {
  if (is_density()) return density_1d().total_mass();
  double mass = 0.0;
  for (const auto& a : atom_list()) mass += a.weight;
  return mass;
}

std::pair<double, double> JumpMeasure::support_hull() const {
  if (dim_ != 1) throw Error(ErrorCode::InvalidArgument, "support_hull needs d = 1");
  if (is_density()) return {density_1d().lo(), density_1d().hi()};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& a : atom_list()) {
    if (a.weight <= 0.0) continue;
    lo = std::min(lo, a.x[0]);
    hi = std::max(hi, a.x[0]);
  }
  if (lo > hi) return {0.0, 0.0};
  return {lo, hi};
}

JumpMeasure JumpMeasure::with_quadrature(QuadraturePolicy policy) const {
  if (is_atoms()) return *this;
  return JumpMeasure::density(density_1d().with_policy(policy));
}

// ---------------------------------------------------------------------------
// Validation

void ValidationReport::add(std::string code, std::string message, Severity severity) {
  if (severity == Severity::Error) passed = false;
  findings.push_back(Finding{std::move(code), std::move(message), severity});
}

Matrix clamp_psd(const Matrix& c) {
  Matrix sym = 0.5 * (c + c.transpose());
  if (sym.size() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector values = eig.eigenvalues();
  bool changed = false;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0 && values[i] >= -kTolPsd) {
      values[i] = 0.0;
      changed = true;
    }
  }
  if (!changed) return sym;
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

ValidationReport validate(const LevyTriplet& triplet) {
  ValidationReport report;
  const int d = triplet.dim();
  if (d < 1) {
    report.add("dimension_mismatch", "drift vector b is empty", Severity::Error);
    return report;
  }
  if (triplet.c.rows() != d || triplet.c.cols() != d) {
    report.add("dimension_mismatch", "c must be " + std::to_string(d) + "x" + std::to_string(d),
               Severity::Error);
  }
  if (triplet.K.dim() != d) {
    report.add("dimension_mismatch", "jump measure dimension differs from b", Severity::Error);
  }
  if (!triplet.b.allFinite() || !triplet.c.allFinite()) {
    report.add("non_finite", "b and c must be finite", Severity::Error);
  }
  if (!(triplet.T > 0.0) || !std::isfinite(triplet.T)) {
    report.add("invalid_horizon", "horizon T must be finite and > 0", Severity::Error);
  }

  if (triplet.c.rows() == d && triplet.c.cols() == d && triplet.c.allFinite()) {
    const double scale = 1.0 + triplet.c.cwiseAbs().maxCoeff();
    if ((triplet.c - triplet.c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      report.add("c_not_symmetric", "c is not symmetric", Severity::Error);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (triplet.c + triplet.c.transpose()));
    const double smallest = eig.eigenvalues().minCoeff();
    if (smallest < -kTolPsd) {
      std::ostringstream os;
      os << "c not nonnegative definite (smallest eigenvalue " << smallest << ")";
      report.add("c_not_psd", os.str(), Severity::Error);
    } else if (smallest < 0.0) {
      report.add("c_clamped", "eigenvalues in (-1e-12, 0) are treated as zero", Severity::Warning);
    }
  }

  const JumpMeasure& K = triplet.K;
  if (K.is_atoms()) {
    for (const auto& atom : K.atom_list()) {
      const std::string where = "atom at " + format_vector(atom.x);
      if (!atom.x.allFinite() || !std::isfinite(atom.weight)) {
        report.add("non_finite", where + " has non-finite data", Severity::Error);
        continue;
      }
      if (atom.weight < 0.0) {
        report.add("negative_weight", where + " has negative intensity", Severity::Error);
      }
      if ((atom.x.array() <= -1.0).any()) {
        report.add("support_outside_domain", where + ": support outside (-1, inf)",
                   Severity::Error);
      }
      if (atom.x.isZero(0.0)) {
        report.add("atom_at_origin", "K must not charge the origin", Severity::Error);
      }
    }
  } else {
    const Density1D& f = K.density_1d();
    if (d != 1) {
      report.add("density_requires_d1", "density jump measures need d = 1", Severity::Error);
    }
    if (!(f.lo() > -1.0)) {
      std::ostringstream os;
      os << "density support [" << f.lo() << ", " << f.hi() << "]: support outside (-1, inf)";
      report.add("support_outside_domain", os.str(), Severity::Error);
    }
    if (!std::isfinite(f.hi())) {
      report.add("infinite_second_moment", "density support must be bounded", Severity::Error);
    }
    bool negative = false;
    std::visit(Overloaded{
                   [&](const density::Uniform& u) { negative = u.intensity < 0.0; },
                   [&](const density::TruncatedDoubleExponential& t) {
                     negative = t.intensity < 0.0;
                   },
                   [&](const density::Tabulated& t) {
                     negative = std::any_of(t.fs.begin(), t.fs.end(),
                                            [](double v) { return v < 0.0; });
                   },
                   [&](const auto&) {
                     // Derived families: sample on a grid.
                     for (int i = 0; i <= 256; ++i) {
                       const double x = f.lo() + (f.hi() - f.lo()) * i / 256.0;
                       if (f(x) < 0.0) negative = true;
                     }
                   },
               },
               f.family());
    if (negative) {
      report.add("negative_density", "jump density takes negative values", Severity::Error);
    }
    if (f.policy().abs_tol <= 0.0 || f.policy().panels < 1) {
      report.add("invalid_quadrature", "quadrature needs abs_tol > 0 and panels >= 1",
                 Severity::Error);
    }
  }
  const double mass = K.total_mass();
  if (!std::isfinite(mass)) {
    report.add("infinite_mass", "jump measure must have finite total mass", Severity::Error);
  }
  if (report.passed) {
    const auto second = integrate_k(K, [](const Vector& x) { return x.squaredNorm(); });
    if (!second.finite) {
      report.add("infinite_second_moment", "integral of |x|^2 K(dx) diverges", Severity::Error);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Integration

KIntegral integrate_k_1d(const JumpMeasure& K, const std::function<double(double)>& phi,
                         std::span<const double> extra_breakpoints) {
  if (K.dim() != 1) throw Error(ErrorCode::InvalidArgument, "integrate_k_1d needs d = 1");
  KIntegral out;
  if (K.is_atoms()) {
    for (const auto& a : K.atom_list()) {
      if (a.weight == 0.0) continue;
      const double v = phi(a.x[0]);
      if (std::isnan(v)) throw Error(ErrorCode::NonFinite, "integrand returned NaN at an atom");
      out.value += a.weight * v;
    }
    out.finite = std::isfinite(out.value);
    return out;
  }
  const Density1D& f = K.density_1d();
  if (f.total_mass() == 0.0) return out;
  std::vector<double> cuts = f.breakpoints();
  cuts.push_back(-1.0);
  cuts.push_back(1.0);
  cuts.insert(cuts.end(), extra_breakpoints.begin(), extra_breakpoints.end());
  QuadratureSettings settings{f.policy().abs_tol, f.policy().panels};
  const auto r = integrate_adaptive(
      [&](double x) {
        const double w = f(x);
        return w == 0.0 ? 0.0 : phi(x) * w;
      },
      f.lo(), f.hi(), settings, cuts);
  out.value = r.value;
  out.abs_error = r.abs_error;
  out.converged = r.converged;
  out.finite = !r.divergent && std::isfinite(r.value);
  return out;
}

KIntegral integrate_k(const JumpMeasure& K, const std::function<double(const Vector&)>& phi) {
  if (K.is_density()) {
    Vector x(1);
    return integrate_k_1d(K, [&](double t) {
      x[0] = t;
      return phi(x);
    });
  }
  KIntegral out;
  for (const auto& a : K.atom_list()) {
    if (a.weight == 0.0) continue;
    const double v = phi(a.x);
    if (std::isnan(v)) throw Error(ErrorCode::NonFinite, "integrand returned NaN at an atom");
    out.value += a.weight * v;
  }
  out.finite = std::isfinite(out.value);
  return out;
}

Vector drift_b0(const LevyTriplet& triplet) {
  const int d = triplet.dim();
  Vector b0 = triplet.b;
  for (int i = 0; i < d; ++i) {
    const auto r = integrate_k(triplet.K, [i](const Vector& x) {
      return x.norm() > 1.0 ? x[i] : 0.0;
    });
    if (!r.finite) throw Error(ErrorCode::NonIntegrable, "integral of |x - h(x)| diverges");
    b0[i] += r.value;
  }
  return b0;
}

LevyTriplet exp_to_se(const Vector& b_tilde, const Matrix& c_tilde, const JumpMeasure& K_tilde,
                      double T) {
  const int d = static_cast<int>(b_tilde.size());
  LevyTriplet out;
  out.c = c_tilde;
  out.T = T;
  out.b = b_tilde + 0.5 * c_tilde.diagonal();
  if (K_tilde.is_atoms()) {
    std::vector<Atom> mapped;
    mapped.reserve(K_tilde.atom_list().size());
    for (const auto& a : K_tilde.atom_list()) {
      Vector y = a.x.unaryExpr([](double v) { return std::expm1(v); });
      out.b += a.weight * (truncate(y) - truncate(a.x));
      mapped.push_back(Atom{std::move(y), a.weight});
    }
    out.K = JumpMeasure::atoms(std::move(mapped), d);
    return out;
  }
  const Density1D& base = K_tilde.density_1d();
  const double ln2 = std::log(2.0);
  const std::array<double, 1> extra{ln2};
  const auto correction = integrate_k_1d(
      K_tilde, [](double x) { return truncate(std::expm1(x)) - truncate(x); }, extra);
  if (!correction.finite) throw Error(ErrorCode::NonIntegrable, "drift correction diverges");
  out.b[0] += correction.value;
  out.K = JumpMeasure::density(Density1D(
      density::ExpPushforward{std::make_shared<const Density1D>(base)}, base.policy()));
  return out;
}

// ---------------------------------------------------------------------------
// Admissible lambda

bool LambdaDomain::contains(const Vector& lambda) const {
  if (!normals.empty()) {
    for (const auto& n : normals) {
      if (!(n.dot(lambda) + 1.0 > 0.0)) return false;
    }
    return true;
  }
  if (dim == 1) return lambda[0] > lo && lambda[0] < hi;
  return true;
}

LambdaDomain lambda_domain(const JumpMeasure& K, double q) {
  if (!std::isfinite(q) || (q >= 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "q must lie in (-inf, 0) or (1, inf)");
  }
  LambdaDomain dom;
  dom.dim = K.dim();
  const double a = q - 1.0;
  if (K.empty()) {
    dom.degenerate = true;
    return dom;
  }
  if (K.is_atoms()) {
    for (const auto& atom : K.atom_list()) {
      if (atom.weight > 0.0) dom.normals.push_back(a * atom.x);
    }
  }
  if (dom.dim != 1) return dom;

  const auto [x_lo, x_hi] = K.support_hull();
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (a > 0.0) {
    dom.lo = x_hi > 0.0 ? -1.0 / (a * x_hi) : -inf;
    dom.hi = x_lo < 0.0 ? 1.0 / (a * -x_lo) : inf;
  } else {
    dom.lo = x_lo < 0.0 ? -1.0 / (-a * -x_lo) : -inf;
    dom.hi = x_hi > 0.0 ? 1.0 / (-a * x_hi) : inf;
  }
  return dom;
}

}  // namespace qmmm
