#include "qmmm/tilts.hpp"

#include <cmath>
#include <limits>
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

double power_log(double u, double q) {
  if (!(1.0 + u > 0.0)) {
    std::ostringstream os;
    os << "power tilt base (q-1) lambda.x + 1 = " << 1.0 + u << " is not positive";
    throw Error(ErrorCode::DomainError, os.str());
  }
  // log1p keeps q -> 1 sweeps accurate where (q-1) lambda.x is tiny.
  return std::log1p(u) / (q - 1.0);
}

void check_dim(const Vector& lambda, Eigen::Index d) {
  if (lambda.size() != d) {
    throw Error(ErrorCode::InvalidArgument, "tilt parameter dimension does not match x");
  }
}

double quadratic_form(const LevyTriplet& triplet, const Vector& beta) {
  if (beta.size() != triplet.dim()) {
    throw Error(ErrorCode::InvalidArgument, "beta dimension does not match the triplet");
  }
  return beta.dot(triplet.c * beta);
}

double integrate_or_inf(const KIntegral& r) {
  return r.finite ? r.value : std::numeric_limits<double>::infinity();
}

}  // namespace

double g_q(double y, double q) {
  if (!(y > 0.0)) {
    throw Error(ErrorCode::DomainError, "g_q requires y > 0");
  }
  const double t = y - 1.0;
  if (std::abs(t) < 1e-2) {
    // Binomial series sum_{k>=2} C(q, k) t^k avoids cancellation near y = 1.
    double term = q * t;
    double sum = 0.0;
    for (int k = 2; k < 80; ++k) {
      term *= (q - k + 1) / k * t;
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return std::expm1(q * std::log(y)) - q * t;
}

double log_tilt(const Tilt& tilt, const Vector& x) {
  return std::visit(Overloaded{
                        [&](const PowerTilt& p) {
                          check_dim(p.lambda, x.size());
                          return power_log((p.q - 1.0) * p.lambda.dot(x), p.q);
                        },
                        [&](const EsscherTilt& e) {
                          check_dim(e.lambda, x.size());
                          return e.lambda.dot(x);
                        },
                        [](const IdentityTilt&) { return 0.0; },
                    },
                    tilt);
}

double log_tilt(const Tilt& tilt, double x) {
  return std::visit(Overloaded{
                        [&](const PowerTilt& p) {
                          check_dim(p.lambda, 1);
                          return power_log((p.q - 1.0) * p.lambda[0] * x, p.q);
                        },
                        [&](const EsscherTilt& e) {
                          check_dim(e.lambda, 1);
                          return e.lambda[0] * x;
                        },
                        [](const IdentityTilt&) { return 0.0; },
                    },
                    tilt);
}

double tilt_eval(const Tilt& tilt, const Vector& x) {
  if (std::holds_alternative<IdentityTilt>(tilt)) return 1.0;
  return std::exp(log_tilt(tilt, x));
}

double tilt_eval(const Tilt& tilt, double x) {
  if (std::holds_alternative<IdentityTilt>(tilt)) return 1.0;
  return std::exp(log_tilt(tilt, x));
}

TiltFunction as_function(const Tilt& tilt) {
  return [tilt](const Vector& x) { return tilt_eval(tilt, x); };
}

std::string describe(const Tilt& tilt) {
  std::ostringstream os;
  os.precision(6);
  auto vec = [&os](const Vector& v) {
    if (v.size() == 1) {
      os << v[0];
      return;
    }
    os << "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ")";
  };
  std::visit(Overloaded{
                 [&](const PowerTilt& p) {
                   os << "Y(x) = ((q-1) lambda.x + 1)^(1/(q-1)), q = " << p.q << ", lambda = ";
                   vec(p.lambda);
                 },
                 [&](const EsscherTilt& e) {
                   os << "Y(x) = exp(lambda.x), lambda = ";
                   vec(e.lambda);
                 },
                 [&](const IdentityTilt&) { os << "Y(x) = 1"; },
             },
             tilt);
  return os.str();
}

double k_q(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt, double q) {
  const double gaussian = 0.5 * q * (q - 1.0) * quadratic_form(triplet, beta);
  if (std::holds_alternative<IdentityTilt>(tilt) || triplet.K.empty()) return gaussian;
  KIntegral jumps;
  if (triplet.dim() == 1) {
    jumps = integrate_k_1d(triplet.K, [&](double x) { return g_q(tilt_eval(tilt, x), q); });
  } else {
    jumps = integrate_k(triplet.K, [&](const Vector& x) { return g_q(tilt_eval(tilt, x), q); });
  }
  return gaussian + integrate_or_inf(jumps);
}

double k_q(const LevyTriplet& triplet, const Vector& beta, const TiltFunction& tilt, double q) {
  const double gaussian = 0.5 * q * (q - 1.0) * quadratic_form(triplet, beta);
  if (triplet.K.empty()) return gaussian;
  const auto jumps = integrate_k(triplet.K, [&](const Vector& x) { return g_q(tilt(x), q); });
  return gaussian + integrate_or_inf(jumps);
}

double entropy_rate(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt) {
  const double gaussian = 0.5 * quadratic_form(triplet, beta);
  if (std::holds_alternative<IdentityTilt>(tilt) || triplet.K.empty()) return gaussian;
  KIntegral jumps;
  if (triplet.dim() == 1) {
    jumps = integrate_k_1d(triplet.K, [&](double x) {
      return relative_entropy_density(log_tilt(tilt, x), 0.0);
    });
  } else {
    jumps = integrate_k(triplet.K, [&](const Vector& x) {
      return relative_entropy_density(log_tilt(tilt, x), 0.0);
    });
  }
  return gaussian + integrate_or_inf(jumps);
}

double entropy_rate(const LevyTriplet& triplet, const Vector& beta, const TiltFunction& tilt) {
  const double gaussian = 0.5 * quadratic_form(triplet, beta);
  if (triplet.K.empty()) return gaussian;
  const auto jumps = integrate_k(triplet.K, [&](const Vector& x) {
    const double y = tilt(x);
    if (!(y > 0.0)) throw Error(ErrorCode::DomainError, "tilt must be positive");
    return relative_entropy_density(std::log(y), 0.0);
  });
  return gaussian + integrate_or_inf(jumps);
}

double fq_divergence(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt, double q) {
  const double exponent = triplet.T * k_q(triplet, beta, tilt, q);
  if (exponent > std::log(std::numeric_limits<double>::max())) {
    throw Error(ErrorCode::Overflow, "T k_q exceeds the representable range");
  }
  return std::exp(exponent);
}

IntegrabilityCheck check_2_6(const JumpMeasure& K, const Tilt& tilt) {
  IntegrabilityCheck out;
  if (std::holds_alternative<IdentityTilt>(tilt)) return out;
  const auto* power = std::get_if<PowerTilt>(&tilt);
  if (power == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "check_2_6 applies to power tilts");
  }
  const double q = power->q;
  const auto r = integrate_k(K, [&](const Vector& x) { return g_q(tilt_eval(tilt, x), q); });
  out.finite = r.finite;
  out.value = integrate_or_inf(r);
  if (q == 2.0) {
    const auto sq = integrate_k(K, [&](const Vector& x) {
      const double s = power->lambda.dot(x);
      return s * s;
    });
    out.square_integral = integrate_or_inf(sq);
  }
  return out;
}

JumpMeasure tilted_measure(const JumpMeasure& K, const Tilt& tilt) {
  if (K.is_atoms()) {
    std::vector<Atom> atoms;
    atoms.reserve(K.atom_list().size());
    for (const auto& a : K.atom_list()) {
      atoms.push_back(Atom{a.x, a.weight == 0.0 ? 0.0 : a.weight * tilt_eval(tilt, a.x)});
    }
    return JumpMeasure::atoms(std::move(atoms), K.dim());
  }
  const Density1D& base = K.density_1d();
  auto shared = std::make_shared<const Density1D>(base);
  density::Reweighted rw{shared, [tilt](double x) { return tilt_eval(tilt, x); }, describe(tilt)};
  return JumpMeasure::density(Density1D(std::move(rw), base.policy()));
}

double relative_entropy_density(double log_y, double log_z) {
  const double l = log_y - log_z;
  double psi = 0.0;
  if (std::abs(l) < 0.1) {
    // psi(l) = l e^l - e^l + 1 = sum_{k>=2} (k-1) l^k / k!
    double power_over_fact = l;  // l^k / k!
    for (int k = 2; k < 40; ++k) {
      power_over_fact *= l / k;
      const double term = (k - 1) * power_over_fact;
      psi += term;
      if (std::abs(term) <= 1e-18 * psi) break;
    }
  } else {
    psi = l * std::exp(l) - std::expm1(l);
  }
  return std::exp(log_z) * psi;
}

EntropyGapReport entropy_gap(const LevyTriplet& triplet, const Vector& lambda_q, double q,
                             const Vector& lambda_e) {
  EntropyGapReport out;
  const Vector diff = lambda_q - lambda_e;
  out.gaussian_term = 0.5 * triplet.T * quadratic_form(triplet, diff);
  if (!triplet.K.empty()) {
    const Tilt yq = PowerTilt{lambda_q, q};
    const Tilt ye = EsscherTilt{lambda_e};
    KIntegral r;
    if (triplet.dim() == 1) {
      r = integrate_k_1d(triplet.K, [&](double x) {
        return relative_entropy_density(log_tilt(yq, x), log_tilt(ye, x));
      });
    } else {
      r = integrate_k(triplet.K, [&](const Vector& x) {
        return relative_entropy_density(log_tilt(yq, x), log_tilt(ye, x));
      });
    }
    out.jump_term = triplet.T * integrate_or_inf(r);
  }
  out.H = out.gaussian_term + out.jump_term;
  return out;
}

}  // namespace qmmm
