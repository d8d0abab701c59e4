#include "qmmm/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "qmmm/error.hpp"

namespace qmmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_lambda(const LevyTriplet& triplet, const Vector& lambda) {
  if (lambda.size() != triplet.dim()) {
    throw Error(ErrorCode::InvalidArgument, "lambda dimension does not match the triplet");
  }
  if (!lambda.allFinite()) throw Error(ErrorCode::NonFinite, "lambda is not finite");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

/// \int (x w(x) - h(x)) K(dx), or \int x w(x) K(dx) without the truncation.
Vector integrate_first(const LevyTriplet& triplet, const std::function<double(const Vector&)>& w,
                       bool subtract_h) {
  const int d = triplet.dim();
  Vector out = Vector::Zero(d);
  const JumpMeasure& K = triplet.K;
  if (K.empty()) return out;
  if (K.is_density()) {
    Vector x(1);
    const auto r = integrate_k_1d(K, [&](double t) {
      x[0] = t;
      return t * w(x) - (subtract_h ? truncate(t) : 0.0);
    });
    if (!r.finite) throw Error(ErrorCode::NonIntegrable, "jump integral diverges");
    out[0] = r.value;
    return out;
  }
  for (const auto& a : K.atom_list()) {
    if (a.weight == 0.0) continue;
    const double v = w(a.x);
    if (std::isnan(v)) throw Error(ErrorCode::NonFinite, "tilt is NaN at an atom");
    out += a.weight * (a.x * v - (subtract_h ? truncate(a.x) : Vector::Zero(d)));
  }
  if (!out.allFinite()) throw Error(ErrorCode::NonIntegrable, "jump sum is not finite");
  return out;
}

/// \int x x' w(x) K(dx).
Matrix integrate_second(const LevyTriplet& triplet,
                        const std::function<double(const Vector&)>& w) {
  const int d = triplet.dim();
  Matrix out = Matrix::Zero(d, d);
  const JumpMeasure& K = triplet.K;
  if (K.empty()) return out;
  if (K.is_density()) {
    Vector x(1);
    const auto r = integrate_k_1d(K, [&](double t) {
      x[0] = t;
      return t * t * w(x);
    });
    if (!r.finite) throw Error(ErrorCode::NonIntegrable, "second moment integral diverges");
    out(0, 0) = r.value;
    return out;
  }
  for (const auto& a : K.atom_list()) {
    if (a.weight == 0.0) continue;
    out += a.weight * w(a.x) * (a.x * a.x.transpose());
  }
  if (!out.allFinite()) throw Error(ErrorCode::NonIntegrable, "second moment sum is not finite");
  return out;
}

void require_in_domain(const LevyTriplet& triplet, const Vector& lambda, double q) {
  const auto dom = lambda_domain(triplet.K, q);
  if (!dom.contains(lambda)) {
    throw Error(ErrorCode::DomainError,
                "lambda outside the admissible set {(q-1) lambda.x + 1 > 0 on supp K}");
  }
}

double min_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().minCoeff();
}

/// Largest |x| (Euclidean) over the support of K; 0 when K is empty.
double support_radius(const JumpMeasure& K) {
  if (K.empty()) return 0.0;
  if (K.is_density()) {
    return std::max(std::abs(K.density_1d().lo()), std::abs(K.density_1d().hi()));
  }
  double r = 0.0;
  for (const auto& a : K.atom_list()) {
    if (a.weight > 0.0) r = std::max(r, a.x.norm());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Root finding

struct RootProblem {
  std::function<Vector(const Vector&)> f;
  std::function<Matrix(const Vector&)> df;
  std::function<bool(const Vector&)> admissible;
  double lo = -kInf;  // shrunk interval, d = 1
  double hi = kInf;
};

struct RootResult {
  Vector x;
  Vector fx;
  int iterations = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

RootResult solve_scalar(const RootProblem& p, const SolverOptions& opts,
                        const std::optional<Vector>& warm) {
  auto F = [&](double x) { return p.f(Vector::Constant(1, x))[0]; };
  auto dF = [&](double x) { return p.df(Vector::Constant(1, x))(0, 0); };

  double x0 = 0.0;
  if (warm && warm->size() == 1 && std::isfinite((*warm)[0]) && (*warm)[0] > p.lo &&
      (*warm)[0] < p.hi) {
    x0 = (*warm)[0];
  }
  RootResult out;
  double f0 = F(x0);
  if (std::abs(f0) <= opts.tol_root) {
    out.x = Vector::Constant(1, x0);
    out.fx = Vector::Constant(1, f0);
    out.bracket_lo = out.bracket_hi = x0;
    return out;
  }

  // Expand from x0 toward the root, capped at the shrunk domain.
  const double direction = f0 < 0.0 ? 1.0 : -1.0;
  const double cap = direction > 0.0 ? p.hi : p.lo;
  double prev = x0;
  double fprev = f0;
  double step = opts.expansion.initial_step;
  double a = 0.0, b = 0.0, fa = 0.0, fb = 0.0;
  bool bracketed = false;
  for (int k = 0; k <= opts.expansion.max_expansions; ++k) {
    double x = prev + direction * step;
    const bool at_cap = direction > 0.0 ? x >= cap : x <= cap;
    if (at_cap) x = cap;
    const double fx = F(x);
    if (std::abs(fx) <= opts.tol_root) {
      out.x = Vector::Constant(1, x);
      out.fx = Vector::Constant(1, fx);
      out.bracket_lo = std::min(prev, x);
      out.bracket_hi = std::max(prev, x);
      out.iterations = k + 1;
      return out;
    }
    if ((fx > 0.0) != (f0 > 0.0)) {
      bracketed = true;
      if (direction > 0.0) {
        a = prev, fa = fprev, b = x, fb = fx;
      } else {
        a = x, fa = fx, b = prev, fb = fprev;
      }
      break;
    }
    if (at_cap) break;
    prev = x;
    fprev = fx;
    step *= opts.expansion.factor;
  }
  if (!bracketed) {
    std::ostringstream os;
    os << "phi does not change sign on the admissible interval (" << fmt(p.lo) << ", "
       << fmt(p.hi) << "); phi(" << fmt(x0) << ") = " << fmt(f0);
    throw Error(ErrorCode::NoSignChange, os.str());
  }
  out.bracket_lo = a;
  out.bracket_hi = b;

  // Safeguarded Newton: Newton steps that leave the bracket become bisection.
  double x = std::abs(fa) < std::abs(fb) ? a : b;
  double fx = std::abs(fa) < std::abs(fb) ? fa : fb;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double dfx = dF(x);
    double xn = (dfx > 0.0 && std::isfinite(dfx)) ? x - fx / dfx : std::nan("");
    if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
    if (xn == x) xn = 0.5 * (a + b);
    x = xn;
    fx = F(x);
    out.iterations = it;
    if (std::abs(fx) <= opts.tol_root) {
      out.x = Vector::Constant(1, x);
      out.fx = Vector::Constant(1, fx);
      return out;
    }
    if ((fx < 0.0) == (fa < 0.0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
      fb = fx;
    }
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
      throw Error(ErrorCode::MaxIter, "bracket collapsed at lambda = " + fmt(x) +
                                          " with |phi| = " + fmt(std::abs(fx)) +
                                          " above tol_root");
    }
  }
  throw Error(ErrorCode::MaxIter, "root finder exceeded max_iter; |phi| = " + fmt(std::abs(fx)));
}

RootResult solve_vector(const RootProblem& p, const SolverOptions& opts,
                        const std::optional<Vector>& warm, int d) {
  Vector x = Vector::Zero(d);
  if (warm && warm->size() == d && warm->allFinite() && p.admissible(*warm)) x = *warm;
  Vector fx = p.f(x);
  RootResult out;
  for (int it = 0; it <= opts.max_iter; ++it) {
    const double norm = fx.norm();
    if (norm <= opts.tol_root) {
      out.x = x;
      out.fx = fx;
      out.iterations = it;
      return out;
    }
    if (it == opts.max_iter) break;
    const Matrix J = p.df(x);
    const Vector step = J.completeOrthogonalDecomposition().solve(-fx);
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      const Vector trial = x + t * step;
      if (!p.admissible(trial)) continue;
      const Vector ft = p.f(trial);
      if (ft.norm() < norm) {
        x = trial;
        fx = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw Error(ErrorCode::NoSignChange,
                  "no root of phi in the admissible set: line search stalled at |phi| = " +
                      fmt(norm));
    }
  }
  throw Error(ErrorCode::MaxIter, "damped Newton exceeded max_iter; |phi| = " + fmt(fx.norm()));
}

RootResult solve_root(const RootProblem& p, const SolverOptions& opts,
                      const std::optional<Vector>& warm, int d) {
  if (!(opts.tol_root > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol_root must be > 0");
  if (opts.max_iter <= 0) throw Error(ErrorCode::InvalidArgument, "max_iter must be > 0");
  if (d == 1) return solve_scalar(p, opts, warm);
  return solve_vector(p, opts, warm, d);
}

void fill_diagnostics(MeasureSolution& sol, const Matrix& jacobian) {
  sol.min_singular_value = min_singular_value(jacobian);
}

}  // namespace

std::string to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::QMMM:
      return "qmmm";
    case MeasureKind::MEMM:
      return "memm";
    case MeasureKind::VMMM_SC:
      return "vmmm_sc";
  }
  return "unknown";
}

Vector phi(const LevyTriplet& triplet, const Vector& lambda, double q) {
  check_lambda(triplet, lambda);
  require_in_domain(triplet, lambda, q);
  const Tilt tilt = PowerTilt{lambda, q};
  return triplet.b + triplet.c * lambda +
         integrate_first(triplet, [&](const Vector& x) { return tilt_eval(tilt, x); }, true);
}

Vector phi_e(const LevyTriplet& triplet, const Vector& lambda) {
  check_lambda(triplet, lambda);
  return triplet.b + triplet.c * lambda +
         integrate_first(triplet, [&](const Vector& x) { return std::exp(lambda.dot(x)); }, true);
}

Matrix phi_dlambda(const LevyTriplet& triplet, const Vector& lambda, double q) {
  check_lambda(triplet, lambda);
  require_in_domain(triplet, lambda, q);
  const Tilt tilt = PowerTilt{lambda, q};
  // ((q-1) lambda.x + 1)^{(2-q)/(q-1)} = Y^{2-q}
  return triplet.c + integrate_second(triplet, [&](const Vector& x) {
           return std::exp((2.0 - q) * log_tilt(tilt, x));
         });
}

Matrix phi_e_dlambda(const LevyTriplet& triplet, const Vector& lambda) {
  check_lambda(triplet, lambda);
  return triplet.c +
         integrate_second(triplet, [&](const Vector& x) { return std::exp(lambda.dot(x)); });
}

Vector martingale_residual(const LevyTriplet& triplet, const Vector& beta, const Tilt& tilt) {
  check_lambda(triplet, beta);
  return triplet.b + triplet.c * beta +
         integrate_first(triplet, [&](const Vector& x) { return tilt_eval(tilt, x); }, true);
}

MeasureSolution solve_qmmm(const LevyTriplet& triplet, double q, const SolverOptions& opts,
                           const std::optional<Vector>& warm_start) {
  const int d = triplet.dim();
  const LambdaDomain dom = lambda_domain(triplet.K, q);
  RootProblem p;
  p.f = [&](const Vector& l) { return phi(triplet, l, q); };
  p.df = [&](const Vector& l) { return phi_dlambda(triplet, l, q); };
  const double m = opts.domain_margin;
  p.admissible = [&dom, m](const Vector& l) {
    if (!dom.contains(l)) return false;
    for (const auto& n : dom.normals) {
      if (n.dot(l) + 1.0 <= m) return false;
    }
    return true;
  };
  if (d == 1) {
    p.lo = std::isfinite(dom.lo) ? dom.lo + m * std::abs(dom.lo) : -kInf;
    p.hi = std::isfinite(dom.hi) ? dom.hi - m * std::abs(dom.hi) : kInf;
  }
  const RootResult r = solve_root(p, opts, warm_start, d);

  MeasureSolution sol;
  sol.kind = MeasureKind::QMMM;
  sol.q = q;
  sol.lambda = r.x;
  sol.beta = r.x;
  sol.tilt = PowerTilt{r.x, q};
  sol.residual = r.fx;
  sol.iterations = r.iterations;
  sol.bracket_lo = r.bracket_lo;
  sol.bracket_hi = r.bracket_hi;
  sol.k_value = k_q(triplet, sol.beta, sol.tilt, q);
  sol.divergence_or_entropy = std::exp(triplet.T * sol.k_value);
  fill_diagnostics(sol, phi_dlambda(triplet, r.x, q));
  return sol;
}

MeasureSolution solve_memm(const LevyTriplet& triplet, const SolverOptions& opts,
                           const std::optional<Vector>& warm_start) {
  const int d = triplet.dim();
  // Keep exp(lambda.x) inside the double range on the support.
  const double radius = support_radius(triplet.K);
  const double bound = radius > 0.0 ? 700.0 / radius : kInf;
  RootProblem p;
  p.f = [&](const Vector& l) { return phi_e(triplet, l); };
  p.df = [&](const Vector& l) { return phi_e_dlambda(triplet, l); };
  p.admissible = [bound](const Vector& l) { return l.norm() < bound; };
  p.lo = -bound;
  p.hi = bound;
  const RootResult r = solve_root(p, opts, warm_start, d);

  MeasureSolution sol;
  sol.kind = MeasureKind::MEMM;
  sol.q = std::numeric_limits<double>::quiet_NaN();
  sol.lambda = r.x;
  sol.beta = r.x;
  sol.tilt = EsscherTilt{r.x};
  sol.residual = r.fx;
  sol.iterations = r.iterations;
  sol.bracket_lo = r.bracket_lo;
  sol.bracket_hi = r.bracket_hi;
  sol.k_value = entropy_rate(triplet, sol.beta, sol.tilt);
  sol.divergence_or_entropy = triplet.T * sol.k_value;
  fill_diagnostics(sol, phi_e_dlambda(triplet, r.x));
  return sol;
}

StructureCondition sc_lambda(const LevyTriplet& triplet) {
  StructureCondition sc;
  sc.gamma = drift_b0(triplet);
  sc.sigma = triplet.c + integrate_second(triplet, [](const Vector&) { return 1.0; });
  Eigen::JacobiSVD<Matrix> svd(sc.sigma, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  sc.lambda_sc = svd.solve(sc.gamma);
  const double mismatch = (sc.sigma * sc.lambda_sc - sc.gamma).norm();
  if (mismatch > 1e-10 * std::max(1.0, sc.gamma.norm())) {
    throw Error(ErrorCode::SingularSigma,
                "gamma is not in the range of sigma; the structure condition fails (residual " +
                    fmt(mismatch) + ")");
  }
  const JumpMeasure& K = triplet.K;
  sc.positivity = true;
  if (!K.empty()) {
    if (K.is_atoms()) {
      for (const auto& a : K.atom_list()) {
        if (a.weight > 0.0 && !(1.0 - sc.lambda_sc.dot(a.x) > 0.0)) sc.positivity = false;
      }
    } else {
      const auto [lo, hi] = K.support_hull();
      const double l = sc.lambda_sc[0];
      sc.positivity = (1.0 - l * lo > 0.0) && (1.0 - l * hi > 0.0);
    }
  }
  sc.khat_T = sc.lambda_sc.dot(sc.sigma * sc.lambda_sc) * triplet.T;
  return sc;
}

MeasureSolution solve_vmmm_sc(const LevyTriplet& triplet) {
  const StructureCondition sc = sc_lambda(triplet);
  if (!sc.positivity) {
    throw Error(ErrorCode::DomainError,
                "1 - lambda_sc.x is not strictly positive on supp K; the variance-optimal "
                "signed measure is not equivalent to P");
  }
  MeasureSolution sol;
  sol.kind = MeasureKind::VMMM_SC;
  sol.q = 2.0;
  sol.lambda = -sc.lambda_sc;
  sol.beta = sol.lambda;
  sol.tilt = PowerTilt{sol.lambda, 2.0};
  sol.residual = martingale_residual(triplet, sol.beta, sol.tilt);
  sol.k_value = k_q(triplet, sol.beta, sol.tilt, 2.0);
  sol.divergence_or_entropy = std::exp(triplet.T * sol.k_value);
  sol.min_singular_value = min_singular_value(sc.sigma);
  return sol;
}

VmmmCrosscheck vmmm_crosscheck(const LevyTriplet& triplet, const SolverOptions& opts,
                               std::vector<double> probes) {
  VmmmCrosscheck rep;
  rep.sc = sc_lambda(triplet);
  try {
    rep.qmmm = solve_qmmm(triplet, 2.0, opts);
  } catch (const Error& e) {
    rep.qmmm_error = e.what();
  }
  if (triplet.dim() == 1 && !triplet.K.empty()) {
    if (probes.empty()) {
      const auto [lo, hi] = triplet.K.support_hull();
      for (int i = 1; i <= 5; ++i) probes.push_back(lo + (hi - lo) * i / 6.0);
    }
    const double l_sc = -rep.sc.lambda_sc[0];
    for (double x : probes) {
      rep.probes.push_back(x);
      rep.y_sc.push_back(1.0 + l_sc * x);
      rep.y_qmmm.push_back(rep.qmmm ? 1.0 + rep.qmmm->lambda[0] * x
                                    : std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (!rep.sc.positivity) {
    rep.message = "SC holds but Z_hat_T not strictly positive; VMMM != VOSMM";
    return rep;
  }
  if (!rep.qmmm) {
    rep.message = "SC positivity holds but the q = 2 root was not found: " + rep.qmmm_error;
    return rep;
  }
  rep.lambda_gap = (rep.qmmm->lambda + rep.sc.lambda_sc).norm();
  rep.agree = rep.lambda_gap <= 1e-8;
  rep.message = rep.agree ? "lambda_2 = -lambda_sc (gap " + fmt(rep.lambda_gap) + ")"
                          : "q = 2 root and structure condition disagree (gap " +
                                fmt(rep.lambda_gap) + ")";
  return rep;
}

// ---------------------------------------------------------------------------
// Local optimality

namespace {

double legendre(int k, double t) {
  switch (k) {
    case 0:
      return 1.0;
    case 1:
      return t;
    case 2:
      return 0.5 * (3.0 * t * t - 1.0);
    default:
      return 0.5 * (5.0 * t * t * t - 3.0 * t);
  }
}

}  // namespace

LocalOptimalityResult local_optimality_check(const LevyTriplet& triplet, const Vector& beta,
                                             const TiltFunction& tilt, std::optional<double> q,
                                             int n_dirs, std::vector<double> epsilons,
                                             std::uint64_t seed, double slack) {
  const int d = triplet.dim();
  const JumpMeasure& K = triplet.K;
  auto objective = [&](const Vector& b, const TiltFunction& y) {
    return q ? k_q(triplet, b, y, *q) : entropy_rate(triplet, b, y);
  };
  LocalOptimalityResult res;
  res.base_value = objective(beta, tilt);
  res.worst_change = kInf;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss;

  const Matrix M = integrate_second(triplet, tilt);
  Eigen::JacobiSVD<Matrix> svd_c(triplet.c, Eigen::ComputeFullV);
  svd_c.setThreshold(1e-12);

  const bool atoms = K.is_atoms();
  double t_lo = 0.0, t_hi = 1.0;
  if (!atoms) std::tie(t_lo, t_hi) = K.support_hull();

  for (int dir = 0; dir < n_dirs; ++dir) {
    Vector phi0(d);
    for (int i = 0; i < d; ++i) phi0[i] = gauss(rng);

    // Psi0 = Y * r(x) with r random: per-atom values or a Legendre combination.
    std::vector<double> atom_r;
    std::array<double, 4> coef{};
    if (atoms) {
      for (std::size_t i = 0; i < K.atom_list().size(); ++i) atom_r.push_back(unif(rng));
    } else {
      for (double& c : coef) c = unif(rng);
    }
    auto r_of = [&, atoms](const Vector& x, std::size_t idx) {
      if (atoms) return atom_r[idx];
      const double t = 2.0 * (x[0] - t_lo) / (t_hi - t_lo) - 1.0;
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += coef[k] * legendre(k, t);
      return s;
    };

    Vector phi_dir;
    Vector s = Vector::Zero(d);
    std::function<double(const Vector&, std::size_t)> ratio;  // Psi / Y
    if (K.empty()) {
      // Only phi with c phi = 0 keeps the constraint.
      const Matrix V = svd_c.matrixV();
      const int rank = static_cast<int>(svd_c.rank());
      phi_dir = Vector::Zero(d);
      for (int j = rank; j < d; ++j) phi_dir += V.col(j) * V.col(j).dot(phi0);
      ratio = [](const Vector&, std::size_t) { return 0.0; };
    } else {
      // Correct Psi0 by -(x.s) Y so that c phi + \int Psi x dK = 0.
      phi_dir = phi0;
      Vector rhs = triplet.c * phi0;
      if (atoms) {
        for (std::size_t i = 0; i < K.atom_list().size(); ++i) {
          const auto& a = K.atom_list()[i];
          rhs += a.weight * tilt(a.x) * atom_r[i] * a.x;
        }
      } else {
        Vector x(1);
        const auto r = integrate_k_1d(K, [&](double t) {
          x[0] = t;
          return t * tilt(x) * r_of(x, 0);
        });
        rhs[0] += r.value;
      }
      s = M.completeOrthogonalDecomposition().solve(rhs);
      ratio = [r_of, s](const Vector& x, std::size_t idx) { return r_of(x, idx) - x.dot(s); };
    }

    // Normalize so that max(|phi|, sup |Psi / Y|) = 1.
    double scale = phi_dir.norm();
    if (atoms) {
      for (std::size_t i = 0; i < K.atom_list().size(); ++i) {
        if (K.atom_list()[i].weight > 0.0) {
          scale = std::max(scale, std::abs(ratio(K.atom_list()[i].x, i)));
        }
      }
    } else {
      Vector x(1);
      for (int i = 0; i <= 200; ++i) {
        x[0] = t_lo + (t_hi - t_lo) * i / 200.0;
        scale = std::max(scale, std::abs(ratio(x, 0)));
      }
    }
    if (scale == 0.0) {
      ++res.directions;
      continue;
    }
    phi_dir /= scale;

    for (double eps : epsilons) {
      const Vector b_eps = beta + eps * phi_dir;
      TiltFunction y_eps;
      if (atoms) {
        // Atoms are identified by position; look the index up on evaluation.
        y_eps = [&, eps, scale](const Vector& x) {
          const auto& list = K.atom_list();
          std::size_t idx = 0;
          for (; idx < list.size(); ++idx) {
            if (list[idx].x == x) break;
          }
          return tilt(x) * (1.0 + eps * ratio(x, idx) / scale);
        };
      } else {
        y_eps = [&, eps, scale](const Vector& x) {
          return tilt(x) * (1.0 + eps * ratio(x, 0) / scale);
        };
      }
      const double change = objective(b_eps, y_eps) - res.base_value;
      res.worst_change = std::min(res.worst_change, change);
      if (change < -slack && res.passed) {
        res.passed = false;
        res.failing_direction = dir;
        res.failing_epsilon = eps;
      }
    }
    ++res.directions;
  }
  if (!std::isfinite(res.worst_change)) res.worst_change = 0.0;
  return res;
}

LocalOptimalityResult local_optimality_check(const LevyTriplet& triplet,
                                             const MeasureSolution& sol, int n_dirs,
                                             std::vector<double> epsilons, std::uint64_t seed,
                                             double slack) {
  std::optional<double> q;
  if (sol.kind != MeasureKind::MEMM) q = sol.q;
  return local_optimality_check(triplet, sol.beta, as_function(sol.tilt), q, n_dirs,
                                std::move(epsilons), seed, slack);
}

}  // namespace qmmm
