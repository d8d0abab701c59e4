// Brute-force minimization of k_q over the martingale constraint for atomic K.
// Deliberately shares nothing with the root-finding path: it works directly in
// the (beta, y_1..y_n) coordinates with an augmented Lagrangian.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qmmm/error.hpp"
#include "qmmm/solvers.hpp"

namespace qmmm {

namespace {

struct AtomProblem {
  int d = 1;
  int n = 0;
  double q = 2.0;
  Matrix c;
  Vector w;
  Matrix X;   // d x n, atom locations
  Vector a0;  // b - sum w_i h(x_i)
  Matrix J;   // d x (d + n), constraint Jacobian [c, X diag(w)]

  Vector constraint(const Vector& z) const { return a0 + J * z; }

  double objective(const Vector& z) const {
    const Vector beta = z.head(d);
    double v = 0.5 * q * (q - 1.0) * beta.dot(c * beta);
    for (int i = 0; i < n; ++i) v += w[i] * g_q(z[d + i], q);
    return v;
  }

  Vector objective_grad(const Vector& z) const {
    Vector g(d + n);
    g.head(d) = q * (q - 1.0) * (c * z.head(d));
    for (int i = 0; i < n; ++i) g[d + i] = w[i] * q * (std::pow(z[d + i], q - 1.0) - 1.0);
    return g;
  }

  Matrix objective_hess(const Vector& z) const {
    Matrix H = Matrix::Zero(d + n, d + n);
    H.topLeftCorner(d, d) = q * (q - 1.0) * c;
    for (int i = 0; i < n; ++i) {
      H(d + i, d + i) = w[i] * q * (q - 1.0) * std::pow(z[d + i], q - 2.0);
    }
    return H;
  }
};

AtomProblem make_problem(const LevyTriplet& triplet, double q) {
  const JumpMeasure& K = triplet.K;
  if (!K.is_atoms()) {
    throw Error(ErrorCode::InvalidArgument, "the oracle needs an atomic jump measure");
  }
  AtomProblem p;
  p.d = triplet.dim();
  p.q = q;
  p.c = triplet.c;
  std::vector<const Atom*> used;
  for (const auto& a : K.atom_list()) {
    if (a.weight > 0.0) used.push_back(&a);
  }
  p.n = static_cast<int>(used.size());
  if (p.n > kOracleAtomLimit) {
    throw Error(ErrorCode::AtomLimit, "the oracle handles at most " +
                                          std::to_string(kOracleAtomLimit) + " atoms");
  }
  p.w.resize(p.n);
  p.X.resize(p.d, p.n);
  p.a0 = triplet.b;
  for (int i = 0; i < p.n; ++i) {
    p.w[i] = used[i]->weight;
    p.X.col(i) = used[i]->x;
    p.a0 -= used[i]->weight * truncate(used[i]->x);
  }
  p.J.resize(p.d, p.d + p.n);
  p.J.leftCols(p.d) = p.c;
  for (int i = 0; i < p.n; ++i) p.J.col(p.d + i) = p.w[i] * p.X.col(i);
  return p;
}

struct AlState {
  Vector z;
  Vector mu;
};

/// Newton minimization of L(z) = f(z) + mu'A(z) + rho/2 |A(z)|^2 over y >= floor.
void minimize_inner(const AtomProblem& p, AlState& s, double rho, double tol, double floor) {
  auto lagrangian = [&](const Vector& z) {
    const Vector A = p.constraint(z);
    return p.objective(z) + s.mu.dot(A) + 0.5 * rho * A.squaredNorm();
  };
  for (int it = 0; it < 200; ++it) {
    const Vector A = p.constraint(s.z);
    const Vector g = p.objective_grad(s.z) + p.J.transpose() * (s.mu + rho * A);
    if (g.lpNorm<Eigen::Infinity>() <= tol) return;
    Matrix H = p.objective_hess(s.z) + rho * p.J.transpose() * p.J;
    const double ridge = 1e-14 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    H.diagonal().array() += ridge;
    const Vector step = H.ldlt().solve(-g);
    if (!step.allFinite()) return;
    const double decrement = -g.dot(step);
    if (decrement <= 1e-24) return;

    // Fraction to the boundary y = floor.
    double alpha = 1.0;
    for (int i = 0; i < p.n; ++i) {
      const double yi = s.z[p.d + i];
      const double si = step[p.d + i];
      if (si < 0.0) alpha = std::min(alpha, 0.99 * (yi - floor) / -si);
    }
    const double L0 = lagrangian(s.z);
    bool moved = false;
    for (int h = 0; h < 60; ++h, alpha *= 0.5) {
      const Vector trial = s.z + alpha * step;
      const double Lt = lagrangian(trial);
      if (Lt < L0 && Lt <= L0 - 1e-4 * alpha * decrement) {
        s.z = trial;
        moved = true;
        break;
      }
    }
    if (!moved) return;
  }
}

struct StartResult {
  Vector z;
  double k = 0.0;
  double violation = 0.0;
};

StartResult run_start(const AtomProblem& p, Vector z0, const OracleOptions& opts) {
  AlState s{std::move(z0), Vector::Zero(p.d)};
  const double feasible = 1e-12 * std::max(1.0, p.a0.lpNorm<Eigen::Infinity>());
  for (double rho : {1e2, 1e4, 1e6}) {
    double previous = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < 40; ++outer) {
      minimize_inner(p, s, rho, opts.stationarity_tol, opts.y_floor);
      const Vector A = p.constraint(s.z);
      const double violation = A.lpNorm<Eigen::Infinity>();
      // Stop on feasibility or once multiplier updates no longer help.
      if (violation <= feasible || violation > 0.5 * previous) break;
      previous = violation;
      s.mu += rho * A;
    }
  }
  minimize_inner(p, s, 1e6, opts.stationarity_tol, opts.y_floor);
  StartResult r;
  r.z = s.z;
  r.k = p.objective(s.z);
  r.violation = p.constraint(s.z).lpNorm<Eigen::Infinity>();
  return r;
}

}  // namespace

OracleResult oracle_pq_atoms(const LevyTriplet& triplet, double q, const OracleOptions& opts) {
  if (!(q > 1.0) || !std::isfinite(q)) {
    throw Error(ErrorCode::InvalidArgument, "the oracle handles q > 1");
  }
  const AtomProblem p = make_problem(triplet, q);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 0.1);

  std::vector<StartResult> results;
  const int starts = std::max(1, opts.starts);
  for (int k = 0; k < starts; ++k) {
    Vector z(p.d + p.n);
    for (int j = 0; j < p.d; ++j) z[j] = k == 0 ? 0.0 : gauss(rng);
    for (int i = 0; i < p.n; ++i) z[p.d + i] = k == 0 ? 1.0 : std::exp(unif(rng));
    results.push_back(run_start(p, std::move(z), opts));
  }

  // Feasible starts rank by k; otherwise by constraint violation.
  const auto best = std::min_element(
      results.begin(), results.end(), [](const StartResult& a, const StartResult& b) {
        const bool fa = a.violation <= 1e-7;
        const bool fb = b.violation <= 1e-7;
        if (fa != fb) return fa;
        return fa ? a.k < b.k : a.violation < b.violation;
      });
  if (best->violation > 1e-7) {
    throw Error(ErrorCode::Infeasible,
                "the martingale constraint cannot be met with y > 0 (violation " +
                    std::to_string(best->violation) + ")");
  }
  for (int i = 0; i < p.n; ++i) {
    if (best->z[p.d + i] <= 10.0 * opts.y_floor) {
      throw Error(ErrorCode::Infeasible,
                  "the infimum is approached only as some y_i -> 0; no equivalent "
                  "martingale measure attains it");
    }
  }
  OracleResult out;
  out.beta = best->z.head(p.d);
  out.y.assign(best->z.data() + p.d, best->z.data() + p.d + p.n);
  out.k = best->k;
  out.constraint_violation = best->violation;
  out.starts = starts;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : results) {
    if (r.violation > 1e-7) continue;
    lo = std::min(lo, r.k);
    hi = std::max(hi, r.k);
  }
  out.start_spread = hi - lo;
  return out;
}

std::optional<std::pair<Vector, std::vector<double>>> project_feasible_atoms(
    const LevyTriplet& triplet, const Vector& beta, const std::vector<double>& y) {
  const AtomProblem p = make_problem(triplet, 2.0);
  if (beta.size() != p.d || static_cast<int>(y.size()) != p.n) {
    throw Error(ErrorCode::InvalidArgument, "beta/y sizes do not match the atomic triplet");
  }
  Vector z(p.d + p.n);
  z.head(p.d) = beta;
  for (int i = 0; i < p.n; ++i) z[p.d + i] = y[i];
  const Vector A = p.constraint(z);
  const Matrix JJt = p.J * p.J.transpose();
  z -= p.J.transpose() * JJt.completeOrthogonalDecomposition().solve(A);
  if (p.constraint(z).lpNorm<Eigen::Infinity>() > 1e-10 * std::max(1.0, A.norm())) {
    return std::nullopt;
  }
  std::vector<double> y_out(p.n);
  for (int i = 0; i < p.n; ++i) {
    if (!(z[p.d + i] > 0.0)) return std::nullopt;
    y_out[i] = z[p.d + i];
  }
  return std::make_pair(Vector(z.head(p.d)), std::move(y_out));
}

}  // namespace qmmm
