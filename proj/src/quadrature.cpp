#include "qmmm/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "qmmm/error.hpp"

namespace qmmm {

namespace {

// Kronrod abscissae and weights (QUADPACK qk15).
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a;
  double b;
  double integral;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

double checked(const std::function<double(double)>& f, double x) {
  const double v = f(x);
  if (std::isnan(v)) {
    throw Error(ErrorCode::NonFinite, "integrand returned NaN");
  }
  return v;
}

Panel gauss_kronrod(const std::function<double(double)>& f, double a, double b, int& evals) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = checked(f, center);
  double resg = fc * kWg[3];
  double resk = fc * kWgk[7];
  double resabs = std::abs(resk);
  std::array<double, 7> f1{};
  std::array<double, 7> f2{};
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    f1[j] = checked(f, center - dx);
    f2[j] = checked(f, center + dx);
    const double sum = f1[j] + f2[j];
    resk += kWgk[j] * sum;
    resabs += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) {
      resg += kWg[j / 2] * sum;
    }
  }
  evals += 15;
  const double mean = 0.5 * resk;
  double resasc = kWgk[7] * std::abs(fc - mean);
  for (int j = 0; j < 7; ++j) {
    resasc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  }
  const double result = resk * half;
  resabs *= std::abs(half);
  resasc *= std::abs(half);
  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  if (resabs > std::numeric_limits<double>::min() / (50.0 * kEps)) {
    err = std::max(50.0 * kEps * resabs, err);
  }
  if (!std::isfinite(result)) {
    err = std::numeric_limits<double>::infinity();
  }
  return Panel{a, b, result, err};
}

}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    const QuadratureSettings& settings,
                                    std::span<const double> breakpoints) {
  QuadratureResult out;
  if (!(a < b)) {
    out.converged = true;
    return out;
  }
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw Error(ErrorCode::InvalidArgument, "quadrature requires a bounded interval");
  }

  std::vector<double> cuts{a};
  for (double p : breakpoints) {
    if (p > a && p < b) cuts.push_back(p);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<Panel> heap;
  const double width = b - a;
  const int target = std::max(1, settings.initial_panels);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i];
    const double hi = cuts[i + 1];
    const int pieces =
        std::max(1, static_cast<int>(std::ceil(target * (hi - lo) / width - 1e-12)));
    for (int k = 0; k < pieces; ++k) {
      const double pa = lo + (hi - lo) * k / pieces;
      const double pb = (k + 1 == pieces) ? hi : lo + (hi - lo) * (k + 1) / pieces;
      heap.push(gauss_kronrod(f, pa, pb, out.evaluations));
    }
  }

  auto totals = [&heap]() {
    // Recomputed from scratch to avoid drift in running sums.
    auto copy = heap;
    double value = 0.0;
    double error = 0.0;
    while (!copy.empty()) {
      value += copy.top().integral;
      error += copy.top().error;
      copy.pop();
    }
    return std::pair{value, error};
  };

  auto [value, error] = totals();
  double previous = std::numeric_limits<double>::quiet_NaN();
  int refinements = 0;
  double endpoint_growth = 0.0;
  while (true) {
    const bool agrees = refinements > 0 && std::abs(value - previous) <= settings.abs_tol;
    if (error <= settings.abs_tol && agrees) {
      out.converged = true;
      break;
    }
    if (static_cast<int>(heap.size()) >= settings.max_panels) {
      break;
    }
    // Bisect the panel with the largest error estimate.
    previous = value;
    const Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    Panel left = gauss_kronrod(f, worst.a, mid, out.evaluations);
    Panel right = gauss_kronrod(f, mid, worst.b, out.evaluations);
    const double refined = left.integral + right.integral;
    if ((worst.a == a || worst.b == b) && std::abs(refined) > std::abs(worst.integral)) {
      endpoint_growth = std::max(endpoint_growth, std::abs(refined));
    }
    heap.push(left);
    heap.push(right);
    ++refinements;
    value = value - worst.integral + refined;
    error = error - worst.error + left.error + right.error;
    if (refinements % 64 == 0) {
      std::tie(value, error) = totals();
    }
  }
  std::tie(value, error) = totals();
  out.value = value;
  out.abs_error = error;
  if (!out.converged) {
    const Panel& worst = heap.top();
    const bool at_endpoint = worst.a == a || worst.b == b;
    const bool tiny = (worst.b - worst.a) < 1e-9 * width;
    if (!std::isfinite(value) || (at_endpoint && tiny && endpoint_growth > 0.0)) {
      out.divergent = true;
      out.value = std::copysign(std::numeric_limits<double>::infinity(), value);
    }
  }
  return out;
}

}  // namespace qmmm
