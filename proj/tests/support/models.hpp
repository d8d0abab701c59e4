#pragma once

#include <memory>
#include <vector>

#include "qmmm/levy_model.hpp"

namespace qmmm::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Matrix scalar_matrix(double c) { return Matrix::Constant(1, 1, c); }

/// b = -0.02, c = 0.04, K = 0.5 * Uniform(-0.5, 0.5), T = 1.
inline LevyTriplet ref1() {
  LevyTriplet t;
  t.b = vec({-0.02});
  t.c = scalar_matrix(0.04);
  t.K = JumpMeasure::density(Density1D(density::Uniform{-0.5, 0.5, 0.5}));
  t.T = 1.0;
  return t;
}

inline LevyTriplet pure_diffusion(double b, double c, double T = 1.0) {
  LevyTriplet t;
  t.b = vec({b});
  t.c = scalar_matrix(c);
  t.K = JumpMeasure::none(1);
  t.T = T;
  return t;
}

inline LevyTriplet atomic_1d(double b, double c, std::vector<std::pair<double, double>> atoms,
                             double T = 1.0) {
  LevyTriplet t;
  t.b = vec({b});
  t.c = scalar_matrix(c);
  std::vector<Atom> list;
  for (auto [x, w] : atoms) list.push_back(Atom{vec({x}), w});
  t.K = JumpMeasure::atoms(std::move(list), 1);
  t.T = T;
  return t;
}

}  // namespace qmmm::testing
