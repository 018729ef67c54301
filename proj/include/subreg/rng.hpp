#pragma once

#include "subreg/numerics.hpp"

#include <random>

namespace subreg {

// All sampled estimators draw from a std::mt19937_64 seeded by the caller, so
// identical seeds reproduce identical reports.  Loops run in a fixed order.
using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 20240901ULL;

inline Vector random_unit_sphere(Rng& rng, Index dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(dim);
  double norm2 = 0.0;
  do {
    for (Index i = 0; i < dim; ++i) v(i) = gauss(rng);
    norm2 = v.squaredNorm();
  } while (norm2 < 1e-24);
  return v / std::sqrt(norm2);
}

inline Vector random_in_ball(Rng& rng, Index dim, double radius) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(dim));
  return r * random_unit_sphere(rng, dim);
}

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix A(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) A(i, j) = scale * gauss(rng);
  return A;
}

}  // namespace subreg
