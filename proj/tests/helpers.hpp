#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pointcont/geometry.hpp"
#include "pointcont/matrix.hpp"
#include "pointcont/param_store.hpp"

namespace testing {

inline pct::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed,
                                 double sd = 1.0) {
  pct::Rng rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  pct::Matrix m(r, c);
  for (double& v : m.values()) v = g(rng);
  return m;
}

inline pct::PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  pct::Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  pct::PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

inline double max_abs_diff(const pct::Matrix& a, const pct::Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

inline bool bitwise_equal(const pct::Matrix& a, const pct::Matrix& b) {
  if (!pct::same_shape(a, b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a.values()[i]) != std::bit_cast<std::uint64_t>(b.values()[i]))
      return false;
  return true;
}

}  // namespace testing
