#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pointcont/matrix.hpp"

namespace pct {

using Point3 = std::array<double, 3>;

struct PointCloud {
  std::vector<Point3> points;

  std::size_t size() const noexcept { return points.size(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  Point3& operator[](std::size_t i) { return points[i]; }
  bool operator==(const PointCloud&) const = default;
};

// Per-center neighbor table. neighbors is row-major M x k; all indices refer
// to the parent cloud.
struct PatchIndex {
  std::vector<std::size_t> centers;
  std::size_t k = 0;
  std::vector<std::size_t> neighbors;

  std::size_t center_count() const noexcept { return centers.size(); }
  std::size_t neighbor(std::size_t m, std::size_t j) const { return neighbors[m * k + j]; }
  std::span<const std::size_t> row(std::size_t m) const { return {neighbors.data() + m * k, k}; }
};

double squared_distance(const Point3& a, const Point3& b) noexcept;

// Farthest point sampling. The first pick is the point farthest from the
// centroid; every pick maximizes the minimum distance to the points already
// chosen. Ties go to the lexicographically smaller coordinate, then to the
// lower index. Throws std::invalid_argument unless 1 <= m_count <= N.
std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t m_count);

// k nearest points (self included) for every center, sorted by distance.
// Ties: lexicographically smaller coordinate first, then lower index.
// Throws std::invalid_argument if k == 0 or k > N or a center is out of range.
PatchIndex knn(const PointCloud& cloud, std::span<const std::size_t> centers, std::size_t k);

// out[m*k + j] = features[patch.neighbors[m][j]].
Matrix gather_patches(const Matrix& features, const PatchIndex& patch);

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows);
// dst[rows[i]] += src[i]
void scatter_add_rows(Matrix& dst, const Matrix& src, std::span<const std::size_t> rows);

// Centroid summed in lexicographic point order, so it does not depend on the
// order the points are stored in.
Point3 centroid(const PointCloud& cloud);

PointCloud select_points(const PointCloud& cloud, std::span<const std::size_t> idx);

}  // namespace pct
