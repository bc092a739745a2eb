#include "pointcont/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pointcont/kernels.hpp"

namespace pct {

double squared_distance(const Point3& a, const Point3& b) noexcept {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

Point3 centroid(const PointCloud& cloud) {
  std::vector<Point3> sorted = cloud.points;
  std::sort(sorted.begin(), sorted.end());
  Point3 c{0.0, 0.0, 0.0};
  for (const auto& p : sorted)
    for (int a = 0; a < 3; ++a) c[a] += p[a];
  const double n = static_cast<double>(sorted.size());
  for (int a = 0; a < 3; ++a) c[a] /= n;
  return c;
}

namespace {

// true if candidate (dist, point, index) beats the incumbent for "largest".
bool farther(double d, const Point3& p, std::size_t i, double best_d, const Point3& best_p,
             std::size_t best_i) {
  if (d != best_d) return d > best_d;
  if (p != best_p) return p < best_p;
  return i < best_i;
}

}  // namespace

std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t m_count) {
  const std::size_t n = cloud.size();
  if (m_count == 0 || m_count > n)
    throw std::invalid_argument("fps: m_count must be in [1, " + std::to_string(n) + "], got " +
                                std::to_string(m_count));

  const Point3 c = centroid(cloud);
  std::size_t seed = 0;
  double seed_d = squared_distance(cloud[0], c);
  for (std::size_t i = 1; i < n; ++i) {
    const double d = squared_distance(cloud[i], c);
    if (farther(d, cloud[i], i, seed_d, cloud[seed], seed)) {
      seed = i;
      seed_d = d;
    }
  }

  std::vector<std::size_t> picked;
  picked.reserve(m_count);
  std::vector<char> taken(n, 0);
  std::vector<double> min_d(n);
  picked.push_back(seed);
  taken[seed] = 1;
  for (std::size_t i = 0; i < n; ++i) min_d[i] = squared_distance(cloud[i], cloud[seed]);

  while (picked.size() < m_count) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || farther(min_d[i], cloud[i], i, min_d[best], cloud[best], best)) best = i;
    }
    picked.push_back(best);
    taken[best] = 1;
    const Point3& q = cloud[best];
    for (std::size_t i = 0; i < n; ++i) min_d[i] = std::min(min_d[i], squared_distance(cloud[i], q));
  }
  return picked;
}

namespace {

void knn_row(const PointCloud& cloud, std::span<const double> flat, std::size_t center,
             std::size_t k, std::span<std::size_t> out, std::vector<double>& dist,
             std::vector<std::size_t>& order) {
  const std::size_t n = cloud.size();
  kernels::serial::sqdist3(flat.data() + 3 * center, n, flat, dist);
  auto closer = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    if (cloud[a] != cloud[b]) return cloud[a] < cloud[b];
    return a < b;
  };
  // Sorted list of the best k seen so far; most candidates lose against the
  // current worst entry and cost a single comparison.
  order.clear();
  for (std::size_t j = 0; j < n; ++j) {
    if (order.size() == k) {
      if (!closer(j, order.back())) continue;
      order.pop_back();
    }
    auto pos = std::upper_bound(order.begin(), order.end(), j, closer);
    order.insert(pos, j);
  }
  std::copy_n(order.begin(), k, out.begin());
}

}  // namespace

PatchIndex knn(const PointCloud& cloud, std::span<const std::size_t> centers, std::size_t k) {
  const std::size_t n = cloud.size();
  if (k == 0 || k > n)
    throw std::invalid_argument("knn: k must be in [1, " + std::to_string(n) + "], got " +
                                std::to_string(k));
  for (auto c : centers)
    if (c >= n) throw std::invalid_argument("knn: center index out of range");

  std::vector<double> flat(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) flat[3 * i + a] = cloud[i][a];

  PatchIndex patch;
  patch.centers.assign(centers.begin(), centers.end());
  patch.k = k;
  patch.neighbors.resize(centers.size() * k);
  const auto m_count = static_cast<std::ptrdiff_t>(centers.size());

  if (kernels::default_exec() == kernels::Exec::parallel) {
#pragma omp parallel
    {
      std::vector<double> dist(n);
      std::vector<std::size_t> order;
#pragma omp for schedule(static)
      for (std::ptrdiff_t m = 0; m < m_count; ++m) {
        const auto mu = static_cast<std::size_t>(m);
        knn_row(cloud, flat, centers[mu], k, {patch.neighbors.data() + mu * k, k}, dist, order);
      }
    }
  } else {
    std::vector<double> dist(n);
    std::vector<std::size_t> order;
    for (std::size_t m = 0; m < centers.size(); ++m)
      knn_row(cloud, flat, centers[m], k, {patch.neighbors.data() + m * k, k}, dist, order);
  }
  return patch;
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= src.rows()) throw std::logic_error("gather_rows: index out of range");
    std::copy_n(src.row(rows[i]).data(), src.cols(), out.row(i).data());
  }
  return out;
}

void scatter_add_rows(Matrix& dst, const Matrix& src, std::span<const std::size_t> rows) {
  if (src.rows() != rows.size() || src.cols() != dst.cols())
    throw std::logic_error("scatter_add_rows: shape mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= dst.rows()) throw std::logic_error("scatter_add_rows: index out of range");
    auto d = dst.row(rows[i]);
    auto s = src.row(i);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] += s[c];
  }
}

Matrix gather_patches(const Matrix& features, const PatchIndex& patch) {
  return gather_rows(features, patch.neighbors);
}

PointCloud select_points(const PointCloud& cloud, std::span<const std::size_t> idx) {
  PointCloud out;
  out.points.reserve(idx.size());
  for (auto i : idx) out.points.push_back(cloud.points.at(i));
  return out;
}

}  // namespace pct
