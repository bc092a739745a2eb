#include "pointcont/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pct {

namespace {

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

void count_ops(const ClusterOptions& o, std::uint64_t n) {
  if (o.op_counter) *o.op_counter += n;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

std::vector<std::size_t> ClusterAssignment::labels() const {
  std::vector<std::size_t> out(original_size, 0);
  for (std::size_t pos = 0; pos < perm.size(); ++pos)
    if (perm[pos] < original_size) out[perm[pos]] = pos / cluster_size;
  return out;
}

double pairwise_dist(std::span<const double> q, std::span<const double> c, Metric metric) {
  if (q.size() != c.size()) throw std::invalid_argument("pairwise_dist: dimension mismatch");
  if (metric == Metric::euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = q[i] - c[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, nq = 0.0, nc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    dot += q[i] * c[i];
    nq += q[i] * q[i];
    nc += c[i] * c[i];
  }
  if (nq == 0.0 || nc == 0.0) return 1.0;
  return std::max(0.0, 1.0 - dot / (std::sqrt(nq) * std::sqrt(nc)));
}

namespace {

// Splits s contiguous rows of width d. `ids` names each row for tie-breaks
// and seeding. Returns local row positions; the first half is one cluster.
std::vector<std::size_t> split_block(const double* rows, std::span<const std::size_t> ids,
                                     std::size_t d, Metric metric, const ClusterOptions& options) {
  const std::size_t s = ids.size();
  if (s < 2 || s % 2 != 0)
    throw std::invalid_argument("binary_split: need an even number of items >= 2, got " +
                                std::to_string(s));
  const std::size_t half = s / 2;
  const auto row = [&](std::size_t i) { return std::span<const double>(rows + i * d, d); };

  // Initial division: first[i] marks membership of the first half. Every
  // pass below walks the rows in storage order.
  std::vector<char> first(s, 0);
  if (options.initial == InitialDivision::norm_rank) {
    std::vector<std::pair<double, std::size_t>> keyed(s);
    for (std::size_t i = 0; i < s; ++i) keyed[i] = {squared_norm(row(i)), i};
    count_ops(options, s * d);
    std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(half), keyed.end(),
                     [&](const auto& a, const auto& b) {
                       if (a.first != b.first) return a.first < b.first;
                       auto ra = row(a.second);
                       auto rb = row(b.second);
                       for (std::size_t c = 0; c < d; ++c)
                         if (ra[c] != rb[c]) return ra[c] < rb[c];
                       return ids[a.second] < ids[b.second];
                     });
    for (std::size_t i = 0; i < half; ++i) first[keyed[i].second] = 1;
  } else {
    // Seed mixes in the subset's first index so sibling splits differ.
    std::vector<std::size_t> order(s);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(options.seed ^ (0x9E3779B97F4A7C15ULL * (ids.front() + 1)) ^ s);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < half; ++i) first[order[i]] = 1;
  }

  std::vector<double> c1(d, 0.0), c2(d, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    auto r = row(i);
    double* c = first[i] ? c1.data() : c2.data();
    for (std::size_t k = 0; k < d; ++k) c[k] += r[k];
  }
  for (std::size_t c = 0; c < d; ++c) {
    c1[c] /= static_cast<double>(half);
    c2[c] /= static_cast<double>(half);
  }
  count_ops(options, s * d);

  // Hard assignment by distance ratio, ties broken by id. dist to c2 of
  // zero puts the item last (it belongs with c2); both zero gives ratio 1.
  std::vector<std::pair<double, std::size_t>> ratio(s);
  for (std::size_t i = 0; i < s; ++i) {
    auto q = row(i);
    const double d1 = pairwise_dist(q, c1, metric);
    const double d2 = pairwise_dist(q, c2, metric);
    if (d2 == 0.0)
      ratio[i] = {d1 == 0.0 ? 1.0 : std::numeric_limits<double>::infinity(), i};
    else
      ratio[i] = {d1 / d2, i};
  }
  count_ops(options, 2 * s * d);
  std::nth_element(ratio.begin(), ratio.begin() + static_cast<std::ptrdiff_t>(half), ratio.end(),
                   [&](const auto& a, const auto& b) {
                     return a.first != b.first ? a.first < b.first : ids[a.second] < ids[b.second];
                   });

  std::vector<std::size_t> out(s);
  for (std::size_t i = 0; i < s; ++i) out[i] = ratio[i].second;
  return out;
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> binary_split(
    const Matrix& queries, std::span<const std::size_t> subset, Metric metric,
    const ClusterOptions& options) {
  const std::size_t d = queries.cols();
  std::vector<double> block(subset.size() * d);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    auto r = queries.row(subset[i]);
    std::copy(r.begin(), r.end(), block.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const auto local = split_block(block.data(), subset, d, metric, options);
  const std::size_t half = subset.size() / 2;
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  out.first.reserve(half);
  out.second.reserve(half);
  for (std::size_t i = 0; i < half; ++i) out.first.push_back(subset[local[i]]);
  for (std::size_t i = half; i < subset.size(); ++i) out.second.push_back(subset[local[i]]);
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> binary_split(
    const Matrix& queries, Metric metric, const ClusterOptions& options) {
  std::vector<std::size_t> all(queries.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return binary_split(queries, all, metric, options);
}

std::size_t admissible_size(std::size_t rows, std::size_t cluster_size) {
  std::size_t s = cluster_size;
  while (s < rows) s *= 2;
  return s;
}

ClusterAssignment balanced_cluster(const Matrix& queries, std::size_t cluster_size, Metric metric,
                                   const ClusterOptions& options) {
  if (!is_pow2(cluster_size))
    throw std::invalid_argument("balanced_cluster: cluster_size must be a power of two, got " +
                                std::to_string(cluster_size));
  if (queries.rows() == 0) throw std::invalid_argument("balanced_cluster: no queries");

  const std::size_t s = queries.rows();
  const std::size_t padded = admissible_size(s, cluster_size);
  if (!is_pow2(padded / cluster_size))
    throw std::invalid_argument("balanced_cluster: cluster count is not a power of two");

  // Rows are kept grouped: after each level, group g occupies the g-th
  // contiguous block of `work`, and ids[r] is the padded index of row r.
  const std::size_t d = queries.cols();
  Matrix work(padded, d), next(padded, d);
  for (std::size_t i = 0; i < padded; ++i) {
    auto src = queries.row(std::min(i, s - 1));
    std::copy(src.begin(), src.end(), work.row(i).begin());
  }
  std::vector<std::size_t> ids(padded), next_ids(padded);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t g = padded; g > cluster_size; g /= 2) {
    for (std::size_t off = 0; off < padded; off += g) {
      const auto local = split_block(work.row(off).data(), std::span(ids).subspan(off, g), d, metric, options);
      for (std::size_t i = 0; i < g; ++i) {
        auto src = work.row(off + local[i]);
        std::copy(src.begin(), src.end(), next.row(off + i).begin());
        next_ids[off + i] = ids[off + local[i]];
      }
    }
    std::swap(work, next);
    std::swap(ids, next_ids);
  }

  ClusterAssignment out;
  out.clusters = padded / cluster_size;
  out.cluster_size = cluster_size;
  out.original_size = s;
  out.metric = metric;
  out.perm = std::move(ids);
  return out;
}

}  // namespace pct
