#pragma once

// Hierarchical balanced binary clustering of query vectors in feature space.
//
// One split: order the items (by squared L2 norm, then lexicographically by
// channel, then by index; or a seeded shuffle), take the first and second
// half as the initial division, compute the two centroids, compute each
// item's distance ratio r = dist(q, c1) / dist(q, c2), stable-sort by r and
// cut in the middle. Applying the split log2(L) times yields L clusters of
// equal size.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pointcont/matrix.hpp"
#include "pointcont/param_store.hpp"

namespace pct {

enum class Metric { euclidean, cosine };

enum class InitialDivision { norm_rank, seeded_random };

struct ClusterOptions {
  InitialDivision initial = InitialDivision::norm_rank;
  std::uint64_t seed = 0;
  // When set, scalar operations spent on clustering are added here.
  std::uint64_t* op_counter = nullptr;
};

struct ClusterAssignment {
  // Permutation of 0..padded_size()-1. Entries >= original_size are padding
  // rows, copies of row original_size-1.
  std::vector<std::size_t> perm;
  std::size_t clusters = 1;
  std::size_t cluster_size = 0;
  std::size_t original_size = 0;
  Metric metric = Metric::euclidean;

  std::size_t padded_size() const noexcept { return perm.size(); }
  std::span<const std::size_t> cluster(std::size_t c) const {
    return {perm.data() + c * cluster_size, cluster_size};
  }
  // Row of the unpadded input that feeds position `pos` of perm.
  std::size_t source(std::size_t pos) const noexcept {
    return perm[pos] < original_size ? perm[pos] : original_size - 1;
  }
  bool is_padding(std::size_t pos) const noexcept { return perm[pos] >= original_size; }
  // Cluster id of every unpadded row.
  std::vector<std::size_t> labels() const;
};

// Euclidean: |q - c|. Cosine: 1 - cos(q, c) clamped to >= 0; a zero vector
// is at dissimilarity 1 from everything.
double pairwise_dist(std::span<const double> q, std::span<const double> c, Metric metric);

// Splits `subset` (row indices into queries, even length >= 2) into two
// halves of equal size, each in ascending index order. Throws
// std::invalid_argument for odd sizes.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> binary_split(
    const Matrix& queries, std::span<const std::size_t> subset, Metric metric,
    const ClusterOptions& options = {});
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> binary_split(
    const Matrix& queries, Metric metric, const ClusterOptions& options = {});

// Smallest cluster_size * 2^n that is >= rows.
std::size_t admissible_size(std::size_t rows, std::size_t cluster_size);

// Pads to admissible_size with copies of the last row, then splits
// recursively down to clusters of cluster_size. cluster_size must be a power
// of two (std::invalid_argument otherwise).
ClusterAssignment balanced_cluster(const Matrix& queries, std::size_t cluster_size, Metric metric,
                                   const ClusterOptions& options = {});

}  // namespace pct
