#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "pointcont/cluster.hpp"

using namespace pct;

namespace {

bool is_valid(const ClusterAssignment& a) {
  std::vector<std::size_t> sorted = a.perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != i) return false;
  return a.clusters * a.cluster_size == a.perm.size();
}

// Rows of `blobs` groups, each tightly packed around its own far-away center.
Matrix blob_data(std::size_t blobs, std::size_t per, std::size_t d, std::uint64_t seed) {
  Matrix noise = testing::random_matrix(blobs * per, d, seed, 0.05);
  Matrix centers = testing::random_matrix(blobs, d, seed + 1000, 10.0);
  for (std::size_t b = 0; b < blobs; ++b)
    for (std::size_t i = 0; i < per; ++i)
      for (std::size_t c = 0; c < d; ++c) noise(b * per + i, c) += centers(b, c);
  return noise;
}

double within_variance(const Matrix& x, const std::vector<std::size_t>& perm, std::size_t cs) {
  double total = 0;
  for (std::size_t base = 0; base < perm.size(); base += cs)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double m = 0;
      for (std::size_t p = 0; p < cs; ++p) m += x(perm[base + p], c);
      m /= static_cast<double>(cs);
      for (std::size_t p = 0; p < cs; ++p) total += (x(perm[base + p], c) - m) * (x(perm[base + p], c) - m);
    }
  return total;
}

}  // namespace

TEST_CASE("pairwise distance") {
  const std::vector<double> q{3, 4}, z{0, 0};
  CHECK(pairwise_dist(q, z, Metric::euclidean) == 5.0);
  CHECK(pairwise_dist(q, q, Metric::euclidean) == 0.0);
  CHECK(pairwise_dist(q, q, Metric::cosine) == doctest::Approx(0.0));
  CHECK(pairwise_dist(q, z, Metric::cosine) == 1.0);
  CHECK(pairwise_dist(z, z, Metric::cosine) == 1.0);
  const std::vector<double> o{-4, 3};
  CHECK(pairwise_dist(q, o, Metric::cosine) == doctest::Approx(1.0));
  const std::vector<double> bad{1};
  CHECK_THROWS_AS(pairwise_dist(q, bad, Metric::euclidean), std::invalid_argument);

  const Matrix r = testing::random_matrix(20, 7, 3);
  for (std::size_t i = 0; i + 1 < 20; ++i) {
    double s = 0, dot = 0, na = 0, nb = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      const double a = r(i, c), b = r(i + 1, c);
      s += (a - b) * (a - b);
      dot += a * b;
      na += a * a;
      nb += b * b;
    }
    CHECK(std::abs(pairwise_dist(r.row(i), r.row(i + 1), Metric::euclidean) - std::sqrt(s)) < 1e-12);
    CHECK(std::abs(pairwise_dist(r.row(i), r.row(i + 1), Metric::cosine) -
                   (1 - dot / std::sqrt(na * nb))) < 1e-12);
  }
}

TEST_CASE("binary split hand case") {
  Matrix q(4, 1);
  q(0, 0) = 10;
  q(1, 0) = 0;
  q(2, 0) = 11;
  q(3, 0) = 1;
  auto [a, b] = binary_split(q, Metric::euclidean);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == std::vector<std::size_t>{1, 3});
  CHECK(b == std::vector<std::size_t>{0, 2});
}

TEST_CASE("binary split of identical queries still halves") {
  Matrix q(6, 3, 2.5);
  auto [a, b] = binary_split(q, Metric::euclidean);
  CHECK(a == std::vector<std::size_t>{0, 1, 2});
  CHECK(b == std::vector<std::size_t>{3, 4, 5});
  Matrix odd(5, 2);
  CHECK_THROWS_AS(binary_split(odd, Metric::euclidean), std::invalid_argument);
  Matrix one(1, 2);
  CHECK_THROWS_AS(binary_split(one, Metric::euclidean), std::invalid_argument);
}

TEST_CASE("binary split recovers two separated blobs") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Matrix x = blob_data(2, 16, 5, seed);
    auto [a, b] = binary_split(x, Metric::euclidean);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const bool first_is_a = a.front() == 0;
    const auto& lo = first_is_a ? a : b;
    const auto& hi = first_is_a ? b : a;
    CHECK(lo.back() == 15);
    CHECK(hi.front() == 16);
  }
}

TEST_CASE("balanced clustering structure") {
  const Matrix x = testing::random_matrix(16, 4, 1);
  const auto id = balanced_cluster(x, 16, Metric::euclidean);
  CHECK(id.clusters == 1);
  std::vector<std::size_t> iota(16);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(id.perm == iota);

  const auto a = balanced_cluster(testing::random_matrix(64, 4, 2), 16, Metric::euclidean);
  CHECK(a.clusters == 4);
  CHECK(is_valid(a));
  const auto labels = a.labels();
  for (std::size_t c = 0; c < 4; ++c)
    CHECK(std::count(labels.begin(), labels.end(), c) == 16);

  CHECK_THROWS_AS(balanced_cluster(x, 6, Metric::euclidean), std::invalid_argument);
  CHECK_THROWS_AS(balanced_cluster(Matrix(0, 3), 4, Metric::euclidean), std::invalid_argument);
}

TEST_CASE("balanced clustering on random sizes and metrics") {
  Rng rng(77);
  std::uniform_int_distribution<std::size_t> logs(0, 6), dims(1, 8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t cs = std::size_t{1} << logs(rng) % 5;
    const std::size_t s = cs << logs(rng);
    const Metric m = t % 2 ? Metric::cosine : Metric::euclidean;
    const auto a = balanced_cluster(testing::random_matrix(s, dims(rng), t), cs, m);
    CHECK(is_valid(a));
    CHECK(a.cluster_size == cs);
    CHECK(a.clusters == s / cs);
  }
}

TEST_CASE("four planted blobs become the four clusters") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix x = blob_data(4, 16, 6, seed);
    const auto a = balanced_cluster(x, 16, Metric::euclidean);
    const auto labels = a.labels();
    for (std::size_t i = 0; i < 64; ++i) CHECK(labels[i] == labels[(i / 16) * 16]);
  }
}

TEST_CASE("padding with copies of the last row") {
  const Matrix x = testing::random_matrix(20, 3, 4);
  CHECK(admissible_size(20, 8) == 32);
  CHECK(admissible_size(3, 8) == 8);
  CHECK(admissible_size(16, 16) == 16);
  const auto a = balanced_cluster(x, 8, Metric::euclidean);
  CHECK(a.padded_size() == 32);
  CHECK(a.original_size == 20);
  CHECK(is_valid(a));
  std::size_t pads = 0;
  for (std::size_t p = 0; p < 32; ++p) {
    if (a.is_padding(p)) {
      ++pads;
      CHECK(a.source(p) == 19);
    } else {
      CHECK(a.source(p) == a.perm[p]);
    }
  }
  CHECK(pads == 12);
  CHECK(a.labels().size() == 20);
}

TEST_CASE("clustering commutes with row permutations") {
  const Matrix x = testing::random_matrix(64, 5, 9);
  const auto ref = balanced_cluster(x, 8, Metric::euclidean).labels();
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    std::vector<std::size_t> pi(64);
    std::iota(pi.begin(), pi.end(), 0);
    std::shuffle(pi.begin(), pi.end(), rng);
    Matrix px(64, 5);
    for (std::size_t i = 0; i < 64; ++i)
      std::copy(x.row(pi[i]).begin(), x.row(pi[i]).end(), px.row(i).begin());
    const auto labels = balanced_cluster(px, 8, Metric::euclidean).labels();
    for (std::size_t i = 0; i < 64; ++i) CHECK(labels[i] == ref[pi[i]]);
  }
}

TEST_CASE("clusters are tighter than a random balanced partition") {
  int wins = 0;
  Rng rng(5);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Matrix x = blob_data(4, 16, 3, 100 + t);
    const auto a = balanced_cluster(x, 16, Metric::euclidean);
    std::vector<std::size_t> random(64);
    std::iota(random.begin(), random.end(), 0);
    std::shuffle(random.begin(), random.end(), rng);
    if (within_variance(x, a.perm, 16) <= within_variance(x, random, 16)) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("seeded random initial division is reproducible") {
  const Matrix x = testing::random_matrix(128, 4, 12);
  ClusterOptions o{InitialDivision::seeded_random, 42};
  const auto a = balanced_cluster(x, 16, Metric::euclidean, o);
  const auto b = balanced_cluster(x, 16, Metric::euclidean, o);
  CHECK(a.perm == b.perm);
  CHECK(is_valid(a));
  o.seed = 43;
  CHECK(balanced_cluster(x, 16, Metric::euclidean, o).perm != a.perm);
}

TEST_CASE("cosine clustering tolerates zero rows") {
  Matrix x = testing::random_matrix(32, 3, 8);
  for (std::size_t c = 0; c < 3; ++c) {
    x(0, c) = 0;
    x(5, c) = 0;
  }
  const auto a = balanced_cluster(x, 8, Metric::cosine);
  CHECK(is_valid(a));
}

TEST_CASE("operation counter sees clustering work") {
  std::uint64_t ops = 0;
  ClusterOptions o;
  o.op_counter = &ops;
  balanced_cluster(testing::random_matrix(64, 4, 1), 16, Metric::euclidean, o);
  // Two levels, each touching all 64 rows of width 4 four times.
  CHECK(ops == 2 * 4 * 64 * 4);
}
