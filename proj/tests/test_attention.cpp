#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pointcont/attention.hpp"

using namespace pct;

namespace {

Matrix scalar_oracle(const Matrix& q, const Matrix& k, const Matrix& v) {
  const std::size_t s = q.rows(), h = q.cols();
  Matrix out(s, h);
  for (std::size_t i = 0; i < s; ++i) {
    std::vector<double> a(s);
    double mx = -1e300, sum = 0;
    for (std::size_t j = 0; j < s; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < h; ++c) dot += q(i, c) * k(j, c);
      a[j] = dot / std::sqrt(double(h));
      mx = std::max(mx, a[j]);
    }
    for (double& e : a) sum += (e = std::exp(e - mx));
    for (std::size_t j = 0; j < s; ++j)
      for (std::size_t c = 0; c < h; ++c) out(i, c) += a[j] / sum * v(j, c);
  }
  return out;
}

// Pairwise form: the logit for (i, j, c) keeps the query term.
Matrix vector_oracle(const Matrix& q, const Matrix& k, const Matrix& v) {
  const std::size_t s = q.rows(), h = q.cols();
  Matrix out(s, h);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t c = 0; c < h; ++c) {
      double sum = 0, acc = 0;
      for (std::size_t j = 0; j < s; ++j) {
        const double e = std::exp((q(i, c) - k(j, c)) / std::sqrt(double(h)));
        sum += e;
        acc += e * v(j, c);
      }
      out(i, c) = acc / sum;
    }
  return out;
}

Matrix matmul(const Matrix& a, const Tensor& w) {
  const std::size_t out = w.shape[1];
  Matrix y(a.rows(), out);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < out; ++j)
      for (std::size_t p = 0; p < a.cols(); ++p) y(i, j) += a(i, p) * w.value[p * out + j];
  return y;
}

AttentionConfig bare(std::size_t heads, AttentionType t, std::size_t cs) {
  AttentionConfig c;
  c.heads = heads;
  c.type = t;
  c.cluster_size = cs;
  c.pre_norm = false;
  c.residual = false;
  c.feed_forward = false;
  return c;
}

}  // namespace

TEST_CASE("scalar attention matches the nested-loop oracle") {
  for (std::size_t s : {1, 2, 7, 16}) {
    const Matrix q = testing::random_matrix(s, 4, s), k = testing::random_matrix(s, 4, s + 1),
                 v = testing::random_matrix(s, 4, s + 2);
    Matrix w;
    const Matrix y = scalar_attention(q, k, v, &w);
    CHECK(testing::max_abs_diff(y, scalar_oracle(q, k, v)) < 1e-12);
    for (std::size_t i = 0; i < s; ++i) {
      double sum = 0;
      for (double e : w.row(i)) sum += e;
      CHECK(std::abs(sum - 1) < 1e-6);
    }
  }
  const Matrix v = testing::random_matrix(5, 3, 1);
  const Matrix y = scalar_attention(Matrix(5, 3), testing::random_matrix(5, 3, 2), v);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0;
    for (std::size_t j = 0; j < 5; ++j) mean += v(j, c) / 5;
    CHECK(y(3, c) == doctest::Approx(mean));
  }
}

TEST_CASE("vector attention matches the pairwise q - k formula") {
  for (std::size_t s : {1, 2, 8, 16}) {
    const Matrix q = testing::random_matrix(s, 2, 10 + s), k = testing::random_matrix(s, 2, 20 + s),
                 v = testing::random_matrix(s, 2, 30 + s);
    Matrix w;
    const Matrix y = vector_attention(q, k, v, &w);
    CHECK(testing::max_abs_diff(y, vector_oracle(q, k, v)) < 1e-12);
    for (std::size_t c = 0; c < 2; ++c) {
      double sum = 0;
      for (std::size_t j = 0; j < s; ++j) sum += w(j, c);
      CHECK(std::abs(sum - 1) < 1e-6);
    }
    if (s == 1) CHECK(testing::bitwise_equal(y, v));
  }
  Matrix q(4, 2, 0.7);
  const Matrix v = testing::random_matrix(4, 2, 3);
  const Matrix y = vector_attention(q, q, v);
  CHECK(y(0, 1) == doctest::Approx((v(0, 1) + v(1, 1) + v(2, 1) + v(3, 1)) / 4));
}

TEST_CASE("vector attention query gradient is zero") {
  const Matrix q = testing::random_matrix(8, 4, 1), k = testing::random_matrix(8, 4, 2),
               v = testing::random_matrix(8, 4, 3);
  Matrix w;
  vector_attention(q, k, v, &w);
  const auto g = vector_attention_backward(q, k, v, w, testing::random_matrix(8, 4, 4));
  for (double e : g.dq.values()) CHECK(e == 0.0);
}

TEST_CASE("projection hand case") {
  ParamStore s;
  Rng rng(1);
  Tensor& a = s.create("a", {2, 2}, Init::zeros, rng);
  Tensor& id = s.create("id", {2, 2}, Init::zeros, rng);
  a.value = {0, 1, 1, 0};
  id.value = {1, 0, 0, 1};
  Matrix x(1, 2);
  x(0, 0) = 1;
  x(0, 1) = 2;
  const auto p = project_qkv(x, a, id, a);
  CHECK(p.q(0, 0) == 2);
  CHECK(p.q(0, 1) == 1);
  CHECK(testing::bitwise_equal(p.k, x));
  Tensor& wrong = s.create("w", {3, 2}, Init::zeros, rng);
  CHECK_THROWS_AS(project_qkv(x, wrong, id, a), std::invalid_argument);
}

TEST_CASE("one cluster over everything equals global scalar attention") {
  for (std::size_t cs : {4, 8, 16}) {
    ParamStore store;
    Rng rng(cs);
    ContentAttention att(store, "a", 6, bare(1, AttentionType::scalar, cs), rng);
    const Matrix x = testing::random_matrix(cs, 6, cs * 3);
    const Matrix y = att.forward(x, 1, Mode{});
    const Matrix q = matmul(x, att.wq().weight()), k = matmul(x, att.wk().weight()),
                 v = matmul(x, att.wv().weight());
    const Matrix ref = matmul(scalar_oracle(q, k, v), att.wo().weight());
    CHECK(testing::max_abs_diff(y, ref) < 1e-10);
  }
}

TEST_CASE("zero output projection leaves the residual input") {
  ParamStore store;
  Rng rng(2);
  AttentionConfig cfg;
  cfg.heads = 2;
  cfg.cluster_size = 4;
  cfg.feed_forward = false;
  ContentAttention att(store, "a", 8, cfg, rng);
  for (double& w : att.wo().weight().value) w = 0;
  const Matrix x = testing::random_matrix(16, 8, 1);
  CHECK(testing::bitwise_equal(att.forward(x, 1, Mode{}), x));
}

TEST_CASE("attention none passes values straight to the output projection") {
  ParamStore store;
  Rng rng(2);
  ContentAttention att(store, "a", 4, bare(2, AttentionType::none, 4), rng);
  const Matrix x = testing::random_matrix(8, 4, 1);
  const Matrix ref = matmul(matmul(x, att.wv().weight()), att.wo().weight());
  CHECK(testing::max_abs_diff(att.forward(x, 1, Mode{}), ref) < 1e-12);
  CHECK_THROWS_AS(att.assignment(0, 0), std::out_of_range);
}

TEST_CASE("no attention weight crosses separated blobs") {
  for (AttentionType t : {AttentionType::scalar, AttentionType::vector}) {
    ParamStore store;
    Rng rng(4);
    ContentAttention att(store, "a", 4, bare(1, t, 8), rng);
    Matrix x = testing::random_matrix(16, 4, 5, 0.1);
    for (std::size_t i = 8; i < 16; ++i)
      for (std::size_t c = 0; c < 4; ++c) x(i, c) += 50.0;
    const Matrix y0 = att.forward(x, 1, Mode{});
    const auto labels = att.assignment(0, 0).labels();
    for (std::size_t i = 1; i < 8; ++i) CHECK(labels[i] == labels[0]);
    Matrix x2 = x;
    for (std::size_t i = 8; i < 16; ++i) x2(i, 1) += 0.3 * double(i);
    const Matrix y1 = att.forward(x2, 1, Mode{});
    // Reordering inside the cluster may change summation order, nothing more.
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(y0(i, c) - y1(i, c)) < 1e-13);
    bool other_moved = false;
    for (std::size_t i = 8; i < 16; ++i) other_moved |= std::abs(y0(i, 0) - y1(i, 0)) > 1e-6;
    CHECK(other_moved);
  }
}

TEST_CASE("each head clusters its own query slice") {
  ParamStore store;
  Rng rng(6);
  ContentAttention att(store, "a", 8, bare(2, AttentionType::vector, 4), rng);
  const Matrix x = testing::random_matrix(32, 8, 7);
  att.forward(x, 2, Mode{});
  const auto h0 = att.assignment(0, 0).perm;
  const auto g1 = att.assignment(1, 0).perm;
  const auto h1 = att.assignment(0, 1).perm;
  auto& wq = att.wq().weight().value;
  for (std::size_t p = 0; p < 8; ++p)
    for (std::size_t c = 4; c < 8; ++c) wq[p * 8 + c] = -wq[p * 8 + c] * 3.0 + 0.1;
  att.forward(x, 2, Mode{});
  CHECK(att.assignment(0, 0).perm == h0);
  CHECK(att.assignment(1, 0).perm == g1);
  CHECK(att.assignment(0, 1).perm != h1);
}

TEST_CASE("groups are independent") {
  ParamStore store;
  Rng rng(8);
  AttentionConfig cfg;
  cfg.heads = 2;
  cfg.cluster_size = 4;
  ContentAttention att(store, "a", 4, cfg, rng);
  const Matrix a = testing::random_matrix(8, 4, 1), b = testing::random_matrix(8, 4, 2);
  Matrix both(16, 4);
  for (std::size_t i = 0; i < 8; ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), both.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(), both.row(8 + i).begin());
  }
  const Matrix ya = att.forward(a, 1, Mode{});
  const Matrix yab = att.forward(both, 2, Mode{});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t c = 0; c < 4; ++c) CHECK(ya(i, c) == yab(i, c));
}

TEST_CASE("heads must divide channels") {
  ParamStore store;
  Rng rng(1);
  AttentionConfig cfg;
  cfg.heads = 3;
  CHECK_THROWS_AS(ContentAttention(store, "a", 8, cfg, rng), std::invalid_argument);
  cfg.heads = 2;
  cfg.cluster_size = 6;
  CHECK_THROWS_AS(ContentAttention(store, "b", 8, cfg, rng), std::invalid_argument);
}

TEST_CASE("mac counts") {
  CHECK(mac_count(MsaVariant::cont, 64, 16, 64) == 1'056'768);
  CHECK(mac_count(MsaVariant::local, 64, 16, 64) == 18'874'368);
  CHECK(mac_count(MsaVariant::local, 1024, 16, 64) == 301'989'888);
  CHECK(mac_count(MsaVariant::pointtrans, 1024, 16, 64) == 270'532'608);
  CHECK(mac_count(MsaVariant::cont, 1024, 16, 64) == 16'908'288);
  const double ratio = double(mac_count(MsaVariant::local, 1024, 16, 64)) /
                       double(mac_count(MsaVariant::cont, 1024, 16, 64));
  CHECK(std::abs(ratio - 17.86) < 0.01);
  for (auto v : {MsaVariant::local, MsaVariant::pointtrans, MsaVariant::cont}) {
    CHECK(mac_count(v, 0, 16, 64) == 0);
    CHECK(parse_msa_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_msa_variant("global"), std::invalid_argument);
}
