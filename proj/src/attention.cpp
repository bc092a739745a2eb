#include "pointcont/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pointcont/kernels.hpp"

namespace pct {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

// ---------------------------------------------------------------- per-cluster kernels

Matrix scalar_attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights) {
  require(same_shape(q, k) && same_shape(k, v), "scalar_attention: shape mismatch");
  const std::size_t s = q.rows();
  const std::size_t h = q.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  Matrix p(s, s);
  for (std::size_t i = 0; i < s; ++i) {
    auto qi = q.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s; ++j) {
      auto kj = k.row(j);
      double dot = 0.0;
      for (std::size_t c = 0; c < h; ++c) dot += qi[c] * kj[c];
      p(i, j) = dot * scale;
      mx = std::max(mx, p(i, j));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      p(i, j) = std::exp(p(i, j) - mx);
      sum += p(i, j);
    }
    for (std::size_t j = 0; j < s; ++j) p(i, j) /= sum;
  }
  Matrix out(s, h);
  for (std::size_t i = 0; i < s; ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < s; ++j) {
      const double w = p(i, j);
      auto vj = v.row(j);
      for (std::size_t c = 0; c < h; ++c) o[c] += w * vj[c];
    }
  }
  if (weights) *weights = std::move(p);
  return out;
}

AttentionGrads scalar_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                         const Matrix& p, const Matrix& dout) {
  const std::size_t s = q.rows();
  const std::size_t h = q.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  AttentionGrads g{Matrix(s, h), Matrix(s, h), Matrix(s, h)};
  Matrix ds(s, s);
  for (std::size_t i = 0; i < s; ++i) {
    auto go = dout.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      auto vj = v.row(j);
      double dp = 0.0;
      for (std::size_t c = 0; c < h; ++c) dp += go[c] * vj[c];
      ds(i, j) = dp;
      dot += p(i, j) * dp;
      auto dvj = g.dv.row(j);
      for (std::size_t c = 0; c < h; ++c) dvj[c] += p(i, j) * go[c];
    }
    for (std::size_t j = 0; j < s; ++j) ds(i, j) = p(i, j) * (ds(i, j) - dot) * scale;
  }
  for (std::size_t i = 0; i < s; ++i) {
    auto dqi = g.dq.row(i);
    auto qi = q.row(i);
    for (std::size_t j = 0; j < s; ++j) {
      const double w = ds(i, j);
      auto kj = k.row(j);
      auto dkj = g.dk.row(j);
      for (std::size_t c = 0; c < h; ++c) {
        dqi[c] += w * kj[c];
        dkj[c] += w * qi[c];
      }
    }
  }
  return g;
}

Matrix vector_attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights) {
  require(same_shape(q, k) && same_shape(k, v), "vector_attention: shape mismatch");
  const std::size_t s = k.rows();
  const std::size_t h = k.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  Matrix w(s, h);
  std::vector<double> shared(h, 0.0);
  for (std::size_t c = 0; c < h; ++c) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s; ++j) mx = std::max(mx, -k(j, c) * scale);
    double sum = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      w(j, c) = std::exp(-k(j, c) * scale - mx);
      sum += w(j, c);
    }
    for (std::size_t j = 0; j < s; ++j) {
      w(j, c) /= sum;
      shared[c] += w(j, c) * v(j, c);
    }
  }
  Matrix out(q.rows(), h);
  for (std::size_t i = 0; i < q.rows(); ++i) std::copy(shared.begin(), shared.end(), out.row(i).begin());
  if (weights) *weights = std::move(w);
  return out;
}

AttentionGrads vector_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                         const Matrix& w, const Matrix& dout) {
  const std::size_t s = k.rows();
  const std::size_t h = k.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  AttentionGrads g{Matrix(q.rows(), h), Matrix(s, h), Matrix(s, h)};
  for (std::size_t c = 0; c < h; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < dout.rows(); ++i) total += dout(i, c);
    double dot = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      g.dv(j, c) = w(j, c) * total;
      dot += w(j, c) * total * v(j, c);
    }
    for (std::size_t j = 0; j < s; ++j) {
      const double dlogit = w(j, c) * (total * v(j, c) - dot);
      g.dk(j, c) = -scale * dlogit;
    }
  }
  return g;
}

Qkv project_qkv(const Matrix& x, const Tensor& wq, const Tensor& wk, const Tensor& wv) {
  const std::size_t d = x.cols();
  for (const Tensor* w : {&wq, &wk, &wv})
    require(w->shape.size() == 2 && w->shape[0] == d && w->shape[1] == d,
            "project_qkv: weights must be " + std::to_string(d) + "x" + std::to_string(d));
  Qkv out{Matrix(x.rows(), d), Matrix(x.rows(), d), Matrix(x.rows(), d)};
  kernels::gemm_nn<double>(x.rows(), d, d, x.values(), wq.value, out.q.values());
  kernels::gemm_nn<double>(x.rows(), d, d, x.values(), wk.value, out.k.values());
  kernels::gemm_nn<double>(x.rows(), d, d, x.values(), wv.value, out.v.values());
  return out;
}

// ---------------------------------------------------------------- ContentAttention

ContentAttention::ContentAttention(ParamStore& store, const std::string& prefix,
                                   std::size_t channels, const AttentionConfig& cfg, Rng& rng)
    : d_(channels), cfg_(cfg), ffn_act_(cfg.activation) {
  require(cfg.heads >= 1 && channels % cfg.heads == 0,
          "attention: " + std::to_string(channels) + " channels not divisible by " +
              std::to_string(cfg.heads) + " heads");
  require(is_pow2(cfg.cluster_size), "attention: cluster_size must be a power of two");
  if (cfg_.pre_norm) norm1_ = LayerNorm(store, prefix + ".norm1", channels, rng);
  wq_ = Linear(store, prefix + ".w_q", channels, channels, false, rng);
  wk_ = Linear(store, prefix + ".w_k", channels, channels, false, rng);
  wv_ = Linear(store, prefix + ".w_v", channels, channels, false, rng);
  wo_ = Linear(store, prefix + ".w_o", channels, channels, false, rng);
  if (cfg_.feed_forward) {
    const std::size_t hidden = channels * cfg_.ffn_expansion;
    if (cfg_.pre_norm) norm2_ = LayerNorm(store, prefix + ".norm2", channels, rng);
    fc1_ = Linear(store, prefix + ".ffn1", channels, hidden, true, rng);
    fc2_ = Linear(store, prefix + ".ffn2", hidden, channels, false, rng);
  }
}

const ClusterAssignment& ContentAttention::assignment(std::size_t group, std::size_t head) const {
  if (group >= groups_ || head >= cfg_.heads || cfg_.type == AttentionType::none)
    throw std::out_of_range("attention: no cluster assignment for that group/head");
  return heads_[group * cfg_.heads + head].assignment;
}

Matrix ContentAttention::gather_head(const Matrix& m, std::size_t group, std::size_t head,
                                     const ClusterAssignment& a, std::size_t cluster) const {
  const std::size_t hd = head_dim();
  Matrix out(a.cluster_size, hd);
  const std::size_t base = cluster * a.cluster_size;
  for (std::size_t p = 0; p < a.cluster_size; ++p) {
    const std::size_t row = group * rows_per_group_ + a.source(base + p);
    std::copy_n(m.row(row).data() + head * hd, hd, out.row(p).data());
  }
  return out;
}

Matrix ContentAttention::attend(const Matrix& q, const Matrix& k, const Matrix& v, bool reuse) {
  const std::size_t hd = head_dim();
  const std::size_t heads = cfg_.heads;
  Matrix out(q.rows(), d_);
  if (cfg_.type == AttentionType::none) return v;
  if (!reuse) heads_.assign(groups_ * heads, HeadCache{});

  auto one = [&](std::size_t gh) {
    const std::size_t g = gh / heads;
    const std::size_t h = gh % heads;
    HeadCache& cache = heads_[gh];
    if (!reuse) {
      Matrix qh(rows_per_group_, hd);
      for (std::size_t r = 0; r < rows_per_group_; ++r)
        std::copy_n(q.row(g * rows_per_group_ + r).data() + h * hd, hd, qh.row(r).data());
      cache.assignment = balanced_cluster(qh, cfg_.cluster_size, cfg_.metric, cfg_.cluster);
    }
    const ClusterAssignment& a = cache.assignment;
    cache.weights.resize(a.clusters);
    for (std::size_t c = 0; c < a.clusters; ++c) {
      Matrix qc = gather_head(q, g, h, a, c);
      Matrix kc = gather_head(k, g, h, a, c);
      Matrix vc = gather_head(v, g, h, a, c);
      Matrix oc = cfg_.type == AttentionType::scalar ? scalar_attention(qc, kc, vc, &cache.weights[c])
                                                     : vector_attention(qc, kc, vc, &cache.weights[c]);
      for (std::size_t p = 0; p < a.cluster_size; ++p) {
        const std::size_t pos = c * a.cluster_size + p;
        if (a.is_padding(pos)) continue;
        std::copy_n(oc.row(p).data(), hd,
                    out.row(g * rows_per_group_ + a.perm[pos]).data() + h * hd);
      }
    }
  };

  const auto total = static_cast<std::ptrdiff_t>(groups_ * heads);
  if (kernels::default_exec() == kernels::Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t gh = 0; gh < total; ++gh) one(static_cast<std::size_t>(gh));
  } else {
    for (std::ptrdiff_t gh = 0; gh < total; ++gh) one(static_cast<std::size_t>(gh));
  }
  return out;
}

void ContentAttention::attend_backward(const Matrix& dout, Matrix& dq, Matrix& dk,
                                       Matrix& dv) const {
  if (cfg_.type == AttentionType::none) {
    dv = dout;
    return;
  }
  const std::size_t hd = head_dim();
  const std::size_t heads = cfg_.heads;

  auto one = [&](std::size_t gh) {
    const std::size_t g = gh / heads;
    const std::size_t h = gh % heads;
    const HeadCache& cache = heads_[gh];
    const ClusterAssignment& a = cache.assignment;
    for (std::size_t c = 0; c < a.clusters; ++c) {
      Matrix qc = gather_head(q_, g, h, a, c);
      Matrix kc = gather_head(k_, g, h, a, c);
      Matrix vc = gather_head(v_, g, h, a, c);
      Matrix doc(a.cluster_size, hd);
      for (std::size_t p = 0; p < a.cluster_size; ++p) {
        const std::size_t pos = c * a.cluster_size + p;
        if (a.is_padding(pos)) continue;
        std::copy_n(dout.row(g * rows_per_group_ + a.perm[pos]).data() + h * hd, hd,
                    doc.row(p).data());
      }
      AttentionGrads gr =
          cfg_.type == AttentionType::scalar
              ? scalar_attention_backward(qc, kc, vc, cache.weights[c], doc)
              : vector_attention_backward(qc, kc, vc, cache.weights[c], doc);
      for (std::size_t p = 0; p < a.cluster_size; ++p) {
        const std::size_t row = g * rows_per_group_ + a.source(c * a.cluster_size + p);
        for (std::size_t ch = 0; ch < hd; ++ch) {
          dq(row, h * hd + ch) += gr.dq(p, ch);
          dk(row, h * hd + ch) += gr.dk(p, ch);
          dv(row, h * hd + ch) += gr.dv(p, ch);
        }
      }
    }
  };

  const auto total = static_cast<std::ptrdiff_t>(groups_ * heads);
  if (kernels::default_exec() == kernels::Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t gh = 0; gh < total; ++gh) one(static_cast<std::size_t>(gh));
  } else {
    for (std::ptrdiff_t gh = 0; gh < total; ++gh) one(static_cast<std::size_t>(gh));
  }
}

Matrix ContentAttention::forward(const Matrix& x, std::size_t groups, Mode mode) {
  require(x.cols() == d_, "attention: expected " + std::to_string(d_) + " channels, got " +
                              std::to_string(x.cols()));
  require(groups >= 1 && x.rows() % groups == 0 && x.rows() > 0,
          "attention: rows not divisible into groups");
  const bool reuse = mode.replay && groups == groups_ && x.rows() / groups == rows_per_group_ &&
                     heads_.size() == groups * cfg_.heads;
  groups_ = groups;
  rows_per_group_ = x.rows() / groups;

  Matrix xn = cfg_.pre_norm ? norm1_.forward(x) : x;
  q_ = wq_.forward(xn);
  k_ = wk_.forward(xn);
  v_ = wv_.forward(xn);
  Matrix o = attend(q_, k_, v_, reuse);
  Matrix y = wo_.forward(o);
  if (cfg_.residual) add_inplace(y, x);
  if (!cfg_.feed_forward) return y;

  Matrix h = cfg_.pre_norm ? norm2_.forward(y) : y;
  Matrix f = fc2_.forward(ffn_act_.forward(fc1_.forward(h), mode));
  add_inplace(f, y);
  return f;
}

Matrix ContentAttention::backward(const Matrix& dz) {
  Matrix dy = dz;
  if (cfg_.feed_forward) {
    Matrix dh = fc1_.backward(ffn_act_.backward(fc2_.backward(dz)));
    if (cfg_.pre_norm) dh = norm2_.backward(dh);
    add_inplace(dy, dh);
  }
  Matrix dx = cfg_.residual ? dy : Matrix(dy.rows(), dy.cols());
  Matrix dout = wo_.backward(dy);
  Matrix dq(dout.rows(), d_), dk(dout.rows(), d_), dv(dout.rows(), d_);
  attend_backward(dout, dq, dk, dv);
  Matrix dxn = wq_.backward(dq);
  add_inplace(dxn, wk_.backward(dk));
  add_inplace(dxn, wv_.backward(dv));
  if (cfg_.pre_norm) dxn = norm1_.backward(dxn);
  add_inplace(dx, dxn);
  return dx;
}

// ---------------------------------------------------------------- complexity

std::uint64_t mac_count(MsaVariant variant, std::uint64_t s, std::uint64_t k, std::uint64_t d) {
  switch (variant) {
    case MsaVariant::local:
      return 4 * s * k * d * d + 2 * s * k * k * d;
    case MsaVariant::pointtrans:
      return 4 * s * k * d * d + 2 * s * k * d;
    case MsaVariant::cont:
      return 4 * s * d * d + 2 * s * d;
  }
  return 0;
}

const char* to_string(MsaVariant v) {
  switch (v) {
    case MsaVariant::local:
      return "local";
    case MsaVariant::pointtrans:
      return "pointtrans";
    case MsaVariant::cont:
      return "cont";
  }
  return "?";
}

MsaVariant parse_msa_variant(const std::string& s) {
  if (s == "local") return MsaVariant::local;
  if (s == "pointtrans") return MsaVariant::pointtrans;
  if (s == "cont") return MsaVariant::cont;
  throw std::invalid_argument("unknown attention variant: " + s);
}

}  // namespace pct
