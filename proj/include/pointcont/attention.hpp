#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pointcont/cluster.hpp"
#include "pointcont/layers.hpp"
#include "pointcont/matrix.hpp"
#include "pointcont/param_store.hpp"

namespace pct {

enum class AttentionType { scalar, vector, none };

struct AttentionConfig {
  std::size_t heads = 4;
  AttentionType type = AttentionType::vector;
  std::size_t cluster_size = 16;
  Metric metric = Metric::euclidean;
  ClusterOptions cluster;
  // Block topology around the clustered attention.
  bool pre_norm = true;
  bool residual = true;
  bool feed_forward = true;
  std::size_t ffn_expansion = 2;
  ActivationSpec activation;
};

struct AttentionGrads {
  Matrix dq, dk, dv;
};

// Softmax(Q K^T / sqrt(h)) V for one cluster. `weights` (s x s) receives the
// attention matrix when non-null.
Matrix scalar_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        Matrix* weights = nullptr);
AttentionGrads scalar_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                         const Matrix& weights, const Matrix& dout);

// Vector attention for one cluster: for query i and channel c the weights
// over keys j are softmax_j((q_ic - k_jc) / sqrt(h)) and the output is
// sum_j a_ijc v_jc. The query term is constant along the key axis, so the
// softmax equals softmax_j(-k_jc / sqrt(h)); it is evaluated in that form,
// which makes the weights (s x h, key x channel) shared by every query of
// the cluster and the query gradient identically zero.
Matrix vector_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        Matrix* weights = nullptr);
AttentionGrads vector_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                         const Matrix& weights, const Matrix& dout);

struct Qkv {
  Matrix q, k, v;
};

// Q = X W_Q, K = X W_K, V = X W_V; weights are d x d, no bias.
Qkv project_qkv(const Matrix& x, const Tensor& wq, const Tensor& wk, const Tensor& wv);

// Multi-head content-based attention block over `groups` independent sets of
// rows (one per cloud in a batch). Per group and head, the head's query
// slice is clustered, keys and values follow the query permutation, the
// chosen attention runs inside every cluster and outputs return to their
// original rows. The heads are concatenated and projected by W_O.
//
//   y = x + W_O(attn(norm1(x)))           (residual, pre_norm optional)
//   z = y + FFN(norm2(y))                 (feed_forward optional)
class ContentAttention {
 public:
  ContentAttention() = default;
  ContentAttention(ParamStore& store, const std::string& prefix, std::size_t channels,
                   const AttentionConfig& cfg, Rng& rng);

  Matrix forward(const Matrix& x, std::size_t groups, Mode mode);
  Matrix backward(const Matrix& dy);

  const AttentionConfig& config() const noexcept { return cfg_; }
  std::size_t channels() const noexcept { return d_; }
  std::size_t head_dim() const noexcept { return d_ / cfg_.heads; }
  std::size_t groups() const noexcept { return groups_; }
  const ClusterAssignment& assignment(std::size_t group, std::size_t head) const;

  Linear& wq() { return wq_; }
  Linear& wk() { return wk_; }
  Linear& wv() { return wv_; }
  Linear& wo() { return wo_; }

 private:
  struct HeadCache {
    ClusterAssignment assignment;
    std::vector<Matrix> weights;  // one per cluster
  };

  Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v, bool reuse);
  void attend_backward(const Matrix& dout, Matrix& dq, Matrix& dk, Matrix& dv) const;
  Matrix gather_head(const Matrix& m, std::size_t group, std::size_t head,
                     const ClusterAssignment& a, std::size_t cluster) const;

  std::size_t d_ = 0;
  AttentionConfig cfg_;
  LayerNorm norm1_, norm2_;
  Linear wq_, wk_, wv_, wo_;
  Linear fc1_, fc2_;
  Activation ffn_act_;

  std::size_t groups_ = 0;
  std::size_t rows_per_group_ = 0;
  std::vector<HeadCache> heads_;  // groups x heads
  Matrix q_, k_, v_;
};

enum class MsaVariant { local, pointtrans, cont };

// Multiply-accumulate counts of one attention module over S items of width d:
//   local      4 S k d^2 + 2 S k^2 d
//   pointtrans 4 S k d^2 + 2 S k d
//   cont       4 S d^2 + 2 S d
std::uint64_t mac_count(MsaVariant variant, std::uint64_t s, std::uint64_t k, std::uint64_t d);

const char* to_string(MsaVariant v);
MsaVariant parse_msa_variant(const std::string& s);

}  // namespace pct
