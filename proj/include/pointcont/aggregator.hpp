#pragma once

// One Inception feature aggregator stage:
//   centers = fps(coords, M/2); patches = knn(coords, centers, k)
//   f_g = EdgeConv(f_i, f_j - f_i)
//   f_h = ResMLP(MaxPool(f_g))            high-frequency branch
//   f_l = ConT(AvgPool(f_g))              low-frequency branch
//   f'  = MLP(concat(f_h, f_l))
// The toggles reproduce the component ablation wirings. With average
// pooling off but ConT on, ConT runs after the high-frequency branch.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "pointcont/attention.hpp"
#include "pointcont/edgeconv.hpp"
#include "pointcont/geometry.hpp"
#include "pointcont/layers.hpp"

namespace pct {

struct StageToggles {
  bool max_pool = true;
  bool res_mlp = true;
  bool avg_pool = true;
  bool cont = true;

  bool operator==(const StageToggles&) const = default;
};

// Throws ConfigError for wirings outside the ablation table: no pooling at
// all, a residual MLP without max pooling, ConT with neither pooling.
void validate(const StageToggles& t);

struct StageConfig {
  std::size_t d_in = 3;
  std::size_t d_out = 32;
  std::size_t k = 16;
  StageToggles toggles;
  AttentionConfig attention;
  ActivationSpec activation;
  double res_hidden_ratio = 1.0;
};

struct StageIO {
  std::vector<PointCloud> coords;
  Matrix feats;  // (B * M) x d, cloud b owns rows [b*M, (b+1)*M)
};

class InceptionStage {
 public:
  InceptionStage(ParamStore& store, const std::string& prefix, const StageConfig& cfg, Rng& rng);

  StageIO forward(const std::vector<PointCloud>& coords, const Matrix& feats, Mode mode);
  Matrix backward(const Matrix& d_out);

  const StageConfig& config() const noexcept { return cfg_; }
  // Attention block of this stage, or nullptr when ConT is disabled.
  ContentAttention* attention() { return cont_.get(); }
  const ContentAttention* attention() const { return cont_.get(); }

  EdgeConv& edgeconv() { return edge_; }
  ResMlp* res_mlp() { return res_ ? res_.get() : nullptr; }
  SharedMlp* merge() { return merge_ ? merge_.get() : nullptr; }

  // Cached intermediates of the last forward pass.
  const Matrix& last_edge() const noexcept { return f_g_; }
  const Matrix& last_high() const noexcept { return f_h_; }
  const Matrix& last_low() const noexcept { return f_l_; }
  const std::vector<std::vector<std::size_t>>& last_centers() const noexcept { return centers_; }

 private:
  bool serial_cont() const noexcept { return !cfg_.toggles.avg_pool && cfg_.toggles.cont; }
  bool has_high() const noexcept { return cfg_.toggles.max_pool; }
  bool has_low() const noexcept { return cfg_.toggles.avg_pool; }

  StageConfig cfg_;
  EdgeConv edge_;
  std::unique_ptr<ResMlp> res_;
  std::unique_ptr<ContentAttention> cont_;
  std::unique_ptr<SharedMlp> merge_;
  MaxPool max_pool_;
  AvgPool avg_pool_;

  std::size_t in_rows_ = 0;
  std::vector<std::size_t> center_rows_;
  std::vector<std::size_t> neighbor_rows_;
  std::vector<std::vector<std::size_t>> centers_;
  Matrix f_g_, f_h_, f_l_;
};

}  // namespace pct
