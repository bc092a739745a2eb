#pragma once

// Full classifier: a stack of Inception aggregator stages on the raw
// coordinates, global max pooling over the surviving points, then
// linear -> activation -> dropout -> linear.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "pointcont/aggregator.hpp"
#include "pointcont/config.hpp"
#include "pointcont/geometry.hpp"
#include "pointcont/layers.hpp"
#include "pointcont/param_store.hpp"

namespace pct {

class Model {
 public:
  // Validates cfg (ConfigError) and initializes every parameter from cfg.seed.
  explicit Model(const ModelConfig& cfg);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  // B x classes logits. Every cloud must have exactly cfg.n_points points
  // (std::invalid_argument otherwise).
  Matrix forward(const std::vector<PointCloud>& clouds, Mode mode = {});
  Matrix forward(const PointCloud& cloud, Mode mode = {});
  // Accumulates parameter gradients for the last forward pass.
  void backward(const Matrix& d_logits);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParamStore& params() noexcept { return store_; }
  const ParamStore& params() const noexcept { return store_; }

  std::size_t stage_count() const noexcept { return stages_.size(); }
  InceptionStage& stage(std::size_t m) { return *stages_.at(m); }
  // Output of stage m (0-based) in the last forward pass.
  const StageIO& stage_output(std::size_t m) const { return outputs_.at(m); }
  // B x final_width, the globally pooled descriptor of the last forward pass.
  const Matrix& pooled() const noexcept { return pooled_; }

 private:
  ModelConfig cfg_;
  ParamStore store_;
  std::vector<std::unique_ptr<InceptionStage>> stages_;
  MaxPool global_pool_;
  Linear fc1_;
  Activation head_act_;
  Dropout dropout_;
  Linear fc2_;

  std::vector<StageIO> outputs_;
  Matrix pooled_;
};

// Index of the largest entry of each row; ties go to the lowest class index.
std::vector<std::size_t> argmax_rows(const Matrix& logits);

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits
};

// Mean over the batch of the cross-entropy against (1 - eps) * onehot + eps / K.
LossResult cross_entropy(const Matrix& logits, std::span<const std::size_t> labels,
                         double smoothing);

struct Metrics {
  double oa = 0.0;    // correct / total
  double macc = 0.0;  // unweighted mean recall over classes present in labels
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
};

// Throws std::invalid_argument for empty or size-mismatched inputs.
Metrics compute_metrics(std::span<const std::size_t> predictions,
                        std::span<const std::size_t> labels, std::size_t classes);

// Checkpoint tensors at `path`, configuration sidecar at `path` + ".cfg".
std::filesystem::path sidecar_path(const std::filesystem::path& model_path);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace pct
