#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pointcont/aggregator.hpp"
#include "pointcont/attention.hpp"
#include "pointcont/cluster.hpp"
#include "pointcont/layers.hpp"

namespace pct {

struct ModelConfig {
  // Architecture.
  std::size_t n_points = 1024;
  std::size_t width = 32;
  std::size_t stages = 5;
  std::size_t k = 16;
  std::size_t cluster_size = 16;
  std::size_t heads = 4;
  AttentionType attention_type = AttentionType::vector;
  Metric metric = Metric::euclidean;
  InitialDivision initial_division = InitialDivision::norm_rank;
  std::size_t classes = 40;
  std::vector<std::string> class_names;
  StageToggles toggles;
  double res_hidden_ratio = 1.0;
  bool pre_norm = true;
  bool attn_residual = true;
  bool feed_forward = true;
  std::size_t ffn_expansion = 2;
  ActivationKind activation = ActivationKind::relu;
  std::size_t head_hidden = 256;
  double dropout = 0.5;

  // Optimization.
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t warmup_steps = 10;
  double label_smoothing = 0.1;
  std::size_t epochs = 60;
  std::size_t batch_size = 16;

  // Augmentation.
  bool augment = true;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double translate = 0.1;

  std::uint64_t seed = 1;

  std::size_t stage_width(std::size_t m) const noexcept { return width << m; }  // m is 0-based
  std::size_t final_width() const noexcept { return stage_width(stages - 1); }
  std::size_t final_points() const noexcept { return n_points >> stages; }
};

// Throws ConfigError naming the first violated constraint.
void validate(const ModelConfig& cfg);

// `key = value` lines; '#' starts a comment. Keys not present keep their
// defaults. Unknown keys, repeated keys and unparsable values are a
// ParseError carrying the line number. The result is not validated.
ModelConfig parse_config(std::istream& in);
ModelConfig load_config(const std::filesystem::path& path);

void write_config(std::ostream& out, const ModelConfig& cfg);
void save_config(const std::filesystem::path& path, const ModelConfig& cfg);

const char* to_string(AttentionType t);
const char* to_string(Metric m);

}  // namespace pct
