#include "pointcont/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pointcont/checkpoint.hpp"

namespace pct {

namespace {

AttentionConfig attention_config(const ModelConfig& cfg) {
  AttentionConfig a;
  a.heads = cfg.heads;
  a.type = cfg.attention_type;
  a.cluster_size = cfg.cluster_size;
  a.metric = cfg.metric;
  a.cluster.initial = cfg.initial_division;
  a.cluster.seed = cfg.seed;
  a.pre_norm = cfg.pre_norm;
  a.residual = cfg.attn_residual;
  a.feed_forward = cfg.feed_forward;
  a.ffn_expansion = cfg.ffn_expansion;
  a.activation = {cfg.activation, 0.01};
  return a;
}

}  // namespace

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  validate(cfg_);
  Rng rng(cfg_.seed);
  const ActivationSpec act{cfg_.activation, 0.01};
  for (std::size_t m = 0; m < cfg_.stages; ++m) {
    StageConfig sc;
    sc.d_in = m == 0 ? 3 : cfg_.stage_width(m - 1);
    sc.d_out = cfg_.stage_width(m);
    sc.k = cfg_.k;
    sc.toggles = cfg_.toggles;
    sc.attention = attention_config(cfg_);
    sc.activation = act;
    sc.res_hidden_ratio = cfg_.res_hidden_ratio;
    stages_.push_back(
        std::make_unique<InceptionStage>(store_, "stage" + std::to_string(m + 1), sc, rng));
  }
  fc1_ = Linear(store_, "head.fc1", cfg_.final_width(), cfg_.head_hidden, true, rng);
  head_act_ = Activation(act);
  dropout_ = Dropout(cfg_.dropout, cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
  fc2_ = Linear(store_, "head.fc2", cfg_.head_hidden, cfg_.classes, true, rng);
}

Matrix Model::forward(const std::vector<PointCloud>& clouds, Mode mode) {
  if (clouds.empty()) throw std::invalid_argument("model: empty batch");
  const std::size_t n = cfg_.n_points;
  Matrix feats(clouds.size() * n, 3);
  for (std::size_t b = 0; b < clouds.size(); ++b) {
    if (clouds[b].size() != n)
      throw std::invalid_argument("model: expected " + std::to_string(n) + " points, got " +
                                  std::to_string(clouds[b].size()));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 3; ++c) feats(b * n + i, c) = clouds[b][i][c];
  }

  outputs_.clear();
  const std::vector<PointCloud>* coords = &clouds;
  const Matrix* x = &feats;
  for (auto& stage : stages_) {
    outputs_.push_back(stage->forward(*coords, *x, mode));
    coords = &outputs_.back().coords;
    x = &outputs_.back().feats;
  }

  pooled_ = global_pool_.forward(*x, cfg_.final_points(), mode);
  Matrix h = fc1_.forward(pooled_);
  h = head_act_.forward(h, mode);
  h = dropout_.forward(h, mode);
  return fc2_.forward(h);
}

Matrix Model::forward(const PointCloud& cloud, Mode mode) {
  return forward(std::vector<PointCloud>{cloud}, mode);
}

void Model::backward(const Matrix& d_logits) {
  Matrix g = fc2_.backward(d_logits);
  g = dropout_.backward(g);
  g = head_act_.backward(g);
  g = fc1_.backward(g);
  g = global_pool_.backward(g);
  for (std::size_t m = stages_.size(); m-- > 0;) g = stages_[m]->backward(g);
}

std::vector<std::size_t> argmax_rows(const Matrix& logits) {
  std::vector<std::size_t> out(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[out[r]]) out[r] = c;
  }
  return out;
}

LossResult cross_entropy(const Matrix& logits, std::span<const std::size_t> labels,
                         double smoothing) {
  const std::size_t b = logits.rows(), kc = logits.cols();
  if (b == 0 || labels.size() != b) throw std::invalid_argument("cross_entropy: label count");
  LossResult res;
  res.grad = Matrix(b, kc);
  const double off = smoothing / static_cast<double>(kc);
  const double on = 1.0 - smoothing + off;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] >= kc) throw std::invalid_argument("cross_entropy: label out of range");
    auto z = logits.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    auto g = res.grad.row(r);
    for (std::size_t c = 0; c < kc; ++c) {
      const double t = c == labels[r] ? on : off;
      res.loss -= t * (z[c] - lse);
      g[c] = (std::exp(z[c] - lse) - t) / static_cast<double>(b);
    }
  }
  res.loss /= static_cast<double>(b);
  return res;
}

Metrics compute_metrics(std::span<const std::size_t> predictions,
                        std::span<const std::size_t> labels, std::size_t classes) {
  if (labels.empty()) throw std::invalid_argument("metrics: empty dataset");
  if (predictions.size() != labels.size())
    throw std::invalid_argument("metrics: prediction and label counts differ");
  Metrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes || predictions[i] >= classes)
      throw std::invalid_argument("metrics: class index out of range");
    ++m.confusion[labels[i]][predictions[i]];
    correct += labels[i] == predictions[i];
  }
  m.oa = static_cast<double>(correct) / static_cast<double>(labels.size());
  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t total = 0;
    for (std::size_t p : m.confusion[c]) total += p;
    if (total == 0) continue;
    recall_sum += static_cast<double>(m.confusion[c][c]) / static_cast<double>(total);
    ++present;
  }
  m.macc = recall_sum / static_cast<double>(present);
  return m;
}

std::filesystem::path sidecar_path(const std::filesystem::path& model_path) {
  return std::filesystem::path(model_path.string() + ".cfg");
}

void save_model(const std::filesystem::path& path, const Model& model) {
  save_checkpoint(path, model.params());
  save_config(sidecar_path(path), model.config());
}

Model load_model(const std::filesystem::path& path) {
  Model model(load_config(sidecar_path(path)));
  load_checkpoint(path, model.params());
  return model;
}

}  // namespace pct
