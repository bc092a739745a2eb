#include "pointcont/aggregator.hpp"

#include <stdexcept>

#include "pointcont/errors.hpp"
#include "pointcont/kernels.hpp"

namespace pct {

void validate(const StageToggles& t) {
  if (!t.max_pool && !t.avg_pool) throw ConfigError("stage needs max pooling or average pooling");
  if (t.res_mlp && !t.max_pool) throw ConfigError("residual MLP requires max pooling");
}

InceptionStage::InceptionStage(ParamStore& store, const std::string& prefix,
                               const StageConfig& cfg, Rng& rng)
    : cfg_(cfg), edge_(store, prefix + ".edge", cfg.d_in, cfg.d_out, cfg.activation, rng) {
  validate(cfg.toggles);
  const std::size_t d = cfg.d_out;
  if (cfg.toggles.max_pool && cfg.toggles.res_mlp) {
    auto hidden = static_cast<std::size_t>(static_cast<double>(d) * cfg.res_hidden_ratio);
    if (hidden == 0) hidden = 1;
    res_ = std::make_unique<ResMlp>(store, prefix + ".res", d, hidden, cfg.activation, rng);
  }
  if (cfg.toggles.cont)
    cont_ = std::make_unique<ContentAttention>(store, prefix + ".cont", d, cfg.attention, rng);
  if (has_high() && has_low())
    merge_ = std::make_unique<SharedMlp>(store, prefix + ".merge", 2 * d, d, cfg.activation, rng);
}

StageIO InceptionStage::forward(const std::vector<PointCloud>& coords, const Matrix& feats,
                                Mode mode) {
  const std::size_t batch = coords.size();
  if (batch == 0) throw std::invalid_argument("stage: empty batch");
  const std::size_t m_in = coords.front().size();
  for (const auto& c : coords)
    if (c.size() != m_in) throw std::invalid_argument("stage: clouds differ in size");
  if (m_in < 2 || m_in % 2 != 0)
    throw std::invalid_argument("stage: point count must be even, got " + std::to_string(m_in));
  if (feats.rows() != batch * m_in || feats.cols() != cfg_.d_in)
    throw std::invalid_argument("stage: expected features " + std::to_string(batch * m_in) + "x" +
                                std::to_string(cfg_.d_in));
  const std::size_t m_out = m_in / 2;
  const std::size_t k = cfg_.k;
  in_rows_ = feats.rows();

  centers_.assign(batch, {});
  std::vector<PatchIndex> patches(batch);
  auto geometry = [&](std::size_t b) {
    centers_[b] = fps(coords[b], m_out);
    patches[b] = knn(coords[b], centers_[b], k);
  };
  if (kernels::default_exec() == kernels::Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(batch); ++b)
      geometry(static_cast<std::size_t>(b));
  } else {
    for (std::size_t b = 0; b < batch; ++b) geometry(b);
  }

  StageIO out;
  out.coords.resize(batch);
  center_rows_.resize(batch * m_out);
  neighbor_rows_.resize(batch * m_out * k);
  for (std::size_t b = 0; b < batch; ++b) {
    out.coords[b] = select_points(coords[b], centers_[b]);
    for (std::size_t m = 0; m < m_out; ++m) {
      center_rows_[b * m_out + m] = b * m_in + centers_[b][m];
      for (std::size_t j = 0; j < k; ++j)
        neighbor_rows_[(b * m_out + m) * k + j] = b * m_in + patches[b].neighbor(m, j);
    }
  }

  f_g_ = edge_.forward(gather_rows(feats, center_rows_), gather_rows(feats, neighbor_rows_), k,
                       mode);

  Matrix high, low;
  if (has_high()) {
    high = max_pool_.forward(f_g_, k, mode);
    if (res_) high = res_->forward(high, mode);
    if (serial_cont()) high = cont_->forward(high, batch, mode);
  }
  if (has_low()) {
    low = avg_pool_.forward(f_g_, k);
    if (cont_) low = cont_->forward(low, batch, mode);
  }
  f_h_ = high;
  f_l_ = low;

  if (merge_)
    out.feats = merge_->forward(concat_cols(high, low), mode);
  else
    out.feats = has_high() ? std::move(high) : std::move(low);
  return out;
}

Matrix InceptionStage::backward(const Matrix& d_out) {
  Matrix d_high, d_low;
  if (merge_) {
    auto [a, b] = split_cols(merge_->backward(d_out), cfg_.d_out);
    d_high = std::move(a);
    d_low = std::move(b);
  } else if (has_high()) {
    d_high = d_out;
  } else {
    d_low = d_out;
  }

  Matrix d_fg(f_g_.rows(), f_g_.cols());
  if (has_high()) {
    if (serial_cont()) d_high = cont_->backward(d_high);
    if (res_) d_high = res_->backward(d_high);
    add_inplace(d_fg, max_pool_.backward(d_high));
  }
  if (has_low()) {
    if (cont_) d_low = cont_->backward(d_low);
    add_inplace(d_fg, avg_pool_.backward(d_low));
  }

  auto [dc, dn] = edge_.backward(d_fg);
  Matrix d_feats(in_rows_, cfg_.d_in);
  scatter_add_rows(d_feats, dc, center_rows_);
  scatter_add_rows(d_feats, dn, neighbor_rows_);
  return d_feats;
}

}  // namespace pct
