#include "pointcont/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pointcont/kernels.hpp"

namespace pct {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

// ---------------------------------------------------------------- Linear

Linear::Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
               bool bias, Rng& rng)
    : in_(in), out_(out) {
  w_ = &store.create(prefix + ".weight", {in, out}, Init::fan_in_uniform, rng);
  if (bias) b_ = &store.create(prefix + ".bias", {out}, Init::zeros, rng);
}

Matrix Linear::forward(const Matrix& x) {
  require(x.cols() == in_, "linear: expected " + std::to_string(in_) + " input channels, got " +
                               std::to_string(x.cols()));
  x_ = x;
  Matrix y(x.rows(), out_);
  kernels::gemm_nn<double>(x.rows(), in_, out_, x.values(), w_->value, y.values());
  if (b_) {
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      for (std::size_t c = 0; c < out_; ++c) yr[c] += b_->value[c];
    }
  }
  return y;
}

Matrix Linear::backward(const Matrix& dy) {
  require(dy.rows() == x_.rows() && dy.cols() == out_, "linear: gradient shape mismatch");
  kernels::gemm_tn_acc<double>(x_.rows(), in_, out_, x_.values(), dy.values(), w_->grad);
  if (b_) {
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      auto g = dy.row(r);
      for (std::size_t c = 0; c < out_; ++c) b_->grad[c] += g[c];
    }
  }
  std::vector<double> wt(in_ * out_);
  kernels::transpose<double>(in_, out_, w_->value, wt);
  Matrix dx(dy.rows(), in_);
  kernels::gemm_nn<double>(dy.rows(), out_, in_, dy.values(), wt, dx.values());
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng,
                     double momentum, double eps)
    : c_(channels), momentum_(momentum), eps_(eps) {
  gamma_ = &store.create(prefix + ".gamma", {channels}, Init::ones, rng);
  beta_ = &store.create(prefix + ".beta", {channels}, Init::zeros, rng);
  mean_ = &store.create(prefix + ".running_mean", {channels}, Init::zeros, rng, false);
  var_ = &store.create(prefix + ".running_var", {channels}, Init::ones, rng, false);
}

Matrix BatchNorm::forward(const Matrix& x, Mode mode) {
  require(x.cols() == c_, "batch norm: channel mismatch");
  require(x.rows() >= 1, "batch norm: empty input");
  const std::size_t n = x.rows();
  train_ = mode.train;
  inv_std_.assign(c_, 0.0);
  std::vector<double> mean(c_, 0.0);
  if (train_) {
    std::vector<double> var(c_, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      auto xr = x.row(r);
      for (std::size_t c = 0; c < c_; ++c) mean[c] += xr[c];
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      auto xr = x.row(r);
      for (std::size_t c = 0; c < c_; ++c) {
        const double d = xr[c] - mean[c];
        var[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < c_; ++c) {
      const double biased = var[c] / static_cast<double>(n);
      inv_std_[c] = 1.0 / std::sqrt(biased + eps_);
      const double unbiased = n > 1 ? var[c] / static_cast<double>(n - 1) : biased;
      mean_->value[c] = (1.0 - momentum_) * mean_->value[c] + momentum_ * mean[c];
      var_->value[c] = (1.0 - momentum_) * var_->value[c] + momentum_ * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < c_; ++c) {
      mean[c] = mean_->value[c];
      inv_std_[c] = 1.0 / std::sqrt(var_->value[c] + eps_);
    }
  }
  xhat_ = Matrix(n, c_);
  Matrix y(n, c_);
  for (std::size_t r = 0; r < n; ++r) {
    auto xr = x.row(r);
    auto hr = xhat_.row(r);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < c_; ++c) {
      hr[c] = (xr[c] - mean[c]) * inv_std_[c];
      yr[c] = gamma_->value[c] * hr[c] + beta_->value[c];
    }
  }
  return y;
}

Matrix BatchNorm::backward(const Matrix& dy) {
  require(same_shape(dy, xhat_), "batch norm: gradient shape mismatch");
  const std::size_t n = dy.rows();
  std::vector<double> sum_dy(c_, 0.0), sum_dy_xhat(c_, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto g = dy.row(r);
    auto h = xhat_.row(r);
    for (std::size_t c = 0; c < c_; ++c) {
      sum_dy[c] += g[c];
      sum_dy_xhat[c] += g[c] * h[c];
    }
  }
  for (std::size_t c = 0; c < c_; ++c) {
    gamma_->grad[c] += sum_dy_xhat[c];
    beta_->grad[c] += sum_dy[c];
  }
  Matrix dx(n, c_);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto g = dy.row(r);
    auto h = xhat_.row(r);
    auto d = dx.row(r);
    for (std::size_t c = 0; c < c_; ++c) {
      const double scale = gamma_->value[c] * inv_std_[c];
      if (train_)
        d[c] = scale * (g[c] - inv_n * sum_dy[c] - h[c] * inv_n * sum_dy_xhat[c]);
      else
        d[c] = scale * g[c];
    }
  }
  return dx;
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng,
                     double eps)
    : c_(channels), eps_(eps) {
  gamma_ = &store.create(prefix + ".gamma", {channels}, Init::ones, rng);
  beta_ = &store.create(prefix + ".beta", {channels}, Init::zeros, rng);
}

Matrix LayerNorm::forward(const Matrix& x) {
  require(x.cols() == c_, "layer norm: channel mismatch");
  const std::size_t n = x.rows();
  xhat_ = Matrix(n, c_);
  inv_std_.assign(n, 0.0);
  Matrix y(n, c_);
  for (std::size_t r = 0; r < n; ++r) {
    auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(c_);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(c_);
    inv_std_[r] = 1.0 / std::sqrt(var + eps_);
    auto hr = xhat_.row(r);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < c_; ++c) {
      hr[c] = (xr[c] - mean) * inv_std_[r];
      yr[c] = gamma_->value[c] * hr[c] + beta_->value[c];
    }
  }
  return y;
}

Matrix LayerNorm::backward(const Matrix& dy) {
  require(same_shape(dy, xhat_), "layer norm: gradient shape mismatch");
  const std::size_t n = dy.rows();
  Matrix dx(n, c_);
  const double inv_c = 1.0 / static_cast<double>(c_);
  std::vector<double> dh(c_);
  for (std::size_t r = 0; r < n; ++r) {
    auto g = dy.row(r);
    auto h = xhat_.row(r);
    double sum_dh = 0.0, sum_dh_h = 0.0;
    for (std::size_t c = 0; c < c_; ++c) {
      gamma_->grad[c] += g[c] * h[c];
      beta_->grad[c] += g[c];
      dh[c] = g[c] * gamma_->value[c];
      sum_dh += dh[c];
      sum_dh_h += dh[c] * h[c];
    }
    auto d = dx.row(r);
    for (std::size_t c = 0; c < c_; ++c)
      d[c] = inv_std_[r] * (dh[c] - inv_c * sum_dh - h[c] * inv_c * sum_dh_h);
  }
  return dx;
}

// ---------------------------------------------------------------- Activation

Matrix Activation::forward(const Matrix& x, Mode mode) {
  const bool reuse = mode.replay && positive_.size() == x.size();
  if (!reuse) positive_.assign(x.size(), 0);
  const double slope = spec_.kind == ActivationKind::relu ? 0.0 : spec_.negative_slope;
  Matrix y(x.rows(), x.cols());
  auto xs = x.values();
  auto ys = y.values();
  if (!reuse)
    for (std::size_t i = 0; i < xs.size(); ++i) positive_[i] = xs[i] > 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    ys[i] = positive_[i] != 0 ? xs[i] : slope * xs[i];
  return y;
}

Matrix Activation::backward(const Matrix& dy) const {
  require(dy.size() == positive_.size(), "activation: gradient shape mismatch");
  const double slope = spec_.kind == ActivationKind::relu ? 0.0 : spec_.negative_slope;
  Matrix dx(dy.rows(), dy.cols());
  auto g = dy.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = positive_[i] ? g[i] : slope * g[i];
  return dx;
}

// ---------------------------------------------------------------- Dropout

Matrix Dropout::forward(const Matrix& x, Mode mode) {
  if (!mode.train || rate_ <= 0.0) {
    scale_.assign(x.size(), 1.0);
    return x;
  }
  if (!(mode.replay && scale_.size() == x.size())) {
    std::bernoulli_distribution keep(1.0 - rate_);
    scale_.resize(x.size());
    const double s = 1.0 / (1.0 - rate_);
    for (auto& v : scale_) v = keep(rng_) ? s : 0.0;
  }
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y.values()[i] = x.values()[i] * scale_[i];
  return y;
}

Matrix Dropout::backward(const Matrix& dy) const {
  require(dy.size() == scale_.size(), "dropout: gradient shape mismatch");
  Matrix dx(dy.rows(), dy.cols());
  for (std::size_t i = 0; i < dy.size(); ++i) dx.values()[i] = dy.values()[i] * scale_[i];
  return dx;
}

// ---------------------------------------------------------------- SharedMlp / ResMlp

SharedMlp::SharedMlp(ParamStore& store, const std::string& prefix, std::size_t in,
                     std::size_t out, ActivationSpec act, Rng& rng, bool batch_norm)
    // The affine map carries no bias when batch norm follows: the shift
    // would be removed by the normalization.
    : linear_(store, prefix + ".linear", in, out, !batch_norm, rng),
      use_bn_(batch_norm),
      act_(act) {
  if (use_bn_) bn_ = BatchNorm(store, prefix + ".bn", out, rng);
}

Matrix SharedMlp::forward(const Matrix& x, Mode mode) {
  Matrix h = linear_.forward(x);
  if (use_bn_) h = bn_.forward(h, mode);
  return act_.forward(h, mode);
}

Matrix SharedMlp::backward(const Matrix& dy) {
  Matrix g = act_.backward(dy);
  if (use_bn_) g = bn_.backward(g);
  return linear_.backward(g);
}

ResMlp::ResMlp(ParamStore& store, const std::string& prefix, std::size_t channels,
               std::size_t hidden, ActivationSpec act, Rng& rng, bool batch_norm)
    : c_(channels),
      first_(store, prefix + ".fc1", channels, hidden, act, rng, batch_norm),
      second_(store, prefix + ".fc2", hidden, channels, act, rng, batch_norm) {}

Matrix ResMlp::forward(const Matrix& x, Mode mode) {
  require(x.cols() == c_, "res_mlp: channel mismatch, expected " + std::to_string(c_) +
                              " got " + std::to_string(x.cols()));
  Matrix y = second_.forward(first_.forward(x, mode), mode);
  add_inplace(y, x);
  return y;
}

Matrix ResMlp::backward(const Matrix& dy) {
  Matrix dx = first_.backward(second_.backward(dy));
  add_inplace(dx, dy);
  return dx;
}

// ---------------------------------------------------------------- pooling

MaxPoolResult max_pool_patch(const Matrix& block, std::size_t k) {
  require(k >= 1, "max_pool_patch: empty patch");
  require(block.rows() % k == 0, "max_pool_patch: rows not a multiple of k");
  const std::size_t m = block.rows() / k;
  const std::size_t d = block.cols();
  MaxPoolResult r{Matrix(m, d), std::vector<std::size_t>(m * d, 0)};
  for (std::size_t i = 0; i < m; ++i) {
    auto out = r.values.row(i);
    std::copy_n(block.row(i * k).data(), d, out.data());
    for (std::size_t j = 1; j < k; ++j) {
      auto br = block.row(i * k + j);
      for (std::size_t c = 0; c < d; ++c) {
        if (br[c] > out[c]) {
          out[c] = br[c];
          r.argmax[i * d + c] = j;
        }
      }
    }
  }
  return r;
}

Matrix avg_pool_patch(const Matrix& block, std::size_t k) {
  require(k >= 1, "avg_pool_patch: empty patch");
  require(block.rows() % k == 0, "avg_pool_patch: rows not a multiple of k");
  const std::size_t m = block.rows() / k;
  const std::size_t d = block.cols();
  Matrix out(m, d);
  const double inv = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < m; ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      auto br = block.row(i * k + j);
      for (std::size_t c = 0; c < d; ++c) o[c] += br[c];
    }
    for (auto& v : o) v *= inv;
  }
  return out;
}

Matrix MaxPool::forward(const Matrix& block, std::size_t k, Mode mode) {
  k_ = k;
  rows_ = block.rows();
  if (mode.replay && argmax_.size() == (k ? block.rows() / k : 0) * block.cols()) {
    const std::size_t m = block.rows() / k;
    const std::size_t d = block.cols();
    Matrix out(m, d);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < d; ++c) out(i, c) = block(i * k + argmax_[i * d + c], c);
    return out;
  }
  auto r = max_pool_patch(block, k);
  argmax_ = std::move(r.argmax);
  return std::move(r.values);
}

Matrix MaxPool::backward(const Matrix& dy) const {
  require(dy.rows() * k_ == rows_ && dy.size() == argmax_.size(), "max_pool: gradient mismatch");
  const std::size_t d = dy.cols();
  Matrix dx(rows_, d);
  for (std::size_t i = 0; i < dy.rows(); ++i)
    for (std::size_t c = 0; c < d; ++c) dx(i * k_ + argmax_[i * d + c], c) += dy(i, c);
  return dx;
}

Matrix AvgPool::forward(const Matrix& block, std::size_t k) {
  k_ = k;
  return avg_pool_patch(block, k);
}

Matrix AvgPool::backward(const Matrix& dy) const {
  Matrix dx(dy.rows() * k_, dy.cols());
  const double inv = 1.0 / static_cast<double>(k_);
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    auto g = dy.row(i);
    for (std::size_t j = 0; j < k_; ++j) {
      auto d = dx.row(i * k_ + j);
      for (std::size_t c = 0; c < g.size(); ++c) d[c] = g[c] * inv;
    }
  }
  return dx;
}

// ---------------------------------------------------------------- misc

Matrix softmax_axis(const Matrix& x, int axis) {
  require(axis == 0 || axis == 1, "softmax_axis: axis must be 0 or 1");
  Matrix y(x.rows(), x.cols());
  const std::size_t slices = axis == 1 ? x.rows() : x.cols();
  const std::size_t len = axis == 1 ? x.cols() : x.rows();
  auto at = [&](const Matrix& m, std::size_t s, std::size_t i) -> double {
    return axis == 1 ? m(s, i) : m(i, s);
  };
  for (std::size_t s = 0; s < slices; ++s) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, at(x, s, i));
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(at(x, s, i) - mx);
      (axis == 1 ? y(s, i) : y(i, s)) = e;
      sum += e;
    }
    for (std::size_t i = 0; i < len; ++i) (axis == 1 ? y(s, i) : y(i, s)) /= sum;
  }
  return y;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "concat_cols: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto o = out.row(r);
    std::copy_n(a.row(r).data(), a.cols(), o.data());
    std::copy_n(b.row(r).data(), b.cols(), o.data() + a.cols());
  }
  return out;
}

std::pair<Matrix, Matrix> split_cols(const Matrix& x, std::size_t left) {
  require(left <= x.cols(), "split_cols: split point out of range");
  Matrix a(x.rows(), left), b(x.rows(), x.cols() - left);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    std::copy_n(xr.data(), left, a.row(r).data());
    std::copy_n(xr.data() + left, x.cols() - left, b.row(r).data());
  }
  return {std::move(a), std::move(b)};
}

void add_inplace(Matrix& a, const Matrix& b) {
  require(same_shape(a, b), "add_inplace: shape mismatch");
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
}

}  // namespace pct
