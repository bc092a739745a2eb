#pragma once

// Differentiable building blocks with hand-written backward passes. Every
// layer caches what its backward pass needs from the most recent forward
// call, so one layer instance serves one use per forward pass. Inputs are
// row matrices: every row is one position, columns are channels.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pointcont/matrix.hpp"
#include "pointcont/param_store.hpp"

namespace pct {

enum class ActivationKind { relu, leaky_relu };

struct ActivationSpec {
  ActivationKind kind = ActivationKind::relu;
  double negative_slope = 0.01;
};

// y = x W (+ b). W is in x out.
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, bool bias,
         Rng& rng);

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  Tensor& weight() { return *w_; }
  Tensor* bias() { return b_; }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  Tensor* w_ = nullptr;
  Tensor* b_ = nullptr;
  Matrix x_;
};

// Per-channel normalization over all rows. Train mode normalizes with batch
// statistics and updates the running estimates; eval mode uses the running
// estimates and mutates nothing.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng,
            double momentum = 0.1, double eps = 1e-5);

  Matrix forward(const Matrix& x, Mode mode);
  Matrix backward(const Matrix& dy);

  Tensor& gamma() { return *gamma_; }
  Tensor& beta() { return *beta_; }
  Tensor& running_mean() { return *mean_; }
  Tensor& running_var() { return *var_; }

 private:
  std::size_t c_ = 0;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  Tensor* gamma_ = nullptr;
  Tensor* beta_ = nullptr;
  Tensor* mean_ = nullptr;
  Tensor* var_ = nullptr;
  bool train_ = false;
  Matrix xhat_;
  std::vector<double> inv_std_;
};

// Per-row normalization over channels with learnable scale and shift.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng,
            double eps = 1e-5);

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

 private:
  std::size_t c_ = 0;
  double eps_ = 1e-5;
  Tensor* gamma_ = nullptr;
  Tensor* beta_ = nullptr;
  Matrix xhat_;
  std::vector<double> inv_std_;
};

class Activation {
 public:
  Activation() = default;
  explicit Activation(ActivationSpec spec) : spec_(spec) {}

  Matrix forward(const Matrix& x, Mode mode);
  Matrix backward(const Matrix& dy) const;

 private:
  ActivationSpec spec_{};
  std::vector<char> positive_;
};

// Inverted dropout. Identity in eval mode.
class Dropout {
 public:
  Dropout() = default;
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

  Matrix forward(const Matrix& x, Mode mode);
  Matrix backward(const Matrix& dy) const;

 private:
  double rate_ = 0.0;
  Rng rng_{0};
  std::vector<double> scale_;
};

// Pointwise affine map, batch norm, activation.
class SharedMlp {
 public:
  SharedMlp() = default;
  SharedMlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
            ActivationSpec act, Rng& rng, bool batch_norm = true);

  Matrix forward(const Matrix& x, Mode mode);
  Matrix backward(const Matrix& dy);

  Linear& linear() { return linear_; }
  BatchNorm& bn() { return bn_; }
  std::size_t out_features() const noexcept { return linear_.out_features(); }

 private:
  Linear linear_;
  bool use_bn_ = true;
  BatchNorm bn_;
  Activation act_;
};

// x + MLP(x) with MLP = two SharedMlp layers through a hidden width.
class ResMlp {
 public:
  ResMlp() = default;
  ResMlp(ParamStore& store, const std::string& prefix, std::size_t channels, std::size_t hidden,
         ActivationSpec act, Rng& rng, bool batch_norm = true);

  Matrix forward(const Matrix& x, Mode mode);
  Matrix backward(const Matrix& dy);

  SharedMlp& first() { return first_; }
  SharedMlp& second() { return second_; }

 private:
  std::size_t c_ = 0;
  SharedMlp first_;
  SharedMlp second_;
};

struct MaxPoolResult {
  Matrix values;
  std::vector<std::size_t> argmax;  // M x d, index into the k axis
};

// Pool (M*k) x d patch blocks over the k axis. Max ties resolve to the
// lowest neighbor index, which is also where the gradient goes.
MaxPoolResult max_pool_patch(const Matrix& block, std::size_t k);
Matrix avg_pool_patch(const Matrix& block, std::size_t k);

class MaxPool {
 public:
  Matrix forward(const Matrix& block, std::size_t k, Mode mode);
  Matrix backward(const Matrix& dy) const;

 private:
  std::size_t k_ = 0;
  std::size_t rows_ = 0;
  std::vector<std::size_t> argmax_;
};

class AvgPool {
 public:
  Matrix forward(const Matrix& block, std::size_t k);
  Matrix backward(const Matrix& dy) const;

 private:
  std::size_t k_ = 0;
};

// Numerically stabilized softmax along axis 0 (columns) or 1 (rows).
Matrix softmax_axis(const Matrix& x, int axis);

Matrix concat_cols(const Matrix& a, const Matrix& b);
// Splits columns [0, left) and [left, cols).
std::pair<Matrix, Matrix> split_cols(const Matrix& x, std::size_t left);

void add_inplace(Matrix& a, const Matrix& b);

}  // namespace pct
