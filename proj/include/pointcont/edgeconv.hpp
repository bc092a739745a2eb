#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "pointcont/layers.hpp"
#include "pointcont/matrix.hpp"

namespace pct {

// Row (m, j) = concat(f_i[m], f_j[m][j] - f_i[m]); output is (M*k) x 2d.
Matrix edge_features(const Matrix& centers, const Matrix& neighbors, std::size_t k);

// Shared MLP over edge features, lifting 2*d_in to d_out channels.
class EdgeConv {
 public:
  EdgeConv() = default;
  EdgeConv(ParamStore& store, const std::string& prefix, std::size_t d_in, std::size_t d_out,
           ActivationSpec act, Rng& rng, bool batch_norm = true);

  Matrix forward(const Matrix& centers, const Matrix& neighbors, std::size_t k, Mode mode);
  // Returns gradients w.r.t. (centers, neighbors).
  std::pair<Matrix, Matrix> backward(const Matrix& dy);

  SharedMlp& mlp() { return mlp_; }
  std::size_t in_features() const noexcept { return d_in_; }
  std::size_t out_features() const noexcept { return mlp_.out_features(); }

 private:
  std::size_t d_in_ = 0;
  std::size_t k_ = 0;
  SharedMlp mlp_;
};

}  // namespace pct
