#include "pointcont/edgeconv.hpp"

#include <stdexcept>
#include <string>

namespace pct {

Matrix edge_features(const Matrix& centers, const Matrix& neighbors, std::size_t k) {
  if (k == 0 || centers.cols() != neighbors.cols() || neighbors.rows() != centers.rows() * k)
    throw std::invalid_argument("edge_features: expected centers M x d and neighbors (M*k) x d");
  const std::size_t d = centers.cols();
  Matrix out(neighbors.rows(), 2 * d);
  for (std::size_t m = 0; m < centers.rows(); ++m) {
    auto fi = centers.row(m);
    for (std::size_t j = 0; j < k; ++j) {
      auto fj = neighbors.row(m * k + j);
      auto o = out.row(m * k + j);
      for (std::size_t c = 0; c < d; ++c) {
        o[c] = fi[c];
        o[d + c] = fj[c] - fi[c];
      }
    }
  }
  return out;
}

EdgeConv::EdgeConv(ParamStore& store, const std::string& prefix, std::size_t d_in,
                   std::size_t d_out, ActivationSpec act, Rng& rng, bool batch_norm)
    : d_in_(d_in), mlp_(store, prefix + ".mlp", 2 * d_in, d_out, act, rng, batch_norm) {}

Matrix EdgeConv::forward(const Matrix& centers, const Matrix& neighbors, std::size_t k,
                         Mode mode) {
  if (centers.cols() != d_in_)
    throw std::invalid_argument("edgeconv: expected " + std::to_string(d_in_) +
                                " input channels, got " + std::to_string(centers.cols()));
  k_ = k;
  return mlp_.forward(edge_features(centers, neighbors, k), mode);
}

std::pair<Matrix, Matrix> EdgeConv::backward(const Matrix& dy) {
  Matrix de = mlp_.backward(dy);
  const std::size_t d = d_in_;
  const std::size_t m_count = de.rows() / k_;
  Matrix dc(m_count, d), dn(de.rows(), d);
  for (std::size_t m = 0; m < m_count; ++m) {
    auto gc = dc.row(m);
    for (std::size_t j = 0; j < k_; ++j) {
      auto g = de.row(m * k_ + j);
      auto gn = dn.row(m * k_ + j);
      for (std::size_t c = 0; c < d; ++c) {
        gc[c] += g[c] - g[d + c];
        gn[c] = g[d + c];
      }
    }
  }
  return {std::move(dc), std::move(dn)};
}

}  // namespace pct
