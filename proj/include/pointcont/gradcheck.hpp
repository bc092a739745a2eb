#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pointcont/matrix.hpp"
#include "pointcont/param_store.hpp"

namespace pct {

// analytic: fresh forward pass plus backward pass accumulating into the store.
// perturbed: forward only, replaying the discrete decisions of the last
// analytic pass (the same smooth piece of the function is evaluated).
enum class EvalKind { analytic, perturbed };

using Objective = std::function<double(EvalKind)>;

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
  bool finite = true;
};

// Central differences (f(t+eps) - f(t-eps)) / (2 eps) at `probes` randomly
// chosen trainable coordinates, compared with the analytic gradient using
// |a - b| / max(|a|, |b|, 1e-8). Throws std::invalid_argument unless
// eps is in [1e-7, 1e-3]. A non-finite analytic gradient is reported with
// finite = false and max_rel_error = inf.
GradcheckReport gradcheck(ParamStore& store, const Objective& objective, std::size_t probes,
                          double eps, std::uint64_t seed);

double relative_error(double analytic, double numeric) noexcept;

// Fixed pseudo-random weights used to reduce a matrix output to a scalar.
// sum_i w_i * y_i avoids the degenerate plain sum, whose gradient is
// identically zero through a train-mode batch norm.
Matrix probe_weights(std::size_t rows, std::size_t cols, std::uint64_t seed);
double weighted_sum(const Matrix& y, const Matrix& w);

}  // namespace pct
