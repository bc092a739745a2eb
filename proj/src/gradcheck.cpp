#include "pointcont/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pct {

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck(ParamStore& store, const Objective& objective, std::size_t probes,
                          double eps, std::uint64_t seed) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw std::invalid_argument("gradcheck: eps must lie in [1e-7, 1e-3]");
  auto params = store.trainable();
  if (params.empty()) throw std::invalid_argument("gradcheck: no trainable parameters");

  store.zero_grad();
  objective(EvalKind::analytic);

  GradcheckReport report;
  for (const Tensor* t : params) {
    for (double g : t->grad) {
      if (!std::isfinite(g)) {
        report.finite = false;
        report.max_rel_error = std::numeric_limits<double>::infinity();
        report.worst_param = t->name;
        return report;
      }
    }
  }

  // Snapshot, since perturbed evaluations may touch gradients of layers that
  // accumulate during forward-only calls.
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor* t : params) analytic.push_back(t->grad);

  Rng rng(seed);
  // Round-robin over tensors so even small ones (biases, norm scales) are probed.
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t ti = p % params.size();
    Tensor& t = *params[ti];
    std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
    const std::size_t idx = pick(rng);
    const double saved = t.value[idx];
    t.value[idx] = saved + eps;
    const double fp = objective(EvalKind::perturbed);
    t.value[idx] = saved - eps;
    const double fm = objective(EvalKind::perturbed);
    t.value[idx] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[ti][idx];
    const double err = relative_error(a, numeric);
    ++report.probes;
    if (!std::isfinite(numeric) || err > report.max_rel_error || std::isnan(err)) {
      report.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
      report.worst_param = t.name;
      report.worst_index = idx;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad = analytic[i];
  return report;
}

Matrix probe_weights(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix w(rows, cols);
  for (auto& v : w.values()) v = u(rng);
  return w;
}

double weighted_sum(const Matrix& y, const Matrix& w) {
  if (!same_shape(y, w)) throw std::invalid_argument("weighted_sum: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * w.values()[i];
  return s;
}

}  // namespace pct
