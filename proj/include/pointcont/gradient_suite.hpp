#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pointcont/gradcheck.hpp"

namespace pct {

struct SuiteOptions {
  double eps = 1e-5;
  // Probes per trainable tensor; every tensor of every case is visited.
  std::size_t probes_per_tensor = 8;
  // Adds miniature models with scalar attention and with leaky ReLU + cosine metric.
  bool full = false;
  std::uint64_t seed = 11;
};

struct SuiteEntry {
  std::string op;
  GradcheckReport report;
  double seconds = 0.0;
};

// Finite-difference check of every differentiable layer, the attention
// kernels and blocks, an aggregator stage and a miniature full model
// (64 points, width 8, 3 stages).
std::vector<SuiteEntry> run_gradient_suite(const SuiteOptions& opts = {});

}  // namespace pct
