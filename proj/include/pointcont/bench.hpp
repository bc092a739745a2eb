#pragma once

// Instrumented attention kernels for the complexity comparison. Every
// variant runs for real on random data; the multiply-accumulates executed
// by its projections and attention arithmetic are tallied per loop, and
// everything else (clustering, exponentials, normalizing divisions) goes to
// a separate overhead tally.
//
//   local       Per center, self-attention among the k window points:
//               Q, K, V, O projections of the window (4 k d^2), k^2 d scores
//               and k^2 d weighted sums.
//   pointtrans  Per center, vector attention of the center query over its
//               k window points: 4 k d^2 projections, k d relation terms and
//               k d weighted sums.
//   cont        Q, K, V, O projections of all S items (4 S d^2), queries
//               clustered in feature space, then vector attention inside
//               every cluster: S d logits and S d weighted sums.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pointcont/attention.hpp"
#include "pointcont/matrix.hpp"

namespace pct {

struct MacCounter {
  std::uint64_t macs = 0;
  std::uint64_t overhead = 0;
};

struct BenchOptions {
  std::size_t repeats = 3;
  bool timing = true;               // false: one counted execution, no timing
  bool include_clustering = true;   // cont: keep clustering inside the timed region
  std::size_t cluster_size = 16;
  std::uint64_t seed = 7;
  std::uint64_t max_bytes = 1ULL << 30;  // working-set cap
};

struct BenchReport {
  MsaVariant variant = MsaVariant::cont;
  std::size_t s = 0, k = 0, d = 0;
  std::uint64_t macs_predicted = 0;
  std::uint64_t macs_counted = 0;
  std::uint64_t overhead_macs = 0;
  std::vector<double> ns_samples;  // one per repeat
  double ns_median = 0.0;
  // Median time of the attention arithmetic alone (projections excluded).
  double ns_attention_median = 0.0;
};

// Matrices used by one bench run: X (S x d) and W_Q, W_K, W_V, W_O (d x d).
struct BenchInputs {
  Matrix x, wq, wk, wv, wo;
};
BenchInputs make_bench_inputs(std::size_t s, std::size_t d, std::uint64_t seed);

// Window of center i: items (i + j) mod S for j = 0..k-1.
Matrix run_local(const BenchInputs& in, std::size_t k, MacCounter& count);
Matrix run_pointtrans(const BenchInputs& in, std::size_t k, MacCounter& count);
// Clustering of the projected queries is recomputed unless `assignment` is
// given (it must then match S and cluster_size).
Matrix run_cont(const BenchInputs& in, std::size_t cluster_size, MacCounter& count,
                const ClusterAssignment* assignment = nullptr);

// Throws std::invalid_argument for zero sizes, repeats < 3 with timing on,
// a working set above max_bytes, or S smaller than the cluster size (cont).
BenchReport run_bench(MsaVariant variant, std::size_t s, std::size_t k, std::size_t d,
                      const BenchOptions& opts = {});

std::vector<BenchReport> sweep(const std::vector<MsaVariant>& variants,
                               const std::vector<std::size_t>& s_list,
                               const std::vector<std::size_t>& k_list,
                               const std::vector<std::size_t>& d_list,
                               const BenchOptions& opts = {});

inline constexpr const char* kBenchCsvHeader =
    "variant,S,k,d,macs_predicted,macs_counted,overhead_macs,ns_median";
void write_bench_csv(std::ostream& out, const std::vector<BenchReport>& rows);

// Keeps freed memory in the process heap (glibc; no-op elsewhere) so timed
// repeats do not pay first-touch page faults on fresh multi-megabyte
// buffers. Process-wide; meant for benchmark drivers.
void retain_freed_memory();

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pct
