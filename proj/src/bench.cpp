#include "pointcont/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "pointcont/kernels.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pct {

namespace {

using clk = std::chrono::steady_clock;

double elapsed_ns(clk::time_point t0) {
  return std::chrono::duration<double, std::nano>(clk::now() - t0).count();
}

// out (n x m) = a (n x inner) * w (inner x m), tallied.
void project(const Matrix& a, const Matrix& w, Matrix& out, MacCounter& count) {
  out = Matrix(a.rows(), w.cols());
  kernels::serial::gemm_nn<double>(a.rows(), a.cols(), w.cols(), a.values(), w.values(),
                                   out.values());
  count.macs += a.rows() * a.cols() * w.cols();
}

Matrix window(const Matrix& x, std::size_t center, std::size_t k) {
  Matrix w(k, x.cols());
  for (std::size_t j = 0; j < k; ++j) {
    auto src = x.row((center + j) % x.rows());
    std::copy(src.begin(), src.end(), w.row(j).begin());
  }
  return w;
}

// In-place softmax over the entries of `v` (stride apart).
void softmax_strided(double* v, std::size_t n, std::size_t stride, MacCounter& count) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i * stride]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i * stride] = std::exp(v[i * stride] - mx);
    sum += v[i * stride];
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < n; ++i) v[i * stride] *= inv;
  count.overhead += 2 * n;
}

struct Timed {
  double attention_ns = 0.0;
};

Matrix local_impl(const BenchInputs& in, std::size_t k, MacCounter& count, Timed* t) {
  const std::size_t s = in.x.rows(), d = in.x.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix out(s, d);
  Matrix q, kk, v, o;
  Matrix scores(k, k), mixed(k, d);
  for (std::size_t i = 0; i < s; ++i) {
    const Matrix xw = window(in.x, i, k);
    project(xw, in.wq, q, count);
    project(xw, in.wk, kk, count);
    project(xw, in.wv, v, count);
    const auto t0 = clk::now();
    for (std::size_t a = 0; a < k; ++a) {
      auto qa = q.row(a);
      for (std::size_t b = 0; b < k; ++b) {
        auto kb = kk.row(b);
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += qa[c] * kb[c];
        scores(a, b) = acc * scale;
      }
      count.macs += k * d;
      count.overhead += k;
      softmax_strided(scores.row(a).data(), k, 1, count);
    }
    mixed.fill(0.0);
    for (std::size_t a = 0; a < k; ++a) {
      auto ma = mixed.row(a);
      for (std::size_t b = 0; b < k; ++b) {
        const double w = scores(a, b);
        auto vb = v.row(b);
        for (std::size_t c = 0; c < d; ++c) ma[c] += w * vb[c];
      }
      count.macs += k * d;
    }
    if (t) t->attention_ns += elapsed_ns(t0);
    project(mixed, in.wo, o, count);
    auto row = o.row(0);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

Matrix pointtrans_impl(const BenchInputs& in, std::size_t k, MacCounter& count, Timed* t) {
  const std::size_t s = in.x.rows(), d = in.x.cols();
  Matrix out(s, d);
  Matrix q, kk, v, rel_mapped;
  Matrix rel(k, d);
  for (std::size_t i = 0; i < s; ++i) {
    const Matrix xw = window(in.x, i, k);  // row 0 is the center
    project(xw, in.wq, q, count);
    project(xw, in.wk, kk, count);
    project(xw, in.wv, v, count);
    auto t0 = clk::now();
    auto qc = q.row(0);
    for (std::size_t j = 0; j < k; ++j) {
      auto kj = kk.row(j);
      auto r = rel.row(j);
      for (std::size_t c = 0; c < d; ++c) r[c] = qc[c] - kj[c];
    }
    count.macs += k * d;
    if (t) t->attention_ns += elapsed_ns(t0);
    // Relation mapping gamma(q - k), the fourth d x d map.
    project(rel, in.wo, rel_mapped, count);
    t0 = clk::now();
    auto o = out.row(i);
    for (std::size_t c = 0; c < d; ++c) {
      softmax_strided(rel_mapped.data() + c, k, d, count);
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += rel_mapped(j, c) * v(j, c);
      o[c] = acc;
    }
    count.macs += k * d;
    if (t) t->attention_ns += elapsed_ns(t0);
  }
  return out;
}

Matrix cont_impl(const BenchInputs& in, std::size_t cluster_size, MacCounter& count,
                 const ClusterAssignment* given, Timed* t) {
  const std::size_t s = in.x.rows(), d = in.x.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix q, kk, v;
  project(in.x, in.wq, q, count);
  project(in.x, in.wk, kk, count);
  project(in.x, in.wv, v, count);

  ClusterAssignment local;
  if (!given) {
    ClusterOptions opts;
    opts.op_counter = &count.overhead;
    local = balanced_cluster(q, cluster_size, Metric::euclidean, opts);
  }
  const ClusterAssignment& a = given ? *given : local;

  const auto t0 = clk::now();
  Matrix mixed(s, d);
  Matrix logits(a.cluster_size, d);
  std::vector<double> pooled(d);
  for (std::size_t cl = 0; cl < a.clusters; ++cl) {
    const auto members = a.cluster(cl);
    for (std::size_t j = 0; j < members.size(); ++j) {
      auto kj = kk.row(a.source(cl * a.cluster_size + j));
      auto l = logits.row(j);
      for (std::size_t c = 0; c < d; ++c) l[c] = -kj[c] * scale;
    }
    count.macs += members.size() * d;
    std::fill(pooled.begin(), pooled.end(), 0.0);
    for (std::size_t c = 0; c < d; ++c) softmax_strided(logits.data() + c, members.size(), d, count);
    for (std::size_t j = 0; j < members.size(); ++j) {
      auto vj = v.row(a.source(cl * a.cluster_size + j));
      auto l = logits.row(j);
      for (std::size_t c = 0; c < d; ++c) pooled[c] += l[c] * vj[c];
    }
    count.macs += members.size() * d;
    // Weights are shared by every query of the cluster.
    for (std::size_t j = 0; j < members.size(); ++j)
      if (!a.is_padding(cl * a.cluster_size + j))
        std::copy(pooled.begin(), pooled.end(), mixed.row(members[j]).begin());
  }
  if (t) t->attention_ns += elapsed_ns(t0);
  Matrix out;
  project(mixed, in.wo, out, count);
  return out;
}

std::uint64_t working_set(MsaVariant v, std::uint64_t s, std::uint64_t k, std::uint64_t d) {
  std::uint64_t doubles = 6 * s * d + 4 * d * d;
  if (v != MsaVariant::cont) doubles += 6 * k * d + k * k;
  else doubles += 2 * s;  // permutation and clustering scratch
  return 8 * doubles;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

BenchInputs make_bench_inputs(std::size_t s, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto fill = [&](std::size_t r, std::size_t c, double sd) {
    Matrix m(r, c);
    for (double& x : m.values()) x = g(rng) * sd;
    return m;
  };
  const double ws = 1.0 / std::sqrt(static_cast<double>(d));
  BenchInputs in;
  in.x = fill(s, d, 1.0);
  in.wq = fill(d, d, ws);
  in.wk = fill(d, d, ws);
  in.wv = fill(d, d, ws);
  in.wo = fill(d, d, ws);
  return in;
}

Matrix run_local(const BenchInputs& in, std::size_t k, MacCounter& count) {
  return local_impl(in, k, count, nullptr);
}

Matrix run_pointtrans(const BenchInputs& in, std::size_t k, MacCounter& count) {
  return pointtrans_impl(in, k, count, nullptr);
}

Matrix run_cont(const BenchInputs& in, std::size_t cluster_size, MacCounter& count,
                const ClusterAssignment* assignment) {
  if (assignment && (assignment->original_size != in.x.rows() ||
                     assignment->cluster_size != cluster_size))
    throw std::invalid_argument("run_cont: assignment does not match the inputs");
  return cont_impl(in, cluster_size, count, assignment, nullptr);
}

BenchReport run_bench(MsaVariant variant, std::size_t s, std::size_t k, std::size_t d,
                      const BenchOptions& opts) {
  if (s == 0 || k == 0 || d == 0) throw std::invalid_argument("bench: sizes must be positive");
  if (opts.timing && opts.repeats < 3) throw std::invalid_argument("bench: repeats must be >= 3");
  if (variant != MsaVariant::cont && k > s) throw std::invalid_argument("bench: k exceeds S");
  if (variant == MsaVariant::cont && s < opts.cluster_size)
    throw std::invalid_argument("bench: S smaller than the cluster size");
  const std::uint64_t bytes = working_set(variant, s, k, d);
  if (bytes > opts.max_bytes)
    throw std::invalid_argument("bench: working set of " + std::to_string(bytes) +
                                " bytes exceeds the cap of " + std::to_string(opts.max_bytes));

  BenchReport rep;
  rep.variant = variant;
  rep.s = s;
  rep.k = k;
  rep.d = d;
  rep.macs_predicted = mac_count(variant, s, k, d);

  const BenchInputs in = make_bench_inputs(s, d, opts.seed);
  auto execute = [&](MacCounter& c, Timed* t, const ClusterAssignment* pre) {
    switch (variant) {
      case MsaVariant::local: return local_impl(in, k, c, t);
      case MsaVariant::pointtrans: return pointtrans_impl(in, k, c, t);
      case MsaVariant::cont: return cont_impl(in, opts.cluster_size, c, pre, t);
    }
    throw std::logic_error("unreachable");
  };

  MacCounter counted;
  execute(counted, nullptr, nullptr);
  rep.macs_counted = counted.macs;
  rep.overhead_macs = counted.overhead;
  if (!opts.timing) return rep;

  ClusterAssignment pre;
  const ClusterAssignment* pre_ptr = nullptr;
  if (variant == MsaVariant::cont && !opts.include_clustering) {
    Matrix q(s, d);
    kernels::serial::gemm_nn<double>(s, d, d, in.x.values(), in.wq.values(), q.values());
    pre = balanced_cluster(q, opts.cluster_size, Metric::euclidean);
    pre_ptr = &pre;
  }
  std::vector<double> attn;
  for (std::size_t r = 0; r < opts.repeats; ++r) {
    MacCounter scratch;
    Timed t;
    const auto t0 = clk::now();
    execute(scratch, &t, pre_ptr);
    rep.ns_samples.push_back(elapsed_ns(t0));
    attn.push_back(t.attention_ns);
  }
  rep.ns_median = median(rep.ns_samples);
  rep.ns_attention_median = median(attn);
  return rep;
}

std::vector<BenchReport> sweep(const std::vector<MsaVariant>& variants,
                               const std::vector<std::size_t>& s_list,
                               const std::vector<std::size_t>& k_list,
                               const std::vector<std::size_t>& d_list, const BenchOptions& opts) {
  if (variants.empty() || s_list.empty() || k_list.empty() || d_list.empty())
    throw std::invalid_argument("sweep: every grid axis needs at least one value");
  std::vector<BenchReport> rows;
  for (auto v : variants)
    for (auto s : s_list)
      for (auto k : k_list)
        for (auto d : d_list) rows.push_back(run_bench(v, s, k, d, opts));
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchReport>& rows) {
  out << kBenchCsvHeader << '\n';
  for (const auto& r : rows)
    out << to_string(r.variant) << ',' << r.s << ',' << r.k << ',' << r.d << ','
        << r.macs_predicted << ',' << r.macs_counted << ',' << r.overhead_macs << ','
        << static_cast<std::uint64_t>(std::llround(r.ns_median)) << '\n';
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: sizes");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace pct
