#include "pointcont/gradient_suite.hpp"

#include <chrono>
#include <functional>
#include <random>

#include "pointcont/aggregator.hpp"
#include "pointcont/attention.hpp"
#include "pointcont/data.hpp"
#include "pointcont/edgeconv.hpp"
#include "pointcont/layers.hpp"
#include "pointcont/model.hpp"

namespace pct {

namespace {

// Trainable stand-in for a layer input, so the check also covers dx.
Tensor& input(ParamStore& store, const std::string& name, std::size_t rows, std::size_t cols,
              Rng& rng) {
  Tensor& t = store.create(name, {rows, cols}, Init::zeros, rng);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& v : t.value) v = g(rng);
  return t;
}

Matrix as_matrix(const Tensor& t) {
  Matrix m(t.shape[0], t.shape[1]);
  std::copy(t.value.begin(), t.value.end(), m.values().begin());
  return m;
}

void add_grad(Tensor& t, const Matrix& g) {
  for (std::size_t i = 0; i < t.size(); ++i) t.grad[i] += g.values()[i];
}

Mode mode_for(EvalKind k, bool train = true) {
  return Mode{.train = train, .replay = k == EvalKind::perturbed};
}

using Forward = std::function<Matrix(Mode)>;
using Backward = std::function<void(const Matrix&)>;

// Scalar objective sum(w * y) with fixed random w.
Objective weighted(Forward fwd, Backward bwd, std::uint64_t seed, bool train = true) {
  auto w = std::make_shared<Matrix>();
  return [=](EvalKind k) {
    const Matrix y = fwd(mode_for(k, train));
    if (w->size() == 0) *w = probe_weights(y.rows(), y.cols(), seed);
    const double f = weighted_sum(y, *w);
    if (k == EvalKind::analytic) bwd(*w);
    return f;
  };
}

struct Runner {
  const SuiteOptions& opts;
  std::vector<SuiteEntry> out;

  void run(const std::string& name, ParamStore& store, const Objective& obj) {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteEntry e;
    e.op = name;
    const std::size_t probes = opts.probes_per_tensor * store.trainable().size();
    e.report = gradcheck(store, obj, probes, opts.eps, opts.seed + out.size());
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(e));
  }
};

ModelConfig mini_model_config(AttentionType type) {
  ModelConfig c;
  c.n_points = 64;
  c.width = 8;
  c.stages = 3;
  c.k = 8;
  c.cluster_size = 4;
  c.heads = 2;
  c.classes = 3;
  c.head_hidden = 16;
  c.dropout = 0.5;
  c.label_smoothing = 0.1;
  c.attention_type = type;
  c.seed = 5;
  return c;
}

void model_case(Runner& r, const std::string& name, const ModelConfig& cfg) {
  auto model = std::make_shared<Model>(cfg);
  std::vector<PointCloud> clouds = {
      synth_shape(ToyShape::cube, cfg.n_points, 1), synth_shape(ToyShape::torus, cfg.n_points, 2)};
  const std::vector<std::size_t> labels = {1, 2};
  Objective obj = [=](EvalKind k) {
    const Matrix logits = model->forward(clouds, mode_for(k));
    const LossResult loss = cross_entropy(logits, labels, cfg.label_smoothing);
    if (k == EvalKind::analytic) model->backward(loss.grad);
    return loss.loss;
  };
  r.run(name, model->params(), obj);
}

}  // namespace

std::vector<SuiteEntry> run_gradient_suite(const SuiteOptions& opts) {
  Runner r{opts, {}};
  Rng rng(opts.seed);
  const ActivationSpec relu{};
  const ActivationSpec leaky{ActivationKind::leaky_relu, 0.1};

  {
    ParamStore s;
    Tensor& x = input(s, "x", 6, 5, rng);
    Linear lin(s, "lin", 5, 4, true, rng);
    r.run("linear", s, weighted([&](Mode) { return lin.forward(as_matrix(x)); },
                                [&](const Matrix& g) { add_grad(x, lin.backward(g)); }, 1));
  }
  {
    ParamStore s;
    Tensor& x = input(s, "x", 12, 4, rng);
    BatchNorm bn(s, "bn", 4, rng);
    r.run("batch_norm_train", s,
          weighted([&](Mode m) { return bn.forward(as_matrix(x), m); },
                   [&](const Matrix& g) { add_grad(x, bn.backward(g)); }, 2));
  }
  {
    ParamStore s;
    Tensor& x = input(s, "x", 12, 4, rng);
    BatchNorm bn(s, "bn", 4, rng);
    bn.forward(as_matrix(x), Mode{.train = true});  // non-trivial running statistics
    r.run("batch_norm_eval", s,
          weighted([&](Mode m) { return bn.forward(as_matrix(x), m); },
                   [&](const Matrix& g) { add_grad(x, bn.backward(g)); }, 3, false));
  }
  {
    ParamStore s;
    Tensor& x = input(s, "x", 7, 6, rng);
    LayerNorm ln(s, "ln", 6, rng);
    r.run("layer_norm", s, weighted([&](Mode) { return ln.forward(as_matrix(x)); },
                                    [&](const Matrix& g) { add_grad(x, ln.backward(g)); }, 4));
  }
  for (auto [name, spec] : {std::pair{"relu", relu}, std::pair{"leaky_relu", leaky}}) {
    ParamStore s;
    Tensor& x = input(s, "x", 8, 5, rng);
    Activation act(spec);
    r.run(name, s, weighted([&](Mode m) { return act.forward(as_matrix(x), m); },
                            [&](const Matrix& g) { add_grad(x, act.backward(g)); }, 5));
  }
  {
    ParamStore s;
    Tensor& x = input(s, "x", 8, 5, rng);
    Dropout drop(0.3, 99);
    r.run("dropout", s, weighted([&](Mode m) { return drop.forward(as_matrix(x), m); },
                                 [&](const Matrix& g) { add_grad(x, drop.backward(g)); }, 6));
  }
  {
    ParamStore s;
    Tensor& x = input(s, "x", 10, 4, rng);
    SharedMlp mlp(s, "mlp", 4, 6, relu, rng);
    r.run("shared_mlp", s, weighted([&](Mode m) { return mlp.forward(as_matrix(x), m); },
                                    [&](const Matrix& g) { add_grad(x, mlp.backward(g)); }, 7));
  }
  {
    ParamStore s;
    Tensor& x = input(s, "x", 10, 4, rng);
    ResMlp res(s, "res", 4, 6, leaky, rng);
    r.run("res_mlp", s, weighted([&](Mode m) { return res.forward(as_matrix(x), m); },
                                 [&](const Matrix& g) { add_grad(x, res.backward(g)); }, 8));
  }
  {
    ParamStore s;
    Tensor& x = input(s, "x", 4 * 5, 3, rng);
    MaxPool mp;
    r.run("max_pool", s, weighted([&](Mode m) { return mp.forward(as_matrix(x), 5, m); },
                                  [&](const Matrix& g) { add_grad(x, mp.backward(g)); }, 9));
  }
  {
    ParamStore s;
    Tensor& x = input(s, "x", 4 * 5, 3, rng);
    AvgPool ap;
    r.run("avg_pool", s, weighted([&](Mode) { return ap.forward(as_matrix(x), 5); },
                                  [&](const Matrix& g) { add_grad(x, ap.backward(g)); }, 10));
  }
  {
    ParamStore s;
    Tensor& z = input(s, "logits", 5, 3, rng);
    const std::vector<std::size_t> labels = {0, 2, 1, 1, 0};
    r.run("cross_entropy", s, [&](EvalKind k) {
      const LossResult l = cross_entropy(as_matrix(z), labels, 0.1);
      if (k == EvalKind::analytic) add_grad(z, l.grad);
      return l.loss;
    });
  }
  {
    ParamStore s;
    Tensor& c = input(s, "centers", 4, 3, rng);
    Tensor& n = input(s, "neighbors", 4 * 5, 3, rng);
    EdgeConv ec(s, "edge", 3, 6, relu, rng);
    r.run("edgeconv", s, weighted([&](Mode m) { return ec.forward(as_matrix(c), as_matrix(n), 5, m); },
                                  [&](const Matrix& g) {
                                    auto [dc, dn] = ec.backward(g);
                                    add_grad(c, dc);
                                    add_grad(n, dn);
                                  },
                                  11));
  }
  for (auto type : {AttentionType::scalar, AttentionType::vector}) {
    ParamStore s;
    Tensor& q = input(s, "q", 6, 4, rng);
    Tensor& k = input(s, "k", 6, 4, rng);
    Tensor& v = input(s, "v", 6, 4, rng);
    Matrix weights;
    const bool scalar = type == AttentionType::scalar;
    r.run(scalar ? "scalar_attention" : "vector_attention", s,
          weighted(
              [&](Mode) {
                return scalar ? scalar_attention(as_matrix(q), as_matrix(k), as_matrix(v), &weights)
                              : vector_attention(as_matrix(q), as_matrix(k), as_matrix(v), &weights);
              },
              [&](const Matrix& g) {
                const AttentionGrads ag =
                    scalar ? scalar_attention_backward(as_matrix(q), as_matrix(k), as_matrix(v),
                                                       weights, g)
                           : vector_attention_backward(as_matrix(q), as_matrix(k), as_matrix(v),
                                                       weights, g);
                add_grad(q, ag.dq);
                add_grad(k, ag.dk);
                add_grad(v, ag.dv);
              },
              12));
  }
  for (auto type : {AttentionType::scalar, AttentionType::vector}) {
    ParamStore s;
    Tensor& x = input(s, "x", 2 * 12, 8, rng);
    AttentionConfig cfg;
    cfg.heads = 2;
    cfg.cluster_size = 4;
    cfg.type = type;
    ContentAttention att(s, "cont", 8, cfg, rng);
    r.run(type == AttentionType::scalar ? "content_attention_scalar" : "content_attention_vector",
          s, weighted([&](Mode m) { return att.forward(as_matrix(x), 2, m); },
                      [&](const Matrix& g) { add_grad(x, att.backward(g)); }, 13));
  }
  {
    ParamStore s;
    StageConfig sc;
    sc.d_in = 3;
    sc.d_out = 8;
    sc.k = 8;
    sc.attention.heads = 2;
    sc.attention.cluster_size = 4;
    InceptionStage stage(s, "stage", sc, rng);
    std::vector<PointCloud> coords = {synth_shape(ToyShape::cube, 32, 3),
                                      synth_shape(ToyShape::sphere, 32, 4)};
    Tensor& f = input(s, "feats", 64, 3, rng);
    r.run("aggregator_stage", s,
          weighted([&](Mode m) { return stage.forward(coords, as_matrix(f), m).feats; },
                   [&](const Matrix& g) { add_grad(f, stage.backward(g)); }, 14));
  }
  model_case(r, "model_mini", mini_model_config(AttentionType::vector));
  if (opts.full) {
    model_case(r, "model_mini_scalar", mini_model_config(AttentionType::scalar));
    ModelConfig leaky_cfg = mini_model_config(AttentionType::vector);
    leaky_cfg.activation = ActivationKind::leaky_relu;
    leaky_cfg.metric = Metric::cosine;
    model_case(r, "model_mini_leaky_cosine", leaky_cfg);
  }
  return std::move(r.out);
}

}  // namespace pct
