#include "pointcont/train.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include "pointcont/errors.hpp"

namespace pct {

SgdMomentum::SgdMomentum(ParamStore& store, double momentum, double weight_decay)
    : store_(&store), momentum_(momentum), weight_decay_(weight_decay) {}

void SgdMomentum::step(double lr) {
  for (Tensor* t : store_->trainable()) {
    auto& v = velocity_[t];
    if (v.empty()) v.assign(t->size(), 0.0);
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double g = t->grad[i] + weight_decay_ * t->value[i];
      v[i] = momentum_ * v[i] + g;
      t->value[i] -= lr * v[i];
    }
  }
}

double scheduled_lr(std::size_t step, std::size_t total, double base_lr, std::size_t warmup) {
  if (step < warmup) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total <= warmup) return base_lr;
  const double t = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * std::min(t, 1.0)));
}

double train_step(Model& model, SgdMomentum& opt, const std::vector<PointCloud>& clouds,
                  std::span<const std::size_t> labels, double lr, Matrix* logits_out) {
  model.params().zero_grad();
  Matrix logits = model.forward(clouds, Mode{.train = true});
  const LossResult loss = cross_entropy(logits, labels, model.config().label_smoothing);
  if (!std::isfinite(loss.loss)) throw NumericError("non-finite training loss");
  model.backward(loss.grad);
  opt.step(lr);
  if (logits_out) *logits_out = std::move(logits);
  return loss.loss;
}

std::vector<std::size_t> predict(Model& model, const std::vector<PointCloud>& clouds,
                                 std::size_t batch_size) {
  std::vector<std::size_t> out;
  out.reserve(clouds.size());
  for (std::size_t s = 0; s < clouds.size(); s += batch_size) {
    const std::size_t e = std::min(clouds.size(), s + batch_size);
    std::vector<PointCloud> batch(clouds.begin() + static_cast<std::ptrdiff_t>(s),
                                  clouds.begin() + static_cast<std::ptrdiff_t>(e));
    for (std::size_t p : argmax_rows(model.forward(batch))) out.push_back(p);
  }
  return out;
}

Metrics evaluate(Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  return compute_metrics(predict(model, data.clouds, batch_size), data.labels,
                         model.config().classes);
}

std::vector<EpochStats> fit(Model& model, const Dataset& train, const Dataset& test,
                            const FitOptions& opts) {
  const ModelConfig& cfg = model.config();
  if (train.size() == 0) throw std::invalid_argument("fit: empty training set");
  SgdMomentum opt(model.params(), cfg.momentum, cfg.weight_decay);
  const std::size_t bs = cfg.batch_size;
  const std::size_t steps_per_epoch = (train.size() + bs - 1) / bs;
  const std::size_t total = steps_per_epoch * cfg.epochs;
  const AugmentOptions aug{cfg.scale_min, cfg.scale_max, cfg.translate};

  if (opts.csv) *opts.csv << kEpochCsvHeader << '\n';
  std::vector<EpochStats> history;
  std::size_t step = 0;
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed * 1000003ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);

    EpochStats st;
    st.epoch = epoch + 1;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < train.size(); s += bs) {
      const std::size_t e = std::min(train.size(), s + bs);
      std::vector<PointCloud> batch;
      std::vector<std::size_t> labels;
      for (std::size_t i = s; i < e; ++i) {
        const std::size_t idx = order[i];
        batch.push_back(cfg.augment
                            ? augment(train.clouds[idx],
                                      (cfg.seed << 32) ^ (epoch * train.size() + idx), aug)
                            : train.clouds[idx]);
        labels.push_back(train.labels[idx]);
      }
      st.lr = scheduled_lr(step++, total, cfg.lr, cfg.warmup_steps);
      Matrix logits;
      loss_sum += train_step(model, opt, batch, labels, st.lr, &logits) *
                  static_cast<double>(e - s);
      const auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    }
    st.train_loss = loss_sum / static_cast<double>(train.size());
    st.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
    if (opts.evaluate_each_epoch || epoch + 1 == cfg.epochs) {
      if (test.size() > 0) {
        const Metrics te = evaluate(model, test);
        st.test_oa = te.oa;
        st.test_macc = te.macc;
      }
    }
    if (opts.csv)
      *opts.csv << st.epoch << ',' << st.lr << ',' << st.train_loss << ',' << st.train_acc << ','
                << st.test_oa << ',' << st.test_macc << std::endl;
    if (opts.log)
      *opts.log << "epoch " << st.epoch << "/" << cfg.epochs << "  loss " << std::fixed
                << std::setprecision(4) << st.train_loss << "  train " << std::setprecision(3)
                << st.train_acc << "  test OA " << st.test_oa << "  mAcc " << st.test_macc
                << std::defaultfloat << std::endl;
    history.push_back(st);
  }
  return history;
}

}  // namespace pct
