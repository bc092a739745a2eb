#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "pointcont/data.hpp"
#include "pointcont/model.hpp"

namespace pct {

// SGD with momentum and coupled weight decay:
//   g += wd * p;  v = mu * v + g;  p -= lr * v
class SgdMomentum {
 public:
  SgdMomentum(ParamStore& store, double momentum, double weight_decay);
  void step(double lr);

 private:
  ParamStore* store_;
  double momentum_;
  double weight_decay_;
  std::map<const Tensor*, std::vector<double>> velocity_;
};

// Linear warmup to base_lr over `warmup` steps, then cosine decay to zero at
// step `total`. step is 0-based.
double scheduled_lr(std::size_t step, std::size_t total, double base_lr, std::size_t warmup);

// Train-mode forward, label-smoothed cross-entropy, backward, one optimizer
// step. Throws NumericError on a non-finite loss. The train-mode logits are
// stored in logits_out when given.
double train_step(Model& model, SgdMomentum& opt, const std::vector<PointCloud>& clouds,
                  std::span<const std::size_t> labels, double lr, Matrix* logits_out = nullptr);

// Eval-mode predictions in batches.
std::vector<std::size_t> predict(Model& model, const std::vector<PointCloud>& clouds,
                                 std::size_t batch_size = 32);
Metrics evaluate(Model& model, const Dataset& data, std::size_t batch_size = 32);

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;  // at the last step of the epoch
  double train_loss = 0.0;
  double train_acc = 0.0;  // train-mode predictions during the epoch
  double test_oa = 0.0;
  double test_macc = 0.0;
};

struct FitOptions {
  std::ostream* csv = nullptr;  // per-epoch rows, header first
  std::ostream* log = nullptr;  // human-readable progress
  bool evaluate_each_epoch = true;
};

// Trains for cfg.epochs epochs. Batches are drawn from a per-epoch shuffle
// seeded by cfg.seed; augmentation draws are seeded by (seed, epoch, index).
std::vector<EpochStats> fit(Model& model, const Dataset& train, const Dataset& test,
                            const FitOptions& opts = {});

inline constexpr const char* kEpochCsvHeader = "epoch,lr,train_loss,train_acc,test_oa,test_macc";

}  // namespace pct
