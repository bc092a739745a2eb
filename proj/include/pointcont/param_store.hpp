#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pct {

using Rng = std::mt19937_64;

enum class Init { zeros, ones, fan_in_uniform };

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;
  Init init = Init::zeros;

  std::size_t size() const noexcept { return value.size(); }
};

// Named learnable tensors plus non-trainable state (batch-norm running
// statistics). Tensor addresses are stable for the lifetime of the store.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  // fan_in_uniform draws U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = shape[0].
  Tensor& create(const std::string& name, std::vector<std::size_t> shape, Init init, Rng& rng,
                 bool trainable = true);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t count() const noexcept { return tensors_.size(); }

  // Name-ordered views.
  std::vector<Tensor*> all();
  std::vector<const Tensor*> all() const;
  std::vector<Tensor*> trainable();

  void zero_grad();
  std::size_t trainable_size() const;

 private:
  std::map<std::string, Tensor> tensors_;
};

// Train/eval switch plus the replay flag used by finite-difference checks:
// with replay set, layers reuse the discrete decisions (ReLU masks, max-pool
// argmax, dropout masks, cluster assignments) of the previous forward pass.
struct Mode {
  bool train = false;
  bool replay = false;
};

}  // namespace pct
