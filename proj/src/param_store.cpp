#include "pointcont/param_store.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace pct {

Tensor& ParamStore::create(const std::string& name, std::vector<std::size_t> shape, Init init,
                           Rng& rng, bool trainable) {
  if (tensors_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
  if (shape.empty()) throw std::logic_error("parameter needs a shape: " + name);
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  Tensor t;
  t.name = name;
  t.shape = std::move(shape);
  t.value.assign(n, 0.0);
  t.grad.assign(n, 0.0);
  t.trainable = trainable;
  t.init = init;
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      std::fill(t.value.begin(), t.value.end(), 1.0);
      break;
    case Init::fan_in_uniform: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.shape[0]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : t.value) v = u(rng);
      break;
    }
  }
  return tensors_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

std::vector<Tensor*> ParamStore::all() {
  std::vector<Tensor*> out;
  out.reserve(tensors_.size());
  for (auto& [_, t] : tensors_) out.push_back(&t);
  return out;
}

std::vector<const Tensor*> ParamStore::all() const {
  std::vector<const Tensor*> out;
  out.reserve(tensors_.size());
  for (const auto& [_, t] : tensors_) out.push_back(&t);
  return out;
}

std::vector<Tensor*> ParamStore::trainable() {
  std::vector<Tensor*> out;
  for (auto& [_, t] : tensors_)
    if (t.trainable) out.push_back(&t);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : tensors_) std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

std::size_t ParamStore::trainable_size() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_)
    if (t.trainable) n += t.size();
  return n;
}

}  // namespace pct
