#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "codecsep/autodiff.hpp"
#include "codecsep/rng.hpp"

namespace codecsep {

// Named f32 parameter with Adam moment buffers. `trainable` is false for
// state tensors updated outside the optimizer (EMA codebook statistics).
struct Param {
  std::string name;
  ad::Shape shape;
  std::vector<float> value;
  std::vector<float> m;  // Adam first moment
  std::vector<float> v;  // Adam second moment
  bool trainable = true;

  int64_t size() const { return static_cast<int64_t>(value.size()); }
};

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Insertion-ordered parameter registry; the order defines checkpoint layout.
class ParamStore {
 public:
  int add(const std::string& name, ad::Shape shape, std::vector<float> value,
          bool trainable = true) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    if (ad::numel(shape) != static_cast<int64_t>(value.size()))
      throw std::invalid_argument("parameter size mismatch: " + name);
    Param p;
    p.name = name;
    p.shape = std::move(shape);
    p.m.assign(value.size(), 0.0f);
    p.v.assign(value.size(), 0.0f);
    p.value = std::move(value);
    p.trainable = trainable;
    items_.push_back(std::move(p));
    index_[name] = static_cast<int>(items_.size()) - 1;
    return index_[name];
  }

  int add_uniform(const std::string& name, ad::Shape shape, Rng& rng, double bound,
                  bool trainable = true) {
    std::vector<float> v(static_cast<size_t>(ad::numel(shape)));
    for (float& x : v) x = static_cast<float>(rng.uniform(-bound, bound));
    return add(name, std::move(shape), std::move(v), trainable);
  }

  int add_constant(const std::string& name, ad::Shape shape, float fill,
                   bool trainable = true) {
    std::vector<float> v(static_cast<size_t>(ad::numel(shape)), fill);
    return add(name, std::move(shape), std::move(v), trainable);
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("missing parameter: " + name);
    return it->second;
  }
  Param& at(int idx) { return items_.at(static_cast<size_t>(idx)); }
  const Param& at(int idx) const { return items_.at(static_cast<size_t>(idx)); }
  Param& named(const std::string& name) { return at(index_of(name)); }
  const Param& named(const std::string& name) const { return at(index_of(name)); }

  size_t count() const { return items_.size(); }
  const std::vector<Param>& items() const { return items_; }
  std::vector<Param>& items() { return items_; }

  int64_t total_scalars() const {
    int64_t n = 0;
    for (const Param& p : items_) n += p.size();
    return n;
  }

  int64_t adam_step_count() const { return adam_steps_; }
  void set_adam_step_count(int64_t n) { adam_steps_ = n; }

  // One Adam update with bias correction over all trainable parameters.
  // `grads` is indexed like items(); entries may be empty (treated as zero
  // gradient, parameter left untouched).
  void adam_step(const std::vector<std::vector<float>>& grads, const AdamConfig& cfg) {
    if (grads.size() != items_.size())
      throw std::invalid_argument("adam_step: gradient count mismatch");
    ++adam_steps_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), adam_steps_);
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), adam_steps_);
    for (size_t i = 0; i < items_.size(); ++i) {
      Param& p = items_[i];
      if (!p.trainable || grads[i].empty()) continue;
      if (grads[i].size() != p.value.size())
        throw std::invalid_argument("adam_step: gradient size mismatch for " + p.name);
      for (size_t j = 0; j < p.value.size(); ++j) {
        const float g = grads[i][j];
        p.m[j] = cfg.beta1 * p.m[j] + (1.0f - cfg.beta1) * g;
        p.v[j] = cfg.beta2 * p.v[j] + (1.0f - cfg.beta2) * g * g;
        const double mhat = p.m[j] / bc1;
        const double vhat = p.v[j] / bc2;
        p.value[j] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
      }
    }
  }

 private:
  std::vector<Param> items_;
  std::map<std::string, int> index_;
  int64_t adam_steps_ = 0;
};

// Per-forward-pass binding of a store onto a tape; ids parallel items().
struct BoundParams {
  std::vector<ad::Tape::Id> ids;

  ad::Tape::Id operator[](int idx) const { return ids.at(static_cast<size_t>(idx)); }
};

inline BoundParams bind_params(ad::Tape& tape, const ParamStore& store, bool with_grad) {
  BoundParams b;
  b.ids.reserve(store.count());
  for (const Param& p : store.items())
    b.ids.push_back(tape.leaf(p.shape, p.value, with_grad && p.trainable));
  return b;
}

// Collects leaf gradients back out of the tape after backward(), indexed
// like the store.
inline std::vector<std::vector<float>> collect_grads(const ad::Tape& tape,
                                                     const ParamStore& store,
                                                     const BoundParams& bound) {
  std::vector<std::vector<float>> grads(store.count());
  for (size_t i = 0; i < store.count(); ++i) {
    const auto& node = tape.node(bound.ids[i]);
    if (node.requires_grad) grads[i].assign(node.grad.begin(), node.grad.end());
  }
  return grads;
}

inline void accumulate_grads(std::vector<std::vector<float>>& into,
                             const std::vector<std::vector<float>>& from, float scale) {
  if (into.empty()) into.resize(from.size());
  if (into.size() != from.size())
    throw std::invalid_argument("accumulate_grads: size mismatch");
  for (size_t i = 0; i < from.size(); ++i) {
    if (from[i].empty()) continue;
    if (into[i].empty()) into[i].assign(from[i].size(), 0.0f);
    for (size_t j = 0; j < from[i].size(); ++j) into[i][j] += scale * from[i][j];
  }
}

}  // namespace codecsep
