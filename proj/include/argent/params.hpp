#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "argent/autodiff.hpp"

namespace argent {

/// Ordered, named collection of trainable arrays. Order is insertion order
/// and is what checkpoints and optimizers iterate over.
template <class T>
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor<T> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    index_.emplace(name, names_.size());
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Tensor<T>& value(std::size_t i) const { return values_.at(i); }
  Tensor<T>& value(std::size_t i) { return values_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Places every parameter of a store on a tape for one forward pass.
template <class T>
class ParamBinding {
 public:
  ParamBinding(Tape<T>& tape, const ParamStore<T>& store, bool track_grad)
      : store_(&store) {
    vars_.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
      vars_.push_back(track_grad ? tape.leaf(store.value(i)) : tape.constant(store.value(i)));
    }
  }

  const Var<T>& operator[](const std::string& name) const { return vars_[store_->index_of(name)]; }
  const Var<T>& at(std::size_t i) const { return vars_.at(i); }
  std::size_t size() const { return vars_.size(); }

  /// Gradient per store index, zero-filled for parameters the loss ignored.
  std::vector<Tensor<T>> collect(GradientTable<T>& table) const {
    std::vector<Tensor<T>> out;
    out.reserve(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      auto it = table.find(vars_[i].id());
      out.push_back(it != table.end() ? std::move(it->second)
                                      : Tensor<T>(store_->value(i).shape()));
    }
    return out;
  }

 private:
  const ParamStore<T>* store_;
  std::vector<Var<T>> vars_;
};

/// Glorot-uniform weight in ±sqrt(6 / (fan_in + fan_out)).
template <class T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor<T> w({fan_in, fan_out});
  for (auto& v : w.data()) v = static_cast<T>(dist(rng));
  return w;
}

/// splitmix64 finalizer, used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace argent
