#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "awfnet/tensor.hpp"

namespace awfnet {

/// Named learnable tensor.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Ordered registry of a network's parameters and buffers. Initialization is
/// keyed by (seed, name), so a parameter's initial values do not depend on
/// what else the network contains.
template <typename T>
class Registry {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool trainable;
  };

  explicit Registry(std::uint64_t seed) : seed_(seed) {}

  /// Fan-in-scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor<T> uniform_param(const std::string& name, Shape shape,
                          std::int64_t fan_in) {
    std::mt19937_64 rng(splitmix64(seed_ ^ fnv1a64(name)));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> data(static_cast<std::size_t>(numel_of(shape)));
    for (auto& v : data) v = static_cast<T>(dist(rng));
    auto t = Tensor<T>::from_data(std::move(shape), std::move(data), true);
    insert(name, t, true);
    return t;
  }

  Tensor<T> const_param(const std::string& name, Shape shape, T value) {
    auto t = Tensor<T>::filled(std::move(shape), value, true);
    insert(name, t, true);
    return t;
  }

  /// Non-trainable state (running statistics). Persisted with checkpoints.
  Tensor<T> buffer(const std::string& name, Shape shape, T value) {
    auto t = Tensor<T>::filled(std::move(shape), value, false);
    insert(name, t, false);
    return t;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  std::vector<Parameter<T>> parameters() const {
    std::vector<Parameter<T>> out;
    for (const auto& e : entries_)
      if (e.trainable) out.push_back({e.name, e.tensor});
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_)
      if (e.trainable) n += e.tensor.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_)
      if (e.trainable) e.tensor.zero_grad();
  }

  /// Copy of every entry's values, for best-epoch snapshots.
  std::vector<std::vector<T>> snapshot() const {
    std::vector<std::vector<T>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tensor.data());
    return out;
  }

  void restore(const std::vector<std::vector<T>>& snap) {
    if (snap.size() != entries_.size())
      throw ContractError("registry restore: entry count mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
      if (snap[i].size() != entries_[i].tensor.data().size())
        throw ContractError("registry restore: size mismatch at " +
                            entries_[i].name);
      entries_[i].tensor.mutable_data() = snap[i];
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  void insert(const std::string& name, Tensor<T> t, bool trainable) {
    if (name.empty()) throw ContractError("registry: empty parameter name");
    if (!index_.emplace(name, entries_.size()).second)
      throw ContractError("registry: duplicate parameter name '" + name + "'");
    entries_.push_back({name, std::move(t), trainable});
  }

  std::uint64_t seed_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace awfnet
