#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "isomer/numerics/dense_array.hpp"

namespace isomer::blocks {

/// Named weights, ordered by name so iteration and serialization are
/// deterministic.
class ParamSet {
 public:
  using Map = std::map<std::string, DenseArray, std::less<>>;

  bool contains(std::string_view name) const { return tensors_.find(name) != tensors_.end(); }
  const DenseArray& at(std::string_view name) const;
  DenseArray& at(std::string_view name);
  void set(std::string name, DenseArray value) { tensors_[std::move(name)] = std::move(value); }

  std::size_t size() const { return tensors_.size(); }
  std::size_t total_elements() const;
  std::vector<std::string> names() const;

  Map::const_iterator begin() const { return tensors_.begin(); }
  Map::const_iterator end() const { return tensors_.end(); }
  Map::iterator begin() { return tensors_.begin(); }
  Map::iterator end() { return tensors_.end(); }

  /// Same names and shapes, all zero.
  ParamSet zeros_like() const;
  /// Copies every tensor under `prefix` + name.
  void merge_prefixed(const std::string& prefix, const ParamSet& other);
  /// Tensors whose name starts with `prefix`, with the prefix stripped.
  ParamSet extract(std::string_view prefix) const;

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.tensors_ == b.tensors_; }

 private:
  Map tensors_;
};

/// Read-only access to the tensors of one component inside a larger set.
class ParamView {
 public:
  ParamView(const ParamSet& set, std::string prefix = "")  // NOLINT: implicit by intent
      : set_(&set), prefix_(std::move(prefix)) {}
  const DenseArray& operator[](std::string_view name) const;
  ParamView sub(std::string_view prefix) const { return ParamView(*set_, prefix_ + std::string(prefix)); }

 private:
  const ParamSet* set_;
  std::string prefix_;
};

/// Gradient accumulator mirroring ParamView.
class GradView {
 public:
  GradView(ParamSet& set, std::string prefix = "")  // NOLINT: implicit by intent
      : set_(&set), prefix_(std::move(prefix)) {}
  /// grads[name] += value
  void accumulate(std::string_view name, const DenseArray& value) const;
  GradView sub(std::string_view prefix) const { return GradView(*set_, prefix_ + std::string(prefix)); }

 private:
  ParamSet* set_;
  std::string prefix_;
};

}  // namespace isomer::blocks
