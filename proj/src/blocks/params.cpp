#include "isomer/blocks/params.hpp"

#include <stdexcept>

#include "isomer/numerics/ops.hpp"

namespace isomer::blocks {

const DenseArray& ParamSet::at(std::string_view name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("missing parameter '" + std::string(name) + "'");
  return it->second;
}

DenseArray& ParamSet::at(std::string_view name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("missing parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParamSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& [name, t] : tensors_) z.set(name, DenseArray(t.shape()));
  return z;
}

void ParamSet::merge_prefixed(const std::string& prefix, const ParamSet& other) {
  for (const auto& [name, t] : other) set(prefix + name, t);
}

ParamSet ParamSet::extract(std::string_view prefix) const {
  ParamSet out;
  for (const auto& [name, t] : tensors_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.set(name.substr(prefix.size()), t);
  }
  return out;
}

const DenseArray& ParamView::operator[](std::string_view name) const {
  return set_->at(prefix_ + std::string(name));
}

void GradView::accumulate(std::string_view name, const DenseArray& value) const {
  DenseArray& slot = set_->at(prefix_ + std::string(name));
  if (slot.shape() != value.shape()) {
    throw DimensionError("gradient for '" + prefix_ + std::string(name) + "' has shape " +
                         shape_to_string(value.shape()) + ", expected " +
                         shape_to_string(slot.shape()));
  }
  add_inplace(slot, value);
}

}  // namespace isomer::blocks
