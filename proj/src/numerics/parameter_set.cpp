#include "gacg/numerics/parameter_set.hpp"

#include <algorithm>
#include <cmath>

#include "gacg/numerics/errors.hpp"

namespace gacg::num {

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  if (tensors_.count(name)) throw ContractViolation("parameter '" + name + "' already exists");
  Tensor leaf(value.shape(), std::vector<double>(value.values().begin(), value.values().end()),
              true);
  return tensors_.emplace(name, std::move(leaf)).first->second;
}

Tensor& ParameterSet::add_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                                  RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = (2.0 * rng.uniform() - 1.0) * bound;
  return add(name, Tensor(std::move(shape), std::move(values)));
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractViolation("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractViolation("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::total_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.numel();
  return n;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& [_, t] : tensors_) t.zero_grad();
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& [name, t] : tensors_) out.add(name, t);
  return out;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) {
    throw ContractViolation("parameter sets differ in size: " + std::to_string(size()) +
                            " vs " + std::to_string(other.size()));
  }
  for (auto& [name, t] : tensors_) {
    auto it = other.tensors_.find(name);
    if (it == other.tensors_.end()) {
      throw ContractViolation("parameter '" + name + "' missing from source set");
    }
    if (it->second.shape() != t.shape()) {
      throw ContractViolation("parameter '" + name + "' shape mismatch " +
                              shape_str(t.shape()) + " vs " + shape_str(it->second.shape()));
    }
    std::ranges::copy(it->second.values(), t.mutable_values().begin());
  }
}

double ParameterSet::max_abs_diff(const ParameterSet& other) const {
  double worst = 0.0;
  for (const auto& [name, t] : tensors_) {
    const auto& o = other.at(name);
    if (o.numel() != t.numel()) throw ContractViolation("parameter '" + name + "' size mismatch");
    for (std::size_t i = 0; i < t.numel(); ++i) {
      worst = std::max(worst, std::fabs(t.values()[i] - o.values()[i]));
    }
  }
  return worst;
}

}  // namespace gacg::num
