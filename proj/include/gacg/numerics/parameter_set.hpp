#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "gacg/numerics/rng.hpp"
#include "gacg/numerics/tensor.hpp"

namespace gacg::num {

// Named parameter tensors keyed by dot-separated path. Iteration order is
// lexicographic by name.
class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor>;

  // Registers a trainable tensor; duplicate names are a contract violation.
  Tensor& add(const std::string& name, Tensor value);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
  Tensor& add_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                      RngStream& rng);

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }

  std::size_t size() const { return tensors_.size(); }
  std::size_t total_count() const;
  std::vector<std::string> names() const;

  Map::const_iterator begin() const { return tensors_.begin(); }
  Map::const_iterator end() const { return tensors_.end(); }
  Map::iterator begin() { return tensors_.begin(); }
  Map::iterator end() { return tensors_.end(); }

  void zero_grad();
  // Independent deep copy (fresh leaves, no shared storage).
  ParameterSet clone() const;
  // Overwrites values from `other`, which must have identical names and shapes.
  void copy_values_from(const ParameterSet& other);
  // Largest absolute elementwise difference; names must match.
  double max_abs_diff(const ParameterSet& other) const;

 private:
  Map tensors_;
};

}  // namespace gacg::num
