#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "gacg/numerics/parameter_set.hpp"
#include "gacg/numerics/tensor.hpp"

namespace gacg::num {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_fd = 0.0;
  double worst_ad = 0.0;
};

using ScalarFn = std::function<Tensor(const ParameterSet&)>;

// Compares autodiff gradients of f at `point` against central finite
// differences, coordinate by coordinate. The error of one coordinate is
// |fd - ad| / max(1e-12, |fd| + |ad|). `point` is perturbed in place and
// restored before returning.
GradCheckReport grad_check(const ScalarFn& f, ParameterSet& point, double eps);

}  // namespace gacg::num
