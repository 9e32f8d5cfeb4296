#include "gacg/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gacg/numerics/errors.hpp"

namespace gacg::num {
namespace {

double evaluate(const ScalarFn& f, const ParameterSet& point, const std::string& name) {
  const double v = f(point).item();
  if (!std::isfinite(v)) {
    throw NumericalError("grad_check: non-finite objective while probing '" + name + "'");
  }
  return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, ParameterSet& point, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw ParameterError("grad_check: eps must be in (0, 1e-3]");

  point.zero_grad();
  backward(f(point));
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, t] : point) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }
  point.zero_grad();

  GradCheckReport report;
  std::size_t k = 0;
  for (auto& [name, t] : point) {
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      double up = 0.0, down = 0.0;
      try {
        values[i] = saved + eps;
        up = evaluate(f, point, name);
        values[i] = saved - eps;
        down = evaluate(f, point, name);
      } catch (...) {
        values[i] = saved;
        throw;
      }
      values[i] = saved;

      const double fd = (up - down) / (2.0 * eps);
      const double ad = analytic[k][i];
      const double err = std::fabs(fd - ad) / std::max(1e-12, std::fabs(fd) + std::fabs(ad));
      if (err > report.max_relative_error) {
        report = {err, name, i, fd, ad};
      }
    }
    ++k;
  }
  return report;
}

}  // namespace gacg::num
