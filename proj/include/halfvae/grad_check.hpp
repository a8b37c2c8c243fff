#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "halfvae/errors.hpp"

namespace halfvae {

// Scalar objective returning its value and writing the analytic gradient.
using GradFunction = std::function<double(std::span<const double> point, std::span<double> grad)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
};

// Compares the analytic gradient against central differences, coordinate by
// coordinate: |a - n| / max(1e-8, |a| + |n|).
inline GradCheckResult grad_check_detail(const GradFunction& f, std::span<const double> point,
                                         double step = 1e-5) {
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> analytic(x.size(), 0.0);
  std::vector<double> scratch(x.size(), 0.0);
  const double f0 = f(x, analytic);
  if (!std::isfinite(f0)) throw NumericError("grad_check: objective is not finite at the point");
  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = f(x, scratch);
    x[i] = saved - step;
    const double fm = f(x, scratch);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: objective not finite near coordinate " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

inline double grad_check(const GradFunction& f, std::span<const double> point, double step = 1e-5) {
  return grad_check_detail(f, point, step).max_relative_error;
}

}  // namespace halfvae
