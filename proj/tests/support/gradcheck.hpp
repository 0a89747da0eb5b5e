#pragma once

// Central finite-difference checks shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "skillab/numkit/autodiff.hpp"

namespace skillab::testing {

struct GradCheckResult {
  double worst_relative = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double a, double b, double floor = 1e-7) {
  const double diff = std::abs(a - b);
  if (diff <= floor) return 0.0;
  return diff / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares analytic gradients already stored in `params` against central
/// differences of `loss` (which must not mutate parameters).
inline GradCheckResult check_param_gradients(const std::vector<numkit::Parameter*>& params,
                                             const std::function<double()>& loss, double step = 1e-5,
                                             double abs_floor = 1e-7) {
  GradCheckResult result;
  for (numkit::Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + step;
      const double up = loss();
      p->value[i] = orig - step;
      const double down = loss();
      p->value[i] = orig;
      const double fd = (up - down) / (2.0 * step);
      result.worst_relative = std::max(result.worst_relative, relative_error(p->grad[i], fd, abs_floor));
      ++result.checked;
    }
  }
  return result;
}

}  // namespace skillab::testing
