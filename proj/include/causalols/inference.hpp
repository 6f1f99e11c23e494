#pragma once

#include <cstddef>

namespace causalols {

struct Inference {
  double statistic = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool normal_approximation = true;
};

// Below this sample size intervals use Student-t with n - p degrees of freedom.
inline constexpr std::size_t kNormalApproximationMinN = 100;

/// Two-sided test of estimate = 0 and a symmetric interval at `level`.
Inference infer(double estimate, double std_error, std::size_t n, std::size_t dof, double level);

}  // namespace causalols
