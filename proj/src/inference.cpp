#include "causalols/inference.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "causalols/error.hpp"

namespace causalols {

Inference infer(double estimate, double std_error, std::size_t n, std::size_t dof, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    fail(ErrorKind::config, "confidence level must be in (0, 1)");
  }
  Inference out;
  out.normal_approximation = n >= kNormalApproximationMinN || dof == 0;
  const double tail = 0.5 * (1.0 - level);

  double crit = 0.0;
  if (out.normal_approximation) {
    boost::math::normal_distribution<> z;
    crit = boost::math::quantile(boost::math::complement(z, tail));
  } else {
    boost::math::students_t_distribution<> t(static_cast<double>(dof));
    crit = boost::math::quantile(boost::math::complement(t, tail));
  }
  out.ci_low = estimate - crit * std_error;
  out.ci_high = estimate + crit * std_error;

  if (std_error > 0.0) {
    out.statistic = estimate / std_error;
    const double a = std::fabs(out.statistic);
    if (out.normal_approximation) {
      boost::math::normal_distribution<> z;
      out.p_value = 2.0 * boost::math::cdf(boost::math::complement(z, a));
    } else {
      boost::math::students_t_distribution<> t(static_cast<double>(dof));
      out.p_value = 2.0 * boost::math::cdf(boost::math::complement(t, a));
    }
    out.p_value = std::min(1.0, out.p_value);
  } else if (estimate == 0.0) {
    out.statistic = 0.0;
    out.p_value = 1.0;
  } else {
    out.statistic = std::copysign(std::numeric_limits<double>::infinity(), estimate);
    out.p_value = 0.0;
  }
  return out;
}

}  // namespace causalols
