#pragma once

#include <memory>
#include <string>

#include <Eigen/Core>

#include "causalols/compress.hpp"
#include "causalols/solver.hpp"

namespace causalols {

enum class CovarianceKind { homoskedastic, hc0, hc1, cr1 };

struct CovarianceType {
  CovarianceKind kind = CovarianceKind::homoskedastic;
  std::string cluster_key;  // CR1 only

  static CovarianceType homoskedastic() { return {}; }
  static CovarianceType hc0() { return {CovarianceKind::hc0, {}}; }
  static CovarianceType hc1() { return {CovarianceKind::hc1, {}}; }
  static CovarianceType cr1(std::string key) { return {CovarianceKind::cr1, std::move(key)}; }

  std::string name() const;  // "homoskedastic", "HC0", "HC1", "CR1(<key>)"
  friend bool operator==(const CovarianceType&, const CovarianceType&) = default;
};

/// Parses "homoskedastic", "HC0", "HC1", "CR1" or "CR1(<key>)". A bare "CR1"
/// takes `default_cluster`.
CovarianceType parse_covariance(const std::string& s, const std::string& default_cluster = "");

/// Cov(beta) for one outcome, from compressed sufficient statistics:
///   homoskedastic  rss/(n-p) * (M'WM)^-1
///   HC0            (M'WM)^-1 [sum_g m_g' m_g sum_{i in g} e_i^2] (M'WM)^-1
///   HC1            HC0 * n/(n-p)
///   CR1            (M'WM)^-1 [sum_c s_c s_c'] (M'WM)^-1 * C/(C-1) * (n-1)/(n-p),
///                  s_c = sum_{g in c} m_g' (sum y_g - n_g yhat_g)
/// Results are cached on the fitted model.
std::shared_ptr<const Eigen::MatrixXd> cov_beta(const FittedModel& fm, const CompressedDataset& cd,
                                                std::size_t outcome, const CovarianceType& ct);

}  // namespace causalols
