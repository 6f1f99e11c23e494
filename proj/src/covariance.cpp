#include "causalols/covariance.hpp"

#include <algorithm>
#include <vector>

#include "causalols/kernels.hpp"

namespace causalols {

std::string CovarianceType::name() const {
  switch (kind) {
    case CovarianceKind::homoskedastic: return "homoskedastic";
    case CovarianceKind::hc0: return "HC0";
    case CovarianceKind::hc1: return "HC1";
    case CovarianceKind::cr1: return "CR1(" + cluster_key + ")";
  }
  return "?";
}

CovarianceType parse_covariance(const std::string& s, const std::string& default_cluster) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.empty() || lower == "homoskedastic" || lower == "const") {
    return CovarianceType::homoskedastic();
  }
  if (lower == "hc0") return CovarianceType::hc0();
  if (lower == "hc1") return CovarianceType::hc1();
  if (lower == "cr1") {
    if (default_cluster.empty()) fail(ErrorKind::config, "CR1 requires a cluster key");
    return CovarianceType::cr1(default_cluster);
  }
  if (lower.rfind("cr1(", 0) == 0 && lower.back() == ')') {
    return CovarianceType::cr1(s.substr(4, s.size() - 5));
  }
  fail(ErrorKind::config, "unknown covariance type '" + s + "'");
}

namespace {

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& meat) {
  Eigen::MatrixXd v = bread * meat * bread;
  return 0.5 * (v + v.transpose());
}

Eigen::MatrixXd compute(const FittedModel& fm, const CompressedDataset& cd, std::size_t outcome,
                        const CovarianceType& ct) {
  const double n = static_cast<double>(fm.n);
  const double p = static_cast<double>(fm.p);
  switch (ct.kind) {
    case CovarianceKind::homoskedastic:
      return fm.rss[static_cast<Eigen::Index>(outcome)] / static_cast<double>(fm.dof) *
             fm.xtx_inverse;
    case CovarianceKind::hc0:
    case CovarianceKind::hc1: {
      const auto moments = group_residual_moments(fm, cd, outcome);
      std::vector<double> e2(moments.sum_sq.data(), moments.sum_sq.data() + moments.sum_sq.size());
      for (double& v : e2) v = std::max(0.0, v);  // cancellation guard on exact fits
      const Eigen::MatrixXd meat = kernels::parallel::weighted_gram(cd.matrix, e2);
      Eigen::MatrixXd v = sandwich(fm.xtx_inverse, meat);
      if (ct.kind == CovarianceKind::hc1) v *= n / (n - p);
      return v;
    }
    case CovarianceKind::cr1: {
      if (!cd.cluster_key || cd.cluster_of_group.empty()) {
        fail(ErrorKind::config, "CR1 requested but the data was compressed without a cluster key");
      }
      if (*cd.cluster_key != ct.cluster_key) {
        fail(ErrorKind::config, "CR1 cluster key '" + ct.cluster_key +
                                    "' does not match the model's cluster key '" +
                                    *cd.cluster_key + "'");
      }
      if (cd.n_clusters < 2) fail(ErrorKind::config, "CR1 needs at least two clusters");
      const auto moments = group_residual_moments(fm, cd, outcome);
      const Eigen::MatrixXd scores = kernels::parallel::cluster_scores(
          cd.matrix, std::span<const double>(moments.sum.data(), moments.sum.size()),
          cd.cluster_of_group, cd.n_clusters);
      const Eigen::MatrixXd meat = scores.transpose() * scores;
      const double c = cd.n_clusters;
      return sandwich(fm.xtx_inverse, meat) * (c / (c - 1.0)) * ((n - 1.0) / (n - p));
    }
  }
  return {};
}

}  // namespace

std::shared_ptr<const Eigen::MatrixXd> cov_beta(const FittedModel& fm, const CompressedDataset& cd,
                                                std::size_t outcome, const CovarianceType& ct) {
  if (outcome >= fm.outcomes.size()) {
    fail(ErrorKind::config, "outcome index " + std::to_string(outcome) + " out of range");
  }
  const CovarianceCache::Key key{outcome, ct.name()};
  if (auto hit = fm.covariance_cache->find(key)) return hit;
  return fm.covariance_cache->insert(key, compute(fm, cd, outcome, ct));
}

}  // namespace causalols
