#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include "causalols/compress.hpp"
#include "causalols/error.hpp"

namespace causalols {

class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, std::string column, std::string term)
      : Error(ErrorKind::rank, what), column_(std::move(column)), term_(std::move(term)) {}

  const std::string& column() const noexcept { return column_; }
  const std::string& term() const noexcept { return term_; }

 private:
  std::string column_;
  std::string term_;
};

// Write-once-per-key store; concurrent readers see either nothing or the
// finished matrix.
class CovarianceCache {
 public:
  using Key = std::pair<std::size_t, std::string>;

  std::shared_ptr<const Eigen::MatrixXd> find(const Key& key) const;
  std::shared_ptr<const Eigen::MatrixXd> insert(const Key& key, Eigen::MatrixXd value);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const Eigen::MatrixXd>> entries_;
};

using GramFactor = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

struct FittedModel {
  Eigen::MatrixXd beta;            // p x m
  Eigen::MatrixXd xtx_inverse;     // (M^T W M)^-1, p x p
  std::shared_ptr<const GramFactor> gram_factor;
  Eigen::MatrixXd per_group_fit;   // G x m, yhat_g = m_g beta
  Eigen::VectorXd rss;             // length m
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t dof = 0;
  std::vector<std::string> outcomes;
  std::vector<std::string> column_names;
  std::uint64_t dataset_version = 0;
  std::shared_ptr<CovarianceCache> covariance_cache = std::make_shared<CovarianceCache>();

  std::size_t outcome_index(const std::string& name) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
};

struct SolverOptions {
  double pivot_tolerance = 1e-10;  // relative to the largest Gram diagonal
};

/// Weighted multiresponse least squares through the normal equations. One
/// fill-reducing sparse LDL^T factorization of M^T W M serves all outcomes.
FittedModel fit(const CompressedDataset& cd, SolverOptions options = {});

/// Number of fit() calls in this process, successful or not.
std::size_t fit_invocations() noexcept;

struct ResidualMoments {
  Eigen::VectorXd sum;     // sum of residuals per group
  Eigen::VectorXd sum_sq;  // sum of squared residuals per group
};

ResidualMoments group_residual_moments(const FittedModel& fm, const CompressedDataset& cd,
                                       std::size_t outcome);

}  // namespace causalols
