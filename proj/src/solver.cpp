#include "causalols/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "causalols/kernels.hpp"

namespace causalols {

std::shared_ptr<const Eigen::MatrixXd> CovarianceCache::find(const Key& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : it->second;
}

std::shared_ptr<const Eigen::MatrixXd> CovarianceCache::insert(const Key& key,
                                                               Eigen::MatrixXd value) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] =
      entries_.emplace(key, std::make_shared<const Eigen::MatrixXd>(std::move(value)));
  return it->second;
}

std::size_t CovarianceCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::size_t FittedModel::outcome_index(const std::string& name) const {
  auto it = std::find(outcomes.begin(), outcomes.end(), name);
  if (it == outcomes.end()) fail(ErrorKind::config, "unknown outcome '" + name + "'");
  return static_cast<std::size_t>(it - outcomes.begin());
}

Eigen::MatrixXd FittedModel::solve(const Eigen::MatrixXd& rhs) const {
  return gram_factor->solve(rhs);
}

namespace {

std::atomic<std::size_t> g_fit_calls{0};

// LDL^T in the original column order; the first column whose pivot collapses
// is linearly dependent on the columns before it.
std::ptrdiff_t first_dependent_column(const Eigen::MatrixXd& gram, double tol) {
  const Eigen::Index p = gram.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(p);
  std::vector<bool> kept(static_cast<std::size_t>(p), false);
  for (Eigen::Index k = 0; k < p; ++k) {
    double pivot = gram(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (kept[j]) pivot -= l(k, j) * l(k, j) * d[j];
    }
    if (!(pivot > tol)) return k;
    d[k] = pivot;
    kept[k] = true;
    l(k, k) = 1.0;
    for (Eigen::Index i = k + 1; i < p; ++i) {
      double s = gram(i, k);
      for (Eigen::Index j = 0; j < k; ++j) {
        if (kept[j]) s -= l(i, j) * l(k, j) * d[j];
      }
      l(i, k) = s / pivot;
    }
  }
  return -1;
}

[[noreturn]] void rank_failure(const CompressedDataset& cd, std::ptrdiff_t col) {
  if (col < 0) col = 0;
  const ColumnMeta& meta = cd.columns[static_cast<std::size_t>(col)];
  throw RankDeficientError("design is rank deficient: column '" + meta.name +
                               "' is collinear with earlier columns (term '" + meta.term_label + "')",
                           meta.name, meta.term_label);
}

}  // namespace

std::size_t fit_invocations() noexcept { return g_fit_calls.load(); }

FittedModel fit(const CompressedDataset& cd, SolverOptions options) {
  g_fit_calls.fetch_add(1);
  const auto p = static_cast<std::size_t>(cd.matrix.cols());
  const std::size_t G = cd.n_groups();
  if (cd.n <= p) {
    fail(ErrorKind::rank, "insufficient rows: " + std::to_string(G) + " distinct rows and " +
                              std::to_string(cd.n) + " observations for " + std::to_string(p) +
                              " columns");
  }

  const Eigen::MatrixXd gram = kernels::parallel::weighted_gram(cd.matrix, cd.weights);
  const double max_diag = gram.diagonal().maxCoeff();
  const double tol = options.pivot_tolerance * max_diag;
  // fewer distinct rows than columns is always rank deficient; name the column
  if (G < p) rank_failure(cd, first_dependent_column(gram, tol));

  const Eigen::MatrixXd rhs = kernels::parallel::cross_product(cd.matrix, cd.sum_y);

  const SparseMatrix gram_sparse = gram.sparseView();
  auto factor = std::make_shared<GramFactor>();
  factor->compute(gram_sparse);
  if (factor->info() != Eigen::Success || !(max_diag > 0.0) ||
      !(factor->vectorD().minCoeff() > tol)) {
    rank_failure(cd, first_dependent_column(gram, tol));
  }

  FittedModel fm;
  fm.n = cd.n;
  fm.p = p;
  fm.dof = cd.n - p;
  fm.outcomes = cd.outcomes;
  for (const auto& c : cd.columns) fm.column_names.push_back(c.name);
  fm.dataset_version = cd.dataset_version;

  fm.beta = factor->solve(rhs);
  Eigen::MatrixXd inv = factor->solve(Eigen::MatrixXd::Identity(p, p));
  fm.xtx_inverse = 0.5 * (inv + inv.transpose());
  fm.gram_factor = std::move(factor);

  fm.per_group_fit = cd.matrix * fm.beta;
  const auto m = static_cast<Eigen::Index>(cd.outcomes.size());
  fm.rss = Eigen::VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      const auto gi = static_cast<Eigen::Index>(g);
      const double yhat = fm.per_group_fit(gi, j);
      s += cd.sum_y2(gi, j) - 2.0 * yhat * cd.sum_y(gi, j) + cd.weights[g] * yhat * yhat;
    }
    fm.rss[j] = std::max(0.0, s);
  }
  return fm;
}

ResidualMoments group_residual_moments(const FittedModel& fm, const CompressedDataset& cd,
                                       std::size_t outcome) {
  if (outcome >= fm.outcomes.size()) {
    fail(ErrorKind::config, "outcome index " + std::to_string(outcome) + " out of range");
  }
  const auto j = static_cast<Eigen::Index>(outcome);
  const auto G = static_cast<Eigen::Index>(cd.n_groups());
  ResidualMoments out{Eigen::VectorXd(G), Eigen::VectorXd(G)};
  for (Eigen::Index g = 0; g < G; ++g) {
    const double yhat = fm.per_group_fit(g, j);
    const double w = cd.weights[static_cast<std::size_t>(g)];
    out.sum[g] = cd.sum_y(g, j) - w * yhat;
    out.sum_sq[g] = cd.sum_y2(g, j) - 2.0 * yhat * cd.sum_y(g, j) + w * yhat * yhat;
  }
  return out;
}

}  // namespace causalols
