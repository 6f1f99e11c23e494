#include "causalols/reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <Eigen/Dense>

#include "causalols/design.hpp"
#include "causalols/error.hpp"
#include "causalols/inference.hpp"

namespace causalols {

namespace {

Dataset assign_everyone(const Dataset& ds, const std::string& treatment, std::int32_t code) {
  CategoricalColumn cat = ds.column(treatment).categorical();
  std::fill(cat.codes.begin(), cat.codes.end(), code);
  return ds.with_column(treatment, Column(std::move(cat)));
}

Eigen::MatrixXd dense_cov(const Eigen::MatrixXd& m, const Eigen::VectorXd& resid,
                          const Eigen::MatrixXd& xtx_inv, const Dataset& ds,
                          const CovarianceType& ct) {
  const double n = static_cast<double>(m.rows());
  const double p = static_cast<double>(m.cols());
  switch (ct.kind) {
    case CovarianceKind::homoskedastic:
      return resid.squaredNorm() / (n - p) * xtx_inv;
    case CovarianceKind::hc0:
    case CovarianceKind::hc1: {
      Eigen::MatrixXd meat = m.transpose() * resid.array().square().matrix().asDiagonal() * m;
      Eigen::MatrixXd v = xtx_inv * meat * xtx_inv;
      if (ct.kind == CovarianceKind::hc1) v *= n / (n - p);
      return v;
    }
    case CovarianceKind::cr1: {
      const Column& key = ds.column(ct.cluster_key);
      std::map<std::string, Eigen::VectorXd> scores;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto [it, inserted] = scores.try_emplace(key.label(static_cast<std::size_t>(i)),
                                                 Eigen::VectorXd::Zero(m.cols()));
        it->second += m.row(i).transpose() * resid[i];
      }
      if (scores.size() < 2) fail(ErrorKind::config, "CR1 needs at least two clusters");
      Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(m.cols(), m.cols());
      for (const auto& [label, s] : scores) meat += s * s.transpose();
      const double c = static_cast<double>(scores.size());
      return xtx_inv * meat * xtx_inv * (c / (c - 1.0)) * ((n - 1.0) / (n - p));
    }
  }
  return {};
}

}  // namespace

std::vector<EffectEstimate> reference_path_effects(const Dataset& ds, const ModelSpec& spec,
                                                   const EffectQuery& q) {
  if (ds.n_rows() > kReferenceMaxRows) {
    fail(ErrorKind::config, "reference path refuses " + std::to_string(ds.n_rows()) +
                                " rows (limit " + std::to_string(kReferenceMaxRows) + ")");
  }
  if (q.arm == spec.reference) {
    fail(ErrorKind::config, "arm '" + q.arm + "' is the reference level; effects are relative to it");
  }
  const auto& levels = ds.column(spec.treatment).categorical();
  const auto arm = levels.find_level(q.arm);
  if (!arm) fail(ErrorKind::config, "unknown treatment arm '" + q.arm + "'");
  const std::int32_t ref = *levels.find_level(spec.reference);
  if (std::find(spec.outcomes.begin(), spec.outcomes.end(), q.outcome) == spec.outcomes.end()) {
    fail(ErrorKind::config, "unknown outcome '" + q.outcome + "'");
  }

  // Fit on the observed design.
  const Eigen::MatrixXd m = Eigen::MatrixXd(build_model_matrix(ds, spec).matrix);
  const auto& yv = ds.column(q.outcome).numeric().values;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
  const Eigen::VectorXd beta = m.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd xtx = m.transpose() * m;
  const Eigen::MatrixXd xtx_inv = xtx.inverse();
  const Eigen::VectorXd resid = y - m * beta;
  const Eigen::MatrixXd cov = dense_cov(m, resid, xtx_inv, ds, q.covariance);

  // Counterfactual design matrices and the per-row effect vector.
  const Eigen::MatrixXd m_treat =
      Eigen::MatrixXd(build_model_matrix(assign_everyone(ds, spec.treatment, *arm), spec).matrix);
  const Eigen::MatrixXd m_ctrl =
      Eigen::MatrixXd(build_model_matrix(assign_everyone(ds, spec.treatment, ref), spec).matrix);
  const Eigen::MatrixXd delta_m = m_treat - m_ctrl;
  const Eigen::VectorXd delta_y = delta_m * beta;

  std::vector<KeyCodes> key_codes;
  for (const auto& k : q.grouping) key_codes.push_back(encode_key(ds.column(k)));
  struct VecHash {
    std::size_t operator()(const std::vector<std::int32_t>& v) const {
      std::size_t h = 1469598103934665603ULL;
      for (auto x : v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ULL;
      return h;
    }
  };
  std::unordered_map<std::vector<std::int32_t>, std::vector<Eigen::Index>, VecHash> groups;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    std::vector<std::int32_t> key;
    for (const auto& kc : key_codes) key.push_back(kc.codes[r]);
    groups[key].push_back(static_cast<Eigen::Index>(r));
  }
  std::vector<std::vector<std::int32_t>> ordered;
  for (const auto& [key, rows] : groups) ordered.push_back(key);
  std::sort(ordered.begin(), ordered.end());

  const auto& treatment = levels.codes;
  std::vector<EffectEstimate> out;
  for (const auto& key : ordered) {
    const auto& rows = groups.at(key);
    Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(m.cols());
    double dy = 0.0;
    double treated = 0.0, control = 0.0;
    for (Eigen::Index r : rows) {
      s += delta_m.row(r);
      dy += delta_y[r];
      if (treatment[r] == *arm) treated += 1;
      else if (treatment[r] == ref) control += 1;
    }
    const double size = static_cast<double>(rows.size());
    s /= size;

    EffectEstimate e;
    e.outcome = q.outcome;
    e.arm = q.arm;
    e.covariance = q.covariance.name();
    for (std::size_t k = 0; k < key.size(); ++k) e.group_key.push_back(key_codes[k].labels[key[k]]);
    e.estimate = dy / size;
    e.std_error = std::sqrt(std::max(0.0, (s * cov * s.transpose())(0, 0)));
    e.n_group = rows.size();
    e.arm_support = treated > 0 && control > 0 ? ArmSupport::both
                    : treated > 0              ? ArmSupport::treated_only
                    : control > 0              ? ArmSupport::control_only
                                               : ArmSupport::neither;
    const Inference inf = infer(e.estimate, e.std_error, ds.n_rows(),
                                ds.n_rows() - static_cast<std::size_t>(m.cols()), q.confidence_level);
    e.statistic = inf.statistic;
    e.p_value = inf.p_value;
    e.ci_low = inf.ci_low;
    e.ci_high = inf.ci_high;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace causalols
