#include "causalols/effects.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causalols/inference.hpp"
#include "causalols/kernels.hpp"

namespace causalols {

const char* to_string(ArmSupport s) {
  switch (s) {
    case ArmSupport::both: return "both";
    case ArmSupport::treated_only: return "treated_only";
    case ArmSupport::control_only: return "control_only";
    case ArmSupport::neither: return "neither";
  }
  return "?";
}

nlohmann::json to_json(const EffectEstimate& e) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {
      {"outcome", e.outcome},
      {"arm", e.arm},
      {"group_key", e.group_key},
      {"estimate", num(e.estimate)},
      {"std_error", num(e.std_error)},
      {"ci_low", num(e.ci_low)},
      {"ci_high", num(e.ci_high)},
      {"statistic", num(e.statistic)},
      {"p_value", num(e.p_value)},
      {"n_group", e.n_group},
      {"arm_support", to_string(e.arm_support)},
      {"covariance", e.covariance},
  };
}

namespace {

std::int32_t checked_arm(const CompressedDataset& cd, const ModelSpec& spec,
                         const std::string& arm) {
  if (arm == spec.reference) {
    fail(ErrorKind::config, "arm '" + arm + "' is the reference level; effects are relative to it");
  }
  auto it = std::find(cd.treatment_levels.begin(), cd.treatment_levels.end(), arm);
  if (it == cd.treatment_levels.end()) fail(ErrorKind::config, "unknown treatment arm '" + arm + "'");
  return static_cast<std::int32_t>(it - cd.treatment_levels.begin());
}

}  // namespace

std::vector<EffectEstimate> cate(const FittedModel& fm, const CompressedDataset& cd,
                                 const ModelSpec& spec, const EffectQuery& q) {
  const std::int32_t arm = checked_arm(cd, spec, q.arm);
  const std::size_t j = cd.outcome_index(q.outcome);
  if (fm.dataset_version != cd.dataset_version) {
    fail(ErrorKind::config, "fitted model does not belong to this compressed dataset");
  }

  std::vector<const CompressedKey*> keys;
  for (const auto& name : q.grouping) {
    const CompressedKey* k = cd.find_key(name);
    if (!k) {
      fail(ErrorKind::conflict, "grouping key '" + name +
                                    "' was not a compression key; rebuild with it included");
    }
    keys.push_back(k);
  }

  const auto cov = cov_beta(fm, cd, j, q.covariance);
  const std::size_t G = cd.n_groups();

  // Compressed rows are canonically sorted by the compression keys, so a
  // grouping that is a prefix of them needs no re-sort.
  bool presorted = keys.size() <= cd.keys.size();
  for (std::size_t i = 0; presorted && i < keys.size(); ++i) presorted = keys[i] == &cd.keys[i];
  std::vector<std::size_t> order;
  if (presorted) {
    order.resize(G);
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    std::vector<const std::vector<std::int32_t>*> codes;
    for (const auto* k : keys) codes.push_back(&k->codes);
    order = stable_sort_permutation(codes, G);
  }

  std::vector<kernels::OrderedRange> ranges;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= G; ++i) {
    bool boundary = i == G;
    for (std::size_t k = 0; !boundary && k < keys.size(); ++k) {
      boundary = keys[k]->codes[order[i]] != keys[k]->codes[order[start]];
    }
    if (boundary) {
      ranges.push_back({start, i});
      start = i;
    }
  }

  std::vector<double> group_weight;
  const Eigen::MatrixXd base_sums =
      kernels::parallel::range_base_sums(cd.base, order, ranges, cd.weights, group_weight);

  const Eigen::VectorXd beta = fm.beta.col(static_cast<Eigen::Index>(j));
  std::vector<EffectEstimate> out(ranges.size());
  for (std::size_t g = 0; g < ranges.size(); ++g) {
    const Eigen::VectorXd means = base_sums.row(static_cast<Eigen::Index>(g)).transpose() / group_weight[g];
    const Eigen::RowVectorXd k = assemble_delta_means(cd.columns, arm, means);

    EffectEstimate& e = out[g];
    e.outcome = q.outcome;
    e.arm = q.arm;
    e.covariance = q.covariance.name();
    for (const auto* key : keys) e.group_key.push_back(key->labels[key->codes[order[ranges[g].begin]]]);
    e.estimate = k.dot(beta);
    const double var = (k * (*cov) * k.transpose())(0, 0);
    e.std_error = std::sqrt(std::max(0.0, var));
    e.n_group = static_cast<std::size_t>(std::llround(group_weight[g]));

    double treated = 0.0, control = 0.0;
    for (std::size_t i = ranges[g].begin; i < ranges[g].end; ++i) {
      const std::int32_t t = cd.treatment_of_group[order[i]];
      if (t == arm) treated += cd.weights[order[i]];
      else if (t == cd.reference_code) control += cd.weights[order[i]];
    }
    e.arm_support = treated > 0 && control > 0 ? ArmSupport::both
                    : treated > 0              ? ArmSupport::treated_only
                    : control > 0              ? ArmSupport::control_only
                                               : ArmSupport::neither;

    const Inference inf = infer(e.estimate, e.std_error, fm.n, fm.dof, q.confidence_level);
    e.statistic = inf.statistic;
    e.p_value = inf.p_value;
    e.ci_low = inf.ci_low;
    e.ci_high = inf.ci_high;
  }
  return out;
}

EffectEstimate ate(const FittedModel& fm, const CompressedDataset& cd, const ModelSpec& spec,
                   const EffectQuery& q) {
  EffectQuery all = q;
  all.grouping.clear();
  return cate(fm, cd, spec, all).front();
}

std::vector<EffectEstimate> dte(const FittedModel& fm, const CompressedDataset& cd,
                                const ModelSpec& spec, EffectQuery q) {
  if (!spec.time_key) fail(ErrorKind::config, "DTE requires a time_key in the model spec");
  q.grouping = {*spec.time_key};
  return cate(fm, cd, spec, q);
}

std::vector<EffectEstimate> effects(const FittedModel& fm, const CompressedDataset& cd,
                                    const ModelSpec& spec, const EffectQuery& q) {
  if (q.grouping.empty()) return {ate(fm, cd, spec, q)};
  return cate(fm, cd, spec, q);
}

}  // namespace causalols
