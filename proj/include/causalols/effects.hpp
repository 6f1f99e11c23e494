#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalols/compress.hpp"
#include "causalols/covariance.hpp"
#include "causalols/model_spec.hpp"
#include "causalols/solver.hpp"

namespace causalols {

struct EffectQuery {
  std::string outcome;
  std::string arm;
  std::vector<std::string> grouping;  // empty: ATE
  CovarianceType covariance;
  double confidence_level = 0.95;
};

enum class ArmSupport { both, treated_only, control_only, neither };
const char* to_string(ArmSupport s);

struct EffectEstimate {
  std::string outcome;
  std::string arm;
  std::vector<std::string> group_key;  // empty for ATE
  double estimate = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_group = 0;
  ArmSupport arm_support = ArmSupport::both;
  std::string covariance;
};

nlohmann::json to_json(const EffectEstimate& e);

/// Average effect of `arm` against the reference: K = column means of the
/// counterfactual difference, estimate K beta, variance K Cov(beta) K'.
EffectEstimate ate(const FittedModel& fm, const CompressedDataset& cd, const ModelSpec& spec,
                   const EffectQuery& q);

/// One estimate per group of `q.grouping`, in ascending key order. Compressed
/// rows are ordered by the grouping keys and each group is a contiguous range
/// reduced in one pass; Cov(beta) is computed once per query.
std::vector<EffectEstimate> cate(const FittedModel& fm, const CompressedDataset& cd,
                                 const ModelSpec& spec, const EffectQuery& q);

/// Effects per period of the time key, ordered by time.
std::vector<EffectEstimate> dte(const FittedModel& fm, const CompressedDataset& cd,
                                const ModelSpec& spec, EffectQuery q);

/// Dispatches on q.grouping: ATE when empty, otherwise CATE.
std::vector<EffectEstimate> effects(const FittedModel& fm, const CompressedDataset& cd,
                                    const ModelSpec& spec, const EffectQuery& q);

}  // namespace causalols
