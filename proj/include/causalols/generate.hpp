#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalols/data_frame.hpp"

namespace causalols {

enum class CovariateKind { categorical, numeric, integer };

struct CovariateSpec {
  std::string name;
  CovariateKind kind = CovariateKind::numeric;
  int levels = 0;  // categorical: level count; integer: values 0..levels-1
};

/// "country:cat:10,tenure:num,visits:int:12"
std::vector<CovariateSpec> parse_covariates(const std::string& s);

struct GenerateOptions {
  std::size_t users = 1000;
  int arms = 2;
  int metrics = 1;
  std::vector<CovariateSpec> covariates;
  int periods = 1;
  std::uint64_t seed = 1;
  double ate = 0.3;
  double noise_sd = 1.0;
  double user_sd = 0.0;  // per-user random intercept, correlates rows of one user
};

struct Generated {
  Dataset data;
  nlohmann::json truth;
  std::vector<std::string> arm_levels;  // arm_levels[0] is the reference
};

inline const std::string kControlArm = "control";

/// Uniform random assignment to "control", "T1", ..., outcomes y1..ym from an
/// additive linear process. True effect of arm k on every metric is
/// ate * (1 + 0.1 (k - 1)). Rows are users x periods with columns user_id,
/// arm, [time], covariates, y1..ym.
Generated generate(const GenerateOptions& options);

/// Schema of generate()'s output.
Schema generated_schema(const GenerateOptions& options);

}  // namespace causalols
