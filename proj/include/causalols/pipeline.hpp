#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalols/compress.hpp"
#include "causalols/data_frame.hpp"
#include "causalols/effects.hpp"
#include "causalols/model_spec.hpp"
#include "causalols/solver.hpp"

namespace causalols {

// A spec file: the model spec fields plus optional "schema" (column kinds)
// and "compression_keys" (columns later queries may group by).
struct AnalysisConfig {
  ModelSpec spec;
  Schema schema;
  std::vector<std::string> compression_keys;
};

AnalysisConfig config_from_json(const nlohmann::json& j);
AnalysisConfig load_config(const std::string& path);

struct PhaseTimings {
  double load = 0.0;
  double matrix = 0.0;
  double compress = 0.0;
  double fit = 0.0;
};

/// Load -> model matrix -> compress -> fit, once. Queries never refit.
struct Analysis {
  ModelSpec spec;
  std::shared_ptr<const Dataset> data;
  CompressedDataset compressed;
  FittedModel model;
  PhaseTimings timings;

  std::vector<EffectEstimate> query(const EffectQuery& q) const;
  nlohmann::json diagnostics() const;
};

Analysis run_pipeline(std::shared_ptr<const Dataset> data, const AnalysisConfig& config,
                      CompressOptions options = {});

}  // namespace causalols
