#include "causalols/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "causalols/design.hpp"
#include "causalols/error.hpp"
#include "causalols/kernels.hpp"

namespace causalols {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

AnalysisConfig config_from_json(const nlohmann::json& j) {
  AnalysisConfig cfg;
  const nlohmann::json& spec_json = j.contains("spec") ? j.at("spec") : j;
  cfg.spec = spec_from_json(spec_json);
  if (j.contains("compression_keys")) {
    const auto& keys = j.at("compression_keys");
    if (!keys.is_array()) fail(ErrorKind::config, "field 'compression_keys' must be an array");
    for (const auto& k : keys) {
      if (!k.is_string()) fail(ErrorKind::config, "field 'compression_keys' must hold strings");
      cfg.compression_keys.push_back(k.get<std::string>());
    }
  }
  cfg.schema = derive_schema(cfg.spec, cfg.compression_keys);
  if (j.contains("schema")) {
    for (const auto& [name, kind] : schema_from_json(j.at("schema"))) cfg.schema[name] = kind;
  }
  return cfg;
}

AnalysisConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::config, "cannot open spec file '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "spec file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::vector<EffectEstimate> Analysis::query(const EffectQuery& q) const {
  for (const auto& g : q.grouping) {
    if (!data->has_column(g)) fail(ErrorKind::config, "unknown grouping column '" + g + "'");
  }
  return effects(model, compressed, spec, q);
}

nlohmann::json Analysis::diagnostics() const {
  return {
      {"n", compressed.n},
      {"p", model.p},
      {"G", compressed.n_groups()},
      {"m", model.outcomes.size()},
      {"compression_ratio", compressed.compression_ratio()},
      {"dof", model.dof},
      {"columns", model.column_names},
      {"outcomes", model.outcomes},
      {"arms", compressed.treatment_levels},
      {"reference", spec.reference},
      {"compression_keys",
       [&] {
         std::vector<std::string> names;
         for (const auto& k : compressed.keys) names.push_back(k.name);
         return names;
       }()},
      {"cluster_key", compressed.cluster_key ? nlohmann::json(*compressed.cluster_key)
                                             : nlohmann::json(nullptr)},
      {"timings",
       {{"load", timings.load},
        {"matrix", timings.matrix},
        {"compress", timings.compress},
        {"fit", timings.fit}}},
      {"threads", kernels::max_threads()},
  };
}

Analysis run_pipeline(std::shared_ptr<const Dataset> data, const AnalysisConfig& config,
                      CompressOptions options) {
  Analysis a;
  a.spec = config.spec;
  a.data = std::move(data);
  for (const auto& k : config.compression_keys) a.data->column(k);

  auto t0 = std::chrono::steady_clock::now();
  ModelMatrix mm = build_model_matrix(*a.data, a.spec);
  a.timings.matrix = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  a.compressed = compress(*a.data, mm, a.spec, config.compression_keys, options);
  a.timings.compress = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  a.model = fit(a.compressed);
  a.timings.fit = seconds_since(t0);
  return a;
}

}  // namespace causalols
