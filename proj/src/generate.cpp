#include "causalols/generate.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "causalols/error.hpp"

namespace causalols {

std::vector<CovariateSpec> parse_covariates(const std::string& s) {
  std::vector<CovariateSpec> out;
  if (s.empty()) return out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::vector<std::string> parts;
    std::stringstream is(item);
    std::string p;
    while (std::getline(is, p, ':')) parts.push_back(p);
    if (parts.size() < 2 || parts[0].empty()) {
      fail(ErrorKind::config, "covariate '" + item + "' must look like name:cat:L, name:num or name:int:K");
    }
    CovariateSpec c;
    c.name = parts[0];
    if (parts[1] == "cat" || parts[1] == "int") {
      if (parts.size() != 3) fail(ErrorKind::config, "covariate '" + item + "' needs a level count");
      c.kind = parts[1] == "cat" ? CovariateKind::categorical : CovariateKind::integer;
      try {
        c.levels = std::stoi(parts[2]);
      } catch (const std::exception&) {
        fail(ErrorKind::config, "covariate '" + item + "' has a bad level count");
      }
      if (c.levels < 2) fail(ErrorKind::config, "covariate '" + item + "' needs at least 2 levels");
    } else if (parts[1] == "num") {
      c.kind = CovariateKind::numeric;
    } else {
      fail(ErrorKind::config, "covariate '" + item + "' has unknown kind '" + parts[1] + "'");
    }
    out.push_back(std::move(c));
  }
  return out;
}

Schema generated_schema(const GenerateOptions& o) {
  Schema s;
  s["user_id"] = ColumnKind::integer_key;
  s["arm"] = ColumnKind::categorical;
  if (o.periods > 1) s["time"] = ColumnKind::numeric;
  for (const auto& c : o.covariates) {
    s[c.name] = c.kind == CovariateKind::categorical ? ColumnKind::categorical : ColumnKind::numeric;
  }
  for (int j = 1; j <= o.metrics; ++j) s["y" + std::to_string(j)] = ColumnKind::numeric;
  return s;
}

Generated generate(const GenerateOptions& o) {
  if (o.arms < 2) fail(ErrorKind::config, "--arms must be at least 2");
  if (o.metrics < 1) fail(ErrorKind::config, "--metrics must be at least 1");
  if (o.periods < 1) fail(ErrorKind::config, "--periods must be at least 1");
  if (o.users < static_cast<std::size_t>(o.arms)) {
    fail(ErrorKind::config, "--users must be at least --arms");
  }
  if (!(o.noise_sd >= 0.0) || !(o.user_sd >= 0.0)) {
    fail(ErrorKind::config, "noise scales must be non-negative");
  }

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  Generated g;
  g.arm_levels.push_back(kControlArm);
  for (int k = 1; k < o.arms; ++k) g.arm_levels.push_back("T" + std::to_string(k));

  // Fixed process parameters, drawn first so they depend only on the seed.
  const int m = o.metrics;
  std::vector<double> intercept(m);
  for (int j = 0; j < m; ++j) intercept[j] = 1.0 + 0.25 * j;
  std::vector<std::vector<std::vector<double>>> coef(o.covariates.size());
  for (std::size_t c = 0; c < o.covariates.size(); ++c) {
    const int width = o.covariates[c].kind == CovariateKind::categorical ? o.covariates[c].levels : 1;
    coef[c].assign(m, std::vector<double>(width));
    for (int j = 0; j < m; ++j) {
      for (int l = 0; l < width; ++l) coef[c][j][l] = 0.5 * std_normal(rng);
    }
  }
  std::vector<double> effect(o.arms, 0.0);
  for (int k = 1; k < o.arms; ++k) effect[k] = o.ate * (1.0 + 0.1 * (k - 1));

  const std::size_t rows = o.users * static_cast<std::size_t>(o.periods);
  IntegerKeyColumn user_id;
  user_id.values.reserve(rows);
  std::vector<std::int32_t> arm_of_row;
  arm_of_row.reserve(rows);
  NumericColumn time;
  std::vector<std::vector<double>> cov_values(o.covariates.size());
  std::vector<std::vector<double>> y(m);
  for (auto& v : cov_values) v.reserve(rows);
  for (auto& v : y) v.reserve(rows);

  std::uniform_int_distribution<int> pick_arm(0, o.arms - 1);
  std::vector<double> user_cov(o.covariates.size());
  for (std::size_t u = 0; u < o.users; ++u) {
    const int arm = pick_arm(rng);
    for (std::size_t c = 0; c < o.covariates.size(); ++c) {
      const auto& spec = o.covariates[c];
      if (spec.kind == CovariateKind::numeric) {
        user_cov[c] = std_normal(rng);
      } else {
        user_cov[c] = std::uniform_int_distribution<int>(0, spec.levels - 1)(rng);
      }
    }
    const double user_effect = o.user_sd * std_normal(rng);
    for (int t = 0; t < o.periods; ++t) {
      user_id.values.push_back(static_cast<std::int64_t>(u));
      arm_of_row.push_back(arm);
      if (o.periods > 1) time.values.push_back(t);
      for (std::size_t c = 0; c < o.covariates.size(); ++c) cov_values[c].push_back(user_cov[c]);
      for (int j = 0; j < m; ++j) {
        double v = intercept[j] + effect[arm] + user_effect;
        for (std::size_t c = 0; c < o.covariates.size(); ++c) {
          const auto& spec = o.covariates[c];
          if (spec.kind == CovariateKind::categorical) v += coef[c][j][static_cast<int>(user_cov[c])];
          else v += coef[c][j][0] * user_cov[c];
        }
        v += o.noise_sd * std_normal(rng);
        y[j].push_back(v);
      }
    }
  }

  // Level tables must be lexicographically sorted; remap arm codes.
  auto categorical = [](const std::vector<std::string>& names, const std::vector<std::int32_t>& raw) {
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::int32_t> remap(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      remap[i] = static_cast<std::int32_t>(
          std::lower_bound(sorted.begin(), sorted.end(), names[i]) - sorted.begin());
    }
    CategoricalColumn col;
    col.levels = std::move(sorted);
    col.codes.resize(raw.size());
    for (std::size_t r = 0; r < raw.size(); ++r) col.codes[r] = remap[raw[r]];
    return col;
  };

  std::vector<std::string> names{"user_id", "arm"};
  std::vector<Column> cols;
  cols.emplace_back(std::move(user_id));
  cols.emplace_back(categorical(g.arm_levels, arm_of_row));
  if (o.periods > 1) {
    names.push_back("time");
    cols.emplace_back(std::move(time));
  }
  for (std::size_t c = 0; c < o.covariates.size(); ++c) {
    names.push_back(o.covariates[c].name);
    if (o.covariates[c].kind == CovariateKind::categorical) {
      std::vector<std::string> levels;
      for (int l = 0; l < o.covariates[c].levels; ++l) {
        levels.push_back(o.covariates[c].name + "_" + std::to_string(l));
      }
      std::vector<std::int32_t> raw(cov_values[c].begin(), cov_values[c].end());
      cols.emplace_back(categorical(levels, raw));
    } else {
      cols.emplace_back(NumericColumn{std::move(cov_values[c])});
    }
  }
  for (int j = 0; j < m; ++j) {
    names.push_back("y" + std::to_string(j + 1));
    cols.emplace_back(NumericColumn{std::move(y[j])});
  }
  g.data = Dataset(std::move(names), std::move(cols));

  nlohmann::json ate = nlohmann::json::object();
  for (int k = 1; k < o.arms; ++k) {
    nlohmann::json per_metric = nlohmann::json::object();
    for (int j = 1; j <= m; ++j) per_metric["y" + std::to_string(j)] = effect[k];
    ate[g.arm_levels[k]] = per_metric;
  }
  g.truth = {{"ate", ate},
             {"reference", kControlArm},
             {"noise_sd", o.noise_sd},
             {"user_sd", o.user_sd},
             {"users", o.users},
             {"periods", o.periods},
             {"seed", o.seed}};
  return g;
}

}  // namespace causalols
