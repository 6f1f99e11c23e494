// causalols: generate synthetic experiments, analyze them, verify against the
// baseline path, benchmark, or serve live effect queries over HTTP.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "bench_harness.hpp"
#include "causalols/error.hpp"
#include "causalols/generate.hpp"
#include "causalols/pipeline.hpp"
#include "causalols/reference.hpp"
#include "causalols/service.hpp"

namespace {

using namespace causalols;

constexpr double kVerifyTolerance = 1e-10;

struct AnalyzeArgs {
  std::string data;
  std::string spec;
  std::vector<std::string> outcomes;
  std::vector<std::string> arms;
  std::vector<std::string> group_by;
  std::string covariance = "homoskedastic";
  double level = 0.95;
  bool verify = false;
  bool no_compress = false;
  std::string json_out;
  std::string format = "both";
};

void print_table(const std::vector<EffectEstimate>& rows, std::ostream& os) {
  os << std::left << std::setw(10) << "outcome" << std::setw(10) << "arm" << std::setw(18) << "group"
     << std::right << std::setw(13) << "estimate" << std::setw(13) << "std_error" << std::setw(13)
     << "ci_low" << std::setw(13) << "ci_high" << std::setw(11) << "p_value" << std::setw(10) << "n"
     << "  support\n";
  for (const auto& e : rows) {
    std::string group;
    for (const auto& k : e.group_key) group += (group.empty() ? "" : "/") + k;
    if (group.empty()) group = "(all)";
    os << std::left << std::setw(10) << e.outcome << std::setw(10) << e.arm << std::setw(18) << group
       << std::right << std::setprecision(6) << std::fixed << std::setw(13) << e.estimate
       << std::setw(13) << e.std_error << std::setw(13) << e.ci_low << std::setw(13) << e.ci_high
       << std::setprecision(4) << std::setw(11) << e.p_value << std::setw(10) << e.n_group << "  "
       << to_string(e.arm_support) << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

int run_generate(const GenerateOptions& opts, const std::string& out) {
  const Generated g = generate(opts);
  write_csv(g.data, out);
  std::ofstream truth(out + ".truth.json");
  if (!truth) fail(ErrorKind::data, "cannot write truth file for '" + out + "'");
  truth << g.truth.dump(2) << '\n';
  std::cerr << "wrote " << g.data.n_rows() << " rows to " << out << " (truth: " << out
            << ".truth.json)\n";
  return 0;
}

int run_analyze(const AnalyzeArgs& args) {
  const AnalysisConfig cfg = load_config(args.spec);
  auto data = std::make_shared<const Dataset>(load_csv(args.data, cfg.schema));
  CompressOptions copt;
  copt.enabled = !args.no_compress;
  const Analysis a = run_pipeline(data, cfg, copt);

  std::vector<std::string> outcomes = args.outcomes.empty() ? cfg.spec.outcomes : args.outcomes;
  std::vector<std::string> arms = args.arms;
  if (arms.empty()) {
    for (const auto& l : a.compressed.treatment_levels) {
      if (l != cfg.spec.reference) arms.push_back(l);
    }
  }
  const CovarianceType ct = parse_covariance(args.covariance, cfg.spec.cluster_key.value_or(""));

  std::vector<EffectEstimate> all;
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (const auto& y : outcomes) {
    for (const auto& arm : arms) {
      EffectQuery q{y, arm, args.group_by, ct, args.level};
      auto fast = a.query(q);
      if (args.verify) {
        const auto ref = reference_path_effects(*data, cfg.spec, q);
        if (ref.size() != fast.size()) {
          ++mismatches;
        } else {
          for (std::size_t i = 0; i < ref.size(); ++i) {
            const double d = std::max(std::fabs(ref[i].estimate - fast[i].estimate),
                                      std::fabs(ref[i].std_error - fast[i].std_error));
            worst = std::max(worst, d);
            if (!(d <= kVerifyTolerance) || ref[i].group_key != fast[i].group_key) ++mismatches;
          }
        }
      }
      all.insert(all.end(), fast.begin(), fast.end());
    }
  }

  nlohmann::json doc = {{"schema_version", kSchemaVersion},
                        {"diagnostics", a.diagnostics()},
                        {"estimates", nlohmann::json::array()}};
  for (const auto& e : all) doc["estimates"].push_back(to_json(e));
  if (args.verify) {
    doc["verify"] = {{"max_abs_diff", worst}, {"tolerance", kVerifyTolerance}, {"mismatches", mismatches}};
  }

  if (args.format == "table" || args.format == "both") print_table(all, std::cout);
  if (args.format == "json" || args.format == "both") std::cout << doc.dump(2) << '\n';
  if (!args.json_out.empty()) {
    std::ofstream f(args.json_out);
    if (!f) fail(ErrorKind::data, "cannot write '" + args.json_out + "'");
    f << doc.dump(2) << '\n';
  }
  if (args.verify) {
    std::cerr << "verify: max |fast - reference| = " << worst << " over " << all.size()
              << " estimates\n";
    if (mismatches > 0) {
      fail(ErrorKind::verify, "fast path disagrees with the reference path on " +
                                  std::to_string(mismatches) + " estimates");
    }
  }
  return 0;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    double v = 0.0;
    try {
      v = std::stod(item);
    } catch (const std::exception&) {
      fail(ErrorKind::config, "bad size '" + item + "' in --sizes");
    }
    if (!(v >= 1.0)) fail(ErrorKind::config, "bad size '" + item + "' in --sizes");
    out.push_back(static_cast<std::size_t>(std::llround(v)));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-model treatment effects via counterfactual scoring"};
  app.require_subcommand(1);

  GenerateOptions gen;
  std::string gen_out;
  std::string gen_covariates;
  auto* g = app.add_subcommand("generate", "Write a synthetic experiment CSV and a truth sidecar");
  g->add_option("--users", gen.users, "Number of users")->required();
  g->add_option("--arms", gen.arms, "Arms including control")->default_val(2);
  g->add_option("--metrics", gen.metrics, "Outcome columns y1..ym")->default_val(1);
  g->add_option("--covariates", gen_covariates, "e.g. country:cat:10,tenure:num,visits:int:12");
  g->add_option("--periods", gen.periods, "Observations per user")->default_val(1);
  g->add_option("--seed", gen.seed, "RNG seed")->default_val(1);
  g->add_option("--ate", gen.ate, "True effect of arm T1")->default_val(0.3);
  g->add_option("--noise", gen.noise_sd, "Noise standard deviation")->default_val(1.0);
  g->add_option("--user-sd", gen.user_sd, "Per-user random intercept sd")->default_val(0.0);
  g->add_option("--out", gen_out, "Output CSV path")->required();

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Fit once and report ATE/CATE/DTE estimates");
  a->add_option("--data", an.data, "CSV data file")->required();
  a->add_option("--spec", an.spec, "Model spec JSON")->required();
  a->add_option("--outcome", an.outcomes, "Outcome(s); default all")->delimiter(',');
  a->add_option("--arm", an.arms, "Arm(s); default all non-reference")->delimiter(',');
  a->add_option("--group-by", an.group_by, "Grouping column(s); empty for ATE")->delimiter(',');
  a->add_option("--covariance", an.covariance, "homoskedastic | HC0 | HC1 | CR1[(key)]");
  a->add_option("--level", an.level, "Confidence level")->default_val(0.95);
  a->add_flag("--verify", an.verify, "Diff against the unoptimized reference path");
  a->add_flag("--no-compress", an.no_compress, "Skip sufficient-statistic compression");
  a->add_option("--json-out", an.json_out, "Also write JSON to this file");
  a->add_option("--format", an.format, "table | json | both")
      ->check(CLI::IsMember({"table", "json", "both"}));

  bench::BenchOptions bo;
  std::string sizes = "1e5,1e6";
  auto* b = app.add_subcommand("bench", "Time load/matrix/compress/fit/ATE/CATE phases");
  b->add_option("--sizes", sizes, "Comma-separated sample sizes")->default_val("1e5,1e6");
  b->add_option("--arms", bo.arms, "Arms including control")->default_val(8);
  b->add_option("--metrics", bo.metrics, "Outcomes")->default_val(10);
  b->add_option("--groups", bo.groups, "Levels of the CATE grouping variable")->default_val(10);
  b->add_option("--repeat", bo.repeat, "Repetitions per size")->default_val(1);
  b->add_option("--seed", bo.seed, "RNG seed")->default_val(2024);
  b->add_option("--out", bo.out_dir, "Output directory")->default_val("bench_out");
  b->add_flag("--keep-csv", bo.keep_csv, "Keep generated CSV files");

  ServiceConfig sc = ServiceConfig::from_env();
  auto* s = app.add_subcommand("serve", "Serve the session/effects HTTP API");
  s->add_option("--host", sc.host, "Listen address");
  s->add_option("--port", sc.port, "Listen port");
  s->add_option("--max-sessions", sc.max_sessions, "Maximum live sessions");
  s->add_option("--max-rows", sc.max_rows, "Maximum rows per dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::config);
  }

  try {
    if (*g) {
      gen.covariates = parse_covariates(gen_covariates);
      return run_generate(gen, gen_out);
    }
    if (*a) return run_analyze(an);
    if (*b) {
      bo.sizes = parse_sizes(sizes);
      const auto r = bench::run(bo);
      std::cout << "n,phase,seconds,repetition\n";
      for (const auto& row : r.rows) {
        std::cout << row.n << ',' << row.phase << ',' << row.seconds << ',' << row.repetition << '\n';
      }
      std::cerr << "ATE estimates: " << r.ate_count << ", CATE estimates: " << r.cate_count
                << "\nwrote " << r.csv_path << " and " << r.plot_path << '\n';
      return 0;
    }
    if (*s) {
      SessionStore store(sc);
      HttpService http(store);
      if (http.bind(sc.host, sc.port) < 0) {
        std::cerr << "error: cannot bind " << sc.host << ":" << sc.port << '\n';
        return exit_code(ErrorKind::config);
      }
      std::cerr << "listening on http://" << sc.host << ":" << http.port() << '\n';
      return http.serve() ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
