#include "bench_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "causalols/error.hpp"
#include "causalols/generate.hpp"
#include "causalols/kernels.hpp"

namespace causalols::bench {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::size_t available_bytes() {
  std::ifstream f("/proc/meminfo");
  std::string key;
  std::size_t kb = 0;
  std::string unit;
  while (f >> key >> kb >> unit) {
    if (key == "MemAvailable:") return kb * 1024;
  }
  return static_cast<std::size_t>(-1);
}

GenerateOptions generate_options(std::size_t n, const BenchOptions& o, int rep) {
  GenerateOptions g;
  g.users = n;
  g.arms = o.arms;
  g.metrics = o.metrics;
  g.covariates = {{"segment", CovariateKind::categorical, o.groups},
                  {"device", CovariateKind::categorical, 4},
                  {"tenure", CovariateKind::integer, 12}};
  g.seed = o.seed + static_cast<std::uint64_t>(rep);
  return g;
}

}  // namespace

std::size_t estimate_bytes(std::size_t n, const BenchOptions& o) {
  const std::size_t cols = static_cast<std::size_t>(o.metrics) + 5;
  // generated columns, CSV text twice while loading, loaded columns, the
  // sparse design plus its row-major copy during compression
  const std::size_t design_nnz = static_cast<std::size_t>(o.arms) * 2 + 6;
  return n * (cols * 8 * 2 + cols * 24 * 2 + design_nnz * 12 * 3);
}

AnalysisConfig bench_config(const BenchOptions& o) {
  nlohmann::json outcomes = nlohmann::json::array();
  for (int j = 1; j <= o.metrics; ++j) outcomes.push_back("y" + std::to_string(j));
  nlohmann::json spec = {
      {"outcomes", outcomes},
      {"treatment", "arm"},
      {"reference", kControlArm},
      {"terms",
       {{{"kind", "intercept"}},
        {{"kind", "categorical"}, {"column", "arm"}},
        {{"kind", "categorical"}, {"column", "segment"}},
        {{"kind", "categorical"}, {"column", "device"}},
        {{"kind", "numeric"}, {"column", "tenure"}},
        {{"kind", "interaction"},
         {"factors",
          {{{"kind", "categorical"}, {"column", "arm"}},
           {{"kind", "numeric"}, {"column", "tenure"}}}}}}},
  };
  return config_from_json({{"spec", spec}, {"compression_keys", {"segment", "device"}}});
}

BenchResult run(const BenchOptions& o) {
  if (o.repeat < 1) fail(ErrorKind::config, "--repeat must be at least 1");
  if (o.sizes.empty()) fail(ErrorKind::config, "--sizes must list at least one size");
  const std::size_t avail = available_bytes();
  for (std::size_t n : o.sizes) {
    const std::size_t need = estimate_bytes(n, o);
    if (need > avail) {
      fail(ErrorKind::config, "size " + std::to_string(n) + " needs about " +
                                  std::to_string(need >> 20) + " MiB; only " +
                                  std::to_string(avail >> 20) + " MiB available");
    }
  }

  std::filesystem::create_directories(o.out_dir);
  const AnalysisConfig cfg = bench_config(o);
  BenchResult result;

  std::vector<std::string> arms;
  for (int k = 1; k < o.arms; ++k) arms.push_back("T" + std::to_string(k));

  for (std::size_t n : o.sizes) {
    for (int rep = 0; rep < o.repeat; ++rep) {
      const GenerateOptions gen = generate_options(n, o, rep);
      const std::string csv = (std::filesystem::path(o.out_dir) /
                               ("data_" + std::to_string(n) + "_" + std::to_string(rep) + ".csv"))
                                  .string();
      write_csv(generate(gen).data, csv);

      double t0 = now_seconds();
      auto data = std::make_shared<const Dataset>(load_csv(csv, cfg.schema));
      result.rows.push_back({n, "load", now_seconds() - t0, rep});
      if (!o.keep_csv) std::filesystem::remove(csv);

      const std::size_t fits_before = fit_invocations();
      const Analysis a = run_pipeline(data, cfg);
      result.rows.push_back({n, "matrix", a.timings.matrix, rep});
      result.rows.push_back({n, "compress", a.timings.compress, rep});
      result.rows.push_back({n, "fit", a.timings.fit, rep});

      std::size_t ates = 0;
      t0 = now_seconds();
      for (const auto& arm : arms) {
        for (const auto& y : cfg.spec.outcomes) {
          ates += a.query({y, arm, {}, CovarianceType::hc1(), 0.95}).size();
        }
      }
      result.rows.push_back({n, "ate", now_seconds() - t0, rep});

      std::size_t cates = 0;
      t0 = now_seconds();
      for (const auto& arm : arms) {
        for (const auto& y : cfg.spec.outcomes) {
          cates += a.query({y, arm, {"segment"}, CovarianceType::hc1(), 0.95}).size();
        }
      }
      result.rows.push_back({n, "cate", now_seconds() - t0, rep});
      result.fit_count = fit_invocations() - fits_before;
      result.ate_count = ates;
      result.cate_count = cates;
    }
  }

  result.csv_path = (std::filesystem::path(o.out_dir) / "bench.csv").string();
  {
    std::ofstream f(result.csv_path);
    f << "n,phase,seconds,repetition\n";
    for (const auto& r : result.rows) f << r.n << ',' << r.phase << ',' << r.seconds << ',' << r.repetition << '\n';
  }
  result.plot_path = (std::filesystem::path(o.out_dir) / "scaling.svg").string();
  {
    std::ofstream f(result.plot_path);
    f << render_scaling_svg(result.rows);
  }
  {
    std::ofstream f(std::filesystem::path(o.out_dir) / "bench_meta.json");
    f << nlohmann::json{{"threads", kernels::max_threads()},
                        {"arms", o.arms},
                        {"metrics", o.metrics},
                        {"groups", o.groups},
                        {"repeat", o.repeat},
                        {"sizes", o.sizes},
                        {"ate_estimates", result.ate_count},
                        {"cate_estimates", result.cate_count},
                        {"fits_per_run", result.fit_count}}
             .dump(2)
      << '\n';
  }
  return result;
}

std::string render_scaling_svg(const std::vector<TimingRow>& rows) {
  std::map<std::string, std::map<std::size_t, std::vector<double>>> series;
  for (const auto& r : rows) series[r.phase][r.n].push_back(r.seconds);

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  std::map<std::string, std::vector<std::pair<double, double>>> points;
  for (auto& [phase, by_n] : series) {
    for (auto& [n, ts] : by_n) {
      std::sort(ts.begin(), ts.end());
      const double med = ts[ts.size() / 2];
      const double x = std::log10(static_cast<double>(n));
      const double y = std::log10(std::max(med, 1e-6));
      points[phase].emplace_back(x, y);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (points.empty()) return "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n";
  if (xmax - xmin < 1e-9) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-9) { ymin -= 0.5; ymax += 0.5; }
  xmin = std::floor(xmin); xmax = std::ceil(xmax);
  ymin = std::floor(ymin); ymax = std::ceil(ymax);

  const double w = 640, h = 420, left = 70, right = 150, top = 30, bottom = 50;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (w - left - right); };
  auto py = [&](double y) { return h - bottom - (y - ymin) / (ymax - ymin) * (h - top - bottom); };
  const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << w / 2 - 60 << "\" y=\"18\">Time to compute treatment effects</text>\n";
  for (double x = xmin; x <= xmax + 1e-9; x += 1) {
    s << "<line x1=\"" << px(x) << "\" y1=\"" << py(ymin) << "\" x2=\"" << px(x) << "\" y2=\"" << py(ymax)
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << px(x) - 12 << "\" y=\"" << h - bottom + 18 << "\">1e"
      << static_cast<int>(x) << "</text>\n";
  }
  for (double y = ymin; y <= ymax + 1e-9; y += 1) {
    s << "<line x1=\"" << px(xmin) << "\" y1=\"" << py(y) << "\" x2=\"" << px(xmax) << "\" y2=\"" << py(y)
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << 20 << "\" y=\"" << py(y) + 4 << "\">1e"
      << static_cast<int>(y) << " s</text>\n";
  }
  s << "<text x=\"" << (left + w - right) / 2 - 40 << "\" y=\"" << h - 10 << "\">users (n)</text>\n";
  int idx = 0;
  for (const auto& phase : kPhases) {
    auto it = points.find(phase);
    if (it == points.end()) continue;
    const char* color = palette[idx % 6];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : it->second) s << px(x) << ',' << py(y) << ' ';
    s << "\"/>\n";
    for (const auto& [x, y] : it->second) {
      s << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    s << "<text x=\"" << w - right + 15 << "\" y=\"" << top + 20 + 18 * idx << "\" fill=\"" << color
      << "\">" << phase << "</text>\n";
    ++idx;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace causalols::bench
