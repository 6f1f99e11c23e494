#pragma once

#include <string>
#include <vector>

#include "causalols/pipeline.hpp"

namespace causalols::bench {

struct BenchOptions {
  std::vector<std::size_t> sizes{100'000, 1'000'000};
  int arms = 8;
  int metrics = 10;
  int groups = 10;  // levels of the CATE grouping variable
  int repeat = 1;
  std::uint64_t seed = 2024;
  std::string out_dir = "bench_out";
  bool keep_csv = false;
};

struct TimingRow {
  std::size_t n = 0;
  std::string phase;
  double seconds = 0.0;
  int repetition = 0;
};

struct BenchResult {
  std::vector<TimingRow> rows;
  std::size_t ate_count = 0;   // estimates emitted by the last ATE phase
  std::size_t cate_count = 0;  // estimates emitted by the last CATE phase
  std::size_t fit_count = 0;   // fits per (size, repetition)
  std::string csv_path;
  std::string plot_path;
};

inline const std::vector<std::string> kPhases{"load", "matrix", "compress", "fit", "ate", "cate"};

/// Rough peak bytes for one benchmark size.
std::size_t estimate_bytes(std::size_t n, const BenchOptions& o);

/// Model spec used by the benchmark: intercept, arm, segment, device, tenure
/// and arm x tenure.
AnalysisConfig bench_config(const BenchOptions& o);

BenchResult run(const BenchOptions& o);

/// Log-log time-vs-n chart, one line per phase (median over repetitions).
std::string render_scaling_svg(const std::vector<TimingRow>& rows);

}  // namespace causalols::bench
