#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
CliResult cli(const std::string& args) {
  const std::string cmd = std::string(CAUSALOLS_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path tmp(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "causalols_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

const char* kSpec = R"({
  "outcomes": ["y1", "y2"], "treatment": "arm", "reference": "control",
  "terms": [{"kind": "intercept"}, {"kind": "categorical", "column": "arm"},
            {"kind": "categorical", "column": "country"}, {"kind": "numeric", "column": "tenure"},
            {"kind": "interaction", "factors": [{"kind": "categorical", "column": "arm"},
                                                {"kind": "numeric", "column": "tenure"}]}],
  "compression_keys": ["country"]})";

}  // namespace

TEST(Cli, GenerateIsByteIdentical) {
  const auto a = tmp("gen_a.csv"), b = tmp("gen_b.csv");
  ASSERT_EQ(cli("generate --users 1000 --arms 2 --seed 7 --out " + a.string()).code, 0);
  ASSERT_EQ(cli("generate --users 1000 --arms 2 --seed 7 --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_FALSE(slurp(a).empty());
  EXPECT_EQ(slurp(a.string() + ".truth.json"), slurp(b.string() + ".truth.json"));
}

TEST(Cli, TwoArmDifferenceInMeans) {
  const auto data = tmp("twoarm.csv"), spec = tmp("twoarm.json");
  write(data, "arm,y\ncontrol,1\ncontrol,2\ncontrol,3\nT,2\nT,4\nT,4.5\n");
  write(spec, R"({"outcomes":["y"],"treatment":"arm","reference":"control",
                  "terms":[{"kind":"intercept"},{"kind":"categorical","column":"arm"}]})");
  const CliResult r = cli("analyze --data " + data.string() + " --spec " + spec.string() + " --format json");
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  // (2 + 4 + 4.5)/3 - (1 + 2 + 3)/3
  EXPECT_NEAR(j["estimates"][0]["estimate"].get<double>(), 1.5, 1e-12);
}

TEST(Cli, VerifyOnTenThousandRows) {
  const auto data = tmp("verify.csv"), spec = tmp("verify.json");
  ASSERT_EQ(cli("generate --users 10000 --arms 3 --metrics 2 --covariates country:cat:5,tenure:int:6 --seed 3 --out " +
                data.string()).code, 0);
  write(spec, kSpec);
  const CliResult r = cli("analyze --data " + data.string() + " --spec " + spec.string() +
                    " --verify --group-by country --covariance HC1 --format table");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("verify: max"), std::string::npos);
}

TEST(Cli, CompressionDoesNotChangeEstimates) {
  const auto data = tmp("nocomp.csv"), spec = tmp("nocomp.json");
  ASSERT_EQ(cli("generate --users 3000 --arms 3 --metrics 2 --covariates country:cat:5,tenure:int:6 --seed 4 --out " +
                data.string()).code, 0);
  write(spec, kSpec);
  const std::string base = "analyze --data " + data.string() + " --spec " + spec.string() +
                           " --group-by country --covariance HC0 --format json";
  const CliResult a = cli(base);
  const CliResult b = cli(base + " --no-compress");
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  const json ja = json::parse(a.out), jb = json::parse(b.out);
  ASSERT_EQ(ja["estimates"].size(), jb["estimates"].size());
  EXPECT_LT(ja["diagnostics"]["G"].get<double>(), jb["diagnostics"]["G"].get<double>());
  for (std::size_t i = 0; i < ja["estimates"].size(); ++i) {
    EXPECT_NEAR(ja["estimates"][i]["estimate"].get<double>(), jb["estimates"][i]["estimate"].get<double>(), 1e-10);
    EXPECT_NEAR(ja["estimates"][i]["std_error"].get<double>(), jb["estimates"][i]["std_error"].get<double>(), 1e-10);
  }
}

TEST(Cli, MalformedSpecIsConfigError) {
  const auto data = tmp("bad.csv"), spec = tmp("bad.json");
  write(data, "arm,y\ncontrol,1\nT,2\n");
  write(spec, R"({"outcomes":["y"],"treatment":"arm","terms":[]})");
  const CliResult r = cli("analyze --data " + data.string() + " --spec " + spec.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("reference"), std::string::npos) << r.out;
  write(spec, "{oops");
  EXPECT_EQ(cli("analyze --data " + data.string() + " --spec " + spec.string()).code, 2);
  EXPECT_EQ(cli("analyze --bogus-flag").code, 2);
}

TEST(Cli, DataAndRankErrors) {
  const auto data = tmp("rank.csv"), spec = tmp("rank.json");
  write(data, "arm,y,w\ncontrol,1,1\nT,2,1\ncontrol,1.5,1\nT,3,1\n");
  write(spec, R"({"outcomes":["y"],"treatment":"arm","reference":"control",
                  "terms":[{"kind":"intercept"},{"kind":"categorical","column":"arm"},
                           {"kind":"numeric","column":"w"}]})");
  const CliResult rank = cli("analyze --data " + data.string() + " --spec " + spec.string());
  EXPECT_EQ(rank.code, 4) << rank.out;
  EXPECT_NE(rank.out.find("'w'"), std::string::npos) << rank.out;
  EXPECT_EQ(cli("analyze --data /nonexistent.csv --spec " + spec.string()).code, 3);
  write(data, "arm,y,w\ncontrol,inf,1\nT,2,1\n");
  EXPECT_EQ(cli("analyze --data " + data.string() + " --spec " + spec.string()).code, 3);
}

TEST(Cli, BenchRepeatRows) {
  const auto out = tmp("bench");
  const CliResult r = cli("bench --sizes 1e5 --repeat 3 --arms 8 --metrics 10 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string csv = slurp(out / "bench.csv");
  std::map<std::string, int> rows;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,phase,seconds,repetition");
  while (std::getline(in, line)) rows[line.substr(line.find(',') + 1, line.find(',', line.find(',') + 1) - line.find(',') - 1)]++;
  for (const char* phase : {"load", "matrix", "compress", "fit", "ate", "cate"}) EXPECT_EQ(rows[phase], 3) << phase;
  EXPECT_TRUE(fs::exists(out / "scaling.svg"));
  const json meta = json::parse(slurp(out / "bench_meta.json"));
  EXPECT_EQ(meta["ate_estimates"], 70);
  EXPECT_EQ(meta["cate_estimates"], 700);
  EXPECT_TRUE(meta.contains("threads"));
}

TEST(Cli, BenchMemoryGuard) {
  const CliResult r = cli("bench --sizes 1e12 --out " + tmp("guard").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("MiB"), std::string::npos) << r.out;
}
