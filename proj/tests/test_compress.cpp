#include <gtest/gtest.h>

#include <random>

#include "causalols/error.hpp"
#include "helpers.hpp"

using namespace causalols;

namespace {

ModelSpec intercept_arm_spec() {
  ModelSpec s;
  s.outcomes = {"y"};
  s.treatment = "x";
  s.reference = "C";
  s.terms = {Term::intercept(), Term::categorical("x")};
  return s;
}

}  // namespace

TEST(Compress, IdenticalRowsCollapse) {
  // the level table still lists the reference arm
  CategoricalColumn x;
  x.levels = {"C", "T"};
  x.codes = {1, 1, 1};
  const Dataset ds2({"x", "y"}, {Column(x), oracle::numeric({1, 2, 3})});
  const ModelSpec s = intercept_arm_spec();
  const ModelMatrix mm = build_model_matrix(ds2, s);
  const CompressedDataset cd = compress(ds2, mm, s, {});
  ASSERT_EQ(cd.n_groups(), 1u);
  EXPECT_EQ(cd.weights[0], 3.0);
  EXPECT_EQ(cd.sum_y(0, 0), 6.0);
  EXPECT_EQ(cd.sum_y2(0, 0), 14.0);
  EXPECT_EQ(cd.n, 3u);
}

TEST(Compress, DistinctRowsAreNoOp) {
  const Dataset ds({"x", "w", "y"}, {oracle::categorical({"C", "T", "C", "T"}),
                                     oracle::numeric({1, 2, 3, 4}), oracle::numeric({0.5, 1.5, -2, 7})});
  ModelSpec s = intercept_arm_spec();
  s.terms.push_back(Term::numeric("w"));
  const ModelMatrix mm = build_model_matrix(ds, s);
  const CompressedDataset cd = compress(ds, mm, s, {});
  ASSERT_EQ(cd.n_groups(), 4u);
  for (std::size_t g = 0; g < 4; ++g) {
    EXPECT_EQ(cd.weights[g], 1.0);
    const std::size_t r = std::find(cd.group_membership.begin(), cd.group_membership.end(), g) -
                          cd.group_membership.begin();
    const double y = ds.column("y").numeric().values[r];
    EXPECT_EQ(cd.sum_y(static_cast<Eigen::Index>(g), 0), y);
    EXPECT_EQ(cd.sum_y2(static_cast<Eigen::Index>(g), 0), y * y);
  }
}

TEST(Compress, BinaryTreatmentThreeLevelCovariate) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  const std::size_t n = 10000;
  std::vector<std::string> x(n), w(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng() % 2 ? "T" : "C";
    w[i] = "w" + std::to_string(rng() % 3);
    y[i] = (x[i] == "T" ? 0.4 : 0.0) + (w[i] == "w2" ? 1.0 : 0.0) + z(rng);
  }
  const Dataset ds({"x", "w", "y"}, {oracle::categorical(x), oracle::categorical(w), oracle::numeric(y)});
  ModelSpec s = intercept_arm_spec();
  s.terms.push_back(Term::categorical("w"));
  const auto compressed = helpers::run(ds, s, {});
  EXPECT_LE(compressed.cd.n_groups(), 6u);
  double total = 0.0;
  for (double wgt : compressed.cd.weights) total += wgt;
  EXPECT_EQ(total, static_cast<double>(n));

  const oracle::DenseFit dense = oracle::dense_fit(oracle::dense_design(ds, s), oracle::column_vector(ds, "y"));
  for (Eigen::Index c = 0; c < dense.beta.size(); ++c) {
    EXPECT_LE(oracle::rel_diff(compressed.fm.beta(c, 0), dense.beta[c]), 1e-10);
  }
}

TEST(Compress, ExactnessAgainstUncompressedFit) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 40; ++trial) {
    auto [p, e] = helpers::full_rank_problem(rng, {.min_n = 60, .max_n = 1000, .continuous_w = false});
    const auto u = helpers::run(p.data, p.spec, p.keys, false);
    double total = 0.0;
    for (double wgt : e.cd.weights) {
      ASSERT_GE(wgt, 1.0);
      total += wgt;
    }
    ASSERT_EQ(total, static_cast<double>(p.data.n_rows()));
    ASSERT_EQ(u.cd.n_groups(), p.data.n_rows());
    ASSERT_LE(oracle::max_rel_diff(e.fm.beta, u.fm.beta), 1e-8);
    for (std::size_t j = 0; j < p.spec.outcomes.size(); ++j) {
      for (const auto& ct : helpers::all_covariances(p.spec)) {
        const auto a = cov_beta(e.fm, e.cd, j, ct);
        const auto b = cov_beta(u.fm, u.cd, j, ct);
        ASSERT_LE(oracle::max_rel_diff(*a, *b), 1e-8) << ct.name();
      }
    }
  }
}

TEST(Compress, RowsDifferingOnlyInKeysStaySeparate) {
  const Dataset ds({"x", "k", "y"}, {oracle::categorical({"C", "T", "C", "T"}),
                                     oracle::categorical({"a", "a", "b", "b"}),
                                     oracle::numeric({1, 2, 3, 4})});
  const ModelSpec s = intercept_arm_spec();
  const ModelMatrix mm = build_model_matrix(ds, s);
  EXPECT_EQ(compress(ds, mm, s, {}).n_groups(), 2u);
  const CompressedDataset cd = compress(ds, mm, s, {"k"});
  EXPECT_EQ(cd.n_groups(), 4u);
  ASSERT_NE(cd.find_key("k"), nullptr);
  EXPECT_EQ(cd.find_key("k")->labels, (std::vector<std::string>{"a", "b"}));
}

TEST(Compress, StaleMatrixRejected) {
  const Dataset ds({"x", "y"}, {oracle::categorical({"C", "T"}), oracle::numeric({1, 2})});
  const ModelSpec s = intercept_arm_spec();
  const ModelMatrix mm = build_model_matrix(ds, s);
  const Dataset other = sort_by(ds, {"y"});
  try {
    compress(other, mm, s, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("stale"), std::string::npos);
  }
}

TEST(Compress, DeterministicCanonicalOrder) {
  std::mt19937_64 rng(1);
  auto [p, e] = helpers::full_rank_problem(rng, {.min_n = 500, .max_n = 500, .continuous_w = false});
  const auto again = helpers::run(p.data, p.spec, p.keys);
  EXPECT_EQ(e.cd.weights, again.cd.weights);
  EXPECT_TRUE(e.cd.sum_y == again.cd.sum_y);
  EXPECT_EQ(e.cd.group_membership, again.cd.group_membership);
}
