#include <gtest/gtest.h>

#include <random>

#include "causalols/error.hpp"
#include "causalols/inference.hpp"
#include "helpers.hpp"

using namespace causalols;

TEST(Covariance, ParseNames) {
  EXPECT_EQ(parse_covariance("hc1"), CovarianceType::hc1());
  EXPECT_EQ(parse_covariance("Homoskedastic"), CovarianceType::homoskedastic());
  EXPECT_EQ(parse_covariance(""), CovarianceType::homoskedastic());
  EXPECT_EQ(parse_covariance("CR1", "user"), CovarianceType::cr1("user"));
  EXPECT_EQ(parse_covariance("CR1(store)", "user"), CovarianceType::cr1("store"));
  EXPECT_EQ(CovarianceType::cr1("user").name(), "CR1(user)");
  EXPECT_THROW(parse_covariance("HC3"), Error);
}

TEST(Covariance, PerfectFitGivesZero) {
  const Dataset ds({"x", "user", "y"}, {oracle::categorical({"C", "C", "T", "T", "C", "T"}),
                                        oracle::categorical({"a", "b", "a", "b", "c", "c"}),
                                        oracle::numeric({1, 1, 3, 3, 1, 3})});
  ModelSpec s;
  s.outcomes = {"y"};
  s.treatment = "x";
  s.reference = "C";
  s.terms = {Term::intercept(), Term::categorical("x")};
  s.cluster_key = "user";
  const auto e = helpers::run(ds, s, {});
  for (const auto& ct : helpers::all_covariances(s)) {
    EXPECT_LE(cov_beta(e.fm, e.cd, 0, ct)->cwiseAbs().maxCoeff(), 1e-20) << ct.name();
  }
}

TEST(Covariance, Hc0AgreesWithHomoskedasticUnderIidNoise) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  const std::size_t n = 10000;
  std::vector<std::string> x(n);
  std::vector<double> w(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng() % 2 ? "T" : "C";
    w[i] = z(rng);
    y[i] = 0.3 * (x[i] == "T") + w[i] + z(rng);
  }
  const Dataset ds({"x", "w", "y"}, {oracle::categorical(x), oracle::numeric(w), oracle::numeric(y)});
  ModelSpec s;
  s.outcomes = {"y"};
  s.treatment = "x";
  s.reference = "C";
  s.terms = {Term::intercept(), Term::categorical("x"), Term::numeric("w")};
  const auto e = helpers::run(ds, s, {});
  const auto h = cov_beta(e.fm, e.cd, 0, CovarianceType::homoskedastic());
  const auto r = cov_beta(e.fm, e.cd, 0, CovarianceType::hc0());
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double ratio = std::sqrt((*r)(c, c) / (*h)(c, c));
    EXPECT_GE(ratio, 0.9);
    EXPECT_LE(ratio, 1.1);
  }
}

TEST(Covariance, DenseSandwichOracles) {
  std::mt19937_64 rng(300);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = oracle::sandwich_problem(rng, 300);
    const auto e = helpers::run(p.data, p.spec, {});
    const auto f = oracle::dense_fit(oracle::dense_design(p.data, p.spec), oracle::column_vector(p.data, "y"));
    for (const auto& ct : helpers::all_covariances(p.spec)) {
      const auto v = cov_beta(e.fm, e.cd, 0, ct);
      ASSERT_LE(oracle::max_rel_diff(*v, helpers::dense_cov(f, ct, p.data)), 1e-8) << ct.name();
    }
  }
}

TEST(Covariance, SymmetricNonNegativeDiagonal) {
  std::mt19937_64 rng(301);
  for (int trial = 0; trial < 30; ++trial) {
    auto [p, e] = helpers::full_rank_problem(rng, {.min_n = 50, .max_n = 1500});
    for (std::size_t j = 0; j < p.spec.outcomes.size(); ++j) {
      for (const auto& ct : helpers::all_covariances(p.spec)) {
        const auto v = cov_beta(e.fm, e.cd, j, ct);
        ASSERT_LE((*v - v->transpose()).cwiseAbs().maxCoeff(), 1e-10);
        ASSERT_GE(v->diagonal().minCoeff(), 0.0);
      }
    }
  }
}

TEST(Covariance, Cr1WithSingletonClustersEqualsScaledHc0) {
  std::mt19937_64 rng(302);
  auto p = oracle::sandwich_problem(rng, 400);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < p.data.n_rows(); ++i) ids.push_back("r" + std::to_string(i));
  p.data = p.data.with_column("user", oracle::categorical(ids));
  const auto e = helpers::run(p.data, p.spec, {});
  const auto hc0 = cov_beta(e.fm, e.cd, 0, CovarianceType::hc0());
  const auto cr1 = cov_beta(e.fm, e.cd, 0, CovarianceType::cr1("user"));
  const double n = 400.0, k = 4.0, c = 400.0;
  const double factor = c / (c - 1.0) * (n - 1.0) / (n - k);
  // n == C, so the factor collapses to n / (n - p), the HC1 factor
  EXPECT_DOUBLE_EQ(factor, n / (n - k));
  EXPECT_LE(oracle::max_rel_diff(*cr1, *hc0 * factor), 1e-12);
  EXPECT_LE(oracle::max_rel_diff(*cr1, *cov_beta(e.fm, e.cd, 0, CovarianceType::hc1())), 1e-12);
}

TEST(Covariance, PointEstimatesUnaffected) {
  std::mt19937_64 rng(303);
  const auto p = oracle::sandwich_problem(rng, 300);
  const auto e = helpers::run(p.data, p.spec, {});
  const Eigen::MatrixXd before = e.fm.beta;
  EffectQuery q{"y", "T", {}, CovarianceType::homoskedastic(), 0.95};
  const double est = ate(e.fm, e.cd, p.spec, q).estimate;
  for (const auto& ct : helpers::all_covariances(p.spec)) {
    cov_beta(e.fm, e.cd, 0, ct);
    q.covariance = ct;
    EXPECT_EQ(ate(e.fm, e.cd, p.spec, q).estimate, est);
  }
  EXPECT_TRUE(e.fm.beta == before);
}

TEST(Covariance, CacheReturnsSameMatrix) {
  std::mt19937_64 rng(304);
  const auto p = oracle::sandwich_problem(rng, 300);
  const auto e = helpers::run(p.data, p.spec, {});
  const auto a = cov_beta(e.fm, e.cd, 0, CovarianceType::hc1());
  const auto b = cov_beta(e.fm, e.cd, 0, CovarianceType::hc1());
  EXPECT_EQ(a.get(), b.get());
  EXPECT_EQ(e.fm.covariance_cache->size(), 1u);
}

TEST(Covariance, Cr1Errors) {
  std::mt19937_64 rng(305);
  auto p = oracle::sandwich_problem(rng, 100);
  const auto e = helpers::run(p.data, p.spec, {});
  EXPECT_THROW(cov_beta(e.fm, e.cd, 0, CovarianceType::cr1("other")), Error);
  EXPECT_THROW(cov_beta(e.fm, e.cd, 3, CovarianceType::hc0()), Error);
  p.spec.cluster_key.reset();
  const auto e2 = helpers::run(p.data, p.spec, {});
  EXPECT_THROW(cov_beta(e2.fm, e2.cd, 0, CovarianceType::cr1("user")), Error);
  p.spec.cluster_key = "user";
  p.data = p.data.with_column("user", oracle::categorical(std::vector<std::string>(100, "one")));
  const auto e3 = helpers::run(p.data, p.spec, {});
  EXPECT_THROW(cov_beta(e3.fm, e3.cd, 0, CovarianceType::cr1("user")), Error);
}

TEST(Inference, NormalAndStudentT) {
  const Inference big = infer(1.96, 1.0, 1000, 998, 0.95);
  EXPECT_TRUE(big.normal_approximation);
  EXPECT_NEAR(big.p_value, 0.04999579, 1e-7);
  EXPECT_NEAR(big.ci_low, 1.96 - 1.959963985, 1e-8);
  const Inference small = infer(2.0, 1.0, 12, 10, 0.95);
  EXPECT_FALSE(small.normal_approximation);
  // t_{0.975, 10} = 2.228138852
  EXPECT_NEAR(small.ci_high, 2.0 + 2.228138852, 1e-8);
  EXPECT_NEAR(small.p_value, 0.07338803, 1e-7);
  const Inference zero = infer(0.0, 0.0, 1000, 998, 0.95);
  EXPECT_EQ(zero.p_value, 1.0);
  EXPECT_LE(zero.ci_low, 0.0);
  EXPECT_GE(zero.ci_high, 0.0);
}
