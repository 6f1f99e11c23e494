#include <gtest/gtest.h>

#include <random>

#include "causalols/error.hpp"
#include "helpers.hpp"

using namespace causalols;

namespace {

ModelSpec arm_spec(std::vector<std::string> outcomes = {"y"}) {
  ModelSpec s;
  s.outcomes = std::move(outcomes);
  s.treatment = "x";
  s.reference = "C";
  s.terms = {Term::intercept(), Term::categorical("x")};
  return s;
}

Dataset two_arm(const std::vector<double>& control, const std::vector<double>& treated) {
  std::vector<std::string> x;
  std::vector<double> y;
  for (double v : control) x.push_back("C"), y.push_back(v);
  for (double v : treated) x.push_back("T"), y.push_back(v);
  return Dataset({"x", "y"}, {oracle::categorical(x), oracle::numeric(y)});
}

}  // namespace

TEST(Solver, DifferenceInMeans) {
  const auto e = helpers::run(two_arm({0.5, 1.5}, {1.0, 2.0}), arm_spec(), {});
  EXPECT_NEAR(e.fm.beta(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(e.fm.beta(1, 0), 0.5, 1e-14);
  EXPECT_EQ(e.fm.p, 2u);
  EXPECT_EQ(e.fm.dof, 2u);
}

TEST(Solver, DuplicateColumnIsRankDeficient) {
  ModelSpec s = arm_spec();
  s.terms.push_back(Term::categorical("x"));
  try {
    helpers::run(two_arm({0.5, 1.5, 2}, {1.0, 2.0, 3}), s, {});
    FAIL() << "expected rank deficiency";
  } catch (const RankDeficientError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::rank);
    EXPECT_EQ(e.term(), "x");
    EXPECT_FALSE(e.column().empty());
  }
}

TEST(Solver, CollinearNumericColumnNamesTerm) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<std::string> x(50);
  std::vector<double> a(50), b(50), y(50);
  for (int i = 0; i < 50; ++i) {
    x[i] = i % 2 ? "T" : "C";
    a[i] = z(rng);
    b[i] = 3.0 * a[i];
    y[i] = z(rng);
  }
  const Dataset ds({"x", "a", "b", "y"},
                   {oracle::categorical(x), oracle::numeric(a), oracle::numeric(b), oracle::numeric(y)});
  ModelSpec s = arm_spec();
  s.terms.push_back(Term::numeric("a"));
  s.terms.push_back(Term::numeric("b"));
  try {
    helpers::run(ds, s, {});
    FAIL();
  } catch (const RankDeficientError& e) {
    EXPECT_EQ(e.term(), "b");
  }
}

TEST(Solver, InsufficientRows) {
  ModelSpec s = arm_spec();
  s.terms.push_back(Term::numeric("y2"));
  const Dataset ds({"x", "y", "y2"},
                   {oracle::categorical({"C", "T"}), oracle::numeric({1, 2}), oracle::numeric({3, 5})});
  EXPECT_THROW(helpers::run(ds, s, {}), Error);
}

TEST(Solver, DenseQrOracleMultiResponse) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 200;
    std::vector<std::string> x(n);
    std::vector<std::vector<double>> w(4, std::vector<double>(n));
    std::vector<std::vector<double>> y(3, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng() % 2 ? "T" : "C";
      for (auto& col : w) col[i] = z(rng);
      for (auto& col : y) col[i] = z(rng) + w[0][i] - 2.0 * w[3][i];
    }
    std::vector<std::string> names{"x", "w1", "w2", "w3", "w4", "y1", "y2", "y3"};
    std::vector<Column> cols{oracle::categorical(x)};
    for (auto& col : w) cols.push_back(oracle::numeric(col));
    for (auto& col : y) cols.push_back(oracle::numeric(col));
    const Dataset ds(names, std::move(cols));
    ModelSpec s = arm_spec({"y1", "y2", "y3"});
    for (int k = 1; k <= 4; ++k) s.terms.push_back(Term::numeric("w" + std::to_string(k)));
    const auto e = helpers::run(ds, s, {});
    ASSERT_EQ(e.fm.p, 6u);
    const Eigen::MatrixXd m = oracle::dense_design(ds, s);
    for (int j = 0; j < 3; ++j) {
      const auto f = oracle::dense_fit(m, oracle::column_vector(ds, s.outcomes[j]));
      for (Eigen::Index c = 0; c < 6; ++c) EXPECT_NEAR(e.fm.beta(c, j), f.beta[c], 1e-9);
      EXPECT_NEAR(e.fm.rss[j], f.resid.squaredNorm(), 1e-9 * f.resid.squaredNorm());
    }
    EXPECT_LE(oracle::max_rel_diff(e.fm.xtx_inverse, (m.transpose() * m).inverse()), 1e-9);
  }
}

TEST(ResidualMoments, ArithmeticExamples) {
  const auto e = helpers::run(two_arm({2, 2}, {1, 3}), arm_spec(), {});
  const auto mom = group_residual_moments(e.fm, e.cd, 0);
  ASSERT_EQ(e.cd.n_groups(), 2u);
  for (std::size_t g = 0; g < 2; ++g) {
    const bool treated = e.cd.treatment_of_group[g] != e.cd.reference_code;
    EXPECT_NEAR(mom.sum[static_cast<Eigen::Index>(g)], 0.0, 1e-14);
    EXPECT_NEAR(mom.sum_sq[static_cast<Eigen::Index>(g)], treated ? 2.0 : 0.0, 1e-14);
  }
  EXPECT_THROW(group_residual_moments(e.fm, e.cd, 1), Error);
}

TEST(ResidualMoments, MatchUncompressedResiduals) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto [p, e] = helpers::full_rank_problem(rng, {.min_n = 1000, .max_n = 1000, .continuous_w = false});
    const Eigen::MatrixXd m = oracle::dense_design(p.data, p.spec);
    for (std::size_t j = 0; j < p.spec.outcomes.size(); ++j) {
      const auto f = oracle::dense_fit(m, oracle::column_vector(p.data, p.spec.outcomes[j]));
      Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(e.cd.n_groups()));
      Eigen::VectorXd s2 = s;
      for (std::size_t r = 0; r < p.data.n_rows(); ++r) {
        const auto g = static_cast<Eigen::Index>(e.cd.group_membership[r]);
        s[g] += f.resid[static_cast<Eigen::Index>(r)];
        s2[g] += f.resid[static_cast<Eigen::Index>(r)] * f.resid[static_cast<Eigen::Index>(r)];
      }
      const auto mom = group_residual_moments(e.fm, e.cd, j);
      ASSERT_LE((mom.sum - s).cwiseAbs().maxCoeff(), 1e-10);
      ASSERT_LE((mom.sum_sq - s2).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Solver, ResidualOrthogonality) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    auto [p, e] = helpers::full_rank_problem(rng, {.min_n = 100, .max_n = 3000});
    for (std::size_t j = 0; j < p.spec.outcomes.size(); ++j) {
      const auto mom = group_residual_moments(e.fm, e.cd, j);
      const Eigen::VectorXd score = e.cd.matrix.transpose() * mom.sum;
      const Eigen::VectorXd scale = Eigen::MatrixXd(e.cd.matrix).cwiseAbs().transpose() *
                                    e.cd.sum_y.col(static_cast<Eigen::Index>(j)).cwiseAbs();
      ASSERT_LE(score.cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, scale.maxCoeff()));
    }
  }
}

TEST(Solver, CompressedMatchesUncompressedBeta) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto [p, e] = helpers::full_rank_problem(rng, {.min_n = 100, .max_n = 2000, .continuous_w = false});
    const auto u = helpers::run(p.data, p.spec, p.keys, false);
    ASSERT_LE(oracle::max_rel_diff(e.fm.beta, u.fm.beta), 1e-10);
  }
}

TEST(Solver, TwoSampleTTestEquivalence) {
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(20, 2000)(rng);
    std::vector<double> c, t;
    const double shift = z(rng), scale = std::exp(z(rng));
    for (std::size_t i = 0; i < n; ++i) {
      if (i < 2 || (i >= 4 && rng() % 2)) c.push_back(scale * z(rng));
      else t.push_back(shift + scale * z(rng));
    }
    const auto e = helpers::run(two_arm(c, t), arm_spec(), {});
    const auto tt = oracle::pooled_t_test(c, t);
    const auto cov = cov_beta(e.fm, e.cd, 0, CovarianceType::homoskedastic());
    ASSERT_LE(oracle::rel_diff(e.fm.beta(1, 0), tt.diff), 1e-10);
    ASSERT_LE(std::fabs(std::sqrt((*cov)(1, 1)) - tt.se) / tt.se, 1e-10);
  }
}
