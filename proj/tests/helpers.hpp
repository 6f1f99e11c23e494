#pragma once

// Small wrappers that run the engine stages the way the pipeline does.

#include <random>

#include "causalols/compress.hpp"
#include "causalols/covariance.hpp"
#include "causalols/design.hpp"
#include "causalols/effects.hpp"
#include "causalols/solver.hpp"
#include "oracles.hpp"

namespace helpers {

struct Engine {
  causalols::ModelMatrix mm;
  causalols::CompressedDataset cd;
  causalols::FittedModel fm;
};

inline Engine run(const causalols::Dataset& ds, const causalols::ModelSpec& spec,
                  const std::vector<std::string>& keys, bool compress = true) {
  Engine e;
  e.mm = causalols::build_model_matrix(ds, spec);
  e.cd = causalols::compress(ds, e.mm, spec, keys, {compress});
  e.fm = causalols::fit(e.cd);
  return e;
}

// Draws random problems until one has a full-rank design.
inline std::pair<oracle::Problem, Engine> full_rank_problem(std::mt19937_64& rng,
                                                            const oracle::ProblemOptions& o,
                                                            bool compress = true) {
  for (;;) {
    auto p = oracle::random_problem(rng, o);
    try {
      auto e = run(p.data, p.spec, p.keys, compress);
      return {std::move(p), std::move(e)};
    } catch (const causalols::RankDeficientError&) {
    }
  }
}

inline Eigen::MatrixXd dense_cov(const oracle::DenseFit& f, const causalols::CovarianceType& ct,
                                 const causalols::Dataset& ds) {
  using causalols::CovarianceKind;
  switch (ct.kind) {
    case CovarianceKind::homoskedastic: return oracle::dense_homoskedastic(f);
    case CovarianceKind::hc0: return oracle::dense_hc0(f);
    case CovarianceKind::hc1: return oracle::dense_hc1(f);
    case CovarianceKind::cr1: return oracle::dense_cr1(f, oracle::group_labels(ds, ct.cluster_key));
  }
  return {};
}

inline std::vector<causalols::CovarianceType> all_covariances(const causalols::ModelSpec& spec) {
  std::vector<causalols::CovarianceType> out{causalols::CovarianceType::homoskedastic(),
                                             causalols::CovarianceType::hc0(),
                                             causalols::CovarianceType::hc1()};
  if (spec.cluster_key) out.push_back(causalols::CovarianceType::cr1(*spec.cluster_key));
  return out;
}

}  // namespace helpers
