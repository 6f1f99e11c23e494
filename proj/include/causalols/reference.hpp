#pragma once

#include <vector>

#include "causalols/data_frame.hpp"
#include "causalols/effects.hpp"
#include "causalols/model_spec.hpp"

namespace causalols {

inline constexpr std::size_t kReferenceMaxRows = 1'000'000;

/// Unoptimized baseline: dense uncompressed fit, explicit treated and control
/// model matrices, the per-row effect vector dY = (M_T - M_C) beta, then
/// hash-grouped filtering and averaging. Refuses inputs above
/// kReferenceMaxRows. Results come back in the same group order as cate().
std::vector<EffectEstimate> reference_path_effects(const Dataset& ds, const ModelSpec& spec,
                                                   const EffectQuery& q);

}  // namespace causalols
