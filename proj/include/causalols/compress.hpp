#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "causalols/data_frame.hpp"
#include "causalols/design.hpp"
#include "causalols/model_spec.hpp"

namespace causalols {

// Key values carried per compressed row, dense-coded in ascending order.
struct CompressedKey {
  std::string name;
  std::vector<std::int32_t> codes;  // length G
  std::vector<std::string> labels;  // code -> label
};

/// Rows of the design that agree on every design value, every counterfactual
/// base value and every key are merged into one weighted row carrying the
/// per-outcome sufficient statistics n, sum y and sum y^2.
struct CompressedDataset {
  SparseMatrix matrix;   // G x p
  RowSparseMatrix base;  // G x q
  std::vector<ColumnMeta> columns;
  std::vector<std::string> base_labels;
  std::vector<std::string> treatment_levels;
  std::int32_t reference_code = 0;

  std::vector<std::string> outcomes;
  std::vector<double> weights;  // n_g
  Eigen::MatrixXd sum_y;        // G x m
  Eigen::MatrixXd sum_y2;       // G x m

  std::vector<std::size_t> group_membership;  // original row -> compressed row
  std::vector<std::int32_t> treatment_of_group;
  std::vector<CompressedKey> keys;  // extra keys, time key included
  std::optional<std::string> cluster_key;
  std::vector<std::int32_t> cluster_of_group;
  std::int32_t n_clusters = 0;

  std::size_t n = 0;
  std::uint64_t dataset_version = 0;

  std::size_t n_groups() const { return weights.size(); }
  double compression_ratio() const {
    return n == 0 ? 0.0 : static_cast<double>(n_groups()) / static_cast<double>(n);
  }
  const CompressedKey* find_key(const std::string& name) const;
  std::size_t outcome_index(const std::string& name) const;
};

struct CompressOptions {
  // When false every row is its own group; used to check exactness.
  bool enabled = true;
};

CompressedDataset compress(const Dataset& ds, const ModelMatrix& mm, const ModelSpec& spec,
                           const std::vector<std::string>& extra_keys,
                           CompressOptions options = {});

}  // namespace causalols
