#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "causalols/data_frame.hpp"
#include "causalols/model_spec.hpp"

namespace causalols {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

inline constexpr int kConstantBase = -1;

struct ColumnMeta {
  std::size_t term_index = 0;
  std::string term_label;
  std::string name;
  // Set when the column carries a treatment dummy; the column equals
  // 1(arm == treatment_level) times its counterfactual base.
  std::optional<std::int32_t> treatment_level;
  // Index into ModelMatrix::base, or kConstantBase for a bare treatment dummy.
  int base_index = kConstantBase;
  std::string interacting;  // label of the base covariate, empty if none
};

/// Sparse design with the extra structure needed for counterfactual scoring.
///
/// `base` holds, for every treatment interaction, the product of its
/// non-treatment factors (e.g. W for X*W). These are the covariates held
/// fixed under both counterfactual assignments; a treatment column is
/// 1(arm == level) * base, so column means of the treated-minus-control
/// difference are just base means. Neither counterfactual matrix is formed.
struct ModelMatrix {
  SparseMatrix matrix;  // n x p, compressed sparse column
  std::vector<ColumnMeta> columns;
  SparseMatrix base;  // n x q
  std::vector<std::string> base_labels;
  std::vector<std::string> treatment_levels;
  std::int32_t reference_code = 0;
  std::uint64_t dataset_version = 0;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }

  std::int32_t arm_code(const std::string& arm) const;  // throws on reference/unknown
  std::vector<std::string> column_names() const;
};

ModelMatrix build_model_matrix(const Dataset& ds, const ModelSpec& spec);

struct DeltaColumnMeans {
  Eigen::RowVectorXd values;
  std::size_t n_effective = 0;
};

/// K vector from per-base-column means: 1 on bare dummies of `arm_code`, the
/// base mean on its interactions, 0 on every other column.
Eigen::RowVectorXd assemble_delta_means(const std::vector<ColumnMeta>& columns,
                                        std::int32_t arm_code,
                                        const Eigen::VectorXd& base_means);

/// Column means of M(arm) - M(reference) over `rows` (all rows when unset).
DeltaColumnMeans delta_column_means(const Dataset& ds, const ModelMatrix& mm,
                                    const ModelSpec& spec, const std::string& arm,
                                    std::optional<RowRange> rows = std::nullopt);

}  // namespace causalols
