#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "causalols/data_frame.hpp"
#include "causalols/design.hpp"

// Data-parallel inner loops of the pipeline. Each kernel exists twice: an
// OpenMP version used by the engine and a plain serial version kept as a
// test reference and benchmark baseline. Parallel versions give one thread
// ownership of each output cell, so results do not depend on thread count.
namespace causalols::kernels {

int max_threads();

struct GroupSums {
  Eigen::MatrixXd sum;     // G x m
  Eigen::MatrixXd sum_sq;  // G x m
};

// A contiguous run [begin, end) of positions in `order`.
struct OrderedRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

namespace parallel {

/// M^T diag(w) M, dense p x p.
Eigen::MatrixXd weighted_gram(const SparseMatrix& m, std::span<const double> w);

/// M^T Y, dense p x k.
Eigen::MatrixXd cross_product(const SparseMatrix& m, const Eigen::MatrixXd& y);

/// Row c holds the score sum over rows in cluster c: sum_g m_g * e_g.
Eigen::MatrixXd cluster_scores(const SparseMatrix& m, std::span<const double> e,
                               std::span<const std::int32_t> cluster, std::int32_t n_clusters);

/// Per-group sums of each outcome and of its square.
GroupSums group_sums(std::span<const std::size_t> group_of_row, std::size_t n_groups,
                     const std::vector<std::span<const double>>& outcomes);

/// 64-bit hash per row over the sparse pattern and values of both matrices
/// plus integer key codes.
std::vector<std::uint64_t> row_hashes(const RowSparseMatrix& m, const RowSparseMatrix& base,
                                      const std::vector<std::span<const std::int32_t>>& keys);

/// For each range, the weighted sum of every base column over rows
/// order[begin..end), and the total weight. Returns ranges x q and fills
/// `weight_out`.
Eigen::MatrixXd range_base_sums(const RowSparseMatrix& base, std::span<const std::size_t> order,
                                std::span<const OrderedRange> ranges,
                                std::span<const double> weights,
                                std::vector<double>& weight_out);

}  // namespace parallel

namespace serial {

Eigen::MatrixXd weighted_gram(const SparseMatrix& m, std::span<const double> w);
Eigen::MatrixXd cross_product(const SparseMatrix& m, const Eigen::MatrixXd& y);
Eigen::MatrixXd cluster_scores(const SparseMatrix& m, std::span<const double> e,
                               std::span<const std::int32_t> cluster, std::int32_t n_clusters);
GroupSums group_sums(std::span<const std::size_t> group_of_row, std::size_t n_groups,
                     const std::vector<std::span<const double>>& outcomes);
std::vector<std::uint64_t> row_hashes(const RowSparseMatrix& m, const RowSparseMatrix& base,
                                      const std::vector<std::span<const std::int32_t>>& keys);
Eigen::MatrixXd range_base_sums(const RowSparseMatrix& base, std::span<const std::size_t> order,
                                std::span<const OrderedRange> ranges,
                                std::span<const double> weights,
                                std::vector<double>& weight_out);

}  // namespace serial

}  // namespace causalols::kernels
