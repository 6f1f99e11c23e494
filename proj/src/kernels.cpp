#include "causalols/kernels.hpp"

#include <bit>
#include <cstring>

#include <omp.h>

namespace causalols::kernels {

namespace {

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finalizer folded into a running hash
  v += 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (v ^ (v >> 31));
}

inline std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

std::uint64_t hash_row(const RowSparseMatrix& m, const RowSparseMatrix& base,
                       const std::vector<std::span<const std::int32_t>>& keys, Eigen::Index r) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (RowSparseMatrix::InnerIterator it(m, r); it; ++it) {
    h = mix(h, static_cast<std::uint64_t>(it.index()));
    h = mix(h, bits(it.value()));
  }
  h = mix(h, 0xffffffffffffffffULL);
  for (RowSparseMatrix::InnerIterator it(base, r); it; ++it) {
    h = mix(h, static_cast<std::uint64_t>(it.index()));
    h = mix(h, bits(it.value()));
  }
  for (const auto& k : keys) h = mix(h, static_cast<std::uint64_t>(k[r]));
  return h;
}

// Weighted sparse dot of two CSC columns.
inline double column_dot(const SparseMatrix& m, Eigen::Index a, Eigen::Index b,
                         std::span<const double> w) {
  const int* outer = m.outerIndexPtr();
  const int* inner = m.innerIndexPtr();
  const double* val = m.valuePtr();
  int i = outer[a], ie = outer[a + 1];
  int j = outer[b], je = outer[b + 1];
  double s = 0.0;
  while (i < ie && j < je) {
    if (inner[i] < inner[j]) {
      ++i;
    } else if (inner[j] < inner[i]) {
      ++j;
    } else {
      s += w[inner[i]] * val[i] * val[j];
      ++i;
      ++j;
    }
  }
  return s;
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

namespace parallel {

Eigen::MatrixXd weighted_gram(const SparseMatrix& m, std::span<const double> w) {
  const Eigen::Index p = m.cols();
  Eigen::MatrixXd g(p, p);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) g(a, b) = column_dot(m, a, b, w);
  }
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a + 1; b < p; ++b) g(a, b) = g(b, a);
  }
  return g;
}

Eigen::MatrixXd cross_product(const SparseMatrix& m, const Eigen::MatrixXd& y) {
  const Eigen::Index p = m.cols();
  const Eigen::Index k = y.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, k);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < p; ++c) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double s = 0.0;
      for (SparseMatrix::InnerIterator it(m, c); it; ++it) s += it.value() * y(it.index(), j);
      out(c, j) = s;
    }
  }
  return out;
}

Eigen::MatrixXd cluster_scores(const SparseMatrix& m, std::span<const double> e,
                               std::span<const std::int32_t> cluster, std::int32_t n_clusters) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n_clusters, m.cols());
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      s(cluster[it.index()], c) += it.value() * e[it.index()];
    }
  }
  return s;
}

GroupSums group_sums(std::span<const std::size_t> group_of_row, std::size_t n_groups,
                     const std::vector<std::span<const double>>& outcomes) {
  const auto m = static_cast<Eigen::Index>(outcomes.size());
  GroupSums out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_groups), m),
                Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_groups), m)};
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto y = outcomes[j];
    for (std::size_t r = 0; r < group_of_row.size(); ++r) {
      const auto g = static_cast<Eigen::Index>(group_of_row[r]);
      out.sum(g, j) += y[r];
      out.sum_sq(g, j) += y[r] * y[r];
    }
  }
  return out;
}

std::vector<std::uint64_t> row_hashes(const RowSparseMatrix& m, const RowSparseMatrix& base,
                                      const std::vector<std::span<const std::int32_t>>& keys) {
  std::vector<std::uint64_t> h(static_cast<std::size_t>(m.rows()));
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < m.rows(); ++r) h[r] = hash_row(m, base, keys, r);
  return h;
}

Eigen::MatrixXd range_base_sums(const RowSparseMatrix& base, std::span<const std::size_t> order,
                                std::span<const OrderedRange> ranges,
                                std::span<const double> weights,
                                std::vector<double>& weight_out) {
  const auto n_ranges = static_cast<Eigen::Index>(ranges.size());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_ranges, base.cols());
  weight_out.assign(ranges.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index g = 0; g < n_ranges; ++g) {
    double wsum = 0.0;
    for (std::size_t k = ranges[g].begin; k < ranges[g].end; ++k) {
      const auto r = static_cast<Eigen::Index>(order[k]);
      const double w = weights[r];
      wsum += w;
      for (RowSparseMatrix::InnerIterator it(base, r); it; ++it) sums(g, it.index()) += w * it.value();
    }
    weight_out[g] = wsum;
  }
  return sums;
}

}  // namespace parallel

namespace serial {

Eigen::MatrixXd weighted_gram(const SparseMatrix& m, std::span<const double> w) {
  const RowSparseMatrix rows(m);
  const Eigen::Index p = m.cols();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (RowSparseMatrix::InnerIterator a(rows, r); a; ++a) {
      for (RowSparseMatrix::InnerIterator b(rows, r); b && b.index() <= a.index(); ++b) {
        g(a.index(), b.index()) += w[r] * a.value() * b.value();
      }
    }
  }
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a + 1; b < p; ++b) g(a, b) = g(b, a);
  }
  return g;
}

Eigen::MatrixXd cross_product(const SparseMatrix& m, const Eigen::MatrixXd& y) {
  const RowSparseMatrix rows(m);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.cols(), y.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (RowSparseMatrix::InnerIterator it(rows, r); it; ++it) {
      out.row(it.index()) += it.value() * y.row(r);
    }
  }
  return out;
}

Eigen::MatrixXd cluster_scores(const SparseMatrix& m, std::span<const double> e,
                               std::span<const std::int32_t> cluster, std::int32_t n_clusters) {
  const RowSparseMatrix rows(m);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n_clusters, m.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (RowSparseMatrix::InnerIterator it(rows, r); it; ++it) {
      s(cluster[r], it.index()) += it.value() * e[r];
    }
  }
  return s;
}

GroupSums group_sums(std::span<const std::size_t> group_of_row, std::size_t n_groups,
                     const std::vector<std::span<const double>>& outcomes) {
  const auto m = static_cast<Eigen::Index>(outcomes.size());
  GroupSums out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_groups), m),
                Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_groups), m)};
  for (std::size_t r = 0; r < group_of_row.size(); ++r) {
    const auto g = static_cast<Eigen::Index>(group_of_row[r]);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double y = outcomes[j][r];
      out.sum(g, j) += y;
      out.sum_sq(g, j) += y * y;
    }
  }
  return out;
}

std::vector<std::uint64_t> row_hashes(const RowSparseMatrix& m, const RowSparseMatrix& base,
                                      const std::vector<std::span<const std::int32_t>>& keys) {
  std::vector<std::uint64_t> h(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) h[r] = hash_row(m, base, keys, r);
  return h;
}

Eigen::MatrixXd range_base_sums(const RowSparseMatrix& base, std::span<const std::size_t> order,
                                std::span<const OrderedRange> ranges,
                                std::span<const double> weights,
                                std::vector<double>& weight_out) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ranges.size()), base.cols());
  weight_out.assign(ranges.size(), 0.0);
  for (std::size_t g = 0; g < ranges.size(); ++g) {
    for (std::size_t k = ranges[g].begin; k < ranges[g].end; ++k) {
      const auto r = static_cast<Eigen::Index>(order[k]);
      weight_out[g] += weights[r];
      for (RowSparseMatrix::InnerIterator it(base, r); it; ++it) {
        sums(static_cast<Eigen::Index>(g), it.index()) += weights[r] * it.value();
      }
    }
  }
  return sums;
}

}  // namespace serial

}  // namespace causalols::kernels
