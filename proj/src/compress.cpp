#include "causalols/compress.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "causalols/error.hpp"
#include "causalols/kernels.hpp"

namespace causalols {

namespace {

bool same_row(const RowSparseMatrix& m, Eigen::Index a, Eigen::Index b) {
  const int* outer = m.outerIndexPtr();
  const int* inner = m.innerIndexPtr();
  const double* val = m.valuePtr();
  const int la = outer[a + 1] - outer[a];
  if (la != outer[b + 1] - outer[b]) return false;
  return std::equal(inner + outer[a], inner + outer[a + 1], inner + outer[b]) &&
         std::equal(val + outer[a], val + outer[a + 1], val + outer[b]);
}

RowSparseMatrix select_rows(const RowSparseMatrix& m, const std::vector<std::size_t>& rows) {
  std::vector<int> outer(rows.size() + 1, 0);
  for (std::size_t g = 0; g < rows.size(); ++g) {
    const auto r = static_cast<Eigen::Index>(rows[g]);
    outer[g + 1] = outer[g] + (m.outerIndexPtr()[r + 1] - m.outerIndexPtr()[r]);
  }
  std::vector<int> inner(outer.back());
  std::vector<double> values(outer.back());
#pragma omp parallel for schedule(static)
  for (std::size_t g = 0; g < rows.size(); ++g) {
    const auto r = static_cast<Eigen::Index>(rows[g]);
    const int b = m.outerIndexPtr()[r], e = m.outerIndexPtr()[r + 1];
    std::copy(m.innerIndexPtr() + b, m.innerIndexPtr() + e, inner.begin() + outer[g]);
    std::copy(m.valuePtr() + b, m.valuePtr() + e, values.begin() + outer[g]);
  }
  Eigen::Map<const RowSparseMatrix> view(static_cast<Eigen::Index>(rows.size()), m.cols(),
                                         outer.back(), outer.data(), inner.data(), values.data());
  return RowSparseMatrix(view);
}

}  // namespace

const CompressedKey* CompressedDataset::find_key(const std::string& name) const {
  for (const auto& k : keys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::size_t CompressedDataset::outcome_index(const std::string& name) const {
  auto it = std::find(outcomes.begin(), outcomes.end(), name);
  if (it == outcomes.end()) fail(ErrorKind::config, "unknown outcome '" + name + "'");
  return static_cast<std::size_t>(it - outcomes.begin());
}

CompressedDataset compress(const Dataset& ds, const ModelMatrix& mm, const ModelSpec& spec,
                           const std::vector<std::string>& extra_keys, CompressOptions options) {
  if (mm.dataset_version != ds.version()) {
    fail(ErrorKind::config, "model matrix is stale: dataset changed since it was built");
  }
  const std::size_t n = ds.n_rows();

  std::vector<std::string> key_names;
  for (const auto& k : extra_keys) {
    if (std::find(key_names.begin(), key_names.end(), k) == key_names.end()) key_names.push_back(k);
  }
  if (spec.time_key &&
      std::find(key_names.begin(), key_names.end(), *spec.time_key) == key_names.end()) {
    key_names.push_back(*spec.time_key);
  }

  std::vector<KeyCodes> key_codes;
  for (const auto& k : key_names) key_codes.push_back(encode_key(ds.column(k)));
  std::optional<KeyCodes> cluster_codes;
  if (spec.cluster_key) cluster_codes = encode_key(ds.column(*spec.cluster_key));
  const auto& treatment = ds.column(spec.treatment).categorical().codes;

  // treatment, then extra keys, then cluster
  std::vector<std::span<const std::int32_t>> all_keys;
  all_keys.emplace_back(treatment);
  for (const auto& kc : key_codes) all_keys.emplace_back(kc.codes);
  if (cluster_codes) all_keys.emplace_back(cluster_codes->codes);

  const RowSparseMatrix rows(mm.matrix);
  const RowSparseMatrix base_rows(mm.base);

  std::vector<std::size_t> group_of_row(n);
  std::vector<std::size_t> representative;

  if (options.enabled) {
    const auto hashes = kernels::parallel::row_hashes(rows, base_rows, all_keys);
    std::unordered_map<std::uint64_t, std::size_t> head;  // hash -> first group
    head.reserve(n / 4 + 16);
    std::vector<std::size_t> next;  // collision chain between groups
    constexpr std::size_t none = static_cast<std::size_t>(-1);

    auto same = [&](std::size_t a, std::size_t b) {
      for (const auto& k : all_keys) {
        if (k[a] != k[b]) return false;
      }
      return same_row(rows, static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) &&
             same_row(base_rows, static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    };

    for (std::size_t r = 0; r < n; ++r) {
      auto [it, inserted] = head.emplace(hashes[r], representative.size());
      if (!inserted) {
        std::size_t g = it->second;
        std::size_t last = g;
        bool found = false;
        while (g != none) {
          if (same(representative[g], r)) {
            found = true;
            break;
          }
          last = g;
          g = next[g];
        }
        if (found) {
          group_of_row[r] = g;
          continue;
        }
        next[last] = representative.size();
      }
      group_of_row[r] = representative.size();
      representative.push_back(r);
      next.push_back(none);
    }
  } else {
    representative.resize(n);
    std::iota(representative.begin(), representative.end(), std::size_t{0});
    std::iota(group_of_row.begin(), group_of_row.end(), std::size_t{0});
  }

  // Canonical order: stable sort of first-appearance groups by key codes.
  const std::size_t G = representative.size();
  std::vector<std::vector<std::int32_t>> group_keys(all_keys.size() - 1);
  for (std::size_t k = 1; k < all_keys.size(); ++k) {
    group_keys[k - 1].resize(G);
    for (std::size_t g = 0; g < G; ++g) group_keys[k - 1][g] = all_keys[k][representative[g]];
  }
  std::vector<const std::vector<std::int32_t>*> sort_keys;
  for (const auto& gk : group_keys) sort_keys.push_back(&gk);
  const auto order = stable_sort_permutation(sort_keys, G);
  std::vector<std::size_t> rank(G);
  for (std::size_t i = 0; i < G; ++i) rank[order[i]] = i;

  CompressedDataset cd;
  cd.columns = mm.columns;
  cd.base_labels = mm.base_labels;
  cd.treatment_levels = mm.treatment_levels;
  cd.reference_code = mm.reference_code;
  cd.outcomes = spec.outcomes;
  cd.n = n;
  cd.dataset_version = ds.version();

  std::vector<std::size_t> sorted_rep(G);
  for (std::size_t i = 0; i < G; ++i) sorted_rep[i] = representative[order[i]];
  cd.group_membership.resize(n);
  for (std::size_t r = 0; r < n; ++r) cd.group_membership[r] = rank[group_of_row[r]];

  cd.matrix = SparseMatrix(select_rows(rows, sorted_rep));
  cd.base = select_rows(base_rows, sorted_rep);

  std::vector<std::span<const double>> ys;
  for (const auto& y : spec.outcomes) ys.emplace_back(ds.column(y).numeric().values);
  auto sums = kernels::parallel::group_sums(cd.group_membership, G, ys);
  cd.sum_y = std::move(sums.sum);
  cd.sum_y2 = std::move(sums.sum_sq);
  cd.weights.assign(G, 0.0);
  for (std::size_t r = 0; r < n; ++r) cd.weights[cd.group_membership[r]] += 1.0;

  cd.treatment_of_group.resize(G);
  for (std::size_t g = 0; g < G; ++g) cd.treatment_of_group[g] = treatment[sorted_rep[g]];
  for (std::size_t k = 0; k < key_names.size(); ++k) {
    CompressedKey ck{key_names[k], std::vector<std::int32_t>(G), key_codes[k].labels};
    for (std::size_t g = 0; g < G; ++g) ck.codes[g] = key_codes[k].codes[sorted_rep[g]];
    cd.keys.push_back(std::move(ck));
  }
  if (cluster_codes) {
    cd.cluster_key = spec.cluster_key;
    cd.cluster_of_group.resize(G);
    for (std::size_t g = 0; g < G; ++g) cd.cluster_of_group[g] = cluster_codes->codes[sorted_rep[g]];
    cd.n_clusters = static_cast<std::int32_t>(cluster_codes->labels.size());
  }
  return cd;
}

}  // namespace causalols
