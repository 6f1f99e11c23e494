#include "causalols/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "causalols/error.hpp"

namespace causalols {

namespace {

struct SparseVec {
  std::vector<int> index;
  std::vector<double> value;
};

struct Expanded {
  SparseVec column;
  std::string label;
  std::optional<std::int32_t> treatment_level;
};

// A factor expands into one or more sparse sub-columns.
std::vector<Expanded> expand_factor(const Dataset& ds, const ModelSpec& spec, const Factor& f) {
  const Column& col = ds.column(f.column);
  const std::size_t n = ds.n_rows();
  std::vector<Expanded> out;

  if (f.kind == FactorKind::categorical) {
    const auto& cat = col.categorical();
    const bool is_treatment = f.column == spec.treatment;
    std::int32_t dropped = 0;
    if (is_treatment) {
      auto ref = cat.find_level(spec.reference);
      if (!ref) {
        fail(ErrorKind::config, "reference level '" + spec.reference + "' not found in '" +
                                    f.column + "'");
      }
      dropped = *ref;
    }
    const auto levels = static_cast<std::int32_t>(cat.levels.size());
    std::vector<int> slot(levels, -1);
    for (std::int32_t l = 0; l < levels; ++l) {
      if (l == dropped) continue;
      slot[l] = static_cast<int>(out.size());
      Expanded e;
      e.label = f.column + "[" + cat.levels[l] + "]";
      if (is_treatment) e.treatment_level = l;
      out.push_back(std::move(e));
    }
    for (std::size_t r = 0; r < n; ++r) {
      const int s = slot[cat.codes[r]];
      if (s < 0) continue;
      out[s].column.index.push_back(static_cast<int>(r));
      out[s].column.value.push_back(1.0);
    }
    return out;
  }

  const int degree = f.kind == FactorKind::time_basis ? f.degree : 1;
  out.resize(degree);
  for (int d = 0; d < degree; ++d) {
    out[d].label = d == 0 ? f.column : f.column + "^" + std::to_string(d + 1);
  }
  for (std::size_t r = 0; r < n; ++r) {
    const double x = col.as_double(r);
    if (x == 0.0) continue;
    double p = 1.0;
    for (int d = 0; d < degree; ++d) {
      p *= x;
      out[d].column.index.push_back(static_cast<int>(r));
      out[d].column.value.push_back(p);
    }
  }
  return out;
}

SparseVec multiply(const SparseVec& a, const SparseVec& b) {
  SparseVec out;
  std::size_t i = 0, j = 0;
  while (i < a.index.size() && j < b.index.size()) {
    if (a.index[i] < b.index[j]) {
      ++i;
    } else if (b.index[j] < a.index[i]) {
      ++j;
    } else {
      const double v = a.value[i] * b.value[j];
      if (v != 0.0) {
        out.index.push_back(a.index[i]);
        out.value.push_back(v);
      }
      ++i;
      ++j;
    }
  }
  return out;
}

SparseVec ones(std::size_t n) {
  SparseVec v;
  v.index.resize(n);
  for (std::size_t r = 0; r < n; ++r) v.index[r] = static_cast<int>(r);
  v.value.assign(n, 1.0);
  return v;
}

SparseMatrix assemble(std::size_t n, const std::vector<SparseVec>& cols) {
  std::vector<int> outer(cols.size() + 1, 0);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    outer[c + 1] = outer[c] + static_cast<int>(cols[c].index.size());
  }
  std::vector<int> inner(outer.back());
  std::vector<double> values(outer.back());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::copy(cols[c].index.begin(), cols[c].index.end(), inner.begin() + outer[c]);
    std::copy(cols[c].value.begin(), cols[c].value.end(), values.begin() + outer[c]);
  }
  Eigen::Map<const SparseMatrix> view(static_cast<Eigen::Index>(n),
                                      static_cast<Eigen::Index>(cols.size()), outer.back(),
                                      outer.data(), inner.data(), values.data());
  return SparseMatrix(view);
}

}  // namespace

std::int32_t ModelMatrix::arm_code(const std::string& arm) const {
  auto it = std::find(treatment_levels.begin(), treatment_levels.end(), arm);
  if (it == treatment_levels.end()) fail(ErrorKind::config, "unknown treatment arm '" + arm + "'");
  const auto code = static_cast<std::int32_t>(it - treatment_levels.begin());
  if (code == reference_code) {
    fail(ErrorKind::config, "arm '" + arm + "' is the reference level; effects are relative to it");
  }
  return code;
}

std::vector<std::string> ModelMatrix::column_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

ModelMatrix build_model_matrix(const Dataset& ds, const ModelSpec& spec) {
  validate(spec, ds);
  const std::size_t n = ds.n_rows();

  ModelMatrix mm;
  mm.dataset_version = ds.version();
  const auto& tr = ds.column(spec.treatment).categorical();
  mm.treatment_levels = tr.levels;
  mm.reference_code = *tr.find_level(spec.reference);

  std::vector<SparseVec> columns;
  std::vector<SparseVec> bases;
  std::map<std::pair<std::size_t, std::size_t>, int> base_slot;

  for (std::size_t ti = 0; ti < spec.terms.size(); ++ti) {
    const Term& term = spec.terms[ti];
    if (term.kind == TermKind::intercept) {
      columns.push_back(ones(n));
      mm.columns.push_back(ColumnMeta{ti, term.label(), "(intercept)", std::nullopt, kConstantBase, ""});
      continue;
    }

    std::vector<std::vector<Expanded>> parts(term.factors.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t f = 0; f < term.factors.size(); ++f) {
      parts[f] = expand_factor(ds, spec, term.factors[f]);
    }
    int treatment_pos = -1;
    for (std::size_t f = 0; f < term.factors.size(); ++f) {
      if (term.factors[f].kind == FactorKind::categorical &&
          term.factors[f].column == spec.treatment) {
        treatment_pos = static_cast<int>(f);
      }
    }

    // Mixed-radix enumeration of sub-column tuples, last factor fastest.
    std::size_t total = 1;
    for (const auto& p : parts) total *= p.size();
    std::vector<std::vector<std::size_t>> tuples(total);
    for (std::size_t k = 0; k < total; ++k) {
      std::size_t rem = k;
      tuples[k].resize(parts.size());
      for (std::size_t f = parts.size(); f-- > 0;) {
        tuples[k][f] = rem % parts[f].size();
        rem /= parts[f].size();
      }
    }

    // Rank of the tuple with the treatment factor removed, identifying the base.
    auto base_rank = [&](const std::vector<std::size_t>& t) {
      std::size_t r = 0;
      for (std::size_t f = 0; f < parts.size(); ++f) {
        if (static_cast<int>(f) == treatment_pos) continue;
        r = r * parts[f].size() + t[f];
      }
      return r;
    };

    std::vector<SparseVec> term_cols(total);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t k = 0; k < total; ++k) {
      SparseVec v = parts[0][tuples[k][0]].column;
      for (std::size_t f = 1; f < parts.size(); ++f) v = multiply(v, parts[f][tuples[k][f]].column);
      term_cols[k] = std::move(v);
    }

    for (std::size_t k = 0; k < total; ++k) {
      ColumnMeta meta;
      meta.term_index = ti;
      meta.term_label = term.label();
      std::string base_label;
      for (std::size_t f = 0; f < parts.size(); ++f) {
        const Expanded& e = parts[f][tuples[k][f]];
        if (!meta.name.empty()) meta.name += ':';
        meta.name += e.label;
        if (static_cast<int>(f) == treatment_pos) {
          meta.treatment_level = e.treatment_level;
        } else {
          if (!base_label.empty()) base_label += ':';
          base_label += e.label;
        }
      }
      if (treatment_pos >= 0 && parts.size() > 1) {
        const auto key = std::make_pair(ti, base_rank(tuples[k]));
        auto [it, inserted] = base_slot.emplace(key, static_cast<int>(bases.size()));
        if (inserted) {
          SparseVec b;
          bool first = true;
          for (std::size_t f = 0; f < parts.size(); ++f) {
            if (static_cast<int>(f) == treatment_pos) continue;
            b = first ? parts[f][tuples[k][f]].column : multiply(b, parts[f][tuples[k][f]].column);
            first = false;
          }
          bases.push_back(std::move(b));
          mm.base_labels.push_back(base_label);
        }
        meta.base_index = it->second;
        meta.interacting = base_label;
      }
      mm.columns.push_back(std::move(meta));
      columns.push_back(std::move(term_cols[k]));
    }
  }

  mm.matrix = assemble(n, columns);
  mm.base = assemble(n, bases);
  return mm;
}

Eigen::RowVectorXd assemble_delta_means(const std::vector<ColumnMeta>& columns,
                                        std::int32_t arm_code,
                                        const Eigen::VectorXd& base_means) {
  Eigen::RowVectorXd k = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const ColumnMeta& meta = columns[c];
    if (!meta.treatment_level || *meta.treatment_level != arm_code) continue;
    k[static_cast<Eigen::Index>(c)] =
        meta.base_index == kConstantBase ? 1.0 : base_means[meta.base_index];
  }
  return k;
}

DeltaColumnMeans delta_column_means(const Dataset& ds, const ModelMatrix& mm,
                                    const ModelSpec& spec, const std::string& arm,
                                    std::optional<RowRange> rows) {
  if (mm.dataset_version != ds.version()) {
    fail(ErrorKind::config, "model matrix is stale: dataset changed since it was built");
  }
  if (arm == spec.reference) {
    fail(ErrorKind::config, "arm '" + arm + "' is the reference level; effects are relative to it");
  }
  const std::int32_t code = mm.arm_code(arm);
  const RowRange range = rows.value_or(RowRange{0, static_cast<std::size_t>(mm.rows())});
  if (range.empty() || range.end > static_cast<std::size_t>(mm.rows())) {
    fail(ErrorKind::config, "row range is empty or out of bounds");
  }

  Eigen::VectorXd means = Eigen::VectorXd::Zero(mm.base.cols());
  const int* outer = mm.base.outerIndexPtr();
  const int* inner = mm.base.innerIndexPtr();
  const double* vals = mm.base.valuePtr();
  for (Eigen::Index b = 0; b < mm.base.cols(); ++b) {
    const int* lo = std::lower_bound(inner + outer[b], inner + outer[b + 1],
                                     static_cast<int>(range.begin));
    double sum = 0.0;
    for (const int* p = lo; p != inner + outer[b + 1] && *p < static_cast<int>(range.end); ++p) {
      sum += vals[p - inner];
    }
    means[b] = sum / static_cast<double>(range.size());
  }
  return DeltaColumnMeans{assemble_delta_means(mm.columns, code, means), range.size()};
}

}  // namespace causalols
