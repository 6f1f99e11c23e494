#include "causalols/data_frame.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "causalols/error.hpp"

namespace causalols {

namespace {

std::atomic<std::uint64_t> next_version{1};

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string where(const std::string& source, std::size_t row, const std::string& col) {
  return source + ": row " + std::to_string(row) + ", column '" + col + "'";
}

}  // namespace

const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::integer_key: return "integer_key";
  }
  return "?";
}

ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "integer_key" || s == "integer") return ColumnKind::integer_key;
  fail(ErrorKind::config, "unknown column kind '" + s + "'");
}

std::optional<std::int32_t> CategoricalColumn::find_level(const std::string& label) const {
  auto it = std::lower_bound(levels.begin(), levels.end(), label);
  if (it == levels.end() || *it != label) return std::nullopt;
  return static_cast<std::int32_t>(it - levels.begin());
}

ColumnKind Column::kind() const noexcept {
  return static_cast<ColumnKind>(storage_.index());
}

std::size_t Column::size() const noexcept {
  return std::visit(overloaded{
                        [](const NumericColumn& c) { return c.values.size(); },
                        [](const CategoricalColumn& c) { return c.codes.size(); },
                        [](const IntegerKeyColumn& c) { return c.values.size(); },
                    },
                    storage_);
}

const NumericColumn& Column::numeric() const {
  if (auto* p = std::get_if<NumericColumn>(&storage_)) return *p;
  fail(ErrorKind::config, "column is not numeric");
}

const CategoricalColumn& Column::categorical() const {
  if (auto* p = std::get_if<CategoricalColumn>(&storage_)) return *p;
  fail(ErrorKind::config, "column is not categorical");
}

const IntegerKeyColumn& Column::integer_key() const {
  if (auto* p = std::get_if<IntegerKeyColumn>(&storage_)) return *p;
  fail(ErrorKind::config, "column is not an integer key");
}

double Column::as_double(std::size_t row) const {
  return std::visit(
      overloaded{
          [&](const NumericColumn& c) { return c.values[row]; },
          [&](const CategoricalColumn& c) { return static_cast<double>(c.codes[row]); },
          [&](const IntegerKeyColumn& c) { return static_cast<double>(c.values[row]); },
      },
      storage_);
}

std::string Column::label(std::size_t row) const {
  return std::visit(overloaded{
                        [&](const NumericColumn& c) { return format_double(c.values[row]); },
                        [&](const CategoricalColumn& c) { return c.levels[c.codes[row]]; },
                        [&](const IntegerKeyColumn& c) { return std::to_string(c.values[row]); },
                    },
                    storage_);
}

KeyCodes encode_key(const Column& column) {
  KeyCodes out;
  const std::size_t n = column.size();
  out.codes.resize(n);
  std::visit(
      overloaded{
          [&](const CategoricalColumn& c) {
            out.codes = c.codes;
            out.labels = c.levels;
          },
          [&](const auto& c) {
            using T = typename std::decay_t<decltype(c.values)>::value_type;
            std::vector<T> distinct = c.values;
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            for (std::size_t i = 0; i < n; ++i) {
              out.codes[i] = static_cast<std::int32_t>(
                  std::lower_bound(distinct.begin(), distinct.end(), c.values[i]) -
                  distinct.begin());
            }
            out.labels.reserve(distinct.size());
            for (T v : distinct) {
              if constexpr (std::is_same_v<T, double>) out.labels.push_back(format_double(v));
              else out.labels.push_back(std::to_string(v));
            }
          },
      },
      column.storage());
  return out;
}

Dataset::Dataset(std::vector<std::string> names, std::vector<Column> columns,
                 std::vector<std::string> sort_state)
    : names_(std::move(names)),
      columns_(std::move(columns)),
      sort_state_(std::move(sort_state)),
      version_(next_version.fetch_add(1)) {
  if (names_.size() != columns_.size()) {
    fail(ErrorKind::data, "column name count does not match column count");
  }
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) fail(ErrorKind::data, "empty column name");
    if (!index_.emplace(names_[i], i).second) {
      fail(ErrorKind::data, "duplicate column name '" + names_[i] + "'");
    }
    if (columns_[i].size() != n_rows_) {
      fail(ErrorKind::data, "column '" + names_[i] + "' has " +
                                std::to_string(columns_[i].size()) + " rows, expected " +
                                std::to_string(n_rows_));
    }
  }
}

bool Dataset::has_column(const std::string& name) const { return index_.count(name) > 0; }

const Column& Dataset::column(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::config, "unknown column '" + name + "'");
  return columns_[it->second];
}

Dataset Dataset::with_column(const std::string& name, Column replacement) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::config, "unknown column '" + name + "'");
  std::vector<Column> cols = columns_;
  cols[it->second] = std::move(replacement);
  return Dataset(names_, std::move(cols), sort_state_);
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.names_ != b.names_ || a.n_rows_ != b.n_rows_) return false;
  for (std::size_t i = 0; i < a.columns_.size(); ++i) {
    const auto& x = a.columns_[i].storage();
    const auto& y = b.columns_[i].storage();
    if (x.index() != y.index()) return false;
    bool same = std::visit(
        overloaded{
            [&](const NumericColumn& c) { return c.values == std::get<NumericColumn>(y).values; },
            [&](const CategoricalColumn& c) {
              const auto& d = std::get<CategoricalColumn>(y);
              return c.codes == d.codes && c.levels == d.levels;
            },
            [&](const IntegerKeyColumn& c) {
              return c.values == std::get<IntegerKeyColumn>(y).values;
            },
        },
        x);
    if (!same) return false;
  }
  return true;
}

Dataset parse_csv(const std::string& text, const Schema& schema, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, source + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_record(line);

  // slot per header field: index into loaded columns, or -1 to skip
  std::vector<int> slot(header.size(), -1);
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto it = schema.find(header[i]);
    if (it == schema.end()) continue;
    if (std::find(names.begin(), names.end(), header[i]) != names.end()) {
      fail(ErrorKind::data, source + ": duplicate header column '" + header[i] + "'");
    }
    slot[i] = static_cast<int>(names.size());
    names.push_back(header[i]);
    kinds.push_back(it->second);
  }
  for (const auto& [name, kind] : schema) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      fail(ErrorKind::config, source + ": schema column '" + name + "' not found in header");
    }
  }

  std::vector<std::vector<double>> numeric(names.size());
  std::vector<std::vector<std::int64_t>> ints(names.size());
  std::vector<std::vector<std::string>> labels(names.size());

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto fields = split_record(line);
    if (fields.size() != header.size()) {
      fail(ErrorKind::data, source + ": row " + std::to_string(row) + " has " +
                                std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(header.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const int s = slot[i];
      if (s < 0) continue;
      const std::string& f = fields[i];
      switch (kinds[s]) {
        case ColumnKind::numeric: {
          double v = 0.0;
          auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
          if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
            fail(ErrorKind::data, where(source, row, names[s]) + ": cannot parse '" + f +
                                      "' as a number");
          }
          if (!std::isfinite(v)) {
            fail(ErrorKind::data, where(source, row, names[s]) + ": non-finite value '" + f + "'");
          }
          numeric[s].push_back(v);
          break;
        }
        case ColumnKind::integer_key: {
          std::int64_t v = 0;
          auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
          if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
            fail(ErrorKind::data, where(source, row, names[s]) + ": cannot parse '" + f +
                                      "' as an integer key");
          }
          ints[s].push_back(v);
          break;
        }
        case ColumnKind::categorical:
          if (f.empty()) fail(ErrorKind::data, where(source, row, names[s]) + ": missing value");
          labels[s].push_back(f);
          break;
      }
    }
  }

  std::vector<Column> columns;
  columns.reserve(names.size());
  for (std::size_t s = 0; s < names.size(); ++s) {
    switch (kinds[s]) {
      case ColumnKind::numeric:
        columns.emplace_back(NumericColumn{std::move(numeric[s])});
        break;
      case ColumnKind::integer_key:
        columns.emplace_back(IntegerKeyColumn{std::move(ints[s])});
        break;
      case ColumnKind::categorical: {
        // first-appearance dictionary, then remapped to sorted order
        std::unordered_map<std::string, std::int32_t> dict;
        std::vector<std::string> seen;
        std::vector<std::int32_t> raw;
        raw.reserve(labels[s].size());
        for (auto& l : labels[s]) {
          auto [it, inserted] = dict.emplace(l, static_cast<std::int32_t>(seen.size()));
          if (inserted) seen.push_back(l);
          raw.push_back(it->second);
        }
        std::vector<std::int32_t> order(seen.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::int32_t a, std::int32_t b) { return seen[a] < seen[b]; });
        std::vector<std::int32_t> remap(seen.size());
        CategoricalColumn cat;
        for (std::size_t r = 0; r < order.size(); ++r) {
          remap[order[r]] = static_cast<std::int32_t>(r);
          cat.levels.push_back(seen[order[r]]);
        }
        cat.codes.resize(raw.size());
        for (std::size_t r = 0; r < raw.size(); ++r) cat.codes[r] = remap[raw[r]];
        columns.emplace_back(std::move(cat));
        break;
      }
    }
  }
  return Dataset(std::move(names), std::move(columns));
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::not_found, "cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str(), schema, path);
}

std::string to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t c = 0; c < ds.n_columns(); ++c) {
    if (c) out += ',';
    out += quote_if_needed(ds.names()[c]);
  }
  out += '\n';
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t c = 0; c < ds.n_columns(); ++c) {
      if (c) out += ',';
      out += quote_if_needed(ds.column(c).label(r));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::data, "cannot write '" + path + "'");
  f << to_csv(ds);
}

std::vector<std::size_t> stable_sort_permutation(
    const std::vector<const std::vector<std::int32_t>*>& keys, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    for (const auto* k : keys) {
      if ((*k)[a] != (*k)[b]) return (*k)[a] < (*k)[b];
    }
    return false;
  });
  return perm;
}

Dataset sort_by(const Dataset& ds, const std::vector<std::string>& keys) {
  std::vector<KeyCodes> encoded;
  encoded.reserve(keys.size());
  for (const auto& k : keys) encoded.push_back(encode_key(ds.column(k)));
  std::vector<const std::vector<std::int32_t>*> key_ptrs;
  for (const auto& e : encoded) key_ptrs.push_back(&e.codes);
  const auto perm = stable_sort_permutation(key_ptrs, ds.n_rows());

  std::vector<Column> cols(ds.n_columns());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < ds.n_columns(); ++c) {
    cols[c] = std::visit(
        [&](const auto& src) {
          auto dst = src;
          if constexpr (std::is_same_v<std::decay_t<decltype(src)>, CategoricalColumn>) {
            for (std::size_t r = 0; r < perm.size(); ++r) dst.codes[r] = src.codes[perm[r]];
          } else {
            for (std::size_t r = 0; r < perm.size(); ++r) dst.values[r] = src.values[perm[r]];
          }
          return Column(std::move(dst));
        },
        ds.column(c).storage());
  }
  return Dataset(ds.names(), std::move(cols), keys);
}

std::vector<GroupRange> group_ranges(const Dataset& ds, const std::vector<std::string>& keys) {
  const auto& state = ds.sort_state();
  if (keys.size() > state.size() || !std::equal(keys.begin(), keys.end(), state.begin())) {
    fail(ErrorKind::config, "dataset is not sorted by the requested grouping keys");
  }
  std::vector<const Column*> cols;
  for (const auto& k : keys) cols.push_back(&ds.column(k));

  auto same_key = [&](std::size_t a, std::size_t b) {
    for (const Column* c : cols) {
      if (c->as_double(a) != c->as_double(b)) return false;
    }
    return true;
  };

  std::vector<GroupRange> out;
  const std::size_t n = ds.n_rows();
  std::size_t start = 0;
  for (std::size_t r = 1; r <= n; ++r) {
    if (r == n || !same_key(start, r)) {
      GroupRange g;
      for (const Column* c : cols) g.key.push_back(c->label(start));
      g.rows = {start, r};
      out.push_back(std::move(g));
      start = r;
    }
  }
  return out;
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::conflict: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::not_found: return 3;
    case ErrorKind::rank: return 4;
    case ErrorKind::verify: return 5;
  }
  return 1;
}

}  // namespace causalols
