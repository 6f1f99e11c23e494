#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace causalols {

enum class ColumnKind { numeric, categorical, integer_key };

const char* to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

struct NumericColumn {
  std::vector<double> values;
};

// Dictionary-encoded; levels are sorted lexicographically so codes order like
// their labels.
struct CategoricalColumn {
  std::vector<std::int32_t> codes;
  std::vector<std::string> levels;

  std::optional<std::int32_t> find_level(const std::string& label) const;
};

struct IntegerKeyColumn {
  std::vector<std::int64_t> values;
};

class Column {
 public:
  using Storage = std::variant<NumericColumn, CategoricalColumn, IntegerKeyColumn>;

  Column() = default;
  explicit Column(Storage storage) : storage_(std::move(storage)) {}

  ColumnKind kind() const noexcept;
  std::size_t size() const noexcept;

  const NumericColumn& numeric() const;
  const CategoricalColumn& categorical() const;
  const IntegerKeyColumn& integer_key() const;

  // Value as a double: numeric value, integer key value, or categorical code.
  double as_double(std::size_t row) const;
  std::string label(std::size_t row) const;

  const Storage& storage() const noexcept { return storage_; }

 private:
  Storage storage_;
};

// Dense ordered codes for any column kind: distinct values are ranked in
// ascending order (numbers numerically, categories lexicographically).
struct KeyCodes {
  std::vector<std::int32_t> codes;
  std::vector<std::string> labels;
};

KeyCodes encode_key(const Column& column);

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return end <= begin; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

struct GroupRange {
  std::vector<std::string> key;
  RowRange rows;
};

using Schema = std::map<std::string, ColumnKind>;

/// Immutable columnar table. Every construction stamps a fresh version so that
/// matrices built from an older row order can be detected as stale.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> names, std::vector<Column> columns,
          std::vector<std::string> sort_state = {});

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_columns() const noexcept { return columns_.size(); }
  std::uint64_t version() const noexcept { return version_; }

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<std::string>& sort_state() const noexcept { return sort_state_; }

  bool has_column(const std::string& name) const;
  const Column& column(const std::string& name) const;
  const Column& column(std::size_t index) const { return columns_.at(index); }

  // Copy with one column swapped out; used to build counterfactual inputs.
  Dataset with_column(const std::string& name, Column replacement) const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  std::vector<std::string> names_;
  std::vector<Column> columns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> sort_state_;
  std::size_t n_rows_ = 0;
  std::uint64_t version_ = 0;
};

/// Columns named in the schema are loaded; other header columns are skipped.
Dataset load_csv(const std::string& path, const Schema& schema);
Dataset parse_csv(const std::string& text, const Schema& schema,
                  const std::string& source = "<memory>");
void write_csv(const Dataset& ds, const std::string& path);
std::string to_csv(const Dataset& ds);

Dataset sort_by(const Dataset& ds, const std::vector<std::string>& keys);
std::vector<std::size_t> stable_sort_permutation(
    const std::vector<const std::vector<std::int32_t>*>& keys, std::size_t n);

std::vector<GroupRange> group_ranges(const Dataset& ds,
                                     const std::vector<std::string>& keys);

}  // namespace causalols
