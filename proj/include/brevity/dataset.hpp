#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace brevity {

using PointId = std::uint32_t;

enum class AttributeKind { boolean, categorical, numeric };

std::string_view to_string(AttributeKind kind);
AttributeKind attribute_kind_from_string(std::string_view text);

struct AttributeSchema {
    std::string name;
    AttributeKind kind = AttributeKind::numeric;
    int decimals = 0; ///< decimal places kept when scaling numeric values to integers
    std::string source_column;           ///< set by one_hot_encode
    std::optional<std::string> category; ///< set by one_hot_encode
};

/// Declarative row predicate. Rows for which it holds are removed.
struct RowFilter {
    enum class Op { eq, ne, lt, le, gt, ge };
    std::string column;
    Op op = Op::eq;
    double value = 0.0;
};

/// Everything a schema file declares about a CSV table.
struct TableSchema {
    std::vector<AttributeSchema> columns;
    std::string target;
    std::vector<std::string> positive_literals{"1", "true", "yes"};
    std::vector<std::string> missing_markers{"", "?", "NA", "n/a", "nan"};
    std::vector<std::string> drop;
    std::vector<RowFilter> filters;
};

TableSchema parse_schema(std::string_view json_text);
TableSchema load_schema(const std::filesystem::path& path);

struct Missing {
    friend bool operator==(Missing, Missing) = default;
};

/// A raw cell: missing, boolean, category label, or number.
using Cell = std::variant<Missing, bool, std::string, double>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<Missing>(c); }

struct DataTable {
    std::vector<AttributeSchema> schema;
    std::vector<std::vector<Cell>> rows;
    std::vector<PointId> row_ids; ///< stable identifiers, the 0-based data row in the source file
    std::string target_name;
    std::vector<std::string> positive_literals{"1", "true", "yes"};

    std::size_t column_index(std::string_view name) const; ///< throws SchemaError when absent
    std::optional<std::size_t> find_column(std::string_view name) const;
};

DataTable read_csv(std::istream& in, const TableSchema& schema);
DataTable load_csv(const std::filesystem::path& path, const TableSchema& schema);
DataTable load_csv(const std::filesystem::path& path, std::vector<AttributeSchema> columns,
                   std::string target_name);

/// Splits one CSV record, honouring double quotes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Drops the listed columns, then keeps only rows without a missing cell.
DataTable clean(const DataTable& table, std::span<const std::string> drop = {});

/// Removes every row matched by one of the filters. Missing cells never match.
DataTable apply_filters(const DataTable& table, std::span<const RowFilter> filters);

/// Replaces each categorical column by one boolean column per category, named
/// "column=category", in order of first appearance. Single-category columns are
/// dropped and reported through `warnings`.
DataTable one_hot_encode(const DataTable& table, std::vector<std::string>* warnings = nullptr);

enum class EncodedKind { boolean, numeric };

/// Where an encoded attribute came from.
struct Provenance {
    std::string column;
    std::optional<std::string> category; ///< set for one-hot columns
    int decimals = 0;                    ///< integer value = raw * 10^decimals
};

struct EncodedAttribute {
    std::string name;
    EncodedKind kind = EncodedKind::numeric;
    Provenance provenance;
};

/// Immutable table of points over Boolean and integer attributes with a binary target.
/// Rows are addressed by position; `ids()` maps positions to stable point identifiers.
class EncodedDataset {
public:
    EncodedDataset() = default;
    EncodedDataset(std::vector<EncodedAttribute> attributes, std::vector<PointId> ids,
                   std::vector<std::vector<std::int64_t>> columns, std::vector<std::uint8_t> target,
                   std::string target_name = "target",
                   std::vector<std::string> positive_literals = {"1"});

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    std::size_t attribute_count() const { return attributes_.size(); }

    const EncodedAttribute& attribute(std::size_t a) const { return attributes_.at(a); }
    std::span<const EncodedAttribute> attributes() const { return attributes_; }
    std::span<const PointId> ids() const { return ids_; }
    std::span<const std::int64_t> column(std::size_t a) const { return columns_.at(a); }

    bool is_numeric(std::size_t a) const { return attributes_.at(a).kind == EncodedKind::numeric; }
    std::int64_t value(std::size_t a, std::size_t row) const { return columns_[a][row]; }
    bool holds(std::size_t a, std::size_t row) const { return columns_[a][row] != 0; }
    bool target(std::size_t row) const { return target_[row] != 0; }
    std::span<const std::uint8_t> target_column() const { return target_; }
    std::size_t positive_count() const;

    const std::string& target_name() const { return target_name_; }
    std::span<const std::string> positive_literals() const { return positive_literals_; }

    std::optional<std::size_t> find_attribute(std::string_view name) const;

    /// Rows at the given positions, in that order.
    EncodedDataset subset(std::span<const std::size_t> rows) const;
    /// Rows whose identifiers are listed, in the order given. Throws on unknown ids.
    EncodedDataset restrict_to(std::span<const PointId> ids) const;

private:
    std::vector<EncodedAttribute> attributes_;
    std::vector<PointId> ids_;
    std::vector<std::vector<std::int64_t>> columns_;
    std::vector<std::uint8_t> target_;
    std::string target_name_;
    std::vector<std::string> positive_literals_;
};

/// Multiplies numeric values by 10^decimals and rounds half away from zero.
EncodedDataset scale_to_integers(const DataTable& table);

/// clean → filters → one-hot → scale, as driven by a schema file.
EncodedDataset encode(const DataTable& raw, const TableSchema& schema,
                      std::vector<std::string>* warnings = nullptr);

/// Returns (training, validation) with |training| = round(ratio * |ds|).
std::pair<EncodedDataset, EncodedDataset> split_train_validation(const EncodedDataset& ds,
                                                                 double ratio,
                                                                 std::uint64_t seed);

struct FoldPlan {
    std::vector<std::vector<PointId>> folds;
    std::uint64_t seed = 0;
};

FoldPlan make_folds(const EncodedDataset& ds, std::size_t k, std::uint64_t seed);

/// Deterministic permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Mixes a master seed with a stream index (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

} // namespace brevity
