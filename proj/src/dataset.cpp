#include "brevity/dataset.hpp"

#include "brevity/audit.hpp"
#include "brevity/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace brevity {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool contains_ci(std::span<const std::string> list, std::string_view value) {
    const std::string v = lower(value);
    return std::any_of(list.begin(), list.end(), [&](const std::string& s) { return lower(s) == v; });
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

RowFilter::Op parse_op(std::string_view op) {
    if (op == "==" || op == "eq") return RowFilter::Op::eq;
    if (op == "!=" || op == "ne") return RowFilter::Op::ne;
    if (op == "<" || op == "lt") return RowFilter::Op::lt;
    if (op == "<=" || op == "le") return RowFilter::Op::le;
    if (op == ">" || op == "gt") return RowFilter::Op::gt;
    if (op == ">=" || op == "ge") return RowFilter::Op::ge;
    throw SchemaError("unknown filter operator '" + std::string(op) + "'");
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    const auto& v = j.at(key);
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
    } else if (v.is_array()) {
        for (const auto& e : v) out.push_back(e.get<std::string>());
    } else {
        throw SchemaError(std::string("schema key '") + key + "' must be a string or a list");
    }
    return out;
}

} // namespace

std::string_view to_string(AttributeKind kind) {
    switch (kind) {
    case AttributeKind::boolean: return "boolean";
    case AttributeKind::categorical: return "categorical";
    case AttributeKind::numeric: return "numeric";
    }
    return "?";
}

AttributeKind attribute_kind_from_string(std::string_view text) {
    const std::string t = lower(text);
    if (t == "boolean" || t == "bool" || t == "binary") return AttributeKind::boolean;
    if (t == "categorical" || t == "category" || t == "nominal") return AttributeKind::categorical;
    if (t == "numeric" || t == "number" || t == "integer" || t == "real") return AttributeKind::numeric;
    throw SchemaError("unknown attribute kind '" + std::string(text) + "'");
}

TableSchema parse_schema(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed schema: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("schema must be a JSON object");
    if (!j.contains("target") || !j.contains("columns"))
        throw SchemaError("schema needs 'target' and 'columns'");

    TableSchema schema;
    try {
        schema.target = j.at("target").get<std::string>();
        for (const auto& c : j.at("columns")) {
            AttributeSchema a;
            a.name = c.at("name").get<std::string>();
            a.kind = attribute_kind_from_string(c.value("kind", std::string("numeric")));
            a.decimals = c.value("decimals", 0);
            schema.columns.push_back(std::move(a));
        }
        if (j.contains("positive")) schema.positive_literals = string_list(j, "positive");
        if (j.contains("missing")) schema.missing_markers = string_list(j, "missing");
        schema.drop = string_list(j, "drop");
        if (j.contains("filters")) {
            for (const auto& f : j.at("filters")) {
                RowFilter rf;
                rf.column = f.at("column").get<std::string>();
                rf.op = parse_op(f.value("op", std::string("==")));
                rf.value = f.at("value").get<double>();
                schema.filters.push_back(std::move(rf));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad schema entry: ") + e.what());
    }

    std::set<std::string> seen;
    for (const auto& c : schema.columns) {
        if (!seen.insert(c.name).second) throw SchemaError("duplicate column name '" + c.name + "'");
        if (c.decimals < 0) throw SchemaError("negative decimals for '" + c.name + "'");
        if (c.kind != AttributeKind::numeric && c.decimals != 0)
            throw SchemaError("decimals must be 0 for non-numeric column '" + c.name + "'");
    }
    if (!seen.count(schema.target)) throw TargetError("target column '" + schema.target + "' not in schema");
    for (const auto& c : schema.columns)
        if (c.name == schema.target && c.kind != AttributeKind::boolean)
            throw TargetError("target column '" + schema.target + "' must be boolean");
    if (schema.positive_literals.empty()) throw SchemaError("no positive target literal");
    return schema;
}

TableSchema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_schema(buf.str());
}

std::optional<std::size_t> DataTable::find_column(std::string_view name) const {
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name == name) return i;
    return std::nullopt;
}

std::size_t DataTable::column_index(std::string_view name) const {
    if (auto i = find_column(name)) return *i;
    throw SchemaError("no column named '" + std::string(name) + "'");
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

DataTable read_csv(std::istream& in, const TableSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty CSV input");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3); // BOM
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() != schema.columns.size())
        throw SchemaError("CSV has " + std::to_string(header.size()) + " columns, schema declares " +
                          std::to_string(schema.columns.size()));
    for (std::size_t i = 0; i < header.size(); ++i)
        if (trim(header[i]) != schema.columns[i].name)
            throw SchemaError("CSV column " + std::to_string(i) + " is '" + std::string(trim(header[i])) +
                              "', schema expects '" + schema.columns[i].name + "'");

    DataTable table;
    table.schema = schema.columns;
    table.target_name = schema.target;
    table.positive_literals = schema.positive_literals;
    const auto target_col = table.find_column(schema.target);
    if (!target_col) throw TargetError("target column '" + schema.target + "' absent");
    if (table.schema[*target_col].kind != AttributeKind::boolean)
        throw TargetError("target column '" + schema.target + "' must be boolean");

    std::vector<std::set<std::string>> literals(header.size());
    PointId row_id = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw SchemaError("row " + std::to_string(row_id + 1) + " has " + std::to_string(fields.size()) +
                              " fields, expected " + std::to_string(header.size()));
        std::vector<Cell> row;
        row.reserve(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const std::string_view raw = trim(fields[c]);
            if (contains_ci(schema.missing_markers, raw)) {
                row.emplace_back(Missing{});
                continue;
            }
            switch (schema.columns[c].kind) {
            case AttributeKind::numeric:
                if (auto v = parse_number(raw)) row.emplace_back(*v);
                else row.emplace_back(Missing{});
                break;
            case AttributeKind::categorical: row.emplace_back(std::string(raw)); break;
            case AttributeKind::boolean:
                literals[c].insert(lower(raw));
                row.emplace_back(contains_ci(schema.positive_literals, raw));
                break;
            }
        }
        table.rows.push_back(std::move(row));
        table.row_ids.push_back(row_id++);
    }
    for (std::size_t c = 0; c < literals.size(); ++c) {
        if (literals[c].size() <= 2) continue;
        const std::string msg = "column '" + schema.columns[c].name + "' has " +
                                std::to_string(literals[c].size()) + " distinct values, expected 2";
        if (c == *target_col) throw TargetError(msg);
        throw SchemaError(msg);
    }
    return table;
}

DataTable load_csv(const std::filesystem::path& path, const TableSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file " + path.string());
    return read_csv(in, schema);
}

DataTable load_csv(const std::filesystem::path& path, std::vector<AttributeSchema> columns,
                   std::string target_name) {
    TableSchema schema;
    schema.columns = std::move(columns);
    schema.target = std::move(target_name);
    return load_csv(path, schema);
}

DataTable clean(const DataTable& table, std::span<const std::string> drop) {
    std::vector<bool> keep(table.schema.size(), true);
    for (const auto& name : drop) {
        const auto c = table.column_index(name);
        if (table.schema[c].name == table.target_name) throw SchemaError("cannot drop the target column");
        keep[c] = false;
    }
    DataTable out;
    out.target_name = table.target_name;
    out.positive_literals = table.positive_literals;
    for (std::size_t c = 0; c < keep.size(); ++c)
        if (keep[c]) out.schema.push_back(table.schema[c]);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        bool complete = true;
        for (std::size_t c = 0; c < keep.size() && complete; ++c)
            if (keep[c] && is_missing(row[c])) complete = false;
        if (!complete) continue;
        std::vector<Cell> kept;
        kept.reserve(out.schema.size());
        for (std::size_t c = 0; c < keep.size(); ++c)
            if (keep[c]) kept.push_back(row[c]);
        out.rows.push_back(std::move(kept));
        out.row_ids.push_back(table.row_ids[r]);
    }
    if (out.rows.empty()) throw EmptyDatasetError("no complete rows remain after cleaning");
    return out;
}

DataTable apply_filters(const DataTable& table, std::span<const RowFilter> filters) {
    std::vector<std::size_t> cols;
    for (const auto& f : filters) {
        const auto c = table.column_index(f.column);
        if (table.schema[c].kind == AttributeKind::categorical)
            throw SchemaError("filters apply to numeric or boolean columns, not '" + f.column + "'");
        cols.push_back(c);
    }
    DataTable out = table;
    out.rows.clear();
    out.row_ids.clear();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        bool removed = false;
        for (std::size_t i = 0; i < filters.size() && !removed; ++i) {
            const Cell& cell = table.rows[r][cols[i]];
            double v = 0;
            if (const auto* d = std::get_if<double>(&cell)) v = *d;
            else if (const auto* b = std::get_if<bool>(&cell)) v = *b ? 1.0 : 0.0;
            else continue;
            const double x = filters[i].value;
            switch (filters[i].op) {
            case RowFilter::Op::eq: removed = v == x; break;
            case RowFilter::Op::ne: removed = v != x; break;
            case RowFilter::Op::lt: removed = v < x; break;
            case RowFilter::Op::le: removed = v <= x; break;
            case RowFilter::Op::gt: removed = v > x; break;
            case RowFilter::Op::ge: removed = v >= x; break;
            }
        }
        if (removed) continue;
        out.rows.push_back(table.rows[r]);
        out.row_ids.push_back(table.row_ids[r]);
    }
    if (out.rows.empty()) throw EmptyDatasetError("row filters removed every row");
    return out;
}

DataTable one_hot_encode(const DataTable& table, std::vector<std::string>* warnings) {
    DataTable out;
    out.target_name = table.target_name;
    out.positive_literals = table.positive_literals;
    out.row_ids = table.row_ids;
    out.rows.resize(table.rows.size());

    for (std::size_t c = 0; c < table.schema.size(); ++c) {
        const auto& col = table.schema[c];
        if (col.kind != AttributeKind::categorical) {
            out.schema.push_back(col);
            for (std::size_t r = 0; r < table.rows.size(); ++r) out.rows[r].push_back(table.rows[r][c]);
            continue;
        }
        std::vector<std::string> categories;
        for (const auto& row : table.rows) {
            if (is_missing(row[c])) throw SchemaError("one_hot_encode needs a clean table");
            const auto& label = std::get<std::string>(row[c]);
            if (std::find(categories.begin(), categories.end(), label) == categories.end())
                categories.push_back(label);
        }
        if (categories.size() < 2) {
            if (warnings)
                warnings->push_back("categorical attribute '" + col.name +
                                    "' has a single category; dropped");
            continue;
        }
        for (const auto& cat : categories) {
            out.schema.push_back({col.name + "=" + cat, AttributeKind::boolean, 0, col.name, cat});
            for (std::size_t r = 0; r < table.rows.size(); ++r)
                out.rows[r].emplace_back(std::get<std::string>(table.rows[r][c]) == cat);
        }
    }
    return out;
}

EncodedDataset::EncodedDataset(std::vector<EncodedAttribute> attributes, std::vector<PointId> ids,
                               std::vector<std::vector<std::int64_t>> columns,
                               std::vector<std::uint8_t> target, std::string target_name,
                               std::vector<std::string> positive_literals)
    : attributes_(std::move(attributes)), ids_(std::move(ids)), columns_(std::move(columns)),
      target_(std::move(target)), target_name_(std::move(target_name)),
      positive_literals_(std::move(positive_literals)) {
    if (columns_.size() != attributes_.size()) throw DataError("attribute/column count mismatch");
    for (const auto& col : columns_)
        if (col.size() != ids_.size()) throw DataError("column length differs from point count");
    if (target_.size() != ids_.size()) throw DataError("target length differs from point count");
    std::set<std::string> names;
    for (const auto& a : attributes_)
        if (!names.insert(a.name).second) throw SchemaError("duplicate attribute name '" + a.name + "'");
}

std::size_t EncodedDataset::positive_count() const {
    return static_cast<std::size_t>(std::count(target_.begin(), target_.end(), std::uint8_t{1}));
}

std::optional<std::size_t> EncodedDataset::find_attribute(std::string_view name) const {
    for (std::size_t a = 0; a < attributes_.size(); ++a)
        if (attributes_[a].name == name) return a;
    return std::nullopt;
}

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> rows) const {
    std::vector<PointId> ids;
    std::vector<std::vector<std::int64_t>> cols(columns_.size());
    std::vector<std::uint8_t> target;
    ids.reserve(rows.size());
    target.reserve(rows.size());
    for (auto& c : cols) c.reserve(rows.size());
    for (const auto r : rows) {
        ids.push_back(ids_.at(r));
        target.push_back(target_[r]);
        for (std::size_t a = 0; a < columns_.size(); ++a) cols[a].push_back(columns_[a][r]);
    }
    return EncodedDataset(attributes_, std::move(ids), std::move(cols), std::move(target), target_name_,
                          positive_literals_);
}

EncodedDataset EncodedDataset::restrict_to(std::span<const PointId> ids) const {
    std::unordered_map<PointId, std::size_t> position;
    position.reserve(ids_.size());
    for (std::size_t r = 0; r < ids_.size(); ++r) position.emplace(ids_[r], r);
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto id : ids) {
        auto it = position.find(id);
        if (it == position.end()) throw DataError("unknown point id " + std::to_string(id));
        rows.push_back(it->second);
    }
    return subset(rows);
}

EncodedDataset scale_to_integers(const DataTable& table) {
    const auto target_col = table.find_column(table.target_name);
    if (!target_col) throw TargetError("target column '" + table.target_name + "' absent");

    std::vector<EncodedAttribute> attrs;
    std::vector<std::vector<std::int64_t>> cols;
    constexpr double limit = 9007199254740992.0; // 2^53, exact in double
    for (std::size_t c = 0; c < table.schema.size(); ++c) {
        if (c == *target_col) continue;
        const auto& col = table.schema[c];
        EncodedAttribute attr;
        attr.name = col.name;
        attr.provenance.column = col.source_column.empty() ? col.name : col.source_column;
        attr.provenance.category = col.category;
        std::vector<std::int64_t> values;
        values.reserve(table.rows.size());
        switch (col.kind) {
        case AttributeKind::categorical:
            throw SchemaError("scale_to_integers needs one-hot encoded input ('" + col.name + "')");
        case AttributeKind::boolean:
            attr.kind = EncodedKind::boolean;
            for (const auto& row : table.rows) {
                if (is_missing(row[c])) throw SchemaError("scale_to_integers needs a clean table");
                values.push_back(std::get<bool>(row[c]) ? 1 : 0);
            }
            break;
        case AttributeKind::numeric: {
            attr.kind = EncodedKind::numeric;
            attr.provenance.decimals = col.decimals;
            const double factor = std::pow(10.0, col.decimals);
            for (const auto& row : table.rows) {
                if (is_missing(row[c])) throw SchemaError("scale_to_integers needs a clean table");
                const double scaled = std::round(std::get<double>(row[c]) * factor);
                if (!std::isfinite(scaled) || std::fabs(scaled) >= limit)
                    throw ScalingError("value of attribute '" + col.name + "' overflows the integer domain");
                values.push_back(static_cast<std::int64_t>(scaled));
            }
            break;
        }
        }
        attrs.push_back(std::move(attr));
        cols.push_back(std::move(values));
    }
    std::vector<std::uint8_t> target;
    target.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (is_missing(row[*target_col])) throw SchemaError("scale_to_integers needs a clean table");
        target.push_back(std::get<bool>(row[*target_col]) ? 1 : 0);
    }
    return EncodedDataset(std::move(attrs), table.row_ids, std::move(cols), std::move(target),
                          table.target_name, table.positive_literals);
}

EncodedDataset encode(const DataTable& raw, const TableSchema& schema, std::vector<std::string>* warnings) {
    DataTable t = clean(raw, schema.drop);
    if (!schema.filters.empty()) t = apply_filters(t, schema.filters);
    return scale_to_integers(one_hot_encode(t, warnings));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    // Fisher-Yates on raw mt19937_64 output; the standard distributions are
    // implementation-defined, which would break cross-platform reproducibility.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::pair<EncodedDataset, EncodedDataset> split_train_validation(const EncodedDataset& ds, double ratio,
                                                                 std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw SplitError("split ratio must lie strictly between 0 and 1");
    audit::observe("split", ds.ids());
    const std::size_t n = ds.size();
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    if (n < 2 || n_train == 0 || n_train >= n)
        throw SplitError("split of " + std::to_string(n) + " points leaves an empty part");
    auto perm = shuffled_indices(n, seed);
    std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> valid(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(train.begin(), train.end());
    std::sort(valid.begin(), valid.end());
    return {ds.subset(train), ds.subset(valid)};
}

FoldPlan make_folds(const EncodedDataset& ds, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw FoldError("need at least 2 folds");
    if (k > ds.size())
        throw FoldError("cannot make " + std::to_string(k) + " folds from " + std::to_string(ds.size()) +
                        " points");
    const auto perm = shuffled_indices(ds.size(), seed);
    FoldPlan plan;
    plan.seed = seed;
    plan.folds.resize(k);
    const std::size_t base = ds.size() / k;
    const std::size_t extra = ds.size() % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        for (std::size_t i = 0; i < len; ++i) plan.folds[f].push_back(ds.ids()[perm[pos++]]);
        std::sort(plan.folds[f].begin(), plan.folds[f].end());
    }
    return plan;
}

} // namespace brevity
