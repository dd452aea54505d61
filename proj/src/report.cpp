#include "brevity/report.hpp"

#include "brevity/audit.hpp"
#include "brevity/error.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace brevity {

namespace {

using nlohmann::json;

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

double raw_value(std::int64_t scaled, int decimals) { return static_cast<double>(scaled) / std::pow(10.0, decimals); }

std::int64_t scaled_value(const json& v, int decimals) {
    return static_cast<std::int64_t>(std::llround(v.get<double>() * std::pow(10.0, decimals)));
}

std::string_view op_name(RowFilter::Op op) {
    switch (op) {
    case RowFilter::Op::eq: return "==";
    case RowFilter::Op::ne: return "!=";
    case RowFilter::Op::lt: return "<";
    case RowFilter::Op::le: return "<=";
    case RowFilter::Op::gt: return ">";
    case RowFilter::Op::ge: return ">=";
    }
    return "?";
}

} // namespace

std::string_view to_string(OutputFormat format) {
    switch (format) {
    case OutputFormat::human: return "human";
    case OutputFormat::csv: return "csv";
    case OutputFormat::json: return "json";
    }
    return "?";
}

OutputFormat output_format_from_string(std::string_view text) {
    if (text == "human") return OutputFormat::human;
    if (text == "csv") return OutputFormat::csv;
    if (text == "json") return OutputFormat::json;
    throw UsageError("unknown format '" + std::string(text) + "' (expected human, csv or json)");
}

Accuracy holdout_accuracy(const Formula& f, const EncodedDataset& hold) {
    audit::observe("holdout", hold.ids());
    return accuracy(f, hold);
}

CvReport cross_validate(const EncodedDataset& ds, const CvSettings& settings) {
    if (settings.k < 2) throw FoldError("cross-validation needs k >= 2");
    const FoldPlan plan = make_folds(ds, settings.k, settings.seed);
    CvReport report;
    report.scheme = settings.fsm.scheme;
    report.seed = settings.seed;
    report.k = settings.k;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto& hold_ids = plan.folds[f];
        audit::observe("fold", hold_ids);
        std::vector<PointId> train_ids;
        for (std::size_t g = 0; g < plan.folds.size(); ++g)
            if (g != f) train_ids.insert(train_ids.end(), plan.folds[g].begin(), plan.folds[g].end());
        std::sort(train_ids.begin(), train_ids.end());
        const EncodedDataset train = ds.restrict_to(train_ids);

        FsmConfig cfg = settings.fsm;
        cfg.seed = derive_seed(settings.seed, f);
        const FsmResult res = run_fsm(train, cfg);

        // The holdout part is only materialized once the classifier is fixed.
        const EncodedDataset hold = ds.restrict_to(hold_ids);
        FoldRecord rec;
        rec.fold = f + 1;
        rec.formula = render(res.final, ds.attributes());
        rec.rpn = formula_to_json(res.final, ds.attributes());
        rec.size = size(res.final);
        rec.chosen_length = res.chosen_length;
        rec.holdout = holdout_accuracy(res.final, hold);
        rec.stop_reason = res.stop_reason;
        rec.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.folds.push_back(std::move(rec));
    }
    summarize_folds(report);
    return report;
}

void summarize_folds(CvReport& report) {
    const auto n = static_cast<double>(report.folds.size());
    report.mean_accuracy = report.std_accuracy = report.mean_size = 0.0;
    if (report.folds.empty()) return;
    for (const auto& r : report.folds) {
        report.mean_accuracy += 100.0 * r.holdout.value();
        report.mean_size += static_cast<double>(r.size);
    }
    report.mean_accuracy /= n;
    report.mean_size /= n;
    if (report.folds.size() > 1) {
        double ss = 0.0;
        for (const auto& r : report.folds) {
            const double d = 100.0 * r.holdout.value() - report.mean_accuracy;
            ss += d * d;
        }
        report.std_accuracy = std::sqrt(ss / (n - 1.0));
    }
}

std::string summarize(const CvReport& report, OutputFormat format, bool timings) {
    std::ostringstream out;
    switch (format) {
    case OutputFormat::csv:
        out << "fold,accuracy,length,L,stop_reason,elapsed_s,formula\n";
        for (const auto& r : report.folds) {
            out << r.fold << ',' << fixed(r.holdout.value(), 6) << ',' << r.size << ',' << r.chosen_length << ','
                << to_string(r.stop_reason) << ',' << fixed(timings ? r.elapsed_s : 0.0, 3) << ','
                << csv_quote(r.formula) << '\n';
        }
        out << "mean," << fixed(report.mean_accuracy / 100.0, 3) << ',' << fixed(report.mean_size, 1) << ",,,,\n";
        out << "std," << fixed(report.std_accuracy / 100.0, 3) << ",,,,,\n";
        break;
    case OutputFormat::json: {
        json folds = json::array();
        for (const auto& r : report.folds) {
            folds.push_back({{"fold", r.fold},
                             {"formula", r.formula},
                             {"rpn", r.rpn},
                             {"size", r.size},
                             {"L", r.chosen_length},
                             {"holdout", {{"agree", r.holdout.agree}, {"total", r.holdout.total}}},
                             {"accuracy", r.holdout.value()},
                             {"stop_reason", std::string(to_string(r.stop_reason))},
                             {"elapsed_s", timings ? r.elapsed_s : 0.0}});
        }
        const json j = {{"scheme", std::string(to_string(report.scheme))},
                        {"seed", report.seed},
                        {"k", report.k},
                        {"folds", folds},
                        {"mean_accuracy", report.mean_accuracy},
                        {"std_accuracy", report.std_accuracy},
                        {"mean_size", report.mean_size}};
        out << j.dump(2) << '\n';
        break;
    }
    case OutputFormat::human:
        out << "scheme " << to_string(report.scheme) << ", " << report.k << " folds, seed " << report.seed << "\n\n";
        out << "fold  accuracy  size   L  stop        elapsed  formula\n";
        for (const auto& r : report.folds) {
            char line[128];
            std::snprintf(line, sizeof line, "%4zu  %7.2f%%  %4zu  %2zu  %-10s  %6.1fs  ", r.fold,
                          100.0 * r.holdout.value(), r.size, r.chosen_length,
                          std::string(to_string(r.stop_reason)).c_str(), timings ? r.elapsed_s : 0.0);
            out << line << r.formula << '\n';
        }
        out << "\nmean accuracy " << fixed(report.mean_accuracy, 3) << "% (std " << fixed(report.std_accuracy, 3)
            << "), mean formula size " << fixed(report.mean_size, 1) << '\n';
        break;
    }
    return out.str();
}

json formula_to_json(const Formula& f, std::span<const EncodedAttribute> attributes) {
    json rpn = json::array();
    for (const auto& t : f.rpn()) {
        switch (t.kind) {
        case Token::Kind::negation: rpn.push_back({{"op", "not"}}); continue;
        case Token::Kind::conjunction: rpn.push_back({{"op", "and"}}); continue;
        case Token::Kind::disjunction: rpn.push_back({{"op", "or"}}); continue;
        case Token::Kind::leaf: break;
        }
        const auto& attr = attributes[t.prop.attr];
        const auto& prov = attr.provenance;
        json leaf = {{"leaf", attr.name}, {"column", prov.column}};
        if (prov.category) leaf["category"] = *prov.category;
        switch (t.prop.kind) {
        case Proposition::Kind::boolean: leaf["kind"] = "boolean"; break;
        case Proposition::Kind::pivot:
            leaf["kind"] = "pivot";
            leaf["decimals"] = prov.decimals;
            leaf["lo"] = raw_value(t.prop.lo, prov.decimals);
            break;
        case Proposition::Kind::interval:
            leaf["kind"] = "interval";
            leaf["decimals"] = prov.decimals;
            leaf["lo"] = raw_value(t.prop.lo, prov.decimals);
            leaf["hi"] = raw_value(t.prop.hi, prov.decimals);
            break;
        }
        rpn.push_back(std::move(leaf));
    }
    return rpn;
}

Formula formula_from_json(const json& rpn, std::span<const EncodedAttribute> attributes) {
    if (!rpn.is_array()) throw DataError("formula tokens must be a JSON array");
    std::vector<Token> tokens;
    try {
        for (const auto& t : rpn) {
            if (t.contains("op")) {
                const auto op = t.at("op").get<std::string>();
                if (op == "not") tokens.push_back(Token::negation());
                else if (op == "and") tokens.push_back(Token::conjunction());
                else if (op == "or") tokens.push_back(Token::disjunction());
                else throw DataError("unknown operator '" + op + "'");
                continue;
            }
            const auto name = t.at("leaf").get<std::string>();
            std::optional<std::uint32_t> attr;
            for (std::size_t a = 0; a < attributes.size(); ++a)
                if (attributes[a].name == name) attr = static_cast<std::uint32_t>(a);
            if (!attr) throw DataError("formula refers to unknown attribute '" + name + "'");
            const auto kind = t.at("kind").get<std::string>();
            const int dec = attributes[*attr].provenance.decimals;
            if (kind == "boolean") tokens.push_back(Token::leaf(Proposition::boolean(*attr)));
            else if (kind == "pivot") tokens.push_back(Token::leaf(Proposition::pivot(*attr, scaled_value(t.at("lo"), dec))));
            else if (kind == "interval")
                tokens.push_back(Token::leaf(
                    Proposition::interval(*attr, scaled_value(t.at("lo"), dec), scaled_value(t.at("hi"), dec))));
            else throw DataError("unknown leaf kind '" + kind + "'");
        }
        return Formula(std::move(tokens));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed formula tokens: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("malformed formula: ") + e.what());
    }
}

json schema_to_json(const TableSchema& schema) {
    json columns = json::array();
    for (const auto& c : schema.columns) {
        json col = {{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
        if (c.kind == AttributeKind::numeric) col["decimals"] = c.decimals;
        columns.push_back(std::move(col));
    }
    json filters = json::array();
    for (const auto& f : schema.filters)
        filters.push_back({{"column", f.column}, {"op", std::string(op_name(f.op))}, {"value", f.value}});
    return {{"target", schema.target},
            {"positive", schema.positive_literals},
            {"missing", schema.missing_markers},
            {"drop", schema.drop},
            {"filters", filters},
            {"columns", columns}};
}

json classifier_file(const Formula& f, const EncodedDataset& ds, const TableSchema& schema) {
    return {{"formula", render(f, ds.attributes())},
            {"size", size(f)},
            {"target", {{"column", ds.target_name()}, {"positive", std::vector<std::string>(ds.positive_literals().begin(), ds.positive_literals().end())}}},
            {"rpn", formula_to_json(f, ds.attributes())},
            {"schema", schema_to_json(schema)}};
}

Evaluation evaluate_classifier(const json& file, const DataTable& raw_table) {
    TableSchema schema;
    try {
        schema = parse_schema(file.at("schema").dump());
    } catch (const json::exception& e) {
        throw DataError(std::string("classifier file lacks a schema: ") + e.what());
    }
    DataTable table = apply_filters(clean(raw_table, schema.drop), schema.filters);
    const auto target = table.column_index(table.target_name);

    struct Leaf {
        std::size_t column;
        std::optional<std::string> category;
        Proposition::Kind kind;
        int decimals;
        std::int64_t lo, hi;
    };
    enum class Op { leaf, negation, conjunction, disjunction };
    std::vector<std::pair<Op, Leaf>> program;
    try {
        for (const auto& t : file.at("rpn")) {
            if (t.contains("op")) {
                const auto op = t.at("op").get<std::string>();
                const Op o = op == "not" ? Op::negation : op == "and" ? Op::conjunction : op == "or" ? Op::disjunction
                                                                                                     : Op::leaf;
                if (o == Op::leaf) throw DataError("unknown operator '" + op + "'");
                program.push_back({o, {}});
                continue;
            }
            Leaf leaf{};
            leaf.column = table.column_index(t.at("column").get<std::string>());
            if (t.contains("category")) leaf.category = t.at("category").get<std::string>();
            const auto kind = t.at("kind").get<std::string>();
            leaf.kind = kind == "boolean" ? Proposition::Kind::boolean
                        : kind == "pivot" ? Proposition::Kind::pivot
                                          : Proposition::Kind::interval;
            if (leaf.kind != Proposition::Kind::boolean) {
                leaf.decimals = t.at("decimals").get<int>();
                leaf.lo = scaled_value(t.at("lo"), leaf.decimals);
                if (leaf.kind == Proposition::Kind::interval) leaf.hi = scaled_value(t.at("hi"), leaf.decimals);
            }
            program.push_back({Op::leaf, leaf});
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed classifier file: ") + e.what());
    }

    Evaluation ev;
    ev.accuracy = {0, table.rows.size()};
    std::vector<bool> stack;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        stack.clear();
        for (const auto& [op, leaf] : program) {
            switch (op) {
            case Op::leaf: {
                const Cell& c = row[leaf.column];
                bool v = false;
                if (leaf.category) {
                    v = std::holds_alternative<std::string>(c) && std::get<std::string>(c) == *leaf.category;
                } else if (leaf.kind == Proposition::Kind::boolean) {
                    v = std::holds_alternative<bool>(c) && std::get<bool>(c);
                } else {
                    if (!std::holds_alternative<double>(c)) throw DataError("numeric cell expected for a threshold leaf");
                    const auto x = static_cast<std::int64_t>(std::round(std::get<double>(c) * std::pow(10.0, leaf.decimals)));
                    v = leaf.kind == Proposition::Kind::pivot ? x >= leaf.lo : (leaf.lo <= x && x <= leaf.hi);
                }
                stack.push_back(v);
                break;
            }
            case Op::negation:
                if (stack.empty()) throw DataError("malformed formula in classifier file");
                stack.back() = !stack.back();
                break;
            default: {
                if (stack.size() < 2) throw DataError("malformed formula in classifier file");
                const bool b = stack.back();
                stack.pop_back();
                stack.back() = op == Op::conjunction ? (stack.back() && b) : (stack.back() || b);
                break;
            }
            }
        }
        if (stack.size() != 1) throw DataError("malformed formula in classifier file");
        const bool truth = std::get<bool>(row[target]);
        ev.rows.push_back(table.row_ids[r]);
        ev.predictions.push_back(stack.back() ? 1 : 0);
        if (stack.back() == truth) ++ev.accuracy.agree;
    }
    return ev;
}

} // namespace brevity
