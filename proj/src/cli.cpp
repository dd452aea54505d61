#include "brevity/cli.hpp"

#include "brevity/error.hpp"
#include "brevity/fsm.hpp"
#include "brevity/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

namespace brevity {

namespace {

struct Options {
    std::string data, schema, classifier, save;
    std::string scheme = "pivot";
    std::string format = "human";
    std::uint64_t seed = 0;
    std::size_t folds = 10;
    double budget = 600.0;
    double total_budget = 0.0;
    std::uint64_t node_limit = 0;
    std::size_t length_cap = 20;
    std::size_t workers = 1;
    double split_ratio = 0.7;
    double holdout_ratio = 0.1;
    bool no_timings = false;
    bool predictions = false;
};

FsmConfig fsm_config(const Options& o) {
    FsmConfig cfg;
    cfg.scheme = scheme_from_string(o.scheme);
    cfg.split_ratio = o.split_ratio;
    cfg.seed = o.seed;
    cfg.per_bound = Budget::unlimited();
    if (o.budget > 0) cfg.per_bound.seconds = o.budget;
    if (o.node_limit > 0) cfg.per_bound.node_limit = o.node_limit;
    if (o.total_budget > 0) cfg.total_seconds = o.total_budget;
    cfg.length_cap = o.length_cap;
    cfg.workers = o.workers;
    if (cfg.workers < 1) throw UsageError("--workers must be at least 1");
    if (!(cfg.split_ratio > 0 && cfg.split_ratio < 1)) throw UsageError("--split-ratio must lie in (0, 1)");
    if (cfg.length_cap < 1) throw UsageError("--length-cap must be at least 1");
    return cfg;
}

struct Loaded {
    TableSchema schema;
    EncodedDataset ds;
    std::vector<std::string> warnings;
    std::size_t raw_rows = 0;
};

Loaded load(const Options& o) {
    Loaded l;
    l.schema = load_schema(o.schema);
    const DataTable raw = load_csv(o.data, l.schema);
    l.raw_rows = raw.rows.size();
    l.ds = encode(raw, l.schema, &l.warnings);
    return l;
}

void print_warnings(const Loaded& l, std::ostream& err) {
    for (const auto& w : l.warnings) err << "warning: " << w << '\n';
}

int cmd_cv(const Options& o, std::ostream& out, std::ostream& err) {
    const Loaded l = load(o);
    print_warnings(l, err);
    CvSettings s;
    s.fsm = fsm_config(o);
    s.seed = o.seed;
    s.k = o.folds;
    const auto fmt = output_format_from_string(o.format);
    const CvReport report = cross_validate(l.ds, s);
    out << summarize(report, fmt, !o.no_timings);
    return exit_ok;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
    const Loaded l = load(o);
    print_warnings(l, err);
    const auto fmt = output_format_from_string(o.format);
    if (!(o.holdout_ratio > 0 && o.holdout_ratio < 1)) throw UsageError("--holdout-ratio must lie in (0, 1)");
    FsmConfig cfg = fsm_config(o);
    const auto [work, hold] = split_train_validation(l.ds, 1.0 - o.holdout_ratio, o.seed);
    cfg.seed = derive_seed(o.seed, 0);
    const FsmResult res = run_fsm(work, cfg);
    const Accuracy acc = holdout_accuracy(res.final, hold);
    const auto attrs = l.ds.attributes();
    const bool timings = !o.no_timings;
    if (!o.save.empty()) {
        std::ofstream f(o.save);
        if (!f) throw Error("cannot write '" + o.save + "'");
        f << classifier_file(res.final, l.ds, l.schema).dump(2) << '\n';
    }
    switch (fmt) {
    case OutputFormat::json: {
        auto j = nlohmann::json::parse(trace_json(res, attrs, timings));
        j["holdout"] = {{"agree", acc.agree}, {"total", acc.total}};
        j["holdout_accuracy"] = acc.value();
        j["rpn"] = formula_to_json(res.final, attrs);
        out << j.dump(2) << '\n';
        break;
    }
    case OutputFormat::csv:
        out << "length,train_accuracy,validation_accuracy,proved_optimal,elapsed_s,formula\n";
        for (const auto& e : res.trace.entries()) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%d,%.3f,", e.length, e.train.value(), e.validation.value(),
                          e.proved_optimal ? 1 : 0, timings ? e.elapsed_s : 0.0);
            out << buf << '"' << render(e.formula, attrs) << "\"\n";
        }
        break;
    case OutputFormat::human: {
        out << "length  train     validation  optimal  elapsed  formula\n";
        for (const auto& e : res.trace.entries()) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%6zu  %6.2f%%  %9.2f%%  %-7s  %6.1fs  ", e.length, 100 * e.train.value(),
                          100 * e.validation.value(), e.proved_optimal ? "yes" : "no", timings ? e.elapsed_s : 0.0);
            out << buf << render(e.formula, attrs) << '\n';
        }
        char buf[160];
        std::snprintf(buf, sizeof buf, "\nstop: %s, L = %zu\nfinal: ", std::string(to_string(res.stop_reason)).c_str(),
                      res.chosen_length);
        out << buf << render(res.final, attrs) << " (size " << size(res.final) << ")\n";
        std::snprintf(buf, sizeof buf, "holdout accuracy %.2f%% (%llu/%llu)\n", 100 * acc.value(),
                      static_cast<unsigned long long>(acc.agree), static_cast<unsigned long long>(acc.total));
        out << buf;
        break;
    }
    }
    return exit_ok;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
    std::ifstream f(o.classifier);
    if (!f) throw DataError("cannot open classifier file '" + o.classifier + "'");
    nlohmann::json file;
    try {
        file = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("classifier file is not valid JSON: ") + e.what());
    }
    TableSchema schema;
    try {
        schema = parse_schema(file.at("schema").dump());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("classifier file lacks a schema: ") + e.what());
    }
    const DataTable raw = load_csv(o.data, schema);
    const Evaluation ev = evaluate_classifier(file, raw);
    if (o.predictions) {
        out << "row,prediction\n";
        for (std::size_t i = 0; i < ev.rows.size(); ++i) out << ev.rows[i] << ',' << int(ev.predictions[i]) << '\n';
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "accuracy %.4f (%llu/%llu)\n", ev.accuracy.value(),
                  static_cast<unsigned long long>(ev.accuracy.agree), static_cast<unsigned long long>(ev.accuracy.total));
    out << buf;
    return exit_ok;
}

int cmd_inspect(const Options& o, std::ostream& out, std::ostream& err) {
    const Loaded l = load(o);
    print_warnings(l, err);
    const auto& ds = l.ds;
    out << "rows: " << l.raw_rows << " read, " << ds.size() << " kept\n";
    out << "target: " << ds.target_name() << " (positive " << ds.positive_count() << ", negative "
        << ds.size() - ds.positive_count() << ")\n";
    out << "attributes: " << ds.attribute_count() << '\n';
    for (std::size_t a = 0; a < ds.attribute_count(); ++a) {
        const auto& attr = ds.attribute(a);
        out << "  " << attr.name << "  ";
        if (ds.is_numeric(a)) {
            const auto col = ds.column(a);
            const std::set<std::int64_t> distinct(col.begin(), col.end());
            const int dec = attr.provenance.decimals;
            out << "numeric, " << distinct.size() << " distinct values in [" << format_scaled(*distinct.begin(), dec)
                << ", " << format_scaled(*distinct.rbegin(), dec) << "]\n";
        } else {
            std::size_t ones = 0;
            for (std::size_t r = 0; r < ds.size(); ++r) ones += ds.holds(a, r) ? 1 : 0;
            out << "boolean, true in " << ones << " rows\n";
        }
    }
    return exit_ok;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Shortest accurate Boolean formulas over threshold propositions", "brevity"};
    app.require_subcommand(1);
    Options o;

    auto add_data = [&](CLI::App* c, bool schema) {
        c->add_option("--data", o.data, "CSV file")->required()->check(CLI::ExistingFile);
        if (schema) c->add_option("--schema", o.schema, "schema JSON file")->required()->check(CLI::ExistingFile);
    };
    auto add_search = [&](CLI::App* c) {
        c->add_option("--scheme", o.scheme, "median, pivot or interval")->capture_default_str();
        c->add_option("--seed", o.seed, "master seed")->capture_default_str();
        c->add_option("--budget", o.budget, "seconds per length bound, 0 for none")
            ->envname("BREVITY_BUDGET")
            ->capture_default_str();
        c->add_option("--total-budget", o.total_budget, "seconds for the whole length loop, 0 for none")
            ->envname("BREVITY_TOTAL_BUDGET");
        c->add_option("--node-limit", o.node_limit, "skeletons per length bound, 0 for none")
            ->envname("BREVITY_NODE_LIMIT");
        c->add_option("--length-cap", o.length_cap, "largest length bound tried")->capture_default_str();
        c->add_option("--workers", o.workers, "search threads")->envname("BREVITY_WORKERS")->capture_default_str();
        c->add_option("--split-ratio", o.split_ratio, "training share of the validation split")->capture_default_str();
        c->add_option("--format", o.format, "human, csv or json")->capture_default_str();
        c->add_flag("--no-timings", o.no_timings, "write zero for elapsed times");
    };

    auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
    add_data(cv, true);
    add_search(cv);
    cv->add_option("--folds", o.folds, "number of folds")->capture_default_str();

    auto* run = app.add_subcommand("run", "one run on a training/holdout split");
    add_data(run, true);
    add_search(run);
    run->add_option("--holdout-ratio", o.holdout_ratio, "share of rows held out")->capture_default_str();
    run->add_option("--save", o.save, "write the final classifier to this JSON file");

    auto* ev = app.add_subcommand("eval", "apply a saved classifier to a CSV file");
    add_data(ev, false);
    ev->add_option("--classifier", o.classifier, "classifier JSON file")->required()->check(CLI::ExistingFile);
    ev->add_flag("--predictions", o.predictions, "print one prediction per kept row");

    auto* inspect = app.add_subcommand("inspect", "summarize a dataset under its schema");
    add_data(inspect, true);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*cv) return cmd_cv(o, out, err);
        if (*run) return cmd_run(o, out, err);
        if (*ev) return cmd_eval(o, out, err);
        if (*inspect) return cmd_inspect(o, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const NoIncumbentError& e) {
        err << "budget error: " << e.what() << '\n';
        return exit_no_incumbent;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_other;
    }
    return exit_usage;
}

} // namespace brevity
