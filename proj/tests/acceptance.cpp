// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,3,5] [--skip 7]
//
// BREVITY_ACCEPT_BUDGET sets the per-(fold, length) wall budget in seconds for the
// paper-scale runs (default 600). BREVITY_DATA_DIR points at the data directory.

#include "brevity/audit.hpp"
#include "brevity/cli.hpp"
#include "brevity/error.hpp"
#include "brevity/fsm.hpp"
#include "brevity/report.hpp"
#include "brevity/search.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace brevity;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path data_dir() {
    if (const char* d = std::getenv("BREVITY_DATA_DIR")) return d;
    return BREVITY_SOURCE_DIR "/data";
}

double accept_budget() {
    if (const char* b = std::getenv("BREVITY_ACCEPT_BUDGET")) return std::stod(b);
    return 600.0;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Loaded {
    TableSchema schema;
    EncodedDataset ds;
};

std::optional<Loaded> load_named(const std::string& name) {
    const auto csv = data_dir() / (name + ".csv");
    const auto schema = data_dir() / (name + ".schema.json");
    if (!fs::exists(csv) || !fs::exists(schema)) return std::nullopt;
    Loaded l;
    l.schema = load_schema(schema);
    l.ds = encode(load_csv(csv, l.schema), l.schema);
    return l;
}

SearchOutcome search(const EncodedDataset& ds, SchemeId scheme, std::size_t l, const SearchOutcome* prev = nullptr) {
    SearchConfig cfg;
    cfg.length_bound = l;
    cfg.scheme = scheme;
    return best_formula(ds, cfg, prev);
}

constexpr SchemeId all_schemes[] = {SchemeId::median, SchemeId::pivot, SchemeId::interval};

// 1 ---------------------------------------------------------------------------
Verdict oracle_equivalence() {
    std::mt19937_64 rng(20240601);
    constexpr std::size_t datasets = 1000, max_len = 5;
    std::size_t checks = 0, mismatches = 0;
    std::string first;
    for (std::size_t d = 0; d < datasets; ++d) {
        const auto toy = testing::random_toy(rng);
        const auto ds = testing::to_dataset(toy);
        for (const auto scheme : all_schemes) {
            testing::Oracle oracle(toy, testing::oracle_scheme(scheme));
            const auto best = oracle.best_by_size(max_len);
            std::optional<SearchOutcome> prev;
            for (std::size_t l = 1; l <= max_len; ++l) {
                // Alternate cold and warm-started searches.
                const auto out = search(ds, scheme, l, (d % 2 && prev) ? &*prev : nullptr);
                ++checks;
                const bool ok = out.train_accuracy.agree == best[l] && out.train_accuracy.total == toy.n() &&
                                accuracy(out.best, ds) == out.train_accuracy && size(out.best) <= l;
                if (!ok) {
                    ++mismatches;
                    if (first.empty())
                        first = fmt(" first: dataset %zu scheme %s l=%zu engine %llu oracle %llu", d,
                                    std::string(to_string(scheme)).c_str(), l,
                                    static_cast<unsigned long long>(out.train_accuracy.agree),
                                    static_cast<unsigned long long>(best[l]));
                }
                prev = out;
            }
        }
    }
    return {mismatches == 0, fmt("%zu datasets, %zu (scheme, l) checks, %zu mismatches", datasets, checks, mismatches) + first};
}

// 2 ---------------------------------------------------------------------------
Verdict size_semantics() {
    testing::Toy toy{{true, true}, {{0, 1}, {1, 1}}, {0, 1}};
    const auto ds = testing::to_dataset(toy);
    const Formula parsed = parse_formula("¬(a∧b)", ds.attributes());
    const Formula built({Token::leaf(Proposition::boolean(0)), Token::leaf(Proposition::boolean(1)),
                         Token::conjunction(), Token::negation()});
    const bool ok = size(parsed) == 4 && size(built) == 4 && parsed == built;
    return {ok, fmt("size(¬(p∧r)) = %zu", size(parsed))};
}

// 3 ---------------------------------------------------------------------------
Verdict grid_sufficiency() {
    std::mt19937_64 rng(77);
    std::size_t thresholds = 0, failures = 0;
    for (int d = 0; d < 500; ++d) {
        auto toy = testing::random_toy(rng, 10, 3);
        for (std::size_t a = 0; a < toy.m(); ++a) toy.boolean[a] = false;
        for (auto& col : toy.cols)
            for (auto& v : col) v = static_cast<std::int64_t>(rng() % 13) - 3;
        const auto ds = testing::to_dataset(toy);
        const auto grid = candidate_grid(ds);
        for (std::size_t a = 0; a < ds.attribute_count(); ++a) {
            const auto& g = grid.at(a).values;
            const auto col = ds.column(a);
            auto mask = [&](auto pred) {
                std::vector<bool> m;
                for (const auto v : col) m.push_back(pred(v));
                return m;
            };
            const std::vector<bool> none(col.size(), false);
            std::set<std::vector<bool>> pivots, intervals;
            for (const auto r : g) pivots.insert(mask([&](std::int64_t v) { return v >= r; }));
            pivots.insert(mask([&](std::int64_t v) { return v >= g.back() + 1; }));
            for (std::size_t l = 0; l < g.size(); ++l)
                for (std::size_t u = l; u < g.size(); ++u)
                    intervals.insert(mask([&](std::int64_t v) { return g[l] <= v && v <= g[u]; }));
            for (auto r = g.front() - 1; r <= g.back() + 1; ++r) {
                ++thresholds;
                if (!pivots.count(mask([&](std::int64_t v) { return v >= r; }))) ++failures;
                for (auto u = r; u <= g.back() + 1; ++u) {
                    ++thresholds;
                    const auto m = mask([&](std::int64_t v) { return r <= v && v <= u; });
                    if (m != none && !intervals.count(m)) ++failures;
                }
            }
        }
    }
    return {failures == 0, fmt("%zu integer thresholds and intervals checked, %zu without a grid equivalent",
                                thresholds, failures)};
}

// 4 ---------------------------------------------------------------------------
Verdict dominance_and_monotonicity() {
    std::mt19937_64 rng(4242);
    std::size_t checks = 0, violations = 0;
    auto check_dataset = [&](const EncodedDataset& ds, std::size_t max_len) {
        std::vector<std::vector<std::uint64_t>> best(3);
        for (std::size_t s = 0; s < 3; ++s) {
            std::optional<SearchOutcome> prev;
            for (std::size_t l = 1; l <= max_len; ++l) {
                prev = search(ds, all_schemes[s], l, prev ? &*prev : nullptr);
                best[s].push_back(prev->train_accuracy.agree);
            }
        }
        for (std::size_t i = 0; i < max_len; ++i) {
            for (std::size_t s = 0; s < 3; ++s) {
                ++checks;
                if (i > 0 && best[s][i] < best[s][i - 1]) ++violations;
            }
            checks += 2;
            if (best[1][i] < best[0][i]) ++violations;
            if (best[2][i] < best[1][i]) ++violations;
        }
    };
    for (int d = 0; d < 300; ++d) check_dataset(testing::to_dataset(testing::random_toy(rng)), 6);
    std::string extra;
    if (const auto bc = load_named("breast_cancer")) {
        check_dataset(bc->ds, 5);
        extra = ", plus breast_cancer up to l=5";
    }
    return {violations == 0, fmt("%zu comparisons over 300 random datasets%s, %zu violations", checks, extra.c_str(), violations)};
}

// 5 ---------------------------------------------------------------------------
Verdict complement_law() {
    std::mt19937_64 rng(5);
    std::size_t failures = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto ds = testing::to_dataset(testing::random_toy(rng, 12, 3));
        const auto f = testing::random_formula(rng, ds);
        const auto a = accuracy(f, ds), b = accuracy(negated(f), ds);
        if (a.total != b.total || a.agree + b.agree != a.total) ++failures;
    }
    return {failures == 0, fmt("1000 (formula, dataset) pairs, %zu violations", failures)};
}

// 6 ---------------------------------------------------------------------------
Verdict determinism() {
    const auto csv = (data_dir() / "breast_cancer.csv").string();
    const auto schema = (data_dir() / "breast_cancer.schema.json").string();
    if (!fs::exists(csv)) return {false, "breast_cancer data missing"};
    struct Case {
        const char* scheme;
        const char* node_limit;
        const char* cap;
    };
    std::size_t compared = 0;
    for (const auto& c : {Case{"pivot", "3000", "9"}, Case{"interval", "300", "7"}, Case{"median", "5000", "8"}}) {
        for (const char* format : {"json", "csv"}) {
            std::string outputs[2];
            const char* workers[2] = {"1", "8"};
            for (int w = 0; w < 2; ++w) {
                std::ostringstream out, err;
                const int code = run_cli({"cv", "--data", csv, "--schema", schema, "--scheme", c.scheme, "--seed", "7",
                                          "--budget", "0", "--node-limit", c.node_limit, "--length-cap", c.cap,
                                          "--workers", workers[w], "--format", format, "--no-timings"},
                                         out, err);
                if (code != 0) return {false, "cv exited with " + std::to_string(code) + ": " + err.str()};
                outputs[w] = out.str();
            }
            ++compared;
            if (outputs[0] != outputs[1])
                return {false, std::string("reports differ for ") + c.scheme + " " + format + " at 1 vs 8 workers"};
        }
    }
    return {true, fmt("%zu report pairs byte-identical at 1 and 8 workers (node-count budgets)", compared)};
}

// 7 / 8 -------------------------------------------------------------------------
struct PaperRun {
    std::optional<CvReport> bc[3];
    std::optional<CvReport> hepatitis;
    bool ran = false;
};

PaperRun& paper_runs() {
    static PaperRun runs;
    return runs;
}

CvReport paper_cv(const EncodedDataset& ds, SchemeId scheme) {
    CvSettings s;
    s.seed = 1;
    s.k = 10;
    s.fsm.scheme = scheme;
    s.fsm.per_bound = Budget::wall(accept_budget());
    s.fsm.workers = worker_count();
    const auto t0 = std::chrono::steady_clock::now();
    auto r = cross_validate(ds, s);
    std::cout << "  [" << to_string(scheme) << "] "
              << fmt("mean %.2f std %.2f size %.1f (%.0fs)", r.mean_accuracy, r.std_accuracy, r.mean_size,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count())
              << std::endl;
    return r;
}

Verdict paper_reproduction() {
    auto& runs = paper_runs();
    const auto bc = load_named("breast_cancer");
    if (!bc) return {false, "breast_cancer data missing"};
    const double paper_bc[3] = {95.4, 95.5, 95.9};
    bool pass = true;
    std::string detail = "BreastCancer";
    for (int s = 0; s < 3; ++s) {
        runs.bc[s] = paper_cv(bc->ds, all_schemes[s]);
        const auto& r = *runs.bc[s];
        const bool ok = std::fabs(r.mean_accuracy - paper_bc[s]) <= 4.0 && r.mean_size <= 10.0;
        pass = pass && ok;
        detail += fmt(" %s %.2f%% (paper %.1f, size %.1f)%s", std::string(to_string(all_schemes[s])).c_str(),
                      r.mean_accuracy, paper_bc[s], r.mean_size, ok ? "" : " out of band");
    }
    runs.ran = true;
    if (const auto hep = load_named("hepatitis")) {
        runs.hepatitis = paper_cv(hep->ds, SchemeId::pivot);
        const bool ok = std::fabs(runs.hepatitis->mean_accuracy - 82.2) <= 6.0;
        pass = pass && ok;
        detail += fmt("; Hepatitis pivot %.2f%% (paper 82.2)%s", runs.hepatitis->mean_accuracy, ok ? "" : " out of band");
    } else {
        pass = false;
        detail += "; Hepatitis data not available (data/hepatitis.csv absent), that half cannot be checked";
    }
    return {pass, detail};
}

bool negated_disjunction_of_pivots(const nlohmann::json& rpn, std::size_t& leaves) {
    // leaves..., (k-1) x or, not
    const std::size_t n = rpn.size();
    if (n < 4 || rpn[n - 1].value("op", "") != "not") return false;
    leaves = 0;
    while (leaves < n && !rpn[leaves].contains("op")) {
        if (rpn[leaves].value("kind", "") != "pivot") return false;
        ++leaves;
    }
    if (leaves < 2 || leaves > 4 || leaves + (leaves - 1) + 1 != n) return false;
    for (std::size_t i = leaves; i + 1 < n; ++i)
        if (rpn[i].value("op", "") != "or") return false;
    return true;
}

Verdict qualitative_formula() {
    auto& runs = paper_runs();
    FoldRecord first;
    if (runs.ran && runs.bc[1]) {
        first = runs.bc[1]->folds.front();
    } else {
        const auto bc = load_named("breast_cancer");
        if (!bc) return {false, "breast_cancer data missing"};
        // Fold 1 alone, as in the cross-validation run.
        const auto plan = make_folds(bc->ds, 10, 1);
        std::vector<PointId> train;
        for (std::size_t g = 1; g < plan.folds.size(); ++g) train.insert(train.end(), plan.folds[g].begin(), plan.folds[g].end());
        std::sort(train.begin(), train.end());
        FsmConfig cfg;
        cfg.scheme = SchemeId::pivot;
        cfg.seed = derive_seed(1, 0);
        cfg.per_bound = Budget::wall(accept_budget());
        cfg.workers = worker_count();
        const auto res = run_fsm(bc->ds.restrict_to(train), cfg);
        first.formula = render(res.final, bc->ds.attributes());
        first.rpn = formula_to_json(res.final, bc->ds.attributes());
    }
    std::size_t leaves = 0;
    const bool ok = negated_disjunction_of_pivots(first.rpn, leaves);
    return {ok, "fold 1 pivot formula: " + first.formula +
                    (ok ? fmt(" (negated disjunction of %zu pivot leaves)", leaves) : std::string(" (other shape)"))};
}

// 9 ---------------------------------------------------------------------------
Verdict fsm_traces() {
    std::vector<std::string> failed;
    auto acc = [](double v) { return Accuracy{static_cast<std::uint64_t>(std::llround(v * 100)), 100}; };
    auto trace = [&](std::initializer_list<double> vs) {
        std::vector<Accuracy> a;
        for (const double v : vs) a.push_back(acc(v));
        return trace_of(a);
    };
    auto expect = [&](bool cond, const char* name) {
        if (!cond) failed.push_back(name);
    };
    // Two strikes with Δ back-off: stops after l=4, never earlier.
    {
        const double vals[] = {.80, .85, .83, .84};
        LengthTrace t;
        std::size_t stop_at = 0;
        for (std::size_t i = 0; i < 4 && !stop_at; ++i) {
            TraceEntry e;
            e.length = i + 1;
            e.validation = acc(vals[i]);
            t.push(e);
            if (early_stop_check(t)) stop_at = i + 1;
        }
        expect(stop_at == 4, "stop after l=4");
        expect(t.best_validation() == acc(.85) && select_length(t) == 2, "delta .85 and L=2");
    }
    expect(early_stop_check(trace({.9, .8, .8})), "(.9,.8,.8) stops");
    {
        bool any = false;
        for (std::size_t k = 1; k <= 3; ++k) {
            const double all[] = {.9, .8, .9};
            std::vector<Accuracy> a;
            for (std::size_t i = 0; i < k; ++i) a.push_back(acc(all[i]));
            any = any || early_stop_check(trace_of(a));
        }
        expect(!any, "(.9,.8,.9) never stops");
    }
    expect(!early_stop_check(trace({.9})), "single entry never stops");
    expect(select_length(trace({.7, .85, .85, .8, .8})) == 2, "(.7,.85,.85,.8,.8) gives L=2");
    expect(select_length(trace({.8, .8, .8})) == 1, "equal accuracies give L=1");
    expect(select_length(trace({.6})) == 1, "timeout after l=1 gives L=1");

    // A perfect Boolean attribute: L = 1, final is that leaf.
    {
        testing::Toy toy{{true, false}, {{1, 0, 1, 1, 0, 0, 1, 0, 1, 0}, {3, 1, 4, 1, 5, 9, 2, 6, 5, 3}},
                         {1, 0, 1, 1, 0, 0, 1, 0, 1, 0}};
        FsmConfig cfg;
        cfg.per_bound = Budget::unlimited();
        const auto r = run_fsm(testing::to_dataset(toy), cfg);
        expect(r.chosen_length == 1 && size(r.final) == 1 && r.final.rpn()[0].prop == Proposition::boolean(0) &&
                   r.trace.entries()[0].validation.agree == r.trace.entries()[0].validation.total,
               "perfect leaf gives L=1");
    }
    // Timeout fallback: a node budget that runs out mid-loop keeps the incumbent entry.
    if (const auto bc = load_named("breast_cancer")) {
        FsmConfig cfg;
        cfg.per_bound = Budget::nodes(5000);
        cfg.seed = 3;
        const auto r = run_fsm(bc->ds, cfg);
        const auto& last = r.trace.back();
        expect(r.stop_reason == StopReason::timeout && !last.proved_optimal, "node budget ends in timeout");
        expect(r.chosen_length == select_length(r.trace) && size(r.final) <= r.chosen_length,
               "timeout backs off to the best length before the timeout");
    }
    std::string detail = failed.empty() ? "all worked traces reproduce" : "failed:";
    for (const auto& f : failed) detail += " [" + f + "]";
    return {failed.empty(), detail};
}

// 10 --------------------------------------------------------------------------
Verdict no_leakage() {
    const auto bc = load_named("breast_cancer");
    if (!bc) return {false, "breast_cancer data missing"};
    std::set<PointId> holdout;
    std::size_t events = 0, violations = 0, folds = 0;
    std::set<std::string> stages;
    audit::ScopedObserver guard([&](std::string_view stage, std::span<const PointId> ids) {
        if (stage == "fold") {
            holdout.clear();
            holdout.insert(ids.begin(), ids.end());
            ++folds;
            return;
        }
        if (stage == "holdout") return;
        ++events;
        stages.insert(std::string(stage));
        for (const auto id : ids)
            if (holdout.count(id)) ++violations;
    });
    for (const auto scheme : {SchemeId::median, SchemeId::pivot, SchemeId::interval}) {
        CvSettings s;
        s.seed = 11;
        s.k = 10;
        s.fsm.scheme = scheme;
        s.fsm.per_bound = Budget::unlimited();
        s.fsm.length_cap = 4;
        cross_validate(bc->ds, s);
    }
    std::string seen;
    for (const auto& s : stages) seen += " " + s;
    const bool covered = stages.count("grid") && stages.count("median") && stages.count("split") && stages.count("search");
    return {violations == 0 && covered && folds == 30,
            fmt("%zu folds, %zu instrumented calls (", folds, events) + seen.substr(1) + fmt("), %zu violations", violations)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
};

std::set<int> parse_list(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.insert(std::stoi(item));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only, skip;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--only") only = parse_list(argv[i + 1]);
        else if (flag == "--skip") skip = parse_list(argv[i + 1]);
    }
    const std::vector<Criterion> criteria = {
        {1, "oracle equivalence", oracle_equivalence},
        {2, "size semantics", size_semantics},
        {3, "grid sufficiency", grid_sufficiency},
        {4, "scheme dominance and monotonicity", dominance_and_monotonicity},
        {5, "complement law", complement_law},
        {6, "determinism across worker counts", determinism},
        {7, "paper-scale reproduction", paper_reproduction},
        {8, "qualitative formula shape", qualitative_formula},
        {9, "length-loop traces", fsm_traces},
        {10, "no-leakage audit", no_leakage},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        if ((!only.empty() && !only.count(c.id)) || skip.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (v.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << v.detail
                  << fmt(" [%.1fs]", secs) << std::endl;
        if (!v.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
