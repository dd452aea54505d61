#include "brevity/fsm.hpp"

#include "brevity/error.hpp"

#include <json.hpp>

#include <chrono>
#include <stdexcept>

namespace brevity {

namespace {

using Clock = std::chrono::steady_clock;

Budget bound_budget(const FsmConfig& cfg, std::optional<Clock::time_point> end) {
    Budget b = cfg.per_bound;
    if (end) {
        const double left = std::chrono::duration<double>(*end - Clock::now()).count();
        b.seconds = b.seconds ? std::min(*b.seconds, left) : left;
    }
    return b;
}

} // namespace

void LengthTrace::push(TraceEntry entry) {
    if (entry.length != entries_.size() + 1)
        throw std::invalid_argument("trace lengths must be consecutive from 1");
    if (!best_ || entry.validation > *best_) {
        best_ = entry.validation;
        best_length_ = entry.length;
    }
    entries_.push_back(std::move(entry));
}

LengthTrace trace_of(std::span<const Accuracy> validation) {
    LengthTrace t;
    for (std::size_t i = 0; i < validation.size(); ++i) {
        TraceEntry e;
        e.length = i + 1;
        e.validation = validation[i];
        t.push(std::move(e));
    }
    return t;
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
    case StopReason::early_stop: return "early_stop";
    case StopReason::timeout: return "timeout";
    case StopReason::length_cap: return "length_cap";
    }
    return "?";
}

bool early_stop_check(const LengthTrace& trace) {
    if (trace.size() < 2) return false;
    const auto delta = *trace.best_validation();
    const auto e = trace.entries();
    return e[e.size() - 1].validation < delta && e[e.size() - 2].validation < delta;
}

std::size_t select_length(const LengthTrace& trace) {
    if (trace.empty()) throw std::invalid_argument("select_length needs a nonempty trace");
    const auto delta = *trace.best_validation();
    for (const auto& e : trace.entries())
        if (e.validation == delta) return e.length;
    return trace.back().length;
}

namespace {

SearchOutcome refit(const EncodedDataset& W, std::size_t L, const FsmConfig& cfg) {
    if (L < 1) throw std::invalid_argument("finalize needs L >= 1");
    SearchConfig sc;
    sc.length_bound = L;
    sc.scheme = cfg.scheme;
    sc.budget = cfg.per_bound;
    sc.workers = cfg.workers;
    sc.seed = cfg.seed;
    return best_formula(W, sc);
}

} // namespace

Formula finalize(const EncodedDataset& W, std::size_t L, const FsmConfig& cfg) { return refit(W, L, cfg).best; }

FsmResult run_fsm(const EncodedDataset& W, const FsmConfig& cfg) {
    if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");
    if (cfg.length_cap < 1) throw std::invalid_argument("length cap must be at least 1");
    std::optional<Clock::time_point> end;
    if (cfg.total_seconds)
        end = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*cfg.total_seconds));

    const auto [train, valid] = split_train_validation(W, cfg.split_ratio, cfg.seed);
    FsmResult result;
    result.stop_reason = StopReason::length_cap;
    std::optional<SearchOutcome> prev;
    for (std::size_t l = 1; l <= cfg.length_cap; ++l) {
        SearchConfig sc;
        sc.length_bound = l;
        sc.scheme = cfg.scheme;
        sc.budget = bound_budget(cfg, end);
        sc.workers = cfg.workers;
        sc.seed = cfg.seed;
        SearchOutcome out;
        try {
            out = best_formula(train, sc, prev ? &*prev : nullptr);
        } catch (const NoIncumbentError&) {
            result.stop_reason = StopReason::timeout;
            break;
        }
        TraceEntry e;
        e.length = l;
        e.train = out.train_accuracy;
        e.validation = accuracy(out.best, valid);
        e.proved_optimal = out.proved_optimal;
        e.elapsed_s = out.elapsed.count();
        e.formula = out.best;
        result.trace.push(std::move(e));
        if (!out.proved_optimal) {
            result.stop_reason = StopReason::timeout;
            break;
        }
        if (early_stop_check(result.trace)) {
            result.stop_reason = StopReason::early_stop;
            break;
        }
        prev = std::move(out);
    }
    if (result.trace.empty()) throw NoIncumbentError("no length bound produced a formula within the budget");

    result.chosen_length = select_length(result.trace);
    const auto fin = refit(W, result.chosen_length, cfg);
    result.final = fin.best;
    result.final_proved_optimal = fin.proved_optimal;
    result.full_data_accuracy = fin.train_accuracy;
    return result;
}

std::string trace_json(const FsmResult& result, std::span<const EncodedAttribute> attributes, bool timings) {
    using nlohmann::json;
    json entries = json::array();
    for (const auto& e : result.trace.entries()) {
        entries.push_back({{"length", e.length},
                           {"train", {e.train.agree, e.train.total}},
                           {"validation", {e.validation.agree, e.validation.total}},
                           {"proved_optimal", e.proved_optimal},
                           {"elapsed_s", timings ? e.elapsed_s : 0.0},
                           {"formula", render(e.formula, attributes)}});
    }
    json out = {{"entries", entries},
                {"delta", result.trace.best_validation() ? json{result.trace.best_validation()->agree,
                                                                result.trace.best_validation()->total}
                                                         : json(nullptr)},
                {"delta_length", result.trace.best_length()},
                {"stop_reason", std::string(to_string(result.stop_reason))},
                {"chosen_length", result.chosen_length},
                {"final", render(result.final, attributes)},
                {"final_size", size(result.final)},
                {"final_proved_optimal", result.final_proved_optimal},
                {"full_data_accuracy", {result.full_data_accuracy.agree, result.full_data_accuracy.total}}};
    return out.dump(2);
}

} // namespace brevity
