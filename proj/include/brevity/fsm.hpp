#pragma once

#include "brevity/dataset.hpp"
#include "brevity/formula.hpp"
#include "brevity/search.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace brevity {

struct FsmConfig {
    SchemeId scheme = SchemeId::pivot;
    double split_ratio = 0.7;
    std::uint64_t seed = 0;
    Budget per_bound = Budget::wall(600.0); ///< applied to each length bound and to the refit
    std::optional<double> total_seconds;    ///< shared by the whole length loop
    std::size_t length_cap = 20;
    std::size_t workers = 1;
};

struct TraceEntry {
    std::size_t length = 0;
    Accuracy train;
    Accuracy validation;
    bool proved_optimal = false;
    double elapsed_s = 0.0;
    Formula formula;
};

/// Per-length record of the loop plus the running best validation accuracy.
class LengthTrace {
public:
    /// Entries must arrive with lengths 1, 2, 3, ...
    void push(TraceEntry entry);

    std::span<const TraceEntry> entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const TraceEntry& back() const { return entries_.back(); }

    /// Δ: the best validation accuracy so far; unset before the first entry.
    std::optional<Accuracy> best_validation() const { return best_; }
    /// The first length that reached Δ.
    std::size_t best_length() const { return best_length_; }

private:
    std::vector<TraceEntry> entries_;
    std::optional<Accuracy> best_;
    std::size_t best_length_ = 0;
};

/// Builds a trace from validation accuracies alone (lengths 1..n).
LengthTrace trace_of(std::span<const Accuracy> validation);

enum class StopReason { early_stop, timeout, length_cap };

std::string_view to_string(StopReason reason);

struct FsmResult {
    Formula final;
    std::size_t chosen_length = 0;
    LengthTrace trace;
    StopReason stop_reason = StopReason::length_cap;
    Accuracy full_data_accuracy;
    bool final_proved_optimal = false;
};

/// Split, grow the length bound with early stopping, back off, refit on all of W.
FsmResult run_fsm(const EncodedDataset& W, const FsmConfig& cfg);

/// True when the last two validation accuracies are both strictly below Δ.
bool early_stop_check(const LengthTrace& trace);

/// Smallest traced length whose validation accuracy equals Δ.
std::size_t select_length(const LengthTrace& trace);

/// Best formula of size <= L on W, with grids and medians computed on W.
Formula finalize(const EncodedDataset& W, std::size_t L, const FsmConfig& cfg);

/// Machine-readable run log.
std::string trace_json(const FsmResult& result, std::span<const EncodedAttribute> attributes,
                       bool timings = true);

} // namespace brevity
