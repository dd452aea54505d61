#pragma once

#include "brevity/dataset.hpp"
#include "brevity/formula.hpp"
#include "brevity/propspace.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

namespace brevity {

/// Search limits. A node here is one skeleton taken from the deterministic skeleton
/// stream, so a node limit yields the same result for any worker count.
struct Budget {
    std::optional<double> seconds;
    std::optional<std::uint64_t> node_limit;

    static Budget unlimited() { return {}; }
    static Budget wall(double s) { return {s, std::nullopt}; }
    static Budget nodes(std::uint64_t n) { return {std::nullopt, n}; }
};

struct SearchConfig {
    std::size_t length_bound = 1;
    SchemeId scheme = SchemeId::pivot;
    Budget budget;
    std::size_t workers = 1;
    std::uint64_t seed = 0; ///< the engine is deterministic; kept for run provenance
};

struct SearchOutcome {
    Formula best;
    Accuracy train_accuracy;
    bool proved_optimal = false;
    std::uint64_t nodes_explored = 0; ///< threshold-assignment nodes visited
    std::uint64_t skeletons = 0;      ///< skeletons taken from the stream
    std::chrono::duration<double> elapsed{};
    std::size_t length_bound = 0;
};

/// One leaf symbol available to skeletons: either a fixed proposition (Boolean attribute,
/// median pivot) or a numeric attribute whose threshold is left to the search.
struct LeafSlot {
    enum class Mode : std::uint8_t { fixed, free_pivot, free_interval };
    std::uint32_t attr = 0;
    Mode mode = Mode::fixed;
    Proposition fixed{};
};

struct Vocabulary {
    std::vector<LeafSlot> slots; ///< slots[a] describes encoded attribute a
};

Vocabulary make_vocabulary(const EncodedDataset& ds, SchemeId scheme, const CandidateGrid& grid);

/// Canonical formula shape whose free numeric leaves have no threshold yet.
/// All occurrences of one attribute share a threshold.
struct Skeleton {
    std::vector<Token> tokens;                 ///< free leaves carry a placeholder proposition
    std::vector<std::uint32_t> free_attributes; ///< distinct, in order of first occurrence

    std::size_t size() const { return tokens.size(); }
    /// `assignment[i]` is the proposition for free_attributes[i].
    Formula instantiate(std::span<const Proposition> assignment) const;
};

/// Every canonical skeleton of size <= max_size, ordered by size then token sequence.
std::vector<Skeleton> enumerate_skeletons(const Vocabulary& vocab, std::size_t max_size);

struct ThresholdChoice {
    std::vector<Proposition> assignment; ///< aligned with Skeleton::free_attributes
    Accuracy accuracy;
};

/// Exact best grid assignment for a skeleton; nullopt when an admissible bound shows that
/// no assignment reaches strictly above `incumbent`. Ties resolve to the smallest thresholds.
std::optional<ThresholdChoice> optimize_thresholds(const Skeleton& sk, const EncodedDataset& ds,
                                                   const CandidateGrid& grid, Accuracy incumbent);

/// Admissible bound on the accuracy of any instantiation of a skeleton.
Accuracy accuracy_upper_bound(const Skeleton& sk, const EncodedDataset& ds, const CandidateGrid& grid);
Accuracy accuracy_upper_bound(const Skeleton& sk, const EncodedDataset& ds);

/// Most accurate formula of size <= cfg.length_bound, smallest among equals, then lexicographically
/// smallest canonical token sequence. When `previous` holds a proved optimum for bound
/// length_bound - 1 on the same data, only skeletons of the new size are searched.
/// Throws NoIncumbentError when the budget expires before any formula was scored.
SearchOutcome best_formula(const EncodedDataset& ds, const SearchConfig& cfg,
                           const SearchOutcome* previous = nullptr);

} // namespace brevity
