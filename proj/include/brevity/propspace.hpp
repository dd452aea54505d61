#pragma once

#include "brevity/dataset.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace brevity {

enum class SchemeId { median, pivot, interval };

std::string_view to_string(SchemeId scheme);
SchemeId scheme_from_string(std::string_view text);

/// Leaf predicate: a Boolean attribute, `attr >= lo` (pivot), or `lo <= attr <= hi` (interval).
/// Thresholds are on the integer scale of the encoded dataset.
struct Proposition {
    enum class Kind : std::uint8_t { boolean, pivot, interval };

    Kind kind = Kind::boolean;
    std::uint32_t attr = 0;
    std::int64_t lo = 0;
    std::int64_t hi = 0;

    static Proposition boolean(std::uint32_t attr) { return {Kind::boolean, attr, 0, 0}; }
    static Proposition pivot(std::uint32_t attr, std::int64_t r) { return {Kind::pivot, attr, r, 0}; }
    /// Throws std::invalid_argument unless lo <= hi.
    static Proposition interval(std::uint32_t attr, std::int64_t lo, std::int64_t hi);

    // Ordered by (attribute, kind, thresholds); this order feeds the canonical form.
    friend auto operator<=>(const Proposition& a, const Proposition& b) {
        if (auto c = a.attr <=> b.attr; c != 0) return c;
        if (auto c = a.kind <=> b.kind; c != 0) return c;
        if (auto c = a.lo <=> b.lo; c != 0) return c;
        return a.hi <=> b.hi;
    }
    friend bool operator==(const Proposition&, const Proposition&) = default;
};

/// Sorted distinct values of one numeric attribute over a dataset.
struct AttributeGrid {
    std::vector<std::int64_t> values;

    std::int64_t min() const { return values.front(); }
    std::int64_t max() const { return values.back(); }
    std::size_t size() const { return values.size(); }
};

/// One entry per encoded attribute; Boolean attributes have no grid.
struct CandidateGrid {
    std::vector<std::optional<AttributeGrid>> attributes;

    const AttributeGrid& at(std::size_t attr) const;
};

CandidateGrid candidate_grid(const EncodedDataset& ds);

/// Lower median: the element at 1-based position ceil(n/2) of the sorted values.
std::int64_t median_of(const EncodedDataset& ds, std::size_t attr);

bool eval_prop(const Proposition& p, const EncodedDataset& ds, std::size_t row);

/// Admissible leaves for one attribute under a scheme.
struct AttributeLeaves {
    std::size_t attr = 0;
    std::vector<Proposition> leaves;
};

std::vector<AttributeLeaves> scheme_leaf_space(SchemeId scheme, const CandidateGrid& grid,
                                               const EncodedDataset& ds);

} // namespace brevity
