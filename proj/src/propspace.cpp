#include "brevity/propspace.hpp"

#include "brevity/audit.hpp"
#include "brevity/error.hpp"

#include <algorithm>
#include <stdexcept>

namespace brevity {

std::string_view to_string(SchemeId scheme) {
    switch (scheme) {
    case SchemeId::median: return "median";
    case SchemeId::pivot: return "pivot";
    case SchemeId::interval: return "interval";
    }
    return "?";
}

SchemeId scheme_from_string(std::string_view text) {
    if (text == "median") return SchemeId::median;
    if (text == "pivot") return SchemeId::pivot;
    if (text == "interval") return SchemeId::interval;
    throw UsageError("unknown scheme '" + std::string(text) + "' (expected median, pivot or interval)");
}

Proposition Proposition::interval(std::uint32_t attr, std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("interval proposition needs lo <= hi");
    return {Kind::interval, attr, lo, hi};
}

const AttributeGrid& CandidateGrid::at(std::size_t attr) const {
    const auto& g = attributes.at(attr);
    if (!g) throw std::invalid_argument("attribute " + std::to_string(attr) + " is not numeric");
    return *g;
}

CandidateGrid candidate_grid(const EncodedDataset& ds) {
    audit::observe("grid", ds.ids());
    CandidateGrid grid;
    grid.attributes.resize(ds.attribute_count());
    if (ds.empty()) return grid;
    for (std::size_t a = 0; a < ds.attribute_count(); ++a) {
        if (!ds.is_numeric(a)) continue;
        const auto col = ds.column(a);
        AttributeGrid g{{col.begin(), col.end()}};
        std::sort(g.values.begin(), g.values.end());
        g.values.erase(std::unique(g.values.begin(), g.values.end()), g.values.end());
        grid.attributes[a] = std::move(g);
    }
    return grid;
}

std::int64_t median_of(const EncodedDataset& ds, std::size_t attr) {
    audit::observe("median", ds.ids());
    if (ds.empty()) throw EmptyDatasetError("median of an empty dataset");
    if (!ds.is_numeric(attr)) throw std::invalid_argument("median of a non-numeric attribute");
    const auto col = ds.column(attr);
    std::vector<std::int64_t> v(col.begin(), col.end());
    const std::size_t k = (v.size() + 1) / 2 - 1;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

bool eval_prop(const Proposition& p, const EncodedDataset& ds, std::size_t row) {
    switch (p.kind) {
    case Proposition::Kind::boolean: return ds.holds(p.attr, row);
    case Proposition::Kind::pivot: return ds.value(p.attr, row) >= p.lo;
    case Proposition::Kind::interval: {
        const auto v = ds.value(p.attr, row);
        return p.lo <= v && v <= p.hi;
    }
    }
    return false;
}

std::vector<AttributeLeaves> scheme_leaf_space(SchemeId scheme, const CandidateGrid& grid,
                                               const EncodedDataset& ds) {
    std::vector<AttributeLeaves> out;
    for (std::size_t a = 0; a < ds.attribute_count(); ++a) {
        AttributeLeaves entry{a, {}};
        const auto attr = static_cast<std::uint32_t>(a);
        if (!ds.is_numeric(a)) {
            entry.leaves.push_back(Proposition::boolean(attr));
        } else {
            const auto& g = grid.at(a);
            switch (scheme) {
            case SchemeId::median: entry.leaves.push_back(Proposition::pivot(attr, median_of(ds, a))); break;
            case SchemeId::pivot:
                for (const auto r : g.values) entry.leaves.push_back(Proposition::pivot(attr, r));
                break;
            case SchemeId::interval:
                for (std::size_t i = 0; i < g.size(); ++i)
                    for (std::size_t j = i; j < g.size(); ++j)
                        entry.leaves.push_back(Proposition::interval(attr, g.values[i], g.values[j]));
                break;
            }
        }
        out.push_back(std::move(entry));
    }
    return out;
}

} // namespace brevity
