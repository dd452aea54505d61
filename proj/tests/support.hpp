#pragma once

// Test helpers: small synthetic datasets and a brute-force reference optimizer that shares
// no code with the search engine.

#include "brevity/dataset.hpp"
#include "brevity/formula.hpp"
#include "brevity/propspace.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace testing {

struct Toy {
    std::vector<bool> boolean;                   ///< per attribute
    std::vector<std::vector<std::int64_t>> cols; ///< per attribute, per point
    std::vector<std::uint8_t> target;

    std::size_t n() const { return target.size(); }
    std::size_t m() const { return cols.size(); }
};

inline brevity::EncodedDataset to_dataset(const Toy& t) {
    std::vector<brevity::EncodedAttribute> attrs;
    for (std::size_t a = 0; a < t.m(); ++a) {
        brevity::EncodedAttribute e;
        e.name = std::string(1, static_cast<char>('a' + a));
        e.kind = t.boolean[a] ? brevity::EncodedKind::boolean : brevity::EncodedKind::numeric;
        e.provenance.column = e.name;
        attrs.push_back(e);
    }
    std::vector<brevity::PointId> ids(t.n());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<brevity::PointId>(i);
    return brevity::EncodedDataset(attrs, ids, t.cols, t.target);
}

inline Toy random_toy(std::mt19937_64& rng, std::size_t max_points = 8, std::size_t max_attrs = 3) {
    Toy t;
    const std::size_t n = 1 + rng() % max_points;
    const std::size_t m = 1 + rng() % max_attrs;
    for (std::size_t a = 0; a < m; ++a) {
        const bool b = rng() % 3 == 0;
        t.boolean.push_back(b);
        std::vector<std::int64_t> col(n);
        for (auto& v : col) v = static_cast<std::int64_t>(b ? rng() % 2 : rng() % 10);
        t.cols.push_back(std::move(col));
    }
    t.target.resize(n);
    for (auto& y : t.target) y = static_cast<std::uint8_t>(rng() % 2);
    return t;
}

/// Exhaustive reference: every well-formed RPN word over attribute symbols and {¬, ∧, ∨}
/// up to max_len, every grid choice per attribute (one choice per attribute within a word).
/// Returns best[s] = best agreement over words of size <= s, for s = 0..max_len.
class Oracle {
public:
    enum class Scheme { median, pivot, interval };

    Oracle(const Toy& t, Scheme scheme) : t_(t) {
        const std::size_t n = t.n();
        full_ = n == 32 ? ~0u : ((1u << n) - 1);
        for (std::size_t i = 0; i < n; ++i)
            if (t.target[i]) target_ |= 1u << i;
        options_.resize(t.m());
        for (std::size_t a = 0; a < t.m(); ++a) {
            const auto& col = t.cols[a];
            auto mask_if = [&](auto pred) {
                std::uint32_t m = 0;
                for (std::size_t i = 0; i < n; ++i)
                    if (pred(col[i])) m |= 1u << i;
                return m;
            };
            if (t.boolean[a]) {
                options_[a].push_back(mask_if([](std::int64_t v) { return v != 0; }));
                continue;
            }
            std::vector<std::int64_t> grid(col.begin(), col.end());
            std::sort(grid.begin(), grid.end());
            const std::int64_t median = grid[(grid.size() + 1) / 2 - 1];
            grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
            switch (scheme) {
            case Scheme::median: options_[a].push_back(mask_if([&](std::int64_t v) { return v >= median; })); break;
            case Scheme::pivot:
                for (const auto r : grid) options_[a].push_back(mask_if([&](std::int64_t v) { return v >= r; }));
                break;
            case Scheme::interval:
                for (std::size_t l = 0; l < grid.size(); ++l)
                    for (std::size_t u = l; u < grid.size(); ++u)
                        options_[a].push_back(
                            mask_if([&](std::int64_t v) { return grid[l] <= v && v <= grid[u]; }));
                break;
            }
        }
    }

    std::vector<std::uint64_t> best_by_size(std::size_t max_len) {
        max_len_ = max_len;
        exact_.assign(max_len + 1, 0);
        word_.clear();
        extend(0);
        std::vector<std::uint64_t> best(max_len + 1, 0);
        for (std::size_t s = 1; s <= max_len; ++s) best[s] = std::max(best[s - 1], exact_[s]);
        return best;
    }

private:
    static constexpr int NOT = -1, AND = -2, OR = -3;

    void extend(int depth) {
        const std::size_t len = word_.size();
        if (depth == 1) score();
        if (len == max_len_) return;
        const std::size_t room = max_len_ - len;
        // Leaf: afterwards `depth` binary operators are still needed.
        if (static_cast<std::size_t>(depth) + 1 <= room) {
            for (std::size_t a = 0; a < t_.m(); ++a) {
                word_.push_back(static_cast<int>(a));
                extend(depth + 1);
                word_.pop_back();
            }
        }
        if (depth >= 1) {
            word_.push_back(NOT);
            extend(depth);
            word_.pop_back();
        }
        if (depth >= 2) {
            for (const int op : {AND, OR}) {
                word_.push_back(op);
                extend(depth - 1);
                word_.pop_back();
            }
        }
    }

    void score() {
        used_.clear();
        for (const int s : word_)
            if (s >= 0 && std::find(used_.begin(), used_.end(), s) == used_.end()) used_.push_back(s);
        choice_.assign(t_.m(), 0);
        assign(0);
    }

    void assign(std::size_t k) {
        if (k == used_.size()) {
            std::uint32_t stack[16];
            int sp = 0;
            for (const int s : word_) {
                if (s >= 0) stack[sp++] = choice_[static_cast<std::size_t>(s)];
                else if (s == NOT) stack[sp - 1] = ~stack[sp - 1];
                else if (s == AND) { stack[sp - 2] &= stack[sp - 1]; --sp; }
                else { stack[sp - 2] |= stack[sp - 1]; --sp; }
            }
            const auto agree = static_cast<std::uint64_t>(std::popcount(~(stack[0] ^ target_) & full_));
            auto& slot = exact_[word_.size()];
            slot = std::max(slot, agree);
            return;
        }
        const auto a = static_cast<std::size_t>(used_[k]);
        for (const auto m : options_[a]) {
            choice_[a] = m;
            assign(k + 1);
        }
    }

    const Toy& t_;
    std::uint32_t full_ = 0, target_ = 0;
    std::vector<std::vector<std::uint32_t>> options_;
    std::size_t max_len_ = 0;
    std::vector<std::uint64_t> exact_;
    std::vector<int> word_, used_;
    std::vector<std::uint32_t> choice_;
};

inline Oracle::Scheme oracle_scheme(brevity::SchemeId s) {
    switch (s) {
    case brevity::SchemeId::median: return Oracle::Scheme::median;
    case brevity::SchemeId::pivot: return Oracle::Scheme::pivot;
    case brevity::SchemeId::interval: return Oracle::Scheme::interval;
    }
    return Oracle::Scheme::pivot;
}

/// Uniformly shaped random formula over the attributes of a toy dataset.
inline brevity::Formula random_formula(std::mt19937_64& rng, const brevity::EncodedDataset& ds,
                                       std::size_t max_leaves = 4) {
    using namespace brevity;
    const auto grid = candidate_grid(ds);
    std::vector<Token> rpn;
    const std::size_t leaves = 1 + rng() % max_leaves;
    int depth = 0;
    std::size_t placed = 0;
    while (placed < leaves || depth > 1) {
        const bool can_leaf = placed < leaves;
        const int pick = static_cast<int>(rng() % 3);
        if (can_leaf && (depth < 2 || pick == 0)) {
            const auto a = static_cast<std::uint32_t>(rng() % ds.attribute_count());
            if (!ds.is_numeric(a)) {
                rpn.push_back(Token::leaf(Proposition::boolean(a)));
            } else {
                const auto& g = grid.at(a).values;
                const auto l = rng() % g.size(), u = rng() % g.size();
                if (rng() % 2) rpn.push_back(Token::leaf(Proposition::pivot(a, g[l])));
                else rpn.push_back(Token::leaf(Proposition::interval(a, g[std::min(l, u)], g[std::max(l, u)])));
            }
            ++placed;
            ++depth;
        } else if (depth >= 2 && pick != 2) {
            rpn.push_back(rng() % 2 ? Token::conjunction() : Token::disjunction());
            --depth;
        } else {
            rpn.push_back(Token::negation());
        }
        if (rng() % 4 == 0 && depth >= 1) rpn.push_back(Token::negation());
    }
    return Formula(std::move(rpn));
}

} // namespace testing
