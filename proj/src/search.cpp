#include "brevity/search.hpp"

#include "brevity/audit.hpp"
#include "brevity/error.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace brevity {

namespace {

using Word = std::uint64_t;
using Clock = std::chrono::steady_clock;
using Code = std::uint16_t;

// ---------------------------------------------------------------------------
// Prepared bitsets

struct AttrBits {
    LeafSlot::Mode mode = LeafSlot::Mode::fixed;
    Proposition fixed{};
    std::vector<Word> bits, nbits; // fixed leaves
    std::vector<std::int64_t> values;
    std::vector<std::uint32_t> rank; // per point, free leaves
    std::vector<Word> ge;            // (K + 1) * W, ge[v] = points with rank >= v
    std::vector<Word> can0;          // points where some choice makes the leaf false
    std::size_t K = 0;

    std::size_t choices() const {
        if (mode == LeafSlot::Mode::free_pivot) return K;
        if (mode == LeafSlot::Mode::free_interval) return K * (K + 1) / 2;
        return 1;
    }
};

struct Prepared {
    std::size_t n = 0, W = 0, m = 0;
    Word tail = ~Word{0};
    std::vector<Word> target, ntarget, ones, zeros;
    std::vector<AttrBits> attrs;

    Code op_not() const { return static_cast<Code>(m); }
    Code op_and() const { return static_cast<Code>(m + 1); }
    Code op_or() const { return static_cast<Code>(m + 2); }
    const Word* ge(std::size_t a, std::size_t v) const { return attrs[a].ge.data() + v * W; }
};

void set_bit(std::vector<Word>& b, std::size_t i) { b[i / 64] |= Word{1} << (i % 64); }

Prepared prepare(const EncodedDataset& ds, const Vocabulary& vocab, const CandidateGrid& grid) {
    Prepared p;
    p.n = ds.size();
    p.m = ds.attribute_count();
    p.W = (p.n + 63) / 64;
    if (p.n % 64) p.tail = (Word{1} << (p.n % 64)) - 1;
    p.target.assign(p.W, 0);
    for (std::size_t i = 0; i < p.n; ++i)
        if (ds.target(i)) set_bit(p.target, i);
    p.ntarget = p.target;
    for (auto& w : p.ntarget) w = ~w;
    p.ones.assign(p.W, ~Word{0});
    p.zeros.assign(p.W, 0);
    p.attrs.resize(p.m);
    for (std::size_t a = 0; a < p.m; ++a) {
        auto& at = p.attrs[a];
        const auto& slot = vocab.slots.at(a);
        at.mode = slot.mode;
        if (slot.mode == LeafSlot::Mode::fixed) {
            at.fixed = slot.fixed;
            at.bits.assign(p.W, 0);
            for (std::size_t i = 0; i < p.n; ++i)
                if (eval_prop(slot.fixed, ds, i)) set_bit(at.bits, i);
            at.nbits = at.bits;
            for (auto& w : at.nbits) w = ~w;
            continue;
        }
        at.values = grid.at(a).values;
        at.K = at.values.size();
        at.rank.resize(p.n);
        for (std::size_t i = 0; i < p.n; ++i) {
            const auto v = ds.value(a, i);
            at.rank[i] = static_cast<std::uint32_t>(
                std::lower_bound(at.values.begin(), at.values.end(), v) - at.values.begin());
        }
        at.ge.assign((at.K + 1) * p.W, 0);
        for (std::size_t v = 0; v < at.K; ++v) {
            Word* g = at.ge.data() + v * p.W;
            for (std::size_t i = 0; i < p.n; ++i)
                if (at.rank[i] >= v) g[i / 64] |= Word{1} << (i % 64);
        }
        at.can0.assign(p.W, 0);
        if (at.mode == LeafSlot::Mode::free_pivot) {
            if (at.K > 1) {
                const Word* top = p.ge(a, at.K - 1);
                for (std::size_t w = 0; w < p.W; ++w) at.can0[w] = ~top[w];
            }
        } else if (at.K > 1) {
            at.can0 = p.ones;
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Canonical term generation

enum Root : std::uint8_t { root_leaf, root_not, root_and, root_or };

struct TermStore {
    std::vector<Code> codes;
    std::vector<std::uint64_t> off;
    std::vector<std::uint8_t> size, root, negarg;
    std::vector<std::size_t> level_end; // level_end[s] = first index with size > s

    std::size_t count() const { return off.size(); }
    std::span<const Code> term(std::size_t i) const { return {codes.data() + off[i], size[i]}; }
};

// Calls emit(codes, root, negarg) for every canonical term of size s, given a store that holds
// all sizes <= s - 2 in (size, lex) order. Size s - 1 is read from the store when present and
// regenerated on the fly otherwise. emit returns false to stop; the function then returns false.
using EmitFn = std::function<bool(std::span<const Code>, std::uint8_t, std::uint8_t)>;

class Generator {
public:
    Generator(const TermStore& store, std::size_t m) : store_(store), m_(m) {}

    bool level(std::size_t s, const EmitFn& emit) {
        if (s == 1) {
            for (std::size_t c = 0; c < m_; ++c) {
                const Code code = static_cast<Code>(c);
                if (!emit({&code, 1}, root_leaf, 0)) return false;
            }
            return true;
        }
        // ¬t
        const Code neg = static_cast<Code>(m_);
        if (store_.level_end.size() > s - 1) {
            for (std::size_t i = store_.level_end[s - 2]; i < store_.level_end[s - 1]; ++i) {
                if (store_.root[i] == root_not || store_.negarg[i]) continue;
                buf_.assign(store_.term(i).begin(), store_.term(i).end());
                buf_.push_back(neg);
                if (!emit(buf_, root_not, 0)) return false;
            }
        } else {
            Generator inner(store_, m_);
            const bool go = inner.level(s - 1, [&](std::span<const Code> c, std::uint8_t r, std::uint8_t na) {
                if (r == root_not || na) return true;
                buf_.assign(c.begin(), c.end());
                buf_.push_back(neg);
                return emit(buf_, root_not, 0);
            });
            if (!go) return false;
        }
        for (const std::uint8_t r : {root_and, root_or}) {
            args_.clear();
            if (!chain(r, 0, s, 0, emit)) return false;
        }
        return true;
    }

private:
    bool chain(std::uint8_t r, std::size_t start, std::size_t rem, int negs, const EmitFn& emit) {
        if (args_.size() >= 2 && rem == 0) {
            buf_.clear();
            for (const auto i : args_) buf_.insert(buf_.end(), store_.term(i).begin(), store_.term(i).end());
            const Code op = static_cast<Code>(m_ + (r == root_and ? 1 : 2));
            for (std::size_t j = 1; j < args_.size(); ++j) buf_.push_back(op);
            return emit(buf_, r, negs ? 1 : 0);
        }
        const std::size_t extra = args_.empty() ? 0 : 1;
        // A lone first argument must leave room for a second one and its operator.
        const std::size_t reserve = args_.empty() ? 2 : 0;
        if (rem < extra + 1 + reserve) return true;
        const std::size_t max_size = rem - extra - reserve;
        const std::size_t end = store_.level_end[std::min(max_size, store_.level_end.size() - 1)];
        for (std::size_t i = start; i < end; ++i) {
            if (store_.root[i] == r) continue;
            const int neg = store_.root[i] == root_not ? 1 : 0;
            if (neg && negs) continue;
            args_.push_back(i);
            const bool go = chain(r, i + 1, rem - extra - store_.size[i], negs + neg, emit);
            args_.pop_back();
            if (!go) return false;
        }
        return true;
    }

    const TermStore& store_;
    std::size_t m_;
    std::vector<std::size_t> args_;
    std::vector<Code> buf_;
};

// Ceiling on the term store; a bound that would need more is cut short like an expired budget.
constexpr std::size_t store_byte_limit = std::size_t{1} << 30;

enum class Built { complete, stopped, too_large };

// Fills `store` with every canonical term of size <= max_size in (size, lex) order.
Built build_store(TermStore& store, std::size_t m, std::size_t max_size, const std::function<bool()>& keep_going,
                  std::size_t byte_limit = store_byte_limit) {
    store = {};
    store.level_end.assign(1, 0);
    constexpr std::size_t per_term = sizeof(std::uint64_t) + 3 + sizeof(std::uint32_t);
    for (std::size_t s = 1; s <= max_size; ++s) {
        std::vector<Code> flat;
        std::vector<std::uint8_t> roots, negargs;
        const std::size_t held = store.codes.size() * sizeof(Code) + store.count() * per_term;
        bool too_large = false;
        Generator gen(store, m);
        std::size_t tick = 0;
        const bool done = gen.level(s, [&](std::span<const Code> c, std::uint8_t r, std::uint8_t na) {
            flat.insert(flat.end(), c.begin(), c.end());
            roots.push_back(r);
            negargs.push_back(na);
            if (++tick & 0xfff) return true;
            // The sorted copy doubles the level while it is appended.
            if (held + 2 * (flat.size() * sizeof(Code) + roots.size() * per_term) > byte_limit) {
                too_large = true;
                return false;
            }
            return keep_going();
        });
        if (too_large) return Built::too_large;
        if (!done) return Built::stopped;
        std::vector<std::uint32_t> order(roots.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
        auto at = [&](std::uint32_t i) { return std::span<const Code>(flat.data() + std::size_t{i} * s, s); };
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const auto x = at(a), y = at(b);
            return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
        });
        store.codes.reserve(store.codes.size() + flat.size());
        for (const auto i : order) {
            store.off.push_back(store.codes.size());
            const auto t = at(i);
            store.codes.insert(store.codes.end(), t.begin(), t.end());
            store.size.push_back(static_cast<std::uint8_t>(s));
            store.root.push_back(roots[i]);
            store.negarg.push_back(negargs[i]);
        }
        store.level_end.push_back(store.count());
    }
    return Built::complete;
}

// ---------------------------------------------------------------------------
// Incumbent shared by workers

std::uint64_t pack_key(std::uint64_t agree, std::size_t size) { return agree * 256 + (255 - size); }

struct Incumbent {
    std::mutex mu;
    std::atomic<std::uint64_t> key{0};
    bool has = false;
    std::uint64_t agree = 0;
    std::size_t size = 0;
    Formula best;

    void seed(const Formula& f, std::uint64_t a) {
        has = true;
        agree = a;
        size = brevity::size(f);
        best = f;
        key.store(pack_key(agree, size));
    }

    // True when a formula of size s with at most `bound` agreements cannot be preferred.
    bool dominates(std::uint64_t bound, std::size_t s) const {
        return pack_key(bound, s) < key.load(std::memory_order_relaxed);
    }

    void offer(std::uint64_t a, std::size_t s, const std::function<Formula()>& build) {
        if (dominates(a, s)) return;
        std::lock_guard lock(mu);
        if (has) {
            if (a < agree) return;
            if (a == agree) {
                if (s > size) return;
                if (s == size) {
                    Formula f = build();
                    if (!(f < best)) return;
                    best = std::move(f);
                    return;
                }
            }
        }
        has = true;
        agree = a;
        size = s;
        best = build();
        key.store(pack_key(agree, size));
    }
};

// ---------------------------------------------------------------------------
// Per-skeleton solver

struct Stop {
    std::optional<Clock::time_point> deadline;
    std::atomic<bool> timed_out{false};

    bool check() {
        if (timed_out.load(std::memory_order_relaxed)) return true;
        if (deadline && Clock::now() >= *deadline) {
            timed_out.store(true);
            return true;
        }
        return false;
    }
};

class Solver {
public:
    Solver(const Prepared& p, Incumbent& inc, Stop& stop) : p_(p), inc_(inc), stop_(stop) {
        leaf1_.resize(p.m);
        leaf0_.resize(p.m);
        for (std::size_t a = 0; a < p.m; ++a) {
            if (p.attrs[a].mode == LeafSlot::Mode::fixed) {
                leaf1_[a] = p.attrs[a].bits.data();
                leaf0_[a] = p.attrs[a].nbits.data();
            }
        }
        choice_.resize(p.m);
        pos_.assign(p.m, -1);
    }

    std::uint64_t nodes = 0;

    // Returns false if the search was cut short by the deadline.
    bool solve(std::span<const Code> codes) {
        codes_ = codes;
        ensure_stack(codes.size());
        free_.clear();
        for (const auto c : codes)
            if (c < p_.m && p_.attrs[c].mode != LeafSlot::Mode::fixed &&
                std::find(free_.begin(), free_.end(), c) == free_.end())
                free_.push_back(c);
        for (std::size_t i = 0; i < free_.size(); ++i) pos_[free_[i]] = static_cast<int>(i);
        assign_.assign(free_.size(), 0);
        bool ok = true;
        if (free_.empty()) {
            ++nodes;
            const Word* r = eval2();
            consider(score(r));
        } else {
            // The two attributes with most choices are solved in closed form; the rest are enumerated.
            order_.assign(free_.begin(), free_.end());
            std::stable_sort(order_.begin(), order_.end(), [&](std::size_t l, std::size_t r) {
                return p_.attrs[l].choices() < p_.attrs[r].choices();
            });
            for (const auto a : free_) set_free(a);
            if (!inc_.dominates(bound3(), codes.size())) ok = dfs(0);
        }
        for (const auto a : free_) pos_[a] = -1;
        return ok;
    }

    std::uint64_t upper_bound(std::span<const Code> codes) {
        codes_ = codes;
        ensure_stack(codes.size());
        for (const auto c : codes)
            if (c < p_.m && p_.attrs[c].mode != LeafSlot::Mode::fixed) set_free(c);
        return bound3();
    }

private:
    void ensure_stack(std::size_t len) {
        const std::size_t need = (len + 1) * p_.W;
        if (s1_.size() < need) {
            s1_.assign(need, 0);
            s0_.assign(need, 0);
        }
    }

    void set_free(std::size_t a) {
        leaf1_[a] = p_.ones.data();
        leaf0_[a] = p_.attrs[a].can0.data();
    }

    void set_choice(std::size_t a, std::size_t c) {
        const auto& at = p_.attrs[a];
        if (at.mode == LeafSlot::Mode::free_pivot) {
            leaf1_[a] = p_.ge(a, c);
        } else {
            auto& buf = choice_[a];
            buf.resize(p_.W);
            const auto [l, u] = interval_of(at.K, c);
            const Word* gl = p_.ge(a, l);
            const Word* gu = p_.ge(a, u + 1);
            for (std::size_t w = 0; w < p_.W; ++w) buf[w] = gl[w] & ~gu[w];
            leaf1_[a] = buf.data();
        }
    }

    // Choice index c enumerates (l, u), l <= u, in lexicographic order.
    static std::pair<std::size_t, std::size_t> interval_of(std::size_t K, std::size_t c) {
        std::size_t l = 0;
        while (c >= K - l) {
            c -= K - l;
            ++l;
        }
        return {l, l + c};
    }
    static std::size_t interval_index(std::size_t K, std::size_t l, std::size_t u) {
        return l * K - l * (l - 1) / 2 + (u - l);
    }

    const Word* eval2() {
        const std::size_t W = p_.W;
        std::size_t sp = 0;
        for (const auto c : codes_) {
            if (c < p_.m) {
                std::copy_n(leaf1_[c], W, s1_.data() + sp * W);
                ++sp;
            } else if (c == p_.op_not()) {
                Word* x = s1_.data() + (sp - 1) * W;
                for (std::size_t w = 0; w < W; ++w) x[w] = ~x[w];
            } else {
                Word* x = s1_.data() + (sp - 2) * W;
                const Word* y = x + W;
                if (c == p_.op_and())
                    for (std::size_t w = 0; w < W; ++w) x[w] &= y[w];
                else
                    for (std::size_t w = 0; w < W; ++w) x[w] |= y[w];
                --sp;
            }
        }
        return s1_.data();
    }

    // Three-valued evaluation: (can be true, can be false) per point; returns the agreement bound.
    std::uint64_t bound3() {
        const std::size_t W = p_.W;
        std::size_t sp = 0;
        for (const auto c : codes_) {
            if (c < p_.m) {
                std::copy_n(leaf1_[c], W, s1_.data() + sp * W);
                std::copy_n(leaf0_[c], W, s0_.data() + sp * W);
                ++sp;
            } else if (c == p_.op_not()) {
                std::swap_ranges(s1_.data() + (sp - 1) * W, s1_.data() + sp * W, s0_.data() + (sp - 1) * W);
            } else {
                Word* x1 = s1_.data() + (sp - 2) * W;
                Word* x0 = s0_.data() + (sp - 2) * W;
                const Word* y1 = x1 + W;
                const Word* y0 = x0 + W;
                if (c == p_.op_and()) {
                    for (std::size_t w = 0; w < W; ++w) {
                        x1[w] &= y1[w];
                        x0[w] |= y0[w];
                    }
                } else {
                    for (std::size_t w = 0; w < W; ++w) {
                        x1[w] |= y1[w];
                        x0[w] &= y0[w];
                    }
                }
                --sp;
            }
        }
        std::uint64_t c = 0;
        for (std::size_t w = 0; w < W; ++w) {
            Word v = (s1_[w] & p_.target[w]) | (s0_[w] & p_.ntarget[w]);
            if (w + 1 == W) v &= p_.tail;
            c += static_cast<std::uint64_t>(std::popcount(v));
        }
        return c;
    }

    std::uint64_t score(const Word* r) const {
        std::uint64_t c = 0;
        for (std::size_t w = 0; w < p_.W; ++w) {
            Word v = ~(r[w] ^ p_.target[w]);
            if (w + 1 == p_.W) v &= p_.tail;
            c += static_cast<std::uint64_t>(std::popcount(v));
        }
        return c;
    }

    bool tick() {
        ++nodes;
        return (nodes & 0x3ff) || !stop_.check();
    }

    bool dfs(std::size_t j) {
        const std::size_t k = order_.size();
        if (j + 1 == k) return solve_last(order_[j]);
        if (j + 2 == k) return solve_last2(order_[j], order_[j + 1]);
        const std::size_t a = order_[j];
        const std::size_t n_choices = p_.attrs[a].choices();
        for (std::size_t c = 0; c < n_choices; ++c) {
            if (!tick()) return false;
            set_choice(a, c);
            assign_[static_cast<std::size_t>(pos_[a])] = c;
            if (inc_.dominates(bound3(), codes_.size())) continue;
            if (!dfs(j + 1)) return false;
        }
        set_free(a);
        return true;
    }

    // Best choice for one attribute given per-rank gains; ties go to the smallest choice.
    std::pair<std::int64_t, std::size_t> best_choice(const AttrBits& at, const std::int64_t* gain) {
        std::int64_t best = std::numeric_limits<std::int64_t>::min();
        std::size_t choice = 0;
        const std::size_t K = at.K;
        if (at.mode == LeafSlot::Mode::free_pivot) {
            std::int64_t suffix = 0;
            for (std::size_t v = K; v-- > 0;) {
                suffix += gain[v];
                if (suffix >= best) {
                    best = suffix;
                    choice = v;
                }
            }
            return {best, choice};
        }
        // gain(l, u) = S[u + 1] - S[l]; right_[j] = argmax of S over [j, K], earliest on ties.
        prefix_.resize(K + 1);
        prefix_[0] = 0;
        for (std::size_t r = 0; r < K; ++r) prefix_[r + 1] = prefix_[r] + gain[r];
        right_.resize(K + 1);
        right_[K] = K;
        for (std::size_t j = K - 1; j >= 1; --j) right_[j] = prefix_[j] >= prefix_[right_[j + 1]] ? j : right_[j + 1];
        std::size_t bl = 0, bu = 0;
        for (std::size_t l = 0; l < K; ++l) {
            const std::size_t j = right_[l + 1];
            const std::int64_t g = prefix_[j] - prefix_[l];
            if (g > best) {
                best = g;
                bl = l;
                bu = j - 1;
            }
        }
        return {best, interval_index(K, bl, bu)};
    }

    bool solve_last(std::size_t a) {
        if (!tick()) return false;
        const std::size_t W = p_.W;
        leaf1_[a] = p_.ones.data();
        const Word* A = eval2();
        pa_.assign(A, A + W);
        leaf1_[a] = p_.zeros.data();
        const Word* B = eval2();
        // a_w: agreement when the leaf is true; b_w: when false.
        std::uint64_t base = 0, reach = 0;
        pos_bits_.resize(W);
        neg_bits_.resize(W);
        for (std::size_t w = 0; w < W; ++w) {
            const Word tm = w + 1 == W ? p_.tail : ~Word{0};
            const Word aw = ~(pa_[w] ^ p_.target[w]) & tm;
            const Word bw = ~(B[w] ^ p_.target[w]) & tm;
            base += static_cast<std::uint64_t>(std::popcount(bw));
            pos_bits_[w] = aw & ~bw;
            neg_bits_[w] = bw & ~aw;
            reach += static_cast<std::uint64_t>(std::popcount(pos_bits_[w]));
        }
        set_free(a);
        if (inc_.dominates(base + reach, codes_.size())) return true;
        const auto& at = p_.attrs[a];
        gain_.assign(at.K, 0);
        for (std::size_t w = 0; w < W; ++w) {
            for (Word x = pos_bits_[w]; x; x &= x - 1)
                ++gain_[at.rank[w * 64 + static_cast<std::size_t>(std::countr_zero(x))]];
            for (Word x = neg_bits_[w]; x; x &= x - 1)
                --gain_[at.rank[w * 64 + static_cast<std::size_t>(std::countr_zero(x))]];
        }
        const auto [best, choice] = best_choice(at, gain_.data());
        assign_[static_cast<std::size_t>(pos_[a])] = choice;
        consider(static_cast<std::uint64_t>(static_cast<std::int64_t>(base) + best));
        return true;
    }

    // Joint exact solve of two attributes. With both leaves fixed to constants the formula has four
    // cofactors; each point's agreement then depends only on whether x and y hold there, so the
    // score of a choice pair is a sum over (rank of x, rank of y) cells.
    bool solve_last2(std::size_t x, std::size_t y) {
        if (!tick()) return false;
        const std::size_t W = p_.W;
        cof_.resize(4 * W);
        for (int bx = 0; bx < 2; ++bx) {
            for (int by = 0; by < 2; ++by) {
                leaf1_[x] = bx ? p_.ones.data() : p_.zeros.data();
                leaf1_[y] = by ? p_.ones.data() : p_.zeros.data();
                const Word* r = eval2();
                Word* dst = cof_.data() + static_cast<std::size_t>(bx * 2 + by) * W;
                for (std::size_t w = 0; w < W; ++w) dst[w] = ~(r[w] ^ p_.target[w]);
            }
        }
        set_free(x);
        set_free(y);
        const Word* a00 = cof_.data();
        const Word* a01 = a00 + W;
        const Word* a10 = a01 + W;
        const Word* a11 = a10 + W;
        std::uint64_t constant = 0, reach = 0;
        mixed_.resize(W);
        for (std::size_t w = 0; w < W; ++w) {
            const Word tm = w + 1 == W ? p_.tail : ~Word{0};
            const Word all = a00[w] & a01[w] & a10[w] & a11[w] & tm;
            const Word any = (a00[w] | a01[w] | a10[w] | a11[w]) & tm;
            mixed_[w] = any & ~all;
            constant += static_cast<std::uint64_t>(std::popcount(all));
            reach += static_cast<std::uint64_t>(std::popcount(mixed_[w]));
        }
        if (inc_.dominates(constant + reach, codes_.size())) return true;

        const auto& ax = p_.attrs[x];
        const auto& ay = p_.attrs[y];
        const std::size_t Kx = ax.K, Ky = ay.K;
        // e1[rx][ry]: gain of y true over y false when x is true; e0 likewise when x is false.
        e1_.assign(Kx * Ky, 0);
        e0_.assign(Kx * Ky, 0);
        b1_.assign(Kx, 0);
        b0_.assign(Kx, 0);
        for (std::size_t w = 0; w < W; ++w) {
            for (Word bits = mixed_[w]; bits; bits &= bits - 1) {
                const std::size_t bit = static_cast<std::size_t>(std::countr_zero(bits));
                const std::size_t i = w * 64 + bit;
                const int v00 = static_cast<int>((a00[w] >> bit) & 1), v01 = static_cast<int>((a01[w] >> bit) & 1);
                const int v10 = static_cast<int>((a10[w] >> bit) & 1), v11 = static_cast<int>((a11[w] >> bit) & 1);
                const std::size_t rx = ax.rank[i], cell = rx * Ky + ay.rank[i];
                e1_[cell] += v11 - v10;
                e0_[cell] += v01 - v00;
                b1_[rx] += v10;
                b0_[rx] += v00;
            }
        }
        e0tot_.assign(Ky, 0);
        std::int64_t b0tot = 0;
        for (std::size_t rx = 0; rx < Kx; ++rx) {
            b0tot += b0_[rx];
            for (std::size_t ry = 0; ry < Ky; ++ry) e0tot_[ry] += e0_[rx * Ky + ry];
        }
        gain_.resize(Ky);
        const std::size_t px = static_cast<std::size_t>(pos_[x]);
        const std::size_t py = static_cast<std::size_t>(pos_[y]);
        std::uint64_t local = 0;
        auto try_x = [&](std::size_t xchoice, std::int64_t bshift) {
            const auto [g, ychoice] = best_choice(ay, gain_.data());
            const std::int64_t total = static_cast<std::int64_t>(constant) + b0tot + bshift + g;
            const auto agree = static_cast<std::uint64_t>(total);
            if (agree < local) return;
            local = agree;
            assign_[px] = xchoice;
            assign_[py] = ychoice;
            consider(agree);
        };
        auto add_row = [&](std::size_t rx) {
            for (std::size_t ry = 0; ry < Ky; ++ry) acc_[ry] += e1_[rx * Ky + ry] - e0_[rx * Ky + ry];
        };
        if (ax.mode == LeafSlot::Mode::free_pivot) {
            acc_.assign(Ky, 0);
            std::int64_t bshift = 0;
            for (std::size_t v = Kx; v-- > 0;) {
                add_row(v);
                bshift += b1_[v] - b0_[v];
                for (std::size_t ry = 0; ry < Ky; ++ry) gain_[ry] = e0tot_[ry] + acc_[ry];
                try_x(v, bshift);
            }
        } else {
            std::size_t c = 0;
            for (std::size_t l = 0; l < Kx; ++l) {
                acc_.assign(Ky, 0);
                std::int64_t bshift = 0;
                for (std::size_t u = l; u < Kx; ++u, ++c) {
                    add_row(u);
                    bshift += b1_[u] - b0_[u];
                    for (std::size_t ry = 0; ry < Ky; ++ry) gain_[ry] = e0tot_[ry] + acc_[ry];
                    try_x(c, bshift);
                }
            }
        }
        return true;
    }

    void consider(std::uint64_t agree) {
        inc_.offer(agree, codes_.size(), [&] { return build(); });
    }

public:
    Proposition prop_for(std::size_t a, std::size_t c) const {
        const auto& at = p_.attrs[a];
        const auto attr = static_cast<std::uint32_t>(a);
        if (at.mode == LeafSlot::Mode::free_pivot) return Proposition::pivot(attr, at.values[c]);
        const auto [l, u] = interval_of(at.K, c);
        return Proposition::interval(attr, at.values[l], at.values[u]);
    }

    Formula build() const {
        std::vector<Token> t;
        t.reserve(codes_.size());
        for (const auto c : codes_) {
            if (c < p_.m) {
                const auto& at = p_.attrs[c];
                if (at.mode == LeafSlot::Mode::fixed) t.push_back(Token::leaf(at.fixed));
                else t.push_back(Token::leaf(prop_for(c, assign_[static_cast<std::size_t>(pos_[c])])));
            } else if (c == p_.op_not()) {
                t.push_back(Token::negation());
            } else if (c == p_.op_and()) {
                t.push_back(Token::conjunction());
            } else {
                t.push_back(Token::disjunction());
            }
        }
        return Formula(std::move(t));
    }

private:
    const Prepared& p_;
    Incumbent& inc_;
    Stop& stop_;
    std::span<const Code> codes_;
    std::vector<const Word*> leaf1_, leaf0_;
    std::vector<std::vector<Word>> choice_;
    std::vector<int> pos_;
    std::vector<Code> free_;
    std::vector<std::size_t> order_, assign_;
    std::vector<Word> s1_, s0_, pa_, pos_bits_, neg_bits_, cof_, mixed_;
    std::vector<std::int64_t> gain_, prefix_, e1_, e0_, b1_, b0_, e0tot_, acc_;
    std::vector<std::size_t> right_;
};

std::vector<Code> codes_of(const Skeleton& sk, std::size_t m) {
    std::vector<Code> out;
    out.reserve(sk.tokens.size());
    for (const auto& t : sk.tokens) {
        switch (t.kind) {
        case Token::Kind::leaf:
            if (t.prop.attr >= m) throw std::invalid_argument("skeleton leaf refers to an unknown attribute");
            out.push_back(static_cast<Code>(t.prop.attr));
            break;
        case Token::Kind::negation: out.push_back(static_cast<Code>(m)); break;
        case Token::Kind::conjunction: out.push_back(static_cast<Code>(m + 1)); break;
        case Token::Kind::disjunction: out.push_back(static_cast<Code>(m + 2)); break;
        }
    }
    return out;
}

Skeleton skeleton_of(std::span<const Code> codes, const Vocabulary& vocab) {
    const std::size_t m = vocab.slots.size();
    Skeleton sk;
    for (const auto c : codes) {
        if (c < m) {
            const auto& slot = vocab.slots[c];
            switch (slot.mode) {
            case LeafSlot::Mode::fixed: sk.tokens.push_back(Token::leaf(slot.fixed)); break;
            case LeafSlot::Mode::free_pivot:
                sk.tokens.push_back(Token::leaf(Proposition::pivot(slot.attr, 0)));
                break;
            case LeafSlot::Mode::free_interval:
                sk.tokens.push_back(Token::leaf(Proposition::interval(slot.attr, 0, 0)));
                break;
            }
            if (slot.mode != LeafSlot::Mode::fixed &&
                std::find(sk.free_attributes.begin(), sk.free_attributes.end(), slot.attr) ==
                    sk.free_attributes.end())
                sk.free_attributes.push_back(slot.attr);
        } else if (c == m) {
            sk.tokens.push_back(Token::negation());
        } else if (c == m + 1) {
            sk.tokens.push_back(Token::conjunction());
        } else {
            sk.tokens.push_back(Token::disjunction());
        }
    }
    return sk;
}

// Leaves of free attributes take their mode from the placeholder; other leaves stay as written.
Vocabulary vocabulary_for(const Skeleton& sk, const EncodedDataset& ds) {
    Vocabulary v;
    v.slots.resize(ds.attribute_count());
    for (std::size_t a = 0; a < v.slots.size(); ++a) {
        const auto attr = static_cast<std::uint32_t>(a);
        v.slots[a] = {attr, LeafSlot::Mode::fixed,
                      ds.is_numeric(a) ? Proposition::pivot(attr, 0) : Proposition::boolean(attr)};
    }
    for (const auto& t : sk.tokens) {
        if (!t.is_leaf()) continue;
        auto& slot = v.slots.at(t.prop.attr);
        const bool is_free = std::find(sk.free_attributes.begin(), sk.free_attributes.end(), t.prop.attr) !=
                             sk.free_attributes.end();
        if (!is_free) slot.fixed = t.prop;
        else if (t.prop.kind == Proposition::Kind::interval) slot.mode = LeafSlot::Mode::free_interval;
        else slot.mode = LeafSlot::Mode::free_pivot;
    }
    return v;
}

void check_skeleton(const Skeleton& sk) {
    if (sk.tokens.empty() || !well_formed(sk.tokens)) throw std::invalid_argument("malformed skeleton");
}

} // namespace

Vocabulary make_vocabulary(const EncodedDataset& ds, SchemeId scheme, const CandidateGrid& grid) {
    Vocabulary v;
    v.slots.resize(ds.attribute_count());
    for (std::size_t a = 0; a < ds.attribute_count(); ++a) {
        auto& s = v.slots[a];
        s.attr = static_cast<std::uint32_t>(a);
        if (!ds.is_numeric(a)) {
            s.fixed = Proposition::boolean(s.attr);
            continue;
        }
        switch (scheme) {
        case SchemeId::median: s.fixed = Proposition::pivot(s.attr, median_of(ds, a)); break;
        case SchemeId::pivot:
            grid.at(a);
            s.mode = LeafSlot::Mode::free_pivot;
            break;
        case SchemeId::interval:
            grid.at(a);
            s.mode = LeafSlot::Mode::free_interval;
            break;
        }
    }
    return v;
}

Formula Skeleton::instantiate(std::span<const Proposition> assignment) const {
    if (assignment.size() != free_attributes.size())
        throw std::invalid_argument("assignment does not match the skeleton's free attributes");
    std::vector<Token> out = tokens;
    for (auto& t : out) {
        if (!t.is_leaf() || t.prop.kind == Proposition::Kind::boolean) continue;
        const auto it = std::find(free_attributes.begin(), free_attributes.end(), t.prop.attr);
        if (it == free_attributes.end()) continue;
        const auto& p = assignment[static_cast<std::size_t>(it - free_attributes.begin())];
        if (p.attr != t.prop.attr || p.kind != t.prop.kind)
            throw std::invalid_argument("assignment proposition does not fit its leaf");
        t.prop = p;
    }
    return Formula(std::move(out));
}

std::vector<Skeleton> enumerate_skeletons(const Vocabulary& vocab, std::size_t max_size) {
    TermStore store;
    if (build_store(store, vocab.slots.size(), max_size, [] { return true; }, SIZE_MAX) != Built::complete)
        throw std::length_error("skeleton enumeration exceeds memory");
    std::vector<Skeleton> out;
    out.reserve(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) out.push_back(skeleton_of(store.term(i), vocab));
    return out;
}

std::optional<ThresholdChoice> optimize_thresholds(const Skeleton& sk, const EncodedDataset& ds,
                                                   const CandidateGrid& grid, Accuracy incumbent) {
    check_skeleton(sk);
    if (ds.empty()) throw EmptyDatasetError("cannot fit thresholds on an empty dataset");
    const Prepared p = prepare(ds, vocabulary_for(sk, ds), grid);
    // Strictly above the incumbent means more than floor(incumbent * n) agreements.
    const std::uint64_t need = incumbent.total ? incumbent.agree * p.n / incumbent.total : 0;
    Incumbent inc;
    inc.key.store(pack_key(need, 0));
    Stop stop;
    Solver solver(p, inc, stop);
    solver.solve(codes_of(sk, p.m));
    if (!inc.has) return std::nullopt;
    ThresholdChoice out;
    out.accuracy = {inc.agree, p.n};
    for (const auto a : sk.free_attributes) {
        for (const auto& t : inc.best.rpn()) {
            if (t.is_leaf() && t.prop.attr == a) {
                out.assignment.push_back(t.prop);
                break;
            }
        }
    }
    return out;
}

Accuracy accuracy_upper_bound(const Skeleton& sk, const EncodedDataset& ds, const CandidateGrid& grid) {
    check_skeleton(sk);
    if (ds.empty()) throw EmptyDatasetError("bound on an empty dataset");
    const Prepared p = prepare(ds, vocabulary_for(sk, ds), grid);
    Incumbent inc;
    Stop stop;
    Solver solver(p, inc, stop);
    return {solver.upper_bound(codes_of(sk, p.m)), p.n};
}

Accuracy accuracy_upper_bound(const Skeleton& sk, const EncodedDataset& ds) {
    return accuracy_upper_bound(sk, ds, candidate_grid(ds));
}

SearchOutcome best_formula(const EncodedDataset& ds, const SearchConfig& cfg, const SearchOutcome* previous) {
    const auto t0 = Clock::now();
    if (ds.empty()) throw EmptyDatasetError("cannot search on an empty dataset");
    if (cfg.length_bound < 1) throw std::invalid_argument("length bound must be at least 1");
    if (cfg.length_bound > 250) throw std::invalid_argument("length bound above 250 is not supported");
    audit::observe("search", ds.ids());

    const CandidateGrid grid = candidate_grid(ds);
    const Vocabulary vocab = make_vocabulary(ds, cfg.scheme, grid);
    const Prepared p = prepare(ds, vocab, grid);

    Stop stop;
    if (cfg.budget.seconds) {
        stop.deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                                 std::chrono::duration<double>(std::max(0.0, *cfg.budget.seconds)));
    }
    Incumbent inc;
    std::size_t first_size = 1;
    if (previous && !previous->best.empty()) {
        inc.seed(previous->best, brevity::accuracy(previous->best, ds).agree);
        if (previous->proved_optimal && previous->length_bound + 1 == cfg.length_bound) first_size = cfg.length_bound;
    }

    const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
    std::vector<Solver> solvers;
    solvers.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) solvers.emplace_back(p, inc, stop);

    std::uint64_t taken = 0;
    bool limit_hit = false;
    constexpr std::size_t batch_cap = 4096;
    std::vector<Code> batch_codes;
    std::vector<std::pair<std::size_t, std::size_t>> batch; // (offset, length)

    auto run_batch = [&] {
        std::atomic<std::size_t> next{0};
        auto work = [&](Solver& s) {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= batch.size() || stop.timed_out.load()) return;
                const auto [o, len] = batch[i];
                s.solve({batch_codes.data() + o, len});
            }
        };
        if (workers == 1 || batch.size() < 2) {
            work(solvers[0]);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(work, std::ref(solvers[i]));
            work(solvers[0]);
            for (auto& t : pool) t.join();
        }
        batch.clear();
        batch_codes.clear();
        return !stop.check();
    };

    auto take = [&](std::span<const Code> codes) {
        if (cfg.budget.node_limit && taken >= *cfg.budget.node_limit) {
            limit_hit = true;
            return false;
        }
        ++taken;
        batch.emplace_back(batch_codes.size(), codes.size());
        batch_codes.insert(batch_codes.end(), codes.begin(), codes.end());
        if (batch.size() >= batch_cap) return run_batch();
        return true;
    };

    TermStore store;
    const std::size_t L = cfg.length_bound;
    const std::size_t stored = L >= 2 ? L - 2 : 0;
    bool complete = build_store(store, p.m, stored, [&] { return !stop.check(); }) == Built::complete;
    for (std::size_t s = first_size; s <= stored && complete; ++s) {
        for (std::size_t i = store.level_end[s - 1]; i < store.level_end[s]; ++i) {
            if (!take(store.term(i))) {
                complete = false;
                break;
            }
        }
    }
    Generator gen(store, p.m);
    auto take_all = [&](std::span<const Code> c, std::uint8_t, std::uint8_t) { return take(c); };
    if (complete && L >= 2 && first_size <= L - 1) complete = gen.level(L - 1, take_all);
    if (complete) complete = gen.level(L, take_all);
    if (!batch.empty() && !stop.timed_out.load()) {
        if (!run_batch()) complete = false;
    }
    if (stop.timed_out.load() || limit_hit) complete = false;

    SearchOutcome out;
    out.length_bound = cfg.length_bound;
    out.skeletons = taken;
    for (const auto& s : solvers) out.nodes_explored += s.nodes;
    if (!inc.has) throw NoIncumbentError("search budget expired before any formula was scored");
    out.best = inc.best;
    out.train_accuracy = {inc.agree, p.n};
    out.proved_optimal = complete;
    out.elapsed = Clock::now() - t0;
    return out;
}

} // namespace brevity
