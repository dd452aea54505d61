#include "brevity/formula.hpp"

#include "brevity/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>

namespace brevity {

namespace {

/// Tree view of an RPN sequence; node i spans rpn[begin, end).
struct Node {
    Token::Kind kind;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
};

std::vector<Node> build_tree(std::span<const Token> rpn) {
    std::vector<Node> nodes;
    std::vector<int> stack;
    nodes.reserve(rpn.size());
    for (std::size_t i = 0; i < rpn.size(); ++i) {
        Node n{rpn[i].kind};
        n.end = i + 1;
        switch (rpn[i].kind) {
        case Token::Kind::leaf: n.begin = i; break;
        case Token::Kind::negation:
            n.left = stack.back();
            stack.pop_back();
            n.begin = nodes[static_cast<std::size_t>(n.left)].begin;
            break;
        default:
            n.right = stack.back();
            stack.pop_back();
            n.left = stack.back();
            stack.pop_back();
            n.begin = nodes[static_cast<std::size_t>(n.left)].begin;
            break;
        }
        stack.push_back(static_cast<int>(nodes.size()));
        nodes.push_back(n);
    }
    return nodes;
}

std::span<const Token> span_of(std::span<const Token> rpn, const Node& n) {
    return rpn.subspan(n.begin, n.end - n.begin);
}

Token::Kind dual(Token::Kind k) {
    return k == Token::Kind::conjunction ? Token::Kind::disjunction : Token::Kind::conjunction;
}

using Tokens = std::vector<Token>;

Tokens canonical_tokens(std::span<const Token> rpn);

void collect_args(std::span<const Token> rpn, const std::vector<Node>& nodes, int idx, Token::Kind op,
                  std::vector<Tokens>& out) {
    const Node& n = nodes[static_cast<std::size_t>(idx)];
    if (n.kind == op) {
        collect_args(rpn, nodes, n.left, op, out);
        collect_args(rpn, nodes, n.right, op, out);
        return;
    }
    Tokens c = canonical_tokens(span_of(rpn, n));
    if (c.back().kind == op) {
        // Rewriting can surface a chain of the same connective; splice its arguments in.
        const auto inner = build_tree(c);
        collect_args(c, inner, static_cast<int>(inner.size()) - 1, op, out);
        return;
    }
    out.push_back(std::move(c));
}

Tokens join_chain(std::vector<Tokens> args, Token::Kind op) {
    Tokens out;
    for (auto& a : args) out.insert(out.end(), a.begin(), a.end());
    for (std::size_t i = 1; i < args.size(); ++i) out.push_back({op, {}});
    return out;
}

Tokens canonical_tokens(std::span<const Token> rpn) {
    const auto nodes = build_tree(rpn);
    const Node& root = nodes.back();
    if (root.kind == Token::Kind::leaf) return {rpn.back()};

    if (root.kind == Token::Kind::negation) {
        Tokens c = canonical_tokens(span_of(rpn, nodes[static_cast<std::size_t>(root.left)]));
        if (c.back().kind == Token::Kind::negation) {
            c.pop_back();
            return c;
        }
        if (c.back().is_binary()) {
            // ¬(¬a ∘ rest) = a ∘' ¬(rest)
            const auto inner = build_tree(c);
            std::vector<Tokens> args;
            const auto op = c.back().kind;
            collect_args(c, inner, static_cast<int>(inner.size()) - 1, op, args);
            auto neg = std::find_if(args.begin(), args.end(),
                                    [](const Tokens& a) { return a.back().kind == Token::Kind::negation; });
            if (neg != args.end()) {
                Tokens positive(neg->begin(), neg->end() - 1);
                args.erase(neg);
                Tokens rest = join_chain(std::move(args), op);
                rest.push_back(Token::negation());
                Tokens rewritten = std::move(positive);
                rewritten.insert(rewritten.end(), rest.begin(), rest.end());
                rewritten.push_back({dual(op), {}});
                return canonical_tokens(rewritten);
            }
        }
        c.push_back(Token::negation());
        return c;
    }

    const auto op = root.kind;
    std::vector<Tokens> args;
    collect_args(rpn, nodes, static_cast<int>(nodes.size()) - 1, op, args);
    std::sort(args.begin(), args.end(),
              [](const Tokens& a, const Tokens& b) { return compare_subterms(a, b) < 0; });
    args.erase(std::unique(args.begin(), args.end()), args.end());
    if (args.size() == 1) return args.front();

    const auto negated_count = std::count_if(
        args.begin(), args.end(), [](const Tokens& a) { return a.back().kind == Token::Kind::negation; });
    if (negated_count >= 2) {
        // ¬a ∘ ¬b ∘ rest = ¬(a ∘' b) ∘ rest
        std::vector<Tokens> inner, rest;
        for (auto& a : args) {
            if (a.back().kind == Token::Kind::negation) {
                a.pop_back();
                inner.push_back(std::move(a));
            } else {
                rest.push_back(std::move(a));
            }
        }
        Tokens merged = join_chain(std::move(inner), dual(op));
        merged.push_back(Token::negation());
        rest.push_back(std::move(merged));
        return canonical_tokens(join_chain(std::move(rest), op));
    }
    return join_chain(std::move(args), op);
}

void render_node(std::span<const Token> rpn, const std::vector<Node>& nodes, int idx,
                 std::span<const EncodedAttribute> attributes, std::string& out);

int precedence(Token::Kind k) {
    switch (k) {
    case Token::Kind::disjunction: return 1;
    case Token::Kind::conjunction: return 2;
    case Token::Kind::negation: return 3;
    case Token::Kind::leaf: return 4;
    }
    return 0;
}

void render_child(std::span<const Token> rpn, const std::vector<Node>& nodes, int idx, int parent_prec,
                  Token::Kind parent, std::span<const EncodedAttribute> attributes, std::string& out) {
    const auto kind = nodes[static_cast<std::size_t>(idx)].kind;
    const bool parens = precedence(kind) < parent_prec && kind != parent;
    if (parens) out += '(';
    render_node(rpn, nodes, idx, attributes, out);
    if (parens) out += ')';
}

std::string render_leaf(const Proposition& p, std::span<const EncodedAttribute> attributes) {
    std::string name;
    int decimals = 0;
    if (p.attr < attributes.size()) {
        name = attributes[p.attr].name;
        decimals = attributes[p.attr].provenance.decimals;
    } else {
        name = "x" + std::to_string(p.attr);
    }
    switch (p.kind) {
    case Proposition::Kind::boolean: return name;
    case Proposition::Kind::pivot: return name + "≥" + format_scaled(p.lo, decimals);
    case Proposition::Kind::interval:
        return name + "∈[" + format_scaled(p.lo, decimals) + "," + format_scaled(p.hi, decimals) + "]";
    }
    return name;
}

void render_node(std::span<const Token> rpn, const std::vector<Node>& nodes, int idx,
                 std::span<const EncodedAttribute> attributes, std::string& out) {
    const Node& n = nodes[static_cast<std::size_t>(idx)];
    switch (n.kind) {
    case Token::Kind::leaf: out += render_leaf(rpn[n.begin].prop, attributes); break;
    case Token::Kind::negation:
        out += "¬";
        render_child(rpn, nodes, n.left, precedence(n.kind), n.kind, attributes, out);
        break;
    default:
        render_child(rpn, nodes, n.left, precedence(n.kind), n.kind, attributes, out);
        out += n.kind == Token::Kind::conjunction ? " ∧ " : " ∨ ";
        render_child(rpn, nodes, n.right, precedence(n.kind), n.kind, attributes, out);
        break;
    }
}

/// Recursive-descent parser over the rendering grammar.
class Parser {
public:
    Parser(std::string_view text, std::span<const EncodedAttribute> attributes)
        : text_(text), attributes_(attributes) {}

    Formula parse() {
        parse_or();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return Formula(std::move(out_));
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw DataError("formula parse error at offset " + std::to_string(pos_) + ": " + what);
    }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool eat(std::string_view s) {
        skip_space();
        if (text_.substr(pos_, s.size()) == s) {
            pos_ += s.size();
            return true;
        }
        return false;
    }

    void parse_or() {
        parse_and();
        while (eat("∨") || eat("|")) {
            parse_and();
            out_.push_back(Token::disjunction());
        }
    }

    void parse_and() {
        parse_unary();
        while (eat("∧") || eat("&")) {
            parse_unary();
            out_.push_back(Token::conjunction());
        }
    }

    void parse_unary() {
        if (eat("¬") || eat("!") || eat("~")) {
            parse_unary();
            out_.push_back(Token::negation());
            return;
        }
        if (eat("(")) {
            parse_or();
            if (!eat(")")) fail("expected ')'");
            return;
        }
        parse_leaf();
    }

    bool at_name_end() const {
        static constexpr std::string_view stops[] = {" ", "\t", "(", ")", "¬", "∧", "∨", "≥", "∈",
                                                     "&", "|", "!", "~", ">="};
        for (auto s : stops)
            if (text_.substr(pos_, s.size()) == s) return true;
        return false;
    }

    std::int64_t parse_number(int decimals) {
        skip_space();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == '-' || text_[pos_] == '+' || text_[pos_] == 'e' || text_[pos_] == 'E'))
            ++pos_;
        double v = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (ec != std::errc{} || ptr != text_.data() + pos_) fail("bad number");
        return static_cast<std::int64_t>(std::llround(v * std::pow(10.0, decimals)));
    }

    void parse_leaf() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !at_name_end()) ++pos_;
        if (pos_ == start) fail("expected a proposition");
        const std::string name(text_.substr(start, pos_ - start));
        std::size_t attr = attributes_.size();
        for (std::size_t a = 0; a < attributes_.size(); ++a)
            if (attributes_[a].name == name) attr = a;
        if (attr == attributes_.size()) fail("unknown attribute '" + name + "'");
        const auto id = static_cast<std::uint32_t>(attr);
        const int decimals = attributes_[attr].provenance.decimals;
        if (eat("≥") || eat(">=")) {
            out_.push_back(Token::leaf(Proposition::pivot(id, parse_number(decimals))));
        } else if (eat("∈")) {
            if (!eat("[")) fail("expected '['");
            const auto lo = parse_number(decimals);
            if (!eat(",")) fail("expected ','");
            const auto hi = parse_number(decimals);
            if (!eat("]")) fail("expected ']'");
            if (lo > hi) fail("interval with lower end above upper end");
            out_.push_back(Token::leaf(Proposition::interval(id, lo, hi)));
        } else {
            out_.push_back(Token::leaf(Proposition::boolean(id)));
        }
    }

    std::string_view text_;
    std::span<const EncodedAttribute> attributes_;
    std::size_t pos_ = 0;
    std::vector<Token> out_;
};

} // namespace

bool well_formed(std::span<const Token> rpn) {
    long depth = 0;
    for (const auto& t : rpn) {
        switch (t.kind) {
        case Token::Kind::leaf: ++depth; break;
        case Token::Kind::negation:
            if (depth < 1) return false;
            break;
        default:
            if (depth < 2) return false;
            --depth;
            break;
        }
    }
    return depth == 1;
}

Formula::Formula(std::vector<Token> rpn) : rpn_(std::move(rpn)) {
    if (!well_formed(rpn_)) throw std::invalid_argument("malformed RPN formula");
}

std::strong_ordering operator<=>(const Formula& a, const Formula& b) {
    return std::lexicographical_compare_three_way(a.rpn_.begin(), a.rpn_.end(), b.rpn_.begin(), b.rpn_.end());
}

std::size_t size(const Formula& f) { return f.rpn().size(); }

bool eval(const Formula& f, const EncodedDataset& ds, std::size_t row) {
    std::vector<bool> stack;
    stack.reserve(f.rpn().size());
    for (const auto& t : f.rpn()) {
        switch (t.kind) {
        case Token::Kind::leaf: stack.push_back(eval_prop(t.prop, ds, row)); break;
        case Token::Kind::negation: stack.back() = !stack.back(); break;
        case Token::Kind::conjunction: {
            const bool b = stack.back();
            stack.pop_back();
            stack.back() = stack.back() && b;
            break;
        }
        case Token::Kind::disjunction: {
            const bool b = stack.back();
            stack.pop_back();
            stack.back() = stack.back() || b;
            break;
        }
        }
    }
    return stack.back();
}

Accuracy accuracy(const Formula& f, const EncodedDataset& ds) {
    if (ds.empty()) throw EmptyDatasetError("accuracy over an empty dataset");
    Accuracy acc{0, ds.size()};
    for (std::size_t r = 0; r < ds.size(); ++r)
        if (eval(f, ds, r) == ds.target(r)) ++acc.agree;
    return acc;
}

Formula negated(const Formula& f) {
    std::vector<Token> rpn(f.rpn().begin(), f.rpn().end());
    rpn.push_back(Token::negation());
    return Formula(std::move(rpn));
}

std::strong_ordering compare_subterms(std::span<const Token> a, std::span<const Token> b) {
    if (auto c = a.size() <=> b.size(); c != 0) return c;
    return std::lexicographical_compare_three_way(a.begin(), a.end(), b.begin(), b.end());
}

bool is_canonical(const Formula& f) {
    const auto rpn = f.rpn();
    const auto nodes = build_tree(rpn);
    auto node = [&](int i) -> const Node& { return nodes[static_cast<std::size_t>(i)]; };
    for (const auto& n : nodes) {
        if (n.kind == Token::Kind::leaf) continue;
        if (n.kind == Token::Kind::negation) {
            const Node& c = node(n.left);
            if (c.kind == Token::Kind::negation) return false;
            if (c.kind != Token::Kind::leaf) {
                // ¬ over a chain: the chain may not contain a negated argument
                int cur = n.left;
                while (node(cur).kind == c.kind) {
                    if (node(node(cur).left).kind == Token::Kind::negation) return false;
                    cur = node(cur).right;
                }
                if (node(cur).kind == Token::Kind::negation) return false;
            }
            continue;
        }
        if (node(n.left).kind == n.kind) return false;
        std::vector<int> args{n.left};
        int cur = n.right;
        while (node(cur).kind == n.kind) {
            args.push_back(node(cur).left);
            cur = node(cur).right;
        }
        args.push_back(cur);
        int negations = 0;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (node(args[i]).kind == Token::Kind::negation) ++negations;
            if (i > 0 && compare_subterms(span_of(rpn, node(args[i - 1])), span_of(rpn, node(args[i]))) >= 0)
                return false;
        }
        if (negations > 1) return false;
    }
    return true;
}

Formula canonicalize(const Formula& f) { return Formula(canonical_tokens(f.rpn())); }

bool consistent_thresholds(const Formula& f) {
    std::map<std::uint32_t, Proposition> seen;
    for (const auto& t : f.rpn()) {
        if (!t.is_leaf()) continue;
        auto [it, inserted] = seen.emplace(t.prop.attr, t.prop);
        if (!inserted && it->second != t.prop) return false;
    }
    return true;
}

std::string format_scaled(std::int64_t value, int decimals) {
    if (decimals <= 0) return std::to_string(value);
    std::int64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const bool negative = value < 0;
    const std::uint64_t mag = negative ? static_cast<std::uint64_t>(-(value + 1)) + 1 : static_cast<std::uint64_t>(value);
    std::string frac = std::to_string(mag % static_cast<std::uint64_t>(scale));
    frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
    return (negative ? "-" : "") + std::to_string(mag / static_cast<std::uint64_t>(scale)) + "." + frac;
}

std::string render(const Formula& f, std::span<const EncodedAttribute> attributes) {
    if (f.empty()) return {};
    const auto nodes = build_tree(f.rpn());
    std::string out;
    render_node(f.rpn(), nodes, static_cast<int>(nodes.size()) - 1, attributes, out);
    return out;
}

Formula parse_formula(std::string_view text, std::span<const EncodedAttribute> attributes) {
    return Parser(text, attributes).parse();
}

} // namespace brevity
