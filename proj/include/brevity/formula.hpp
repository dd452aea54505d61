#pragma once

#include "brevity/dataset.hpp"
#include "brevity/propspace.hpp"

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace brevity {

/// One symbol of a reverse-Polish formula. Tokens order as leaf < ¬ < ∧ < ∨,
/// leaves among themselves by their proposition.
struct Token {
    enum class Kind : std::uint8_t { leaf, negation, conjunction, disjunction };

    Kind kind = Kind::leaf;
    Proposition prop{};

    static Token leaf(Proposition p) { return {Kind::leaf, p}; }
    static Token negation() { return {Kind::negation, {}}; }
    static Token conjunction() { return {Kind::conjunction, {}}; }
    static Token disjunction() { return {Kind::disjunction, {}}; }

    bool is_leaf() const { return kind == Kind::leaf; }
    bool is_binary() const { return kind == Kind::conjunction || kind == Kind::disjunction; }

    friend std::strong_ordering operator<=>(const Token& a, const Token& b) {
        if (auto c = a.kind <=> b.kind; c != 0) return c;
        if (a.kind != Kind::leaf) return std::strong_ordering::equal;
        return a.prop <=> b.prop;
    }
    friend bool operator==(const Token& a, const Token& b) { return (a <=> b) == 0; }
};

/// True when scanning the tokens never underflows the evaluation stack and ends with one value.
bool well_formed(std::span<const Token> rpn);

/// A well-formed, nonempty reverse-Polish token sequence over {¬, ∧, ∨}.
class Formula {
public:
    Formula() = default;
    /// Throws std::invalid_argument on a malformed sequence.
    explicit Formula(std::vector<Token> rpn);

    std::span<const Token> rpn() const { return rpn_; }
    bool empty() const { return rpn_.empty(); }

    friend std::strong_ordering operator<=>(const Formula& a, const Formula& b);
    friend bool operator==(const Formula& a, const Formula& b) = default;

private:
    std::vector<Token> rpn_;
};

std::size_t size(const Formula& f);

/// Stack evaluation at one row of the dataset.
bool eval(const Formula& f, const EncodedDataset& ds, std::size_t row);

/// Exact agreement ratio between a formula and the target.
struct Accuracy {
    std::uint64_t agree = 0;
    std::uint64_t total = 1;

    double value() const { return total ? static_cast<double>(agree) / static_cast<double>(total) : 0.0; }

    // Compares the rationals agree/total by cross multiplication.
    friend std::strong_ordering operator<=>(const Accuracy& a, const Accuracy& b) {
        return a.agree * b.total <=> b.agree * a.total;
    }
    friend bool operator==(const Accuracy& a, const Accuracy& b) { return (a <=> b) == 0; }
};

Accuracy accuracy(const Formula& f, const EncodedDataset& ds);

/// f followed by ¬.
Formula negated(const Formula& f);

/// Order on subterms used by the canonical form: size first, then token-wise lexicographic.
std::strong_ordering compare_subterms(std::span<const Token> a, std::span<const Token> b);

/// Canonical-form check: no ¬¬; ¬ never directly above a chain holding a negated argument;
/// ∧/∨ chains are right-nested with strictly increasing arguments and at most one negated argument.
bool is_canonical(const Formula& f);

/// Rewrites f into its canonical representative. The result agrees with f at every
/// point of every dataset and is never larger.
Formula canonicalize(const Formula& f);

/// True when each numeric attribute occurs with a single proposition (one threshold choice
/// per attribute, as a discretization assigns).
bool consistent_thresholds(const Formula& f);

/// Integer value on a 10^decimals scale, printed with exactly `decimals` fraction digits.
std::string format_scaled(std::int64_t value, int decimals);

/// Infix text with minimal parentheses, e.g. "¬(bare_nuclei≥6 ∨ clump_thickness≥7)".
std::string render(const Formula& f, std::span<const EncodedAttribute> attributes);

/// Parses the output of render() (ASCII "!", "~", "&", "|", ">=" are accepted as well).
Formula parse_formula(std::string_view text, std::span<const EncodedAttribute> attributes);

} // namespace brevity
