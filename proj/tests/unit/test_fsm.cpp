#include "doctest.h"

#include "brevity/fsm.hpp"

#include "../support.hpp"

#include <json.hpp>
#include <random>

using namespace brevity;

namespace {

LengthTrace trace(std::vector<double> v) {
    std::vector<Accuracy> acc;
    for (const double x : v) acc.push_back({static_cast<std::uint64_t>(x * 100 + 0.5), 100});
    return trace_of(acc);
}

// Target equals boolean attribute 1; attribute 0 is noise.
EncodedDataset perfect_leaf(std::size_t n) {
    std::mt19937_64 rng(2);
    testing::Toy t;
    t.boolean = {false, true};
    t.cols.resize(2);
    for (std::size_t i = 0; i < n; ++i) {
        t.cols[0].push_back(static_cast<std::int64_t>(rng() % 10));
        t.cols[1].push_back(static_cast<std::int64_t>(rng() % 2));
        t.target.push_back(static_cast<std::uint8_t>(t.cols[1].back()));
    }
    return testing::to_dataset(t);
}

} // namespace

TEST_CASE("two strikes stop and back off") {
    const auto t = trace({.80, .85, .83, .84});
    CHECK(early_stop_check(t));
    CHECK(*t.best_validation() == Accuracy{85, 100});
    CHECK(select_length(t) == 2);
    CHECK_FALSE(early_stop_check(trace({.80, .85, .83})));
}

TEST_CASE("early_stop_check prefixes") {
    CHECK(early_stop_check(trace({.9, .8, .8})));
    const std::vector<double> recover{.9, .8, .9};
    for (std::size_t n = 1; n <= recover.size(); ++n)
        CHECK_FALSE(early_stop_check(trace({recover.begin(), recover.begin() + static_cast<long>(n)})));
    CHECK_FALSE(early_stop_check(trace({.5})));
}

TEST_CASE("select_length picks the first attainment of the best") {
    CHECK(select_length(trace({.7, .85, .85, .8, .8})) == 2);
    CHECK(select_length(trace({.6, .6, .6})) == 1);
    CHECK(select_length(trace({.6})) == 1);
}

TEST_CASE("LengthTrace requires consecutive lengths") {
    LengthTrace t;
    TraceEntry e;
    e.length = 2;
    CHECK_THROWS(t.push(e));
}

TEST_CASE("a perfect leaf is chosen at length one") {
    const auto W = perfect_leaf(60);
    FsmConfig cfg;
    cfg.scheme = SchemeId::pivot;
    cfg.length_cap = 4;
    cfg.per_bound = Budget::unlimited();
    const auto res = run_fsm(W, cfg);
    CHECK(res.chosen_length == 1);
    CHECK(res.final == Formula({Token::leaf(Proposition::boolean(1))}));
    CHECK(res.trace.entries()[0].validation == Accuracy{1, 1});
    CHECK(res.full_data_accuracy == Accuracy{1, 1});
    CHECK(finalize(W, 1, cfg) == res.final);
}

TEST_CASE("run_fsm respects the length cap and is deterministic") {
    std::mt19937_64 rng(8);
    const auto W = testing::to_dataset(testing::random_toy(rng, 40, 3));
    FsmConfig cfg;
    cfg.scheme = SchemeId::interval;
    cfg.seed = 4;
    cfg.length_cap = 5;
    cfg.per_bound = Budget::unlimited();
    const auto a = run_fsm(W, cfg), b = run_fsm(W, cfg);
    CHECK(a.trace.size() <= 5);
    CHECK(a.final == b.final);
    CHECK(size(a.final) <= a.chosen_length);
    CHECK(a.chosen_length == select_length(a.trace));
    if (a.stop_reason == StopReason::early_stop) CHECK(early_stop_check(a.trace));
    for (std::size_t i = 1; i < a.trace.size(); ++i)
        CHECK(a.trace.entries()[i].train >= a.trace.entries()[i - 1].train);
    CHECK(trace_json(a, W.attributes(), false) == trace_json(b, W.attributes(), false));
    const auto j = nlohmann::json::parse(trace_json(a, W.attributes()));
    CHECK(j.at("entries").size() == a.trace.size());
}

TEST_CASE("a budget cut ends the loop with the incumbent") {
    std::mt19937_64 rng(9);
    auto toy = testing::random_toy(rng, 60, 4);
    while (toy.m() < 4 || toy.n() < 30) toy = testing::random_toy(rng, 60, 4);
    const auto W = testing::to_dataset(toy);
    FsmConfig cfg;
    cfg.scheme = SchemeId::interval;
    cfg.per_bound = Budget::nodes(30);
    cfg.length_cap = 12;
    const auto res = run_fsm(W, cfg);
    CHECK(res.stop_reason == StopReason::timeout);
    CHECK_FALSE(res.trace.back().proved_optimal);
    CHECK(res.chosen_length == select_length(res.trace));
    CHECK_FALSE(res.final.empty());
}
