#include "trendcal/bank_builder.hpp"
#include "trendcal/errors.hpp"
#include "trendcal/harness.hpp"
#include "trendcal/random.hpp"
#include "trendcal/simulator.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <sstream>

using namespace trendcal;

namespace {

const Timespan kYear = Timespan::parse("2019-01-01 2019-12-31");

// One single-response estimate x/y from observed maxima.
RatioEstimate estimate(const std::string& x, int mx, const std::string& y, int my, const std::string& ctx) {
    return pair_ratio(test::series(x, {mx}, ctx), test::series(y, {my}, ctx));
}

FrequencyList ranked(std::size_t count) {
    std::vector<FrequencyEntry> e;
    for (std::size_t i = 0; i < count; ++i) {
        e.push_back({QueryId("c" + std::to_string(1000 + i)), static_cast<double>(count - i)});
    }
    return FrequencyList(std::move(e));
}

struct BruteBest {
    Magnitude eta = Magnitude::infinity();
    std::vector<QueryId> path;
};

// Exhaustive search over every simple path from `from` to `to`; keeps the
// smallest eta product, then fewest hops, then the lexicographically
// smallest node sequence.
BruteBest brute_force(const ComparisonGraph& g, const QueryId& from, const QueryId& to) {
    BruteBest best;
    bool found = false;
    std::vector<QueryId> path{from};
    std::function<void(const QueryId&, Magnitude)> walk = [&](const QueryId& at, Magnitude eta) {
        if (at == to) {
            const bool better = !found || eta < best.eta ||
                                (eta == best.eta && (path.size() < best.path.size() ||
                                                     (path.size() == best.path.size() && path < best.path)));
            if (better) {
                best = {eta, path};
                found = true;
            }
            return;
        }
        for (const auto& next : g.neighbors(at)) {
            if (std::find(path.begin(), path.end(), next) != path.end()) continue;
            path.push_back(next);
            walk(next, eta * g.edge(at, next)->eta);
            path.pop_back();
        }
    };
    walk(from, Magnitude(1));
    return best;
}

}  // namespace

TEST(FrequencyList, ParsesTsvWithHeaderAndBom) {
    std::istringstream in("\xEF\xBB\xBFquery\tfrequency\nbeta\t5\n\nalpha\t9\ngamma\t5\n");
    const auto list = FrequencyList::parse_tsv(in);
    ASSERT_EQ(list.size(), 3u);
    EXPECT_EQ(list.entries()[0].id, QueryId("alpha"));
    EXPECT_EQ(list.entries()[1].id, QueryId("beta"));  // tie broken by id
    std::ostringstream out;
    list.write_tsv(out);
    std::istringstream again(out.str());
    EXPECT_EQ(FrequencyList::parse_tsv(again).entries().size(), 3u);
}

TEST(FrequencyList, RejectsDuplicatesAndNegatives) {
    std::istringstream dup("a\t1\na\t2\n");
    EXPECT_THROW(FrequencyList::parse_tsv(dup), ContractError);
    std::istringstream neg("a\t-1\n");
    EXPECT_THROW(FrequencyList::parse_tsv(neg), ContractError);
    std::istringstream bad("a\t1\nb\tx\n");
    EXPECT_THROW(FrequencyList::parse_tsv(bad), ContractError);
}

TEST(SampleAnchors, OnePerStratumAndDeterministic) {
    const auto freq = ranked(2000);
    const auto a = sample_anchors(freq, 2000, 100, 17);
    ASSERT_EQ(a.size(), 100u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t rank = std::stoul(a[i].str().substr(1)) - 1000;
        EXPECT_GE(rank, i * 20);
        EXPECT_LT(rank, (i + 1) * 20);
    }
    EXPECT_EQ(a, sample_anchors(freq, 2000, 100, 17));
    EXPECT_NE(a, sample_anchors(freq, 2000, 100, 18));
}

TEST(SampleAnchors, UnevenStrataCoverPrefix) {
    const auto freq = ranked(50);
    const auto a = sample_anchors(freq, 23, 7, 3);
    ASSERT_EQ(a.size(), 7u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t rank = std::stoul(a[i].str().substr(1)) - 1000;
        EXPECT_GE(rank, i * 23 / 7);
        EXPECT_LT(rank, (i + 1) * 23 / 7);
    }
    EXPECT_THROW(sample_anchors(freq, 60, 7, 3), ContractError);
    EXPECT_THROW(sample_anchors(freq, 5, 7, 3), ContractError);
}

TEST(ShingleRequests, CountAndOverlap) {
    std::vector<QueryId> anchors;
    for (int i = 0; i < 100; ++i) anchors.emplace_back("a" + std::to_string(i));
    const auto reqs = shingle_requests(anchors, 5, "worldwide", kYear);
    ASSERT_EQ(reqs.size(), 96u);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        ASSERT_EQ(reqs[i].queries.size(), 5u);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(reqs[i].queries[j], anchors[i + j]);
    }
    EXPECT_EQ(shingle_requests(std::span(anchors).first(5), 5, "worldwide", kYear).size(), 1u);
    EXPECT_THROW(shingle_requests(std::span(anchors).first(4), 5, "worldwide", kYear), ContractError);
    EXPECT_THROW(shingle_requests(anchors, 6, "worldwide", kYear), ContractError);
    EXPECT_THROW(shingle_requests(anchors, 1, "worldwide", kYear), ContractError);
}

TEST(EstimateRatios, ThresholdKeepsExactlyPairsReachingTau) {
    UniverseSpec spec;
    spec.seed = 2;
    spec.n_queries = 60;
    spec.log10_range = 3.0;
    SimulatedProvider sim(std::make_shared<GroundTruthUniverse>(make_universe(spec)));
    const auto ids = sim.universe().ids();
    std::vector<ProviderResponse> responses;
    for (std::size_t i = 0; i + 5 <= ids.size(); i += 5) {
        responses.push_back(sim.fetch(RequestSpec{{ids.begin() + i, ids.begin() + i + 5}, "worldwide", kYear}));
    }
    for (int tau : {0, 1, 10, 37}) {
        std::set<std::pair<QueryId, QueryId>> expected;
        for (const auto& r : responses) {
            for (const auto& x : r.series) {
                for (const auto& y : r.series) {
                    if (x.query() == y.query()) continue;
                    const Rational lo = std::min(x.max_value(), y.max_value());
                    if (lo != 0 && lo >= tau) expected.insert({x.query(), y.query()});
                }
            }
        }
        const auto got = estimate_ratios(responses, tau);
        std::set<std::pair<QueryId, QueryId>> got_pairs;
        for (const auto& e : got) got_pairs.insert({e.numerator, e.denominator});
        EXPECT_EQ(got.size(), expected.size()) << "tau=" << tau;
        EXPECT_EQ(got_pairs, expected) << "tau=" << tau;
    }
}

TEST(EstimateRatios, BoundaryAtTau) {
    ProviderResponse r;
    r.response_id = "ctx";
    r.request.timespan = kYear;
    r.request.queries = {QueryId("a"), QueryId("b"), QueryId("c")};
    r.series = {test::series("a", {100}), test::series("b", {10}), test::series("c", {9})};
    const auto got = estimate_ratios(std::span(&r, 1), 10);
    std::set<std::pair<QueryId, QueryId>> pairs;
    for (const auto& e : got) pairs.insert({e.numerator, e.denominator});
    EXPECT_EQ(pairs, (std::set<std::pair<QueryId, QueryId>>{{QueryId("a"), QueryId("b")},
                                                             {QueryId("b"), QueryId("a")}}));
}

TEST(ComparisonGraph, KeepsTightestEstimatePerPair) {
    ComparisonGraph g;
    g.add(estimate("x", 20, "y", 100, "r1"));
    g.add(estimate("y", 100, "x", 21, "r2"));  // reverse direction, looser
    g.add(estimate("x", 60, "y", 100, "r3").inverse().inverse());
    EXPECT_EQ(g.node_count(), 2u);
    EXPECT_EQ(g.edge_count(), 2u);
    const auto xy = g.edge(QueryId("x"), QueryId("y"));
    ASSERT_TRUE(xy);
    EXPECT_EQ(xy->r, Magnitude(Rational(3, 5)));
    const auto yx = g.edge(QueryId("y"), QueryId("x"));
    EXPECT_EQ(yx->r, Magnitude(Rational(5, 3)));
    EXPECT_EQ(yx->eta, xy->eta);
    EXPECT_FALSE(g.edge(QueryId("x"), QueryId("z")));
}

TEST(TightestChains, MatchBruteForceOnRandomGraphs) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Rng rng(seed);
        const int n = 4 + static_cast<int>(rng.index(7));  // 4..10 nodes
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back("n" + std::to_string(i));
        ComparisonGraph g;
        int ctx = 0;
        // a random spanning path keeps the graph connected, then extra edges
        for (int i = 1; i < n; ++i) {
            const int j = static_cast<int>(rng.index(static_cast<std::size_t>(i)));
            g.add(estimate(ids[i], 1 + static_cast<int>(rng.index(100)), ids[j], 100, "c" + std::to_string(ctx++)));
        }
        const int extra = static_cast<int>(rng.index(static_cast<std::size_t>(2 * n)));
        for (int e = 0; e < extra; ++e) {
            const auto a = rng.index(static_cast<std::size_t>(n));
            const auto b = rng.index(static_cast<std::size_t>(n));
            if (a == b) continue;
            // coarse values make equal-eta ties common
            const int m = 10 * (1 + static_cast<int>(rng.index(10)));
            g.add(estimate(ids[a], std::min(m, 100), ids[b], 100, "c" + std::to_string(ctx++)));
        }
        const QueryId ref(ids[rng.index(static_cast<std::size_t>(n))]);
        const auto chains = tightest_chains(g, ref);
        ASSERT_EQ(chains.size(), static_cast<std::size_t>(n));
        for (const auto& id : ids) {
            const auto oracle = brute_force(g, QueryId(id), ref);
            const auto& c = chains.at(QueryId(id));
            EXPECT_EQ(c.estimate.eta, oracle.eta) << "seed " << seed << " node " << id;
            EXPECT_EQ(c.path, oracle.path) << "seed " << seed << " node " << id;
            // the chained estimate is the product along the reported path
            RatioEstimate along = identity_estimate(QueryId(id));
            for (std::size_t h = 0; h + 1 < c.path.size(); ++h) along = chain(along, *g.edge(c.path[h], c.path[h + 1]));
            EXPECT_EQ(c.estimate, along);
        }
    }
}

TEST(TightestChains, DisconnectedGraphListsUnreachable) {
    ComparisonGraph g;
    g.add(estimate("a", 50, "b", 100, "r1"));
    g.add(estimate("c", 50, "d", 100, "r2"));
    g.add_node(QueryId("e"));
    try {
        tightest_chains(g, QueryId("a"));
        FAIL() << "expected DisconnectedGraphError";
    } catch (const DisconnectedGraphError& e) {
        EXPECT_EQ(e.unreachable(), (std::vector<std::string>{"c", "d", "e"}));
        EXPECT_NE(std::string(e.what()).find("tau"), std::string::npos);
    }
    EXPECT_THROW(tightest_chains(g, QueryId("zz")), NotFoundError);
}

TEST(CalibrateBank, ReferenceIsOneAndEntriesSorted) {
    ComparisonGraph g;
    g.add(estimate("lo", 20, "mid", 100, "r1"));
    g.add(estimate("mid", 40, "hi", 100, "r2"));
    const auto bank = calibrate_bank(g, QueryId("mid"), BankContext{"worldwide", kYear, BankParams{}});
    ASSERT_EQ(bank.size(), 3u);
    EXPECT_EQ(bank.entries()[0].query, QueryId("lo"));
    EXPECT_EQ(bank.reference_entry().R, 1);
    EXPECT_EQ(bank.at(QueryId("hi")).R, Rational(5, 2));
    EXPECT_EQ(bank.at(QueryId("hi")).R_lo, Rational(200, 81));
    EXPECT_EQ(bank.at(QueryId("hi")).R_hi, Rational(200, 79));
}

TEST(CalibrateBank, MergesAnchorsWithEqualR) {
    ComparisonGraph g;
    g.add(estimate("a", 30, "top", 100, "r1"));
    g.add(estimate("b", 30, "top", 100, "r1"));
    std::vector<QueryId> merged;
    const auto bank = calibrate_bank(g, QueryId("top"), BankContext{"worldwide", kYear, BankParams{}}, &merged);
    EXPECT_EQ(bank.size(), 2u);
    EXPECT_EQ(merged, std::vector<QueryId>{QueryId("b")});
}

TEST(ChooseReference, Policies) {
    ComparisonGraph g;
    g.add(estimate("a", 10, "b", 100, "r1"));
    g.add(estimate("b", 50, "c", 100, "r2"));
    g.add(estimate("c", 50, "d", 100, "r3"));
    EXPECT_EQ(choose_reference(g, ReferencePolicy::most_popular), QueryId("d"));
    EXPECT_EQ(choose_reference(g, ReferencePolicy::close_to_median), QueryId("b"));
    EXPECT_EQ(parse_reference_policy("close_to_median"), ReferencePolicy::close_to_median);
}

TEST(BuildBank, EndToEndSoundAndDeterministic) {
    ScenarioSpec spec;
    spec.seed = 5;
    spec.n_queries = 0;
    const auto scenario = make_scenario(spec);
    SimulatedProvider sim(scenario.universe);
    const auto built = build_bank(sim, scenario.frequencies, scenario.build);
    EXPECT_EQ(built.requests.size(), 96u);
    EXPECT_EQ(sim.request_count(), 96u);
    EXPECT_EQ(built.bank.size() + built.dropped.size() + built.merged.size(), 100u);
    EXPECT_EQ(built.bank.reference(), built.bank.entries().back().query);  // most popular
    for (const auto& e : built.bank.entries()) {
        const Rational truth = scenario.universe->true_ratio(e.query, built.bank.reference(), kYear);
        EXPECT_LE(e.R_lo, truth) << e.query;
        EXPECT_GE(e.R_hi, truth) << e.query;
    }
    SimulatedProvider again(scenario.universe);
    const auto rebuilt = build_bank(again, scenario.frequencies, scenario.build);
    EXPECT_EQ(rebuilt.bank, built.bank);
}

TEST(BuildBank, ParameterValidation) {
    BuildParams p;
    p.n = 3;
    p.k = 5;
    EXPECT_THROW(p.validate(), ContractError);
    p = BuildParams{};
    p.N = 50;
    EXPECT_THROW(p.validate(), ContractError);
    p = BuildParams{};
    p.tau = 101;
    EXPECT_THROW(p.validate(), ContractError);
    p = BuildParams{};
    p.reference_policy = ReferencePolicy::fixed;
    EXPECT_THROW(p.validate(), ContractError);
}

TEST(BuildBank, HighTauDisconnects) {
    ScenarioSpec spec;
    spec.seed = 8;
    spec.n_queries = 0;
    spec.n_candidates = 200;
    spec.n_anchors = 20;
    spec.candidate_orders = 7.0;  // adjacent anchors ~2x apart
    const auto scenario = make_scenario(spec);
    SimulatedProvider sim(scenario.universe);
    auto params = scenario.build;
    params.tau = 90;
    EXPECT_THROW(build_bank(sim, scenario.frequencies, params), DisconnectedGraphError);
}
