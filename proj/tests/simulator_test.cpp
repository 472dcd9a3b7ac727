#include "trendcal/errors.hpp"
#include "trendcal/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace trendcal;

namespace {

const Timespan kYear = Timespan::parse("2019-01-01 2019-12-31");

std::shared_ptr<GroundTruthUniverse> small_universe() {
    auto u = std::make_shared<GroundTruthUniverse>(5);
    u->add(QueryId("big"), LatentQuery{Rational(1000), std::vector<double>(kShapePeriodWeeks, 1.0)});
    u->add(QueryId("mid"), LatentQuery{Rational(374), std::vector<double>(kShapePeriodWeeks, 1.0)});
    u->add(QueryId("small"), LatentQuery{Rational(3), std::vector<double>(kShapePeriodWeeks, 1.0)});
    return u;
}

RequestSpec request(std::vector<std::string> ids, Timespan span = kYear) {
    RequestSpec r;
    for (auto& id : ids) r.queries.emplace_back(id);
    r.timespan = span;
    return r;
}

}  // namespace

TEST(Rounding, Rules) {
    EXPECT_EQ(apply_rounding(Rational(37, 2), RoundingRule::nearest), 19);  // half rounds up
    EXPECT_EQ(apply_rounding(Rational(374, 10), RoundingRule::nearest), 37);
    EXPECT_EQ(apply_rounding(Rational(379, 10), RoundingRule::floor), 37);
    EXPECT_EQ(apply_rounding(Rational(379, 10), RoundingRule::none), Rational(379, 10));
    EXPECT_THROW(apply_rounding(Rational(-1), RoundingRule::nearest), ContractError);
}

TEST(Universe, SameSpecSameUniverse) {
    UniverseSpec spec;
    spec.seed = 42;
    const auto a = make_universe(spec);
    const auto b = make_universe(spec);
    ASSERT_EQ(a.size(), 100u);
    for (const auto& id : a.ids()) {
        EXPECT_EQ(a.latent(id).max_interest, b.latent(id).max_interest);
        EXPECT_EQ(a.latent(id).shape, b.latent(id).shape);
    }
    spec.seed = 43;
    const auto c = make_universe(spec);
    EXPECT_NE(a.latent(QueryId("q0000")).max_interest, c.latent(QueryId("q0000")).max_interest);
}

TEST(Universe, MaximaSpanRequestedRangeAndShapesPeakAtOne) {
    UniverseSpec spec;
    spec.n_queries = 500;
    spec.log10_range = 5.0;
    spec.seed = 7;
    const auto u = make_universe(spec);
    double lo = 1e300, hi = 0;
    for (const auto& id : u.ids()) {
        const double m = to_double(u.latent(id).max_interest);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
        const auto& shape = u.latent(id).shape;
        ASSERT_EQ(shape.size(), kShapePeriodWeeks);
        EXPECT_EQ(*std::max_element(shape.begin(), shape.end()), 1.0);
        EXPECT_GT(*std::min_element(shape.begin(), shape.end()), 0.0);
        // a full year covers the whole period
        EXPECT_EQ(u.window_max(id, kYear), u.latent(id).max_interest);
    }
    EXPECT_GE(lo, 1.0);
    EXPECT_LE(hi, 1e5);
    EXPECT_GT(std::log10(hi / lo), 4.5);
}

TEST(Universe, RejectsBadLatents) {
    GroundTruthUniverse u;
    EXPECT_THROW(u.add(QueryId("a"), LatentQuery{Rational(0), std::vector<double>(kShapePeriodWeeks, 1.0)}),
                 ContractError);
    EXPECT_THROW(u.add(QueryId("a"), LatentQuery{Rational(1), std::vector<double>(3, 1.0)}), ContractError);
    u.add(QueryId("a"), LatentQuery{Rational(1), std::vector<double>(kShapePeriodWeeks, 1.0)});
    EXPECT_THROW(u.add(QueryId("a"), LatentQuery{Rational(1), std::vector<double>(kShapePeriodWeeks, 1.0)}),
                 ContractError);
}

TEST(SimulatedProvider, JointScalingAndRounding) {
    SimulatedProvider p(small_universe());
    const auto r = p.fetch(request({"mid", "big", "small"}));
    r.validate();
    EXPECT_EQ(r.precision, Precision::integer);
    EXPECT_EQ(r.series_for(QueryId("big")).max_value(), 100);
    EXPECT_EQ(r.series_for(QueryId("mid")).max_value(), 37);   // 37.4
    EXPECT_EQ(r.series_for(QueryId("small")).max_value(), 0);  // 0.3
    EXPECT_EQ(r.series[0].query(), QueryId("mid"));            // request order kept
    EXPECT_EQ(p.request_count(), 1u);
    EXPECT_THROW(p.fetch(request({"mid", "nope"})), NotFoundError);
}

TEST(SimulatedProvider, NoiselessServesExactRatios) {
    SimulatedProvider p(small_universe(), RoundingRule::none);
    const auto r = p.fetch(request({"mid", "big"}));
    EXPECT_EQ(r.precision, Precision::exact);
    EXPECT_EQ(r.series_for(QueryId("mid")).max_value(), Rational(374, 10));
}

TEST(SimulatedProvider, FloorVariant) {
    SimulatedProvider p(small_universe(), RoundingRule::floor);
    const auto r = p.fetch(request({"mid", "big"}));
    EXPECT_EQ(r.series_for(QueryId("mid")).max_value(), 37);
    const auto r2 = p.fetch(request({"small", "mid"}));
    EXPECT_EQ(r2.series_for(QueryId("small")).max_value(), 0);  // 0.80 floors to 0
}

TEST(SimulatedProvider, DeterministicAcrossInstances) {
    UniverseSpec spec;
    spec.seed = 3;
    auto u1 = std::make_shared<GroundTruthUniverse>(make_universe(spec));
    auto u2 = std::make_shared<GroundTruthUniverse>(make_universe(spec));
    SimulatedProvider a(u1), b(u2);
    const auto req = request({"q0001", "q0002", "q0003"});
    EXPECT_EQ(a.fetch(req), b.fetch(req));
}

TEST(SimulatedProvider, ScaleInvariance) {
    UniverseSpec spec;
    spec.seed = 11;
    const auto base = make_universe(spec);
    auto u1 = std::make_shared<GroundTruthUniverse>(base);
    auto u2 = std::make_shared<GroundTruthUniverse>(base.scaled(Rational(12345, 7)));
    SimulatedProvider a(u1), b(u2);
    for (int i = 0; i < 20; ++i) {
        const auto req = request({"q00" + std::to_string(10 + i), "q00" + std::to_string(40 + i),
                                  "q00" + std::to_string(70 + i)});
        EXPECT_EQ(a.fetch(req), b.fetch(req));
    }
}

TEST(SimulatedProvider, ResponsesOfDifferentRequestsHaveDifferentContexts) {
    SimulatedProvider p(small_universe());
    const auto r1 = p.fetch(request({"mid", "big"}));
    const auto r2 = p.fetch(request({"mid", "small"}));
    EXPECT_NE(r1.response_id, r2.response_id);
    EXPECT_EQ(r1.response_id, p.fetch(request({"big", "mid"})).response_id);
}

TEST(WeekOfPeriod, CyclesEveryFiftyTwoWeeks) {
    const Date d = parse_date("2019-03-10");
    EXPECT_EQ(week_of_period(d), week_of_period(d + std::chrono::days{7 * 52}));
    EXPECT_EQ((week_of_period(d) + 1) % kShapePeriodWeeks, week_of_period(d + std::chrono::days{7}));
}

TEST(ParseEnums, RoundTrip) {
    for (auto r : {RoundingRule::nearest, RoundingRule::floor, RoundingRule::none}) {
        EXPECT_EQ(parse_rounding_rule(to_string(r)), r);
    }
    for (auto f : {ShapeFamily::flat, ShapeFamily::seasonal, ShapeFamily::impulse, ShapeFamily::mixed}) {
        EXPECT_EQ(parse_shape_family(to_string(f)), f);
    }
    EXPECT_THROW(parse_rounding_rule("ceil"), ContractError);
}
