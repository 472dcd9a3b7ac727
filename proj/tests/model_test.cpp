#include "trendcal/errors.hpp"
#include "trendcal/model.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace trendcal;
using trendcal::test::series;

namespace {

// Independent bound computation on plain integers: a value m observed on
// the 0..100 scale lies in [(2m-1)/2, (2m+1)/2], except that 100 is exact
// and the lower end stops at 0. Returns {num, den} pairs.
struct Frac {
    long long num;
    long long den;
};

Frac lower_end(int m) { return m == 100 ? Frac{100, 1} : Frac{std::max(2 * m - 1, 0), 2}; }
Frac upper_end(int m) { return m == 100 ? Frac{100, 1} : Frac{2 * m + 1, 2}; }

Rational as_rational(Frac a, Frac b) {  // a / b
    long long num = a.num * b.den;
    long long den = a.den * b.num;
    const long long g = std::gcd(num, den);
    return Rational(num / g) / Rational(den / g);
}

}  // namespace

TEST(Rational, ParsesFractionsIntegersAndDecimals) {
    EXPECT_EQ(parse_rational("3/4"), Rational(3) / 4);
    EXPECT_EQ(parse_rational("-7"), Rational(-7));
    EXPECT_EQ(parse_rational("0.1"), Rational(1) / 10);
    EXPECT_EQ(parse_rational("2.5e-3"), Rational(1) / 400);
    EXPECT_EQ(to_string(Rational(6) / 8), "3/4");
    EXPECT_EQ(to_string(Rational(5)), "5");
    EXPECT_THROW(parse_rational("1/0"), ContractError);
    EXPECT_THROW(parse_rational("abc"), ContractError);
}

TEST(Magnitude, InfinityArithmetic) {
    const Magnitude inf = Magnitude::infinity();
    EXPECT_TRUE((Magnitude(2) * inf).is_infinite());
    EXPECT_EQ(Magnitude(0).reciprocal(), inf);
    EXPECT_EQ(inf.reciprocal(), Magnitude(0));
    EXPECT_TRUE(Magnitude(5) < inf);
    EXPECT_THROW(Magnitude(0) * inf, ContractError);
    EXPECT_THROW(Magnitude(0) / Magnitude(0), ContractError);
    EXPECT_THROW(Magnitude(Rational(-1)), ContractError);
    EXPECT_EQ(inf.to_string(), "inf");
}

TEST(QueryId, RejectsEmpty) {
    EXPECT_THROW(QueryId(""), ContractError);
    EXPECT_LT(QueryId("a"), QueryId("b"));
}

TEST(Timespan, ParsesBothSeparatorsAndListsWeeks) {
    const auto a = Timespan::parse("2019-01-01 2019-12-31");
    const auto b = Timespan::parse("2019-01-01..2019-12-31");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.to_string(), "2019-01-01 2019-12-31");
    const auto weeks = a.weekly_points();
    ASSERT_EQ(weeks.size(), 53u);
    EXPECT_EQ(format_date(weeks.back()), "2019-12-31");
    EXPECT_THROW(Timespan::parse("2019-02-01 2019-01-01"), ContractError);
    EXPECT_THROW(parse_date("2019-02-30"), ContractError);
}

TEST(RequestSpec, ValidatesQueryCountAndDuplicates) {
    const Timespan t = Timespan::parse("2019-01-01 2019-12-31");
    EXPECT_THROW((RequestSpec{{QueryId("a")}, "worldwide", t}.validate()), ContractError);
    EXPECT_THROW((RequestSpec{{QueryId("a"), QueryId("a")}, "worldwide", t}.validate()), ContractError);
    std::vector<QueryId> six;
    for (int i = 0; i < 6; ++i) six.emplace_back("q" + std::to_string(i));
    EXPECT_THROW((RequestSpec{six, "worldwide", t}.validate()), ContractError);
    RequestSpec ab{{QueryId("a"), QueryId("b")}, "worldwide", t};
    RequestSpec ba{{QueryId("b"), QueryId("a")}, "worldwide", t};
    EXPECT_EQ(ab.canonical_key(), ba.canonical_key());
    RequestSpec other{{QueryId("a"), QueryId("b")}, "DE", t};
    EXPECT_NE(ab.canonical_key(), other.canonical_key());
}

TEST(InterestSeries, RejectsOutOfRangeAndFractionalIntegers) {
    EXPECT_THROW(series("a", {101}), ContractError);
    EXPECT_THROW(series("a", {-1}), ContractError);
    std::vector<SeriesPoint> pts{{parse_date("2019-01-06"), Rational(1) / 2}};
    EXPECT_THROW(InterestSeries(QueryId("a"), pts, ScaleContext{"c", Precision::integer}), ContractError);
    EXPECT_NO_THROW(InterestSeries(QueryId("a"), pts, ScaleContext{"c", Precision::exact}));
    EXPECT_EQ(series("a", {3, 9, 4}).max_value(), 9);
    EXPECT_TRUE(series("a", {0, 0}).all_zero());
}

TEST(BoundsOf, MatchesHalfIntegerIntervals) {
    EXPECT_EQ(bounds_of(100).lo, 100);
    EXPECT_EQ(bounds_of(100).hi, 100);
    EXPECT_TRUE(bounds_of(100).exact_at_100);
    EXPECT_EQ(bounds_of(0).lo, 0);
    EXPECT_EQ(bounds_of(0).hi, Rational(1) / 2);
    for (int m = 0; m <= 100; ++m) {
        const auto b = bounds_of(m);
        EXPECT_EQ(b.lo, Rational(lower_end(m).num) / lower_end(m).den) << m;
        EXPECT_EQ(b.hi, Rational(upper_end(m).num) / upper_end(m).den) << m;
    }
    EXPECT_THROW(bounds_of(101), ContractError);
}

TEST(PairRatio, AgreesWithIntegerOracleOnAllPairs) {
    for (int mx = 0; mx <= 100; mx += 3) {
        for (int my = 1; my <= 100; my += 7) {
            const auto x = series("x", {mx, 0});
            const auto y = series("y", {0, my});
            const auto e = pair_ratio(x, y);
            EXPECT_EQ(e.r, Magnitude(Rational(mx) / my));
            EXPECT_EQ(e.lo, Magnitude(as_rational(lower_end(mx), upper_end(my))));
            EXPECT_EQ(e.hi, Magnitude(as_rational(upper_end(mx), lower_end(my))));
            if (mx == 0) {
                EXPECT_TRUE(e.eta.is_infinite());
            } else {
                EXPECT_EQ(e.eta, Magnitude(e.hi.value() / e.lo.value()));
            }
        }
    }
}

TEST(PairRatio, WorkedExample) {
    // 50 next to an exact 100: r = 1/2 in [49.5/100, 50.5/100], eta = 101/99
    const auto e = pair_ratio(series("x", {50}), series("y", {100}));
    EXPECT_EQ(e.r, Magnitude(Rational(1) / 2));
    EXPECT_EQ(e.lo, Magnitude(Rational(99) / 200));
    EXPECT_EQ(e.hi, Magnitude(Rational(101) / 200));
    EXPECT_EQ(e.eta, Magnitude(Rational(101) / 99));
    EXPECT_TRUE(e.contains(Magnitude(Rational(1) / 2)));
}

TEST(PairRatio, BothExactAtHundredIsPerfect) {
    const auto e = pair_ratio(series("x", {100}), series("y", {100}));
    EXPECT_EQ(e.r, Magnitude(1));
    EXPECT_EQ(e.eta, Magnitude(1));
}

TEST(PairRatio, Errors) {
    EXPECT_THROW(pair_ratio(series("x", {5}), series("y", {0})), DivisionUndefinedError);
    EXPECT_THROW(pair_ratio(series("x", {5}, "r1"), series("y", {100}, "r2")), MixedScaleError);
    EXPECT_THROW(pair_ratio(series("x", {5}, "r1", Precision::exact), series("y", {100}, "r1")), MixedScaleError);
}

TEST(PairRatio, ExactPrecisionGivesDegenerateInterval) {
    const auto e = pair_ratio(series("x", {37}, "c", Precision::exact), series("y", {100}, "c", Precision::exact));
    EXPECT_EQ(e.lo, e.hi);
    EXPECT_EQ(e.eta, Magnitude(1));
}

TEST(RatioEstimate, InverseSwapsBounds) {
    const auto e = pair_ratio(series("x", {40}), series("y", {100}));
    const auto inv = e.inverse();
    EXPECT_EQ(inv.numerator, QueryId("y"));
    EXPECT_EQ(inv.r, Magnitude(Rational(5) / 2));
    EXPECT_EQ(inv.lo, e.hi.reciprocal());
    EXPECT_EQ(inv.hi, e.lo.reciprocal());
    EXPECT_EQ(inv.eta, e.eta);
    const auto zero = pair_ratio(series("x", {0}), series("y", {100})).inverse();
    EXPECT_TRUE(zero.hi.is_infinite());
    EXPECT_TRUE(zero.r.is_infinite());
}

TEST(Chain, MultipliesComponents) {
    const auto xy = pair_ratio(series("x", {50}, "a"), series("y", {100}, "a"));
    const auto yz = pair_ratio(series("y", {20}, "b"), series("z", {100}, "b"));
    const auto xz = chain(xy, yz);
    EXPECT_EQ(xz.numerator, QueryId("x"));
    EXPECT_EQ(xz.denominator, QueryId("z"));
    EXPECT_EQ(xz.r, Magnitude(Rational(1) / 10));
    EXPECT_EQ(xz.lo, Magnitude(Rational(99, 200) * Rational(39, 200)));
    EXPECT_EQ(xz.hi, Magnitude(Rational(101, 200) * Rational(41, 200)));
    EXPECT_EQ(xz.eta, Magnitude(Rational(101, 99) * Rational(41, 39)));
    EXPECT_THROW(chain(yz, xy), ContractError);
    EXPECT_EQ(chain(identity_estimate(QueryId("x")), xy), xy);
}

namespace {

AnchorBankEntry entry(const std::string& id, Rational R, Rational lo, Rational hi) {
    return {QueryId(id), R, lo, hi, hi / lo};
}

const Timespan kYear = Timespan::parse("2019-01-01 2019-12-31");

}  // namespace

TEST(AnchorBank, ValidatesInvariants) {
    std::vector<AnchorBankEntry> ok{entry("a", Rational(1, 4), Rational(1, 5), Rational(1, 3)),
                                    entry("b", 1, 1, 1), entry("c", 3, 2, 4)};
    const AnchorBank bank(ok, QueryId("b"), "worldwide", kYear, BankParams{});
    EXPECT_EQ(bank.search_start(), QueryId("b"));
    EXPECT_EQ(bank.index_of(QueryId("c")), 2u);
    EXPECT_FALSE(bank.index_of(QueryId("zz")).has_value());
    EXPECT_EQ(bank.nearest_in_log(Rational(2)), 2u);
    EXPECT_EQ(bank.nearest_in_log(Rational(1, 100)), 0u);

    auto unsorted = ok;
    std::swap(unsorted[0], unsorted[2]);
    EXPECT_THROW(AnchorBank(unsorted, QueryId("b"), "worldwide", kYear, BankParams{}), ContractError);
    EXPECT_THROW(AnchorBank(ok, QueryId("a"), "worldwide", kYear, BankParams{}), ContractError);  // R != 1
    EXPECT_THROW(AnchorBank(ok, QueryId("zz"), "worldwide", kYear, BankParams{}), ContractError);
    auto bad_eta = ok;
    bad_eta[2].eta = 7;
    EXPECT_THROW(AnchorBank(bad_eta, QueryId("b"), "worldwide", kYear, BankParams{}), ContractError);
    auto dup = ok;
    dup[2].query = QueryId("a");
    EXPECT_THROW(AnchorBank(dup, QueryId("b"), "worldwide", kYear, BankParams{}), ContractError);
    EXPECT_THROW(AnchorBank(ok, QueryId("b"), "worldwide", kYear, BankParams{6, 10, Rational(1, 10), 0}),
                 ContractError);
}

TEST(MakeEntry, RejectsUnboundedEstimates) {
    const auto zero = pair_ratio(series("x", {0}), series("y", {100}));
    EXPECT_THROW(make_entry(zero), ContractError);
    const auto e = make_entry(pair_ratio(series("x", {25}), series("y", {100})));
    EXPECT_EQ(e.R, Rational(1, 4));
    EXPECT_EQ(e.eta, e.R_hi / e.R_lo);
}
