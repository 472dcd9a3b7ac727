#pragma once

// Core domain types and the rounding-interval algebra.
//
// All ratios and bounds are exact rationals. A chain of a few dozen ratio
// multiplications stays exact; conversion to double only happens at output.

#include <boost/multiprecision/gmp.hpp>

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace trendcal {

using Rational = boost::multiprecision::mpq_rational;
using Integer = boost::multiprecision::mpz_int;

std::string to_string(const Rational& q);  // "num/den", or "num" when den == 1
Rational parse_rational(std::string_view text);  // accepts "a/b", "a", or a decimal "0.1"
double to_double(const Rational& q);

// Opaque query identifier: a plain-text query or a knowledge-base entity id.
class QueryId {
public:
    QueryId() = default;
    explicit QueryId(std::string id);

    const std::string& str() const noexcept { return id_; }
    bool empty() const noexcept { return id_.empty(); }

    auto operator<=>(const QueryId&) const = default;

    friend std::ostream& operator<<(std::ostream& out, const QueryId& q) { return out << q.id_; }

private:
    std::string id_;
};

// A non-negative exact quantity that may be +infinity.
//
// Arises when a lower bound clamps to zero: the reciprocal interval then has
// an unbounded upper end.
class Magnitude {
public:
    Magnitude() : value_(Rational(0)) {}
    Magnitude(const Rational& v);  // NOLINT(google-explicit-constructor)
    Magnitude(long v) : Magnitude(Rational(v)) {}  // NOLINT

    static Magnitude infinity() {
        Magnitude m;
        m.value_.reset();
        return m;
    }

    bool is_infinite() const noexcept { return !value_.has_value(); }
    bool is_zero() const noexcept { return value_ && *value_ == 0; }
    const Rational& value() const;  // throws ContractError when infinite
    double to_double() const;
    std::string to_string() const;  // rational text, or "inf"

    Magnitude reciprocal() const;

    friend Magnitude operator*(const Magnitude& a, const Magnitude& b);
    friend Magnitude operator/(const Magnitude& a, const Magnitude& b);
    friend bool operator==(const Magnitude& a, const Magnitude& b);
    friend bool operator<(const Magnitude& a, const Magnitude& b);
    friend bool operator<=(const Magnitude& a, const Magnitude& b) { return !(b < a); }
    friend bool operator>(const Magnitude& a, const Magnitude& b) { return b < a; }
    friend bool operator>=(const Magnitude& a, const Magnitude& b) { return !(a < b); }

private:
    std::optional<Rational> value_;
};

using Date = std::chrono::sys_days;

std::string format_date(Date d);  // ISO-8601 "YYYY-MM-DD"
Date parse_date(std::string_view text);

// Closed date interval.
struct Timespan {
    Date start;
    Date end;

    // "YYYY-MM-DD YYYY-MM-DD" (also accepts ".." as separator)
    static Timespan parse(std::string_view text);
    std::string to_string() const;

    // Weekly sample dates start, start+7, ... up to and including end.
    std::vector<Date> weekly_points() const;

    bool operator==(const Timespan&) const = default;
};

inline constexpr std::size_t kMinQueriesPerRequest = 2;
inline constexpr std::size_t kMaxQueriesPerRequest = 5;

struct RequestSpec {
    std::vector<QueryId> queries;
    std::string region = "worldwide";
    Timespan timespan;

    void validate() const;  // 2..5 distinct queries, start <= end

    // Stable textual key: region, timespan, and the query set in sorted order.
    std::string canonical_key() const;

    bool operator==(const RequestSpec&) const = default;
};

// How faithfully the values in a response reflect the scaled latent values.
//   integer: rounded to {0..100}, each value carries a +-1/2 rounding interval
//   exact:   unrounded (noiseless simulation), intervals are degenerate
enum class Precision { integer, exact };

std::string to_string(Precision p);
Precision parse_precision(std::string_view text);

// Identifies the common scaling context of every series in one response.
struct ScaleContext {
    std::string response_id;
    Precision precision = Precision::integer;

    bool operator==(const ScaleContext&) const = default;
};

struct SeriesPoint {
    Date date;
    Rational value;

    bool operator==(const SeriesPoint&) const = default;
};

// One query's observed series from a single provider response.
class InterestSeries {
public:
    InterestSeries(QueryId query, std::vector<SeriesPoint> points, ScaleContext context);

    const QueryId& query() const noexcept { return query_; }
    const std::vector<SeriesPoint>& points() const noexcept { return points_; }
    const Rational& max_value() const noexcept { return max_; }
    const ScaleContext& context() const noexcept { return context_; }
    bool all_zero() const { return max_ == 0; }

    bool operator==(const InterestSeries&) const = default;

private:
    QueryId query_;
    std::vector<SeriesPoint> points_;
    ScaleContext context_;
    Rational max_;
};

struct RoundingBounds {
    Rational m;
    Rational lo;
    Rational hi;
    bool exact_at_100 = false;
};

// Interval of scaled values that round to m: [m - 1/2, m + 1/2], lower end
// clamped at 0, and exactly [100, 100] at the scale maximum.
RoundingBounds bounds_of(int m);

// bounds_of for integer-precision observations, the degenerate interval
// [v, v] for exact ones.
RoundingBounds observation_bounds(const Rational& v, Precision precision);

// Directed ratio estimate numerator/denominator with interval [lo, hi] and
// bound ratio eta = hi / lo.
struct RatioEstimate {
    QueryId numerator;
    QueryId denominator;
    Magnitude r;
    Magnitude lo;
    Magnitude hi;
    Magnitude eta;

    RatioEstimate inverse() const;
    bool contains(const Magnitude& value) const { return lo <= value && value <= hi; }
    double weight() const;  // log(eta); +inf when unbounded

    bool operator==(const RatioEstimate&) const = default;
};

RatioEstimate identity_estimate(const QueryId& q);

// r = m_x / m_y from a single response, with rounding-interval bounds.
RatioEstimate pair_ratio(const InterestSeries& x, const InterestSeries& y);

// Transitive estimate x/z from x/y and y/z.
RatioEstimate chain(const RatioEstimate& xy, const RatioEstimate& yz);

struct AnchorBankEntry {
    QueryId query;
    Rational R;
    Rational R_lo;
    Rational R_hi;
    Rational eta;

    bool operator==(const AnchorBankEntry&) const = default;
};

// Builds an entry from a chained estimate query -> reference.
AnchorBankEntry make_entry(const RatioEstimate& to_reference);

struct BankParams {
    int k = 5;
    int tau = 10;
    Rational search_tolerance{1, 10};
    std::uint64_t seed = 0;

    bool operator==(const BankParams&) const = default;
};

inline constexpr int kBankSchemaVersion = 1;

class AnchorBank {
public:
    AnchorBank(std::vector<AnchorBankEntry> entries, QueryId reference, std::string region,
               Timespan timespan, BankParams params, std::optional<QueryId> search_start = {});

    const std::vector<AnchorBankEntry>& entries() const noexcept { return entries_; }
    const QueryId& reference() const noexcept { return reference_; }
    const std::string& region() const noexcept { return region_; }
    const Timespan& timespan() const noexcept { return timespan_; }
    const BankParams& params() const noexcept { return params_; }
    int schema_version() const noexcept { return kBankSchemaVersion; }
    std::size_t size() const noexcept { return entries_.size(); }

    // Anchor where online search starts; defaults to the bank's median entry.
    const QueryId& search_start() const noexcept { return search_start_; }
    std::size_t search_start_index() const;

    std::optional<std::size_t> index_of(const QueryId& q) const;
    const AnchorBankEntry& at(const QueryId& q) const;
    const AnchorBankEntry& reference_entry() const { return at(reference_); }

    // Index of the entry whose R is closest to `target` in log scale; ties to lower R.
    std::size_t nearest_in_log(const Rational& target) const;

    bool operator==(const AnchorBank&) const = default;

private:
    void validate() const;

    std::vector<AnchorBankEntry> entries_;
    QueryId reference_;
    std::string region_;
    Timespan timespan_;
    BankParams params_;
    QueryId search_start_;
};

}  // namespace trendcal

template <>
struct std::hash<trendcal::QueryId> {
    std::size_t operator()(const trendcal::QueryId& q) const noexcept {
        return std::hash<std::string>{}(q.str());
    }
};
