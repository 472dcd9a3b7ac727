#include "trendcal/model.hpp"

#include "trendcal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace trendcal {

std::string to_string(const Rational& q) {
    const Integer num = boost::multiprecision::numerator(q);
    const Integer den = boost::multiprecision::denominator(q);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

namespace {

Integer parse_integer(std::string_view text) {
    if (text.empty()) throw ContractError("empty integer literal");
    std::size_t i = (text[0] == '-' || text[0] == '+') ? 1 : 0;
    if (i == text.size()) throw ContractError("malformed integer literal '" + std::string(text) + "'");
    for (std::size_t j = i; j < text.size(); ++j) {
        if (text[j] < '0' || text[j] > '9') {
            throw ContractError("malformed integer literal '" + std::string(text) + "'");
        }
    }
    return Integer(std::string(text[0] == '+' ? text.substr(1) : text));
}

Integer pow10(int e) {
    Integer p = 1;
    for (int i = 0; i < e; ++i) p *= 10;
    return p;
}

}  // namespace

Rational parse_rational(std::string_view text) {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        Integer num = parse_integer(text.substr(0, slash));
        Integer den = parse_integer(text.substr(slash + 1));
        if (den == 0) throw ContractError("zero denominator in '" + std::string(text) + "'");
        return Rational(num, den);
    }
    // decimal with optional fraction and exponent, parsed exactly
    int exponent = 0;
    std::string_view mantissa = text;
    if (auto e = text.find_first_of("eE"); e != std::string_view::npos) {
        mantissa = text.substr(0, e);
        auto exp_text = text.substr(e + 1);
        if (!exp_text.empty() && exp_text[0] == '+') exp_text.remove_prefix(1);
        auto [ptr, ec] = std::from_chars(exp_text.data(), exp_text.data() + exp_text.size(), exponent);
        if (ec != std::errc{} || ptr != exp_text.data() + exp_text.size()) {
            throw ContractError("malformed exponent in '" + std::string(text) + "'");
        }
    }
    std::string digits;
    int frac_digits = 0;
    if (auto dot = mantissa.find('.'); dot != std::string_view::npos) {
        digits = std::string(mantissa.substr(0, dot)) + std::string(mantissa.substr(dot + 1));
        frac_digits = static_cast<int>(mantissa.size() - dot - 1);
    } else {
        digits = std::string(mantissa);
    }
    if (digits.empty() || digits == "-" || digits == "+") {
        throw ContractError("malformed number '" + std::string(text) + "'");
    }
    Rational value(parse_integer(digits));
    const int scale = exponent - frac_digits;
    if (scale > 0) value *= Rational(pow10(scale));
    if (scale < 0) value /= Rational(pow10(-scale));
    return value;
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

QueryId::QueryId(std::string id) : id_(std::move(id)) {
    if (id_.empty()) throw ContractError("query id must be non-empty");
}

// ---------------------------------------------------------------------------
// Magnitude

Magnitude::Magnitude(const Rational& v) : value_(v) {
    if (v < 0) throw ContractError("magnitude must be non-negative, got " + trendcal::to_string(v));
}

const Rational& Magnitude::value() const {
    if (!value_) throw ContractError("magnitude is unbounded");
    return *value_;
}

double Magnitude::to_double() const {
    if (!value_) return std::numeric_limits<double>::infinity();
    return trendcal::to_double(*value_);
}

std::string Magnitude::to_string() const {
    if (!value_) return "inf";
    return trendcal::to_string(*value_);
}

Magnitude Magnitude::reciprocal() const {
    if (!value_) return Magnitude(Rational(0));
    if (*value_ == 0) return infinity();
    return Magnitude(Rational(1) / *value_);
}

Magnitude operator*(const Magnitude& a, const Magnitude& b) {
    if (a.is_infinite() || b.is_infinite()) {
        if (a.is_zero() || b.is_zero()) throw ContractError("0 * inf is undefined");
        return Magnitude::infinity();
    }
    return Magnitude(*a.value_ * *b.value_);
}

Magnitude operator/(const Magnitude& a, const Magnitude& b) {
    if (a.is_infinite() && b.is_infinite()) throw ContractError("inf / inf is undefined");
    if (b.is_zero()) {
        if (a.is_zero()) throw ContractError("0 / 0 is undefined");
        return Magnitude::infinity();
    }
    if (a.is_infinite()) return Magnitude::infinity();
    if (b.is_infinite()) return Magnitude(Rational(0));
    return Magnitude(*a.value_ / *b.value_);
}

bool operator==(const Magnitude& a, const Magnitude& b) {
    if (a.is_infinite() || b.is_infinite()) return a.is_infinite() && b.is_infinite();
    return *a.value_ == *b.value_;
}

bool operator<(const Magnitude& a, const Magnitude& b) {
    if (a.is_infinite()) return false;
    if (b.is_infinite()) return true;
    return *a.value_ < *b.value_;
}

// ---------------------------------------------------------------------------
// Dates

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

Date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    auto fail = [&] { return ContractError("malformed date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
    auto parse = [&](std::string_view part, auto& out) {
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        if (ec != std::errc{} || ptr != part.data() + part.size()) throw fail();
    };
    parse(text.substr(0, 4), y);
    parse(text.substr(5, 2), m);
    parse(text.substr(8, 2), d);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw fail();
    return Date{ymd};
}

Timespan Timespan::parse(std::string_view text) {
    std::string_view a, b;
    if (auto dots = text.find(".."); dots != std::string_view::npos) {
        a = text.substr(0, dots);
        b = text.substr(dots + 2);
    } else if (auto sp = text.find(' '); sp != std::string_view::npos) {
        a = text.substr(0, sp);
        b = text.substr(sp + 1);
    } else {
        throw ContractError("timespan must be 'YYYY-MM-DD YYYY-MM-DD', got '" + std::string(text) + "'");
    }
    Timespan t{parse_date(a), parse_date(b)};
    if (t.end < t.start) throw ContractError("timespan ends before it starts: " + std::string(text));
    return t;
}

std::string Timespan::to_string() const { return format_date(start) + " " + format_date(end); }

std::vector<Date> Timespan::weekly_points() const {
    std::vector<Date> out;
    for (Date d = start; d <= end; d += std::chrono::days{7}) out.push_back(d);
    return out;
}

// ---------------------------------------------------------------------------
// Requests

void RequestSpec::validate() const {
    if (queries.size() < kMinQueriesPerRequest || queries.size() > kMaxQueriesPerRequest) {
        throw ContractError("a request holds 2..5 queries, got " + std::to_string(queries.size()));
    }
    std::set<QueryId> seen;
    for (const auto& q : queries) {
        if (q.empty()) throw ContractError("empty query id in request");
        if (!seen.insert(q).second) throw ContractError("duplicate query '" + q.str() + "' in request");
    }
    if (timespan.end < timespan.start) throw ContractError("timespan ends before it starts");
    if (region.empty()) throw ContractError("region must be non-empty");
}

std::string RequestSpec::canonical_key() const {
    std::vector<std::string> ids;
    ids.reserve(queries.size());
    for (const auto& q : queries) ids.push_back(q.str());
    std::sort(ids.begin(), ids.end());
    std::string key = "region=" + std::to_string(region.size()) + ":" + region;
    key += ";time=" + timespan.to_string() + ";q=";
    for (const auto& id : ids) key += std::to_string(id.size()) + ":" + id + ",";
    return key;
}

std::string to_string(Precision p) { return p == Precision::integer ? "integer" : "exact"; }

Precision parse_precision(std::string_view text) {
    if (text == "integer") return Precision::integer;
    if (text == "exact") return Precision::exact;
    throw ContractError("unknown precision '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Series and bounds

InterestSeries::InterestSeries(QueryId query, std::vector<SeriesPoint> points, ScaleContext context)
    : query_(std::move(query)), points_(std::move(points)), context_(std::move(context)), max_(0) {
    if (query_.empty()) throw ContractError("series query id must be non-empty");
    for (const auto& p : points_) {
        if (p.value < 0 || p.value > 100) {
            throw ContractError("series value out of [0, 100] for '" + query_.str() + "'");
        }
        if (context_.precision == Precision::integer &&
            boost::multiprecision::denominator(p.value) != 1) {
            throw ContractError("integer-precision series holds a fractional value for '" +
                                query_.str() + "'");
        }
        if (p.value > max_) max_ = p.value;
    }
}

RoundingBounds bounds_of(int m) {
    if (m < 0 || m > 100) throw ContractError("observed maximum out of [0, 100]: " + std::to_string(m));
    if (m == 100) return {Rational(100), Rational(100), Rational(100), true};
    const Rational half(1, 2);
    const Rational mm(m);
    Rational lo = mm - half;
    if (lo < 0) lo = 0;
    return {mm, lo, mm + half, false};
}

RoundingBounds observation_bounds(const Rational& v, Precision precision) {
    if (precision == Precision::exact) {
        if (v < 0 || v > 100) throw ContractError("observed value out of [0, 100]");
        return {v, v, v, v == 100};
    }
    if (boost::multiprecision::denominator(v) != 1) {
        throw ContractError("integer-precision observation is fractional: " + to_string(v));
    }
    const Integer n = boost::multiprecision::numerator(v);
    if (n < 0 || n > 100) throw ContractError("observed maximum out of [0, 100]: " + n.str());
    return bounds_of(n.convert_to<int>());
}

// ---------------------------------------------------------------------------
// Ratio estimates

namespace {

Magnitude bound_ratio(const Magnitude& lo, const Magnitude& hi) {
    if (lo == hi) return Magnitude(1);  // degenerate interval, including [0, 0]
    return hi / lo;
}

}  // namespace

RatioEstimate RatioEstimate::inverse() const {
    return {denominator, numerator, r.reciprocal(), hi.reciprocal(), lo.reciprocal(), eta};
}

double RatioEstimate::weight() const {
    if (eta.is_infinite()) return std::numeric_limits<double>::infinity();
    return std::log(eta.to_double());
}

RatioEstimate identity_estimate(const QueryId& q) {
    return {q, q, Magnitude(1), Magnitude(1), Magnitude(1), Magnitude(1)};
}

RatioEstimate pair_ratio(const InterestSeries& x, const InterestSeries& y) {
    if (x.context().response_id != y.context().response_id ||
        x.context().precision != y.context().precision) {
        throw MixedScaleError("series '" + x.query().str() + "' and '" + y.query().str() +
                              "' come from different responses");
    }
    if (y.max_value() == 0) {
        throw DivisionUndefinedError("maximum of '" + y.query().str() + "' is zero");
    }
    const auto bx = observation_bounds(x.max_value(), x.context().precision);
    const auto by = observation_bounds(y.max_value(), y.context().precision);
    Magnitude lo(bx.lo / by.hi);
    Magnitude hi(bx.hi / by.lo);
    Magnitude eta = bound_ratio(lo, hi);
    return {x.query(), y.query(), Magnitude(x.max_value() / y.max_value()), std::move(lo),
            std::move(hi), std::move(eta)};
}

RatioEstimate chain(const RatioEstimate& xy, const RatioEstimate& yz) {
    if (xy.denominator != yz.numerator) {
        throw ContractError("cannot chain " + xy.numerator.str() + "/" + xy.denominator.str() +
                            " with " + yz.numerator.str() + "/" + yz.denominator.str());
    }
    return {xy.numerator, yz.denominator, xy.r * yz.r, xy.lo * yz.lo, xy.hi * yz.hi,
            xy.eta * yz.eta};
}

// ---------------------------------------------------------------------------
// Anchor bank

AnchorBankEntry make_entry(const RatioEstimate& to_reference) {
    const auto& e = to_reference;
    if (e.r.is_infinite() || e.r.is_zero() || e.lo.is_zero() || e.hi.is_infinite()) {
        throw ContractError("anchor '" + e.numerator.str() + "' has an unbounded calibration");
    }
    return {e.numerator, e.r.value(), e.lo.value(), e.hi.value(), e.hi.value() / e.lo.value()};
}

AnchorBank::AnchorBank(std::vector<AnchorBankEntry> entries, QueryId reference, std::string region,
                       Timespan timespan, BankParams params, std::optional<QueryId> search_start)
    : entries_(std::move(entries)),
      reference_(std::move(reference)),
      region_(std::move(region)),
      timespan_(timespan),
      params_(std::move(params)) {
    if (entries_.empty()) throw ContractError("anchor bank must hold at least one entry");
    search_start_ = search_start ? *search_start : entries_[(entries_.size() - 1) / 2].query;
    validate();
}

void AnchorBank::validate() const {
    std::set<QueryId> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!seen.insert(e.query).second) throw ContractError("duplicate anchor '" + e.query.str() + "'");
        if (e.R_lo <= 0 || e.R_lo > e.R || e.R > e.R_hi) {
            throw ContractError("anchor '" + e.query.str() + "' violates 0 < R_lo <= R <= R_hi");
        }
        if (e.eta != e.R_hi / e.R_lo) {
            throw ContractError("anchor '" + e.query.str() + "' has eta != R_hi / R_lo");
        }
        if (i > 0 && !(entries_[i - 1].R < e.R)) {
            throw ContractError("anchor bank is not strictly increasing in R at '" + e.query.str() + "'");
        }
    }
    const auto ref = index_of(reference_);
    if (!ref) throw ContractError("reference '" + reference_.str() + "' is not in the bank");
    const auto& r = entries_[*ref];
    if (r.R != 1 || r.R_lo != 1 || r.R_hi != 1) {
        throw ContractError("reference entry must be exactly 1");
    }
    if (!index_of(search_start_)) {
        throw ContractError("search start '" + search_start_.str() + "' is not in the bank");
    }
    if (params_.k < 2 || params_.k > static_cast<int>(kMaxQueriesPerRequest)) {
        throw ContractError("bank parameter k must be in 2..5");
    }
    if (params_.tau < 0 || params_.tau > 100) throw ContractError("bank parameter tau must be in 0..100");
    if (params_.search_tolerance <= 0 || params_.search_tolerance >= 1) {
        throw ContractError("search tolerance must be in (0, 1)");
    }
    if (timespan_.end < timespan_.start) throw ContractError("bank timespan ends before it starts");
}

std::size_t AnchorBank::search_start_index() const { return *index_of(search_start_); }

std::optional<std::size_t> AnchorBank::index_of(const QueryId& q) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].query == q) return i;
    }
    return std::nullopt;
}

const AnchorBankEntry& AnchorBank::at(const QueryId& q) const {
    const auto i = index_of(q);
    if (!i) throw NotFoundError("anchor '" + q.str() + "' is not in the bank");
    return entries_[*i];
}

std::size_t AnchorBank::nearest_in_log(const Rational& target) const {
    if (target <= 0) throw ContractError("log-nearest target must be positive");
    auto distance = [&](const Rational& R) { return R >= target ? R / target : target / R; };
    std::size_t best = 0;
    Rational best_d = distance(entries_[0].R);
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        Rational d = distance(entries_[i].R);
        if (d < best_d) {
            best = i;
            best_d = std::move(d);
        }
    }
    return best;
}

}  // namespace trendcal
