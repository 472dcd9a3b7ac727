#include "trendcal/simulator.hpp"

#include "trendcal/errors.hpp"
#include "trendcal/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace trendcal {

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw ContractError("cannot draw an index from an empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string to_string(ShapeFamily f) {
    switch (f) {
        case ShapeFamily::flat: return "flat";
        case ShapeFamily::seasonal: return "seasonal";
        case ShapeFamily::impulse: return "impulse";
        case ShapeFamily::mixed: return "mixed";
    }
    return "mixed";
}

ShapeFamily parse_shape_family(std::string_view text) {
    if (text == "flat") return ShapeFamily::flat;
    if (text == "seasonal") return ShapeFamily::seasonal;
    if (text == "impulse") return ShapeFamily::impulse;
    if (text == "mixed") return ShapeFamily::mixed;
    throw ContractError("unknown shape family '" + std::string(text) + "'");
}

std::string to_string(RoundingRule r) {
    switch (r) {
        case RoundingRule::nearest: return "nearest";
        case RoundingRule::floor: return "floor";
        case RoundingRule::none: return "none";
    }
    return "nearest";
}

RoundingRule parse_rounding_rule(std::string_view text) {
    if (text == "nearest") return RoundingRule::nearest;
    if (text == "floor") return RoundingRule::floor;
    if (text == "none") return RoundingRule::none;
    throw ContractError("unknown rounding rule '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Universe

void GroundTruthUniverse::add(QueryId id, LatentQuery latent) {
    if (latent.max_interest <= 0) throw ContractError("latent maximum must be positive for '" + id.str() + "'");
    if (latent.shape.size() != kShapePeriodWeeks) {
        throw ContractError("shape of '" + id.str() + "' must span one period");
    }
    bool attains_one = false;
    for (double s : latent.shape) {
        if (!(s > 0.0 && s <= 1.0)) throw ContractError("shape multipliers must lie in (0, 1]");
        attains_one = attains_one || s == 1.0;
    }
    if (!attains_one) throw ContractError("shape of '" + id.str() + "' never attains 1");
    if (!latent_.emplace(std::move(id), std::move(latent)).second) {
        throw ContractError("duplicate latent query");
    }
}

void GroundTruthUniverse::merge(const GroundTruthUniverse& other) {
    for (const auto& [id, latent] : other.latent_) add(id, latent);
}

const LatentQuery& GroundTruthUniverse::latent(const QueryId& q) const {
    auto it = latent_.find(q);
    if (it == latent_.end()) throw NotFoundError("unknown query '" + q.str() + "'");
    return it->second;
}

std::vector<QueryId> GroundTruthUniverse::ids() const {
    std::vector<QueryId> out;
    out.reserve(latent_.size());
    for (const auto& [id, _] : latent_) out.push_back(id);
    return out;
}

std::size_t week_of_period(Date d) {
    // 1970-01-04 was a Sunday
    const long long days = d.time_since_epoch().count() - 3;
    long long week = days >= 0 ? days / 7 : -((-days + 6) / 7);
    long long idx = week % static_cast<long long>(kShapePeriodWeeks);
    if (idx < 0) idx += kShapePeriodWeeks;
    return static_cast<std::size_t>(idx);
}

Rational GroundTruthUniverse::value_at(const QueryId& q, Date d) const {
    const auto& l = latent(q);
    return l.max_interest * Rational(l.shape[week_of_period(d)]);
}

Rational GroundTruthUniverse::window_max(const QueryId& q, const Timespan& span) const {
    const auto& l = latent(q);
    double best = 0.0;
    for (Date d : span.weekly_points()) best = std::max(best, l.shape[week_of_period(d)]);
    return l.max_interest * Rational(best);
}

Rational GroundTruthUniverse::true_ratio(const QueryId& a, const QueryId& b, const Timespan& span) const {
    return window_max(a, span) / window_max(b, span);
}

GroundTruthUniverse GroundTruthUniverse::scaled(const Rational& factor) const {
    if (factor <= 0) throw ContractError("scale factor must be positive");
    GroundTruthUniverse out(seed_);
    for (const auto& [id, l] : latent_) out.latent_.emplace(id, LatentQuery{l.max_interest * factor, l.shape});
    return out;
}

namespace {

std::vector<double> make_shape(ShapeFamily family, Rng& rng) {
    std::vector<double> shape(kShapePeriodWeeks, 1.0);
    switch (family) {
        case ShapeFamily::flat:
        case ShapeFamily::mixed:
            break;
        case ShapeFamily::seasonal: {
            const double phase = 2.0 * std::numbers::pi * rng.uniform();
            const double amplitude = 0.2 + 0.6 * rng.uniform();
            for (std::size_t t = 0; t < kShapePeriodWeeks; ++t) {
                const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / kShapePeriodWeeks + phase;
                shape[t] = 1.0 - amplitude * (1.0 - std::cos(angle)) / 2.0;
            }
            const double peak = *std::max_element(shape.begin(), shape.end());
            for (double& s : shape) s /= peak;  // the peak becomes exactly 1.0
            break;
        }
        case ShapeFamily::impulse: {
            const double baseline = 0.05 + 0.25 * rng.uniform();
            std::fill(shape.begin(), shape.end(), baseline);
            shape[rng.index(kShapePeriodWeeks)] = 1.0;
            break;
        }
    }
    return shape;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

GroundTruthUniverse make_universe(const UniverseSpec& spec) {
    if (spec.n_queries == 0) throw ContractError("universe needs at least one query");
    if (!(spec.log10_range >= 0.0)) throw ContractError("log10_range must be >= 0");
    if (spec.id_prefix.empty()) throw ContractError("id prefix must be non-empty");
    GroundTruthUniverse universe(spec.seed);
    Rng rng(mix_seed(spec.seed, 0x5eed));
    const int width = std::max(4, static_cast<int>(std::to_string(spec.n_queries - 1).size()));
    for (std::size_t i = 0; i < spec.n_queries; ++i) {
        const double log10_max = spec.log10_offset + spec.log10_range * rng.uniform();
        ShapeFamily family = spec.shape_family;
        if (family == ShapeFamily::mixed) {
            constexpr ShapeFamily kFamilies[] = {ShapeFamily::flat, ShapeFamily::seasonal, ShapeFamily::impulse};
            family = kFamilies[rng.index(3)];
        }
        char id[64];
        std::snprintf(id, sizeof id, "%0*zu", width, i);
        universe.add(QueryId(spec.id_prefix + id),
                     LatentQuery{Rational(std::pow(10.0, log10_max)), make_shape(family, rng)});
    }
    return universe;
}

// ---------------------------------------------------------------------------
// Provider

Rational apply_rounding(const Rational& scaled, RoundingRule rule) {
    if (scaled < 0) throw ContractError("scaled value must be non-negative");
    switch (rule) {
        case RoundingRule::none:
            return scaled;
        case RoundingRule::floor:
            return Rational(Integer(boost::multiprecision::numerator(scaled) /
                                    boost::multiprecision::denominator(scaled)));
        case RoundingRule::nearest: {
            const Rational shifted = scaled + Rational(1, 2);
            return Rational(Integer(boost::multiprecision::numerator(shifted) /
                                    boost::multiprecision::denominator(shifted)));
        }
    }
    return scaled;
}

SimulatedProvider::SimulatedProvider(std::shared_ptr<const GroundTruthUniverse> universe, RoundingRule rounding)
    : universe_(std::move(universe)), rounding_(rounding) {
    if (!universe_) throw ContractError("simulated provider needs a universe");
}

ProviderResponse SimulatedProvider::fetch(const RequestSpec& request) {
    request.validate();
    ++requests_;
    const auto dates = request.timespan.weekly_points();
    std::vector<std::vector<Rational>> latent;
    latent.reserve(request.queries.size());
    Rational joint_max = 0;
    for (const auto& q : request.queries) {
        std::vector<Rational> values;
        values.reserve(dates.size());
        for (Date d : dates) {
            values.push_back(universe_->value_at(q, d));
            if (values.back() > joint_max) joint_max = values.back();
        }
        latent.push_back(std::move(values));
    }

    ProviderResponse response;
    response.request = request;
    response.precision = rounding_ == RoundingRule::none ? Precision::exact : Precision::integer;
    char id[40];
    std::snprintf(id, sizeof id, "sim-%016llx",
                  static_cast<unsigned long long>(fnv1a(request.canonical_key() + "|" +
                                                        std::to_string(universe_->seed()) + "|" +
                                                        to_string(rounding_))));
    response.response_id = id;
    const ScaleContext context{response.response_id, response.precision};
    for (std::size_t i = 0; i < request.queries.size(); ++i) {
        std::vector<SeriesPoint> points;
        points.reserve(dates.size());
        for (std::size_t t = 0; t < dates.size(); ++t) {
            const Rational scaled = Rational(100) * latent[i][t] / joint_max;
            points.push_back({dates[t], apply_rounding(scaled, rounding_)});
        }
        response.series.emplace_back(request.queries[i], std::move(points), context);
    }
    return response;
}

}  // namespace trendcal
