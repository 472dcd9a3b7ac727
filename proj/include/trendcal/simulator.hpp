#pragma once

// Deterministic stand-in for the trends service. Holds latent (unscaled)
// interest for every query and serves jointly scaled, rounded responses.

#include "trendcal/provider.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace trendcal {

enum class ShapeFamily { flat, seasonal, impulse, mixed };
enum class RoundingRule {
    nearest,  // half away from zero, matching bounds_of
    floor,    // deliberately mismatched with bounds_of (negative control)
    none      // noiseless: values served as exact rationals
};

std::string to_string(ShapeFamily f);
ShapeFamily parse_shape_family(std::string_view text);
std::string to_string(RoundingRule r);
RoundingRule parse_rounding_rule(std::string_view text);

inline constexpr std::size_t kShapePeriodWeeks = 52;

struct LatentQuery {
    Rational max_interest;      // M*, attained where shape == 1
    std::vector<double> shape;  // one multiplier in (0, 1] per week of the period
};

class GroundTruthUniverse {
public:
    explicit GroundTruthUniverse(std::uint64_t seed = 0) : seed_(seed) {}

    void add(QueryId id, LatentQuery latent);
    void merge(const GroundTruthUniverse& other);

    bool contains(const QueryId& q) const { return latent_.contains(q); }
    const LatentQuery& latent(const QueryId& q) const;
    std::vector<QueryId> ids() const;
    std::size_t size() const noexcept { return latent_.size(); }
    std::uint64_t seed() const noexcept { return seed_; }

    Rational value_at(const QueryId& q, Date d) const;
    // Latent maximum over the weekly points of `span`; equals M* whenever the
    // span covers a full period.
    Rational window_max(const QueryId& q, const Timespan& span) const;
    Rational true_ratio(const QueryId& a, const QueryId& b, const Timespan& span) const;

    // Every M* multiplied by `factor`.
    GroundTruthUniverse scaled(const Rational& factor) const;

private:
    std::uint64_t seed_;
    std::map<QueryId, LatentQuery> latent_;
};

struct UniverseSpec {
    std::size_t n_queries = 100;
    double log10_range = 5.0;  // M* spans this many orders of magnitude
    ShapeFamily shape_family = ShapeFamily::mixed;
    std::uint64_t seed = 0;
    std::string id_prefix = "q";
    double log10_offset = 0.0;  // log10 of the smallest possible M*
};

// Latent maxima log-uniform over [offset, offset + range] orders of magnitude.
GroundTruthUniverse make_universe(const UniverseSpec& spec);

// Week index of `d` within the shape period (weeks starting on Sunday).
std::size_t week_of_period(Date d);

class SimulatedProvider : public Provider {
public:
    explicit SimulatedProvider(std::shared_ptr<const GroundTruthUniverse> universe,
                               RoundingRule rounding = RoundingRule::nearest);

    ProviderResponse fetch(const RequestSpec& request) override;
    std::string kind() const override { return "simulator"; }

    const GroundTruthUniverse& universe() const noexcept { return *universe_; }
    RoundingRule rounding() const noexcept { return rounding_; }
    std::size_t request_count() const noexcept { return requests_.load(); }

private:
    std::shared_ptr<const GroundTruthUniverse> universe_;
    RoundingRule rounding_;
    std::atomic<std::size_t> requests_{0};
};

// Rounds a non-negative scaled value under `rule`.
Rational apply_rounding(const Rational& scaled, RoundingRule rule);

}  // namespace trendcal
