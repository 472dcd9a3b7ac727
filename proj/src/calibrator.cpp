#include "trendcal/calibrator.hpp"

#include "trendcal/errors.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <thread>

namespace trendcal {

std::string to_string(CalibrationStatus s) {
    switch (s) {
        case CalibrationStatus::ok: return "ok";
        case CalibrationStatus::clamped_low: return "clamped_low";
        case CalibrationStatus::clamped_high: return "clamped_high";
    }
    return "ok";
}

StepOutcome search_step(const InterestSeries& q, const InterestSeries& anchor, const Rational& tolerance) {
    if (tolerance <= 0 || tolerance >= 1) throw ContractError("search tolerance must lie in (0, 1)");
    if (q.max_value() == 0) {
        if (anchor.max_value() == 0) return {StepDecision::go_left, std::nullopt};
        return {StepDecision::go_left, pair_ratio(q, anchor)};
    }
    if (anchor.max_value() == 0) return {StepDecision::go_right, pair_ratio(anchor, q).inverse()};
    RatioEstimate e = pair_ratio(q, anchor);
    const Rational& r = e.r.value();
    if (r <= tolerance) return {StepDecision::go_left, std::move(e)};
    if (r >= Rational(1) / tolerance) return {StepDecision::go_right, std::move(e)};
    return {StepDecision::accept, std::move(e)};
}

namespace {

struct Probe {
    std::size_t anchor;
    ProviderResponse response;
    StepOutcome outcome;
};

// value * factor with 0 * inf read as 0: a zero observation stays zero.
Magnitude scale(const Rational& value, const Magnitude& factor) {
    if (value == 0) return Magnitude(Rational(0));
    return Magnitude(value) * factor;
}

CalibrationResult finish(const QueryId& q, const AnchorBank& bank, const Probe& probe, CalibrationStatus status,
                         std::size_t requests, std::vector<QueryId> probes, const AnchorBankEntry* self = nullptr) {
    const AnchorBankEntry& anchor = bank.entries()[probe.anchor];
    const InterestSeries& qs = probe.response.series_for(q);
    const InterestSeries& xs = probe.response.series_for(anchor.query);
    const Precision precision = probe.response.precision;

    CalibrationResult out;
    out.query = q;
    out.matched_anchor = anchor.query;
    out.requests_used = requests;
    out.status = status;
    out.probes = std::move(probes);

    if (probe.outcome.estimate) {
        const RatioEstimate& e = *probe.outcome.estimate;
        out.R = e.r * Magnitude(anchor.R);
        out.R_lo = e.lo * Magnitude(anchor.R_lo);
        out.R_hi = e.hi * Magnitude(anchor.R_hi);
    } else {
        // both maxima zero: nothing is known beyond non-negativity
        out.R = Magnitude(0);
        out.R_lo = Magnitude(0);
        out.R_hi = Magnitude::infinity();
    }

    // Point t on the reference scale is v_t * R_x / m_x; the envelope uses
    // each point's own interval and the anchor's rounding and calibration bounds.
    // An anchor query is scaled by its own bank entry instead.
    const bool own = self && qs.max_value() != 0;
    const AnchorBankEntry& scale_entry = own ? *self : anchor;
    const InterestSeries& scale_series = own ? qs : xs;
    if (own) {
        out.R = Magnitude(self->R);
        out.R_lo = Magnitude(self->R_lo);
        out.R_hi = Magnitude(self->R_hi);
    }
    const RoundingBounds xb = observation_bounds(scale_series.max_value(), precision);
    const Magnitude per_unit = Magnitude(scale_entry.R) / Magnitude(scale_series.max_value());
    const Magnitude per_unit_lo = Magnitude(scale_entry.R_lo) / Magnitude(xb.hi);
    const Magnitude per_unit_hi = Magnitude(scale_entry.R_hi) / Magnitude(xb.lo);
    out.series.reserve(qs.points().size());
    for (const auto& p : qs.points()) {
        const RoundingBounds vb = observation_bounds(p.value, precision);
        if (!probe.outcome.estimate) {
            out.series.push_back({p.date, 0.0, 0.0, std::numeric_limits<double>::infinity()});
            continue;
        }
        out.series.push_back({p.date, scale(p.value, per_unit).to_double(), scale(vb.lo, per_unit_lo).to_double(),
                              scale(vb.hi, per_unit_hi).to_double()});
    }
    return out;
}

}  // namespace

CalibrationResult calibrate(const QueryId& q, const AnchorBank& bank, Provider& provider,
                            const Rational& search_tolerance) {
    if (search_tolerance <= 0 || search_tolerance >= 1) throw ContractError("search tolerance must lie in (0, 1)");
    const std::size_t n = bank.size();
    std::size_t lo = 0;
    std::size_t hi = n - 1;
    std::size_t probe_at = bank.search_start_index();
    std::vector<Probe> probes;
    std::vector<QueryId> probed;

    if (const auto self = bank.index_of(q)) {
        // Already calibrated; one request against a neighbor supplies the series.
        if (n == 1) throw ContractError("cannot calibrate the only anchor of a bank against itself");
        const std::size_t neighbor = *self + 1 < n ? *self + 1 : *self - 1;
        const QueryId& anchor = bank.entries()[neighbor].query;
        ProviderResponse response = provider.fetch(RequestSpec{{q, anchor}, bank.region(), bank.timespan()});
        StepOutcome outcome = search_step(response.series_for(q), response.series_for(anchor), search_tolerance);
        probes.push_back(Probe{neighbor, std::move(response), std::move(outcome)});
        return finish(q, bank, probes.back(), CalibrationStatus::ok, 1, {anchor}, &bank.entries()[*self]);
    }

    for (;;) {
        const std::size_t compare_at = probe_at;
        const QueryId& anchor = bank.entries()[compare_at].query;

        ProviderResponse response =
            provider.fetch(RequestSpec{{q, anchor}, bank.region(), bank.timespan()});
        StepOutcome outcome = search_step(response.series_for(q), response.series_for(anchor), search_tolerance);
        probed.push_back(anchor);
        const StepDecision decision = outcome.decision;
        probes.push_back(Probe{compare_at, std::move(response), std::move(outcome)});

        if (decision == StepDecision::accept) {
            return finish(q, bank, probes.back(), CalibrationStatus::ok, probes.size(), std::move(probed));
        }
        if (decision == StepDecision::go_left) {
            if (compare_at == 0) {
                return finish(q, bank, probes.back(), CalibrationStatus::clamped_low, probes.size(), std::move(probed));
            }
            if (probe_at == lo) break;
            hi = probe_at - 1;
        } else {
            if (compare_at == n - 1) {
                return finish(q, bank, probes.back(), CalibrationStatus::clamped_high, probes.size(), std::move(probed));
            }
            if (probe_at == hi) break;
            lo = probe_at + 1;
        }
        probe_at = lo + (hi - lo) / 2;
    }

    // Exhausted between two adjacent anchors whose gap exceeds the tolerance
    // band: keep the tightest finite comparison.
    const Probe* best = nullptr;
    for (const auto& p : probes) {
        if (!p.outcome.estimate) continue;
        const auto& e = *p.outcome.estimate;
        if (e.r.is_zero() || e.r.is_infinite()) continue;
        if (!best || e.eta <= best->outcome.estimate->eta) best = &p;
    }
    if (!best) {
        const Probe& last = probes.back();
        const auto status = last.outcome.decision == StepDecision::go_left ? CalibrationStatus::clamped_low
                                                                           : CalibrationStatus::clamped_high;
        return finish(q, bank, last, status, probes.size(), std::move(probed));
    }
    return finish(q, bank, *best, CalibrationStatus::ok, probes.size(), std::move(probed));
}

CalibrationResult rebase(const CalibrationResult& result, const AnchorBankEntry& new_reference) {
    CalibrationResult out = result;
    const Magnitude scale_point = Magnitude(new_reference.R).reciprocal();
    out.R = result.R * scale_point;
    out.R_lo = result.R_lo * Magnitude(new_reference.R_hi).reciprocal();
    out.R_hi = result.R_hi * Magnitude(new_reference.R_lo).reciprocal();
    const double f = to_double(new_reference.R);
    const double f_lo = to_double(new_reference.R_hi);
    const double f_hi = to_double(new_reference.R_lo);
    for (auto& p : out.series) {
        p.value /= f;
        p.lo /= f_lo;
        p.hi /= f_hi;
    }
    return out;
}

BatchResult calibrate_batch(std::span<const QueryId> queries, const AnchorBank& bank, Provider& provider,
                            const BatchOptions& options) {
    const Rational tolerance = options.search_tolerance.value_or(bank.params().search_tolerance);
    std::vector<std::optional<CalibrationResult>> slots(queries.size());
    std::vector<std::string> failures(queries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < queries.size(); i = next++) {
            try {
                slots[i] = calibrate(queries[i], bank, provider, tolerance);
            } catch (const std::exception& e) {
                failures[i] = e.what();
                if (failures[i].empty()) failures[i] = "calibration failed";
            }
        }
    };
    const std::size_t n_workers = std::clamp<std::size_t>(options.concurrency, 1, std::max<std::size_t>(queries.size(), 1));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    }

    BatchResult out;
    std::size_t total = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (!slots[i]) {
            out.errors.push_back({queries[i], failures[i]});
            continue;
        }
        const std::size_t used = slots[i]->requests_used;
        ++out.histogram[used];
        total += used;
        out.max_requests = std::max(out.max_requests, used);
        out.results.push_back(std::move(*slots[i]));
    }
    if (!out.results.empty()) out.mean_requests = static_cast<double>(total) / static_cast<double>(out.results.size());
    return out;
}

}  // namespace trendcal
