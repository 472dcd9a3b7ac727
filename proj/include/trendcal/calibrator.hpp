#pragma once

// Online phase: binary search over the anchor bank for an anchor of
// comparable popularity, then rescale the query's series onto the reference
// scale with an uncertainty envelope.

#include "trendcal/model.hpp"
#include "trendcal/provider.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trendcal {

enum class CalibrationStatus { ok, clamped_low, clamped_high };

std::string to_string(CalibrationStatus s);

struct CalibratedPoint {
    Date date;
    double value;
    double lo;
    double hi;
};

struct CalibrationResult {
    QueryId query;
    std::vector<CalibratedPoint> series;
    Magnitude R;  // peak of the calibrated series, as a fraction of the reference peak
    Magnitude R_lo;
    Magnitude R_hi;
    QueryId matched_anchor;
    std::size_t requests_used = 0;
    CalibrationStatus status = CalibrationStatus::ok;
    std::vector<QueryId> probes;  // anchors compared against, in order
};

enum class StepDecision { go_left, go_right, accept };

struct StepOutcome {
    StepDecision decision;
    // q / anchor; absent only when both maxima are zero.
    std::optional<RatioEstimate> estimate;
};

// Decision from one joint response of q and an anchor: go_left when
// r <= tolerance, go_right when r >= 1/tolerance, accept strictly between.
// A zero q maximum goes left; a zero anchor maximum (q vastly more popular)
// goes right.
StepOutcome search_step(const InterestSeries& q, const InterestSeries& anchor, const Rational& tolerance);

// Binary search starting at the bank's search start. Queries below the
// lowest or above the highest anchor come back clamped against that anchor.
CalibrationResult calibrate(const QueryId& q, const AnchorBank& bank, Provider& provider,
                            const Rational& search_tolerance);

// Same result expressed against another anchor: every value divided by its
// R, bounds divided by the opposite bound.
CalibrationResult rebase(const CalibrationResult& result, const AnchorBankEntry& new_reference);

struct BatchError {
    QueryId query;
    std::string message;
};

struct BatchResult {
    std::vector<CalibrationResult> results;  // input order, failures omitted
    std::vector<BatchError> errors;
    std::map<std::size_t, std::size_t> histogram;  // requests_used -> count
    double mean_requests = 0.0;
    std::size_t max_requests = 0;
};

struct BatchOptions {
    std::optional<Rational> search_tolerance;  // defaults to the bank's
    std::size_t concurrency = 1;
};

BatchResult calibrate_batch(std::span<const QueryId> queries, const AnchorBank& bank, Provider& provider,
                            const BatchOptions& options = {});

}  // namespace trendcal
