#pragma once

// Near-optimal anchor banks.
//
// Chaining hops of constant ratio c with one rounded side each yields a bound
// ratio of ((c + eps) / (c - eps))^(log_c r*) across a total ratio r*, which is
// smallest near c = 1/e. The optimizer picks an anchor subset whose
// neighbors are about c apart and re-measures each hop with a two-query
// request.

#include "trendcal/bank_builder.hpp"
#include "trendcal/model.hpp"
#include "trendcal/provider.hpp"

#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trendcal {

inline constexpr double kInverseE = 1.0 / std::numbers::e;
inline constexpr double kRoundingHalfWidth = 1.0 / 200.0;

struct OptimalityParams {
    double target_ratio = kInverseE;               // c
    double rounding_half_width = kRoundingHalfWidth;  // eps, after scaling to [0, 1]

    void validate() const;  // 0 < eps < c < 1
};

// ((c + eps) / (c - eps))^(log_c r_star)
double eta_of_c(double c, double r_star, double eps);

// Bound ratio at c = 1/e: ((1/e + eps) / (1/e - eps))^(-ln r_star). Accepts r_star in (0, 1].
double theoretical_optimum(double r_star, double eps = kRoundingHalfWidth);

// Per-hop factor (c + eps) / (c - eps).
double step_factor(double c, double eps = kRoundingHalfWidth);

struct EtaSample {
    double c;
    double r_star;
    double eta;
};

// eta_of_c on an even grid of `points` values over [c_lo, c_hi].
std::vector<EtaSample> scan_eta(double r_star, double eps, double c_lo, double c_hi, std::size_t points);

// Grid point with the smallest eta (first on ties).
EtaSample argmin_eta(const std::vector<EtaSample>& grid);

// Shortest path from the least to the most popular anchor over the complete
// graph with hop weight |ln(c / r_xy)|, r_xy = R_x / R_y. Throws
// SparseBankError when a chosen hop spans more than `max_gap` (default one
// order of magnitude).
std::vector<QueryId> select_equidistant_subset(const AnchorBank& bank, double c = kInverseE,
                                               double max_gap = 10.0);

struct RefineOptions {
    ReferencePolicy reference_policy = ReferencePolicy::close_to_median;
    std::optional<QueryId> reference;  // for ReferencePolicy::fixed
    // Initial bank; its median anchor fixes the search start and the
    // close-to-median reference.
    const AnchorBank* initial = nullptr;
    // Round-one responses; a pair whose upper anchor is exactly 100 there
    // (with both maxima >= tau) is reused instead of re-requested.
    std::span<const ProviderResponse> cached;
    // Initial comparison graph; when set, subset anchors are chained over it
    // together with the new hops, so no anchor ends up looser than before.
    const ComparisonGraph* graph = nullptr;
    int tau = 10;
    Rational search_tolerance{1, 10};
    std::uint64_t seed = 0;
    std::size_t concurrency = 1;
    // Hop ratios outside this band are reported as warnings.
    double band_lo = 0.25;
    double band_hi = 0.55;
};

struct RefineResult {
    AnchorBank bank;
    std::vector<QueryId> subset;      // least to most popular
    std::vector<RatioEstimate> hops;  // subset[i] / subset[i+1]
    std::size_t requests_issued = 0;
    std::size_t requests_reused = 0;
    std::vector<std::string> warnings;
};

// One two-query request per adjacent pair, chained into an anchor bank.
// Throws IrrecoverableHopError when a hop's smaller maximum is zero.
RefineResult refine_pairwise(const std::vector<QueryId>& subset, Provider& provider, const std::string& region,
                             const Timespan& timespan, const RefineOptions& options);

struct OptimizerParams {
    OptimalityParams optimality;
    double max_gap = 10.0;
    RefineOptions refine;
};

// select_equidistant_subset followed by refine_pairwise.
RefineResult optimize_bank(const BuildResult& initial, Provider& provider, OptimizerParams params);

struct EtaComparisonRow {
    QueryId query;
    Rational R;          // optimized bank
    double eta_initial;  // same reference, initial graph
    double eta_optimized;
    double eta_theoretical;  // theoretical_optimum at r* (or 1/r* above the reference)
};

// Per-anchor bound ratios of the optimized bank against the initial graph
// recalibrated on the same reference. `r_star` supplies the ratio used for the
// theoretical curve; by default the optimized point estimate R.
std::vector<EtaComparisonRow> compare_eta(const ComparisonGraph& initial_graph, const AnchorBank& optimized,
                                          double eps = kRoundingHalfWidth,
                                          const std::function<double(const QueryId&)>& r_star = {});

}  // namespace trendcal
