#pragma once

// Desk-scale experiments against the simulator: interval soundness, exact
// recovery without rounding, search cost, and optimality of the bank layout.
// Every report keeps its raw per-row data so aggregates can be recomputed.

#include "trendcal/bank_builder.hpp"
#include "trendcal/csv.hpp"
#include "trendcal/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace trendcal {

struct ExperimentCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentReport {
    std::string name;
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, double>> metrics;  // insertion order
    std::vector<ExperimentCheck> checks;
    CsvTable raw;

    bool passed() const;
    double metric(const std::string& key) const;               // throws NotFoundError
    const ExperimentCheck& check(const std::string& key) const;  // throws NotFoundError
    void set_metric(const std::string& key, double value);
    void add_check(std::string key, bool passed, std::string detail);
    // One "PASS|FAIL <name>/<check>: <detail>" line per check.
    std::string summary() const;
};

// Writes <name>.csv (raw rows), <name>_metrics.csv and <name>_summary.txt.
void write_report(const ExperimentReport& report, const std::filesystem::path& directory);

// A synthetic world: ranked anchor candidates plus a separate query population.
struct ScenarioSpec {
    std::uint64_t seed = 1;
    std::size_t n_candidates = 2000;  // N
    double candidate_orders = 7.0;    // candidates' M* span [1, 10^7]
    std::size_t n_anchors = 100;      // n
    int k = 5;
    int tau = 10;
    std::size_t n_queries = 1000;
    double query_offset = 0.75;  // queries' M* span [10^offset, 10^(offset + orders)]
    double query_orders = 5.5;
    double proxy_sigma = 0.1;  // log-normal noise of the frequency proxy
    ShapeFamily shape_family = ShapeFamily::mixed;
};

struct Scenario {
    std::shared_ptr<GroundTruthUniverse> universe;
    FrequencyList frequencies;  // candidates only
    std::vector<QueryId> queries;
    BuildParams build;
};

// Candidate frequencies: M* times exp(sigma * z), z standard normal.
FrequencyList proxy_frequency_list(const GroundTruthUniverse& universe, const std::vector<QueryId>& ids,
                                   double sigma, std::uint64_t seed);

Scenario make_scenario(const ScenarioSpec& spec);

struct ContainmentOptions {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    RoundingRule rounding = RoundingRule::nearest;
    ScenarioSpec scenario;
    double min_orders = 5.0;  // required span of latent query ratios
    std::size_t concurrency = 1;
};

// Fraction of non-clamped calibrations whose latent ratio to the reference
// lies in [R_lo, R_hi]. Checks depend on the rounding rule: nearest expects
// full containment, none expects exact recovery with zero-width envelopes,
// floor (mismatched with the bounds) expects containment below 100%.
ExperimentReport exp_containment(const ContainmentOptions& options);

enum class Workload { matched, mismatched };

std::string to_string(Workload w);
Workload parse_workload(std::string_view text);

struct SearchCostOptions {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    Workload workload = Workload::matched;
    ScenarioSpec scenario = [] {
        ScenarioSpec s;
        s.n_anchors = 50;
        return s;
    }();
    std::size_t concurrency = 1;
};

// Histogram of requests per calibration. Matched queries follow the
// candidates' popularity distribution; mismatched ones all sit far below the
// least popular anchor. Only the matched workload carries thresholds.
ExperimentReport exp_search_cost(const SearchCostOptions& options);

struct OptimalityOptions {
    std::vector<double> r_stars{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    double eps = 1.0 / 200.0;
    double c_lo = 0.05;
    double c_hi = 0.95;
    std::size_t grid_points = 901;
    double argmin_lo = 0.33;
    double argmin_hi = 0.41;
    std::vector<std::uint64_t> seeds = [] {
        std::vector<std::uint64_t> s;
        for (std::uint64_t i = 1; i <= 20; ++i) s.push_back(i);
        return s;
    }();
    ScenarioSpec scenario;
    double slack = 1.10;  // optimized eta <= slack * theoretical
};

// Grid scan of eta(c) per r*.
ExperimentReport exp_optimal_c(const OptimalityOptions& options);

// Closed-form bound at r* = 1e-7 and the per-step factor at c = 1/e.
ExperimentReport exp_worst_case_bound(const OptimalityOptions& options);

// Per-anchor eta of optimized banks against their initial graphs and the
// theoretical curve, one bank per seed.
ExperimentReport exp_optimizer_dominance(const OptimalityOptions& options);

// The three above merged into one report.
ExperimentReport exp_optimality(const OptimalityOptions& options);

}  // namespace trendcal
