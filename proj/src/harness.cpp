#include "trendcal/harness.hpp"

#include "trendcal/bank_optimizer.hpp"
#include "trendcal/calibrator.hpp"
#include "trendcal/errors.hpp"
#include "trendcal/random.hpp"
#include "trendcal/storage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace trendcal {

// ---------------------------------------------------------------------------
// Reports

bool ExperimentReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

double ExperimentReport::metric(const std::string& key) const {
    for (const auto& [k, v] : metrics) {
        if (k == key) return v;
    }
    throw NotFoundError("report '" + name + "' has no metric '" + key + "'");
}

const ExperimentCheck& ExperimentReport::check(const std::string& key) const {
    for (const auto& c : checks) {
        if (c.name == key) return c;
    }
    throw NotFoundError("report '" + name + "' has no check '" + key + "'");
}

void ExperimentReport::set_metric(const std::string& key, double value) {
    for (auto& [k, v] : metrics) {
        if (k == key) {
            v = value;
            return;
        }
    }
    metrics.emplace_back(key, value);
}

void ExperimentReport::add_check(std::string key, bool ok, std::string detail) {
    checks.push_back({std::move(key), ok, std::move(detail)});
}

std::string ExperimentReport::summary() const {
    std::ostringstream out;
    for (const auto& c : checks) {
        out << (c.passed ? "PASS " : "FAIL ") << name << '/' << c.name << ": " << c.detail << '\n';
    }
    return out.str();
}

void write_report(const ExperimentReport& report, const std::filesystem::path& directory) {
    write_csv_file(directory / (report.name + ".csv"), report.raw);
    CsvTable metrics{{"metric", "value"}, {}};
    for (const auto& [k, v] : report.metrics) metrics.rows.push_back({k, format_double(v)});
    write_csv_file(directory / (report.name + "_metrics.csv"), metrics);
    std::string seeds;
    for (auto s : report.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
    write_file_atomically(directory / (report.name + "_summary.txt"),
                          "experiment " + report.name + "\nseeds " + seeds + "\n" + report.summary());
}

// ---------------------------------------------------------------------------
// Scenarios

FrequencyList proxy_frequency_list(const GroundTruthUniverse& universe, const std::vector<QueryId>& ids,
                                   double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw ContractError("proxy noise sigma must be >= 0");
    Rng rng(mix_seed(seed, 0xf4e9));
    std::vector<FrequencyEntry> entries;
    entries.reserve(ids.size());
    for (const auto& id : ids) {
        const double m = to_double(universe.latent(id).max_interest);
        entries.push_back({id, m * std::exp(sigma * rng.normal())});
    }
    return FrequencyList(std::move(entries));
}

Scenario make_scenario(const ScenarioSpec& spec) {
    if (spec.n_anchors > spec.n_candidates) throw ContractError("more anchors than candidates");
    UniverseSpec candidates;
    candidates.n_queries = spec.n_candidates;
    candidates.log10_range = spec.candidate_orders;
    candidates.shape_family = spec.shape_family;
    candidates.seed = mix_seed(spec.seed, 1);
    candidates.id_prefix = "a";
    auto universe = std::make_shared<GroundTruthUniverse>(spec.seed);
    universe->merge(make_universe(candidates));
    const auto candidate_ids = universe->ids();

    std::vector<QueryId> queries;
    if (spec.n_queries > 0) {
        UniverseSpec qs;
        qs.n_queries = spec.n_queries;
        qs.log10_range = spec.query_orders;
        qs.log10_offset = spec.query_offset;
        qs.shape_family = spec.shape_family;
        qs.seed = mix_seed(spec.seed, 2);
        qs.id_prefix = "u";
        GroundTruthUniverse query_universe = make_universe(qs);
        queries = query_universe.ids();
        universe->merge(query_universe);
    }

    Scenario out;
    out.universe = std::move(universe);
    out.frequencies = proxy_frequency_list(*out.universe, candidate_ids, spec.proxy_sigma, spec.seed);
    out.queries = std::move(queries);
    out.build.N = spec.n_candidates;
    out.build.n = spec.n_anchors;
    out.build.k = spec.k;
    out.build.tau = spec.tau;
    out.build.seed = spec.seed;
    return out;
}

namespace {

std::string fmt(double v) { return format_double(v); }

}  // namespace

// ---------------------------------------------------------------------------
// Containment

ExperimentReport exp_containment(const ContainmentOptions& options) {
    if (options.seeds.empty()) throw ContractError("containment experiment needs at least one seed");
    ExperimentReport report;
    report.name = "containment_" + to_string(options.rounding);
    report.seeds = options.seeds;
    report.raw.header = {"seed", "query", "latent_ratio", "R", "R_lo", "R_hi", "status", "contained",
                         "relative_error", "zero_width", "requests_used"};

    std::size_t total = 0, clamped = 0, checked = 0, contained = 0, errors = 0, zero_width = 0;
    double max_rel_error = 0.0;
    double min_latent = std::numeric_limits<double>::infinity();
    double max_latent = 0.0;

    for (const auto seed : options.seeds) {
        ScenarioSpec spec = options.scenario;
        spec.seed = seed;
        const Scenario scenario = make_scenario(spec);
        SimulatedProvider provider(scenario.universe, options.rounding);
        const BuildResult built = build_bank(provider, scenario.frequencies, scenario.build);
        const AnchorBank& bank = built.bank;
        const BatchResult batch = calibrate_batch(scenario.queries, bank, provider, {std::nullopt, options.concurrency});
        errors += batch.errors.size();

        for (const auto& r : batch.results) {
            ++total;
            const Rational latent = scenario.universe->true_ratio(r.query, bank.reference(), bank.timespan());
            const double latent_d = to_double(latent);
            min_latent = std::min(min_latent, latent_d);
            max_latent = std::max(max_latent, latent_d);

            bool width_zero = r.R_lo == r.R_hi;
            for (const auto& p : r.series) width_zero = width_zero && p.lo == p.hi;
            if (width_zero) ++zero_width;

            std::string in = "";
            double rel = std::numeric_limits<double>::quiet_NaN();
            if (!r.R.is_infinite() && latent != 0) {
                const Rational diff = r.R.value() - latent;
                rel = to_double(abs(diff) / latent);
            }
            if (r.status == CalibrationStatus::ok) {
                ++checked;
                const bool ok = r.R_lo <= Magnitude(latent) && Magnitude(latent) <= r.R_hi;
                if (ok) ++contained;
                in = ok ? "1" : "0";
                if (!std::isnan(rel)) max_rel_error = std::max(max_rel_error, rel);
            } else {
                ++clamped;
            }
            report.raw.rows.push_back({std::to_string(seed), r.query.str(), fmt(latent_d), fmt(r.R.to_double()),
                                       fmt(r.R_lo.to_double()), fmt(r.R_hi.to_double()), to_string(r.status), in,
                                       fmt(rel), width_zero ? "1" : "0", std::to_string(r.requests_used)});
        }
    }

    const double rate = checked ? static_cast<double>(contained) / static_cast<double>(checked) : 0.0;
    const double orders = max_latent > 0 ? std::log10(max_latent / min_latent) : 0.0;
    report.set_metric("queries", static_cast<double>(total));
    report.set_metric("errors", static_cast<double>(errors));
    report.set_metric("clamped", static_cast<double>(clamped));
    report.set_metric("checked", static_cast<double>(checked));
    report.set_metric("contained", static_cast<double>(contained));
    report.set_metric("containment_rate", rate);
    report.set_metric("orders_spanned", orders);
    report.set_metric("max_relative_error", max_rel_error);
    report.set_metric("zero_width", static_cast<double>(zero_width));

    const std::string counts = std::to_string(contained) + "/" + std::to_string(checked) + " contained, " +
                               std::to_string(clamped) + " clamped, " + std::to_string(errors) + " errors";
    report.add_check("no_errors", errors == 0, std::to_string(errors) + " failed calibrations");
    switch (options.rounding) {
        case RoundingRule::nearest:
            report.add_check("containment", checked > 0 && contained == checked, counts);
            report.add_check("orders_spanned", orders >= options.min_orders,
                             "latent ratios span " + fmt(orders) + " orders of magnitude");
            break;
        case RoundingRule::none:
            report.add_check("containment", checked > 0 && contained == checked, counts);
            report.add_check("exact_recovery", total > 0 && max_rel_error <= 1e-12,
                             "max relative error " + fmt(max_rel_error));
            report.add_check("zero_width", zero_width == total,
                             std::to_string(zero_width) + "/" + std::to_string(total) + " zero-width envelopes");
            break;
        case RoundingRule::floor:
            report.add_check("negative_control", checked > 0 && contained < checked,
                             counts + " (floor rounding must break containment)");
            break;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Search cost

std::string to_string(Workload w) { return w == Workload::matched ? "matched" : "mismatched"; }

Workload parse_workload(std::string_view text) {
    if (text == "matched") return Workload::matched;
    if (text == "mismatched") return Workload::mismatched;
    throw ContractError("unknown workload '" + std::string(text) + "' (expected matched|mismatched)");
}

ExperimentReport exp_search_cost(const SearchCostOptions& options) {
    if (options.seeds.empty()) throw ContractError("search-cost experiment needs at least one seed");
    ExperimentReport report;
    report.name = "search_cost_" + to_string(options.workload);
    report.seeds = options.seeds;
    report.raw.header = {"seed", "query", "requests_used", "status"};

    std::map<std::size_t, std::size_t> histogram;
    std::size_t total = 0, sum = 0, worst = 0, errors = 0;
    double worst_seed_mean = 0.0;
    for (const auto seed : options.seeds) {
        ScenarioSpec spec = options.scenario;
        spec.seed = seed;
        if (options.workload == Workload::matched) {
            spec.query_offset = 0.0;
            spec.query_orders = spec.candidate_orders;
        } else {
            // far below the least popular candidate
            spec.query_offset = -4.0;
            spec.query_orders = 2.0;
        }
        const Scenario scenario = make_scenario(spec);
        SimulatedProvider provider(scenario.universe, RoundingRule::nearest);
        const BuildResult built = build_bank(provider, scenario.frequencies, scenario.build);
        const BatchResult batch =
            calibrate_batch(scenario.queries, built.bank, provider, {std::nullopt, options.concurrency});
        errors += batch.errors.size();
        std::size_t seed_sum = 0;
        for (const auto& r : batch.results) {
            ++histogram[r.requests_used];
            seed_sum += r.requests_used;
            worst = std::max(worst, r.requests_used);
            report.raw.rows.push_back(
                {std::to_string(seed), r.query.str(), std::to_string(r.requests_used), to_string(r.status)});
        }
        total += batch.results.size();
        sum += seed_sum;
        if (!batch.results.empty()) {
            worst_seed_mean = std::max(worst_seed_mean, static_cast<double>(seed_sum) /
                                                            static_cast<double>(batch.results.size()));
        }
    }
    const double mean = total ? static_cast<double>(sum) / static_cast<double>(total) : 0.0;
    const std::size_t n = options.scenario.n_anchors;
    const auto bound = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n)))) + 1;
    report.set_metric("queries", static_cast<double>(total));
    report.set_metric("errors", static_cast<double>(errors));
    report.set_metric("mean_requests", mean);
    report.set_metric("worst_seed_mean_requests", worst_seed_mean);
    report.set_metric("max_requests", static_cast<double>(worst));
    report.set_metric("log2_bound", static_cast<double>(bound));
    for (const auto& [used, count] : histogram) {
        report.set_metric("histogram_" + std::to_string(used), static_cast<double>(count));
    }
    report.add_check("no_errors", errors == 0, std::to_string(errors) + " failed calibrations");
    if (options.workload == Workload::matched) {
        report.add_check("mean_requests", total > 0 && worst_seed_mean <= 3.0,
                         "mean " + fmt(mean) + ", worst per-seed mean " + fmt(worst_seed_mean) + " (<= 3)");
        report.add_check("max_requests", worst <= bound,
                         "max " + std::to_string(worst) + " (<= " + std::to_string(bound) + ")");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Optimality

ExperimentReport exp_optimal_c(const OptimalityOptions& options) {
    ExperimentReport report;
    report.name = "optimal_c";
    report.raw.header = {"r_star", "c", "eta", "argmin"};
    bool all_in_band = true;
    std::string detail;
    for (const double r : options.r_stars) {
        const auto grid = scan_eta(r, options.eps, options.c_lo, options.c_hi, options.grid_points);
        const auto best = argmin_eta(grid);
        for (const auto& s : grid) {
            report.raw.rows.push_back({fmt(s.r_star), fmt(s.c), fmt(s.eta), s.c == best.c ? "1" : "0"});
        }
        std::ostringstream key;
        key << "argmin_c_r" << r;
        report.set_metric(key.str(), best.c);
        const bool ok = best.c >= options.argmin_lo && best.c <= options.argmin_hi;
        all_in_band = all_in_band && ok;
        std::ostringstream d;
        d << "r*=" << r << " -> c=" << fmt(best.c) << "; ";
        detail += d.str();
    }
    report.add_check("argmin_in_band", !options.r_stars.empty() && all_in_band,
                     detail + "band [" + fmt(options.argmin_lo) + ", " + fmt(options.argmin_hi) + "]");
    return report;
}

ExperimentReport exp_worst_case_bound(const OptimalityOptions& options) {
    ExperimentReport report;
    report.name = "worst_case_bound";
    report.raw.header = {"r_star", "eta_theoretical"};
    for (const double r : options.r_stars) {
        report.raw.rows.push_back({fmt(r), fmt(theoretical_optimum(r, options.eps))});
    }
    const double bound = theoretical_optimum(1e-7, options.eps);
    const double step = step_factor(kInverseE, options.eps);
    report.set_metric("eta_bar_1e-7", bound);
    report.set_metric("step_factor", step);
    report.add_check("eta_bar_1e-7", bound < 1.55, "eta_bar(1e-7) = " + fmt(bound) + " (< 1.55)");
    report.add_check("step_factor", std::abs(step - 1.028) <= 1e-3, "step factor " + fmt(step) + " (1.028 +- 1e-3)");
    return report;
}

ExperimentReport exp_optimizer_dominance(const OptimalityOptions& options) {
    if (options.seeds.empty()) throw ContractError("dominance experiment needs at least one seed");
    ExperimentReport report;
    report.name = "optimizer_dominance";
    report.seeds = options.seeds;
    report.raw.header = {"seed", "query", "r_star", "eta_initial", "eta_optimized", "eta_theoretical", "dominates",
                         "within_slack"};
    std::size_t anchors = 0, not_dominated = 0, over_slack = 0, warnings = 0;
    double worst_vs_theory = 0.0, worst_vs_initial = 0.0, anchors_min = 1e300;
    for (const auto seed : options.seeds) {
        ScenarioSpec spec = options.scenario;
        spec.seed = seed;
        spec.n_queries = 0;
        const Scenario scenario = make_scenario(spec);
        SimulatedProvider provider(scenario.universe, RoundingRule::nearest);
        const BuildResult built = build_bank(provider, scenario.frequencies, scenario.build);
        OptimizerParams params;
        params.optimality.rounding_half_width = options.eps;
        const RefineResult refined = optimize_bank(built, provider, params);
        warnings += refined.warnings.size();
        const QueryId& ref = refined.bank.reference();
        const auto& universe = *scenario.universe;
        const Timespan span = refined.bank.timespan();
        const auto rows = compare_eta(built.graph, refined.bank, options.eps, [&](const QueryId& q) {
            return to_double(universe.true_ratio(q, ref, span));
        });
        anchors_min = std::min(anchors_min, static_cast<double>(rows.size()));
        for (const auto& row : rows) {
            ++anchors;
            double r = to_double(universe.true_ratio(row.query, ref, span));
            if (r > 1.0) r = 1.0 / r;
            const bool dominates = row.eta_optimized <= row.eta_initial;
            const bool within = row.eta_optimized <= options.slack * row.eta_theoretical;
            if (!dominates) ++not_dominated;
            if (!within) ++over_slack;
            worst_vs_theory = std::max(worst_vs_theory, row.eta_optimized / row.eta_theoretical);
            worst_vs_initial = std::max(worst_vs_initial, row.eta_optimized / row.eta_initial);
            report.raw.rows.push_back({std::to_string(seed), row.query.str(), fmt(r), fmt(row.eta_initial),
                                       fmt(row.eta_optimized), fmt(row.eta_theoretical), dominates ? "1" : "0",
                                       within ? "1" : "0"});
        }
    }
    report.set_metric("banks", static_cast<double>(options.seeds.size()));
    report.set_metric("anchors", static_cast<double>(anchors));
    report.set_metric("min_anchors_per_bank", anchors_min);
    report.set_metric("not_dominated", static_cast<double>(not_dominated));
    report.set_metric("over_slack", static_cast<double>(over_slack));
    report.set_metric("max_optimized_over_theoretical", worst_vs_theory);
    report.set_metric("max_optimized_over_initial", worst_vs_initial);
    report.set_metric("band_warnings", static_cast<double>(warnings));
    report.add_check("optimized_le_initial", anchors > 0 && not_dominated == 0,
                     std::to_string(not_dominated) + "/" + std::to_string(anchors) +
                         " anchors worse than initial; max ratio " + fmt(worst_vs_initial) + " over " +
                         std::to_string(options.seeds.size()) + " banks");
    report.add_check("optimized_le_slack_theoretical", anchors > 0 && over_slack == 0,
                     std::to_string(over_slack) + "/" + std::to_string(anchors) + " anchors above " +
                         fmt(options.slack) + "x theoretical; max ratio " + fmt(worst_vs_theory));
    return report;
}

ExperimentReport exp_optimality(const OptimalityOptions& options) {
    ExperimentReport report;
    report.name = "optimality";
    report.seeds = options.seeds;
    report.raw.header = {"part", "key", "value"};
    for (const auto& part :
         {exp_optimal_c(options), exp_worst_case_bound(options), exp_optimizer_dominance(options)}) {
        for (const auto& [k, v] : part.metrics) {
            report.set_metric(part.name + "." + k, v);
            report.raw.rows.push_back({part.name, k, fmt(v)});
        }
        for (const auto& c : part.checks) report.add_check(part.name + "." + c.name, c.passed, c.detail);
    }
    return report;
}

}  // namespace trendcal
