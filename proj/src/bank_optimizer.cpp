#include "trendcal/bank_optimizer.hpp"

#include "trendcal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace trendcal {

void OptimalityParams::validate() const {
    if (!(target_ratio > 0.0 && target_ratio < 1.0)) throw ContractError("target ratio c must lie in (0, 1)");
    if (!(rounding_half_width > 0.0 && rounding_half_width < target_ratio)) {
        throw ContractError("rounding half-width must lie in (0, c)");
    }
}

double step_factor(double c, double eps) {
    if (!(eps > 0.0 && eps < c && c < 1.0)) throw ContractError("step factor needs 0 < eps < c < 1");
    return (c + eps) / (c - eps);
}

double eta_of_c(double c, double r_star, double eps) {
    if (!(c > 0.0 && c < 1.0)) throw ContractError("eta_of_c needs 0 < c < 1");
    if (!(r_star > 0.0 && r_star < 1.0)) throw ContractError("eta_of_c needs 0 < r* < 1");
    if (!(eps > 0.0 && eps < c)) throw ContractError("eta_of_c needs 0 < eps < c");
    const double steps = std::log(r_star) / std::log(c);
    return std::pow(step_factor(c, eps), steps);
}

double theoretical_optimum(double r_star, double eps) {
    if (!(r_star > 0.0 && r_star <= 1.0)) throw ContractError("theoretical optimum needs 0 < r* <= 1");
    return std::pow(step_factor(kInverseE, eps), -std::log(r_star));
}

std::vector<EtaSample> scan_eta(double r_star, double eps, double c_lo, double c_hi, std::size_t points) {
    if (points < 2 || !(c_lo < c_hi)) throw ContractError("scan needs c_lo < c_hi and at least two points");
    std::vector<EtaSample> out;
    out.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double c = c_lo + (c_hi - c_lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        out.push_back({c, r_star, eta_of_c(c, r_star, eps)});
    }
    return out;
}

EtaSample argmin_eta(const std::vector<EtaSample>& grid) {
    if (grid.empty()) throw ContractError("empty eta grid");
    return *std::min_element(grid.begin(), grid.end(), [](const auto& a, const auto& b) { return a.eta < b.eta; });
}

namespace {

double log_of(const Rational& q) {
    // q spans many orders of magnitude but stays within double range
    return std::log(to_double(q));
}

std::string format_ratio(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", r);
    return buf;
}

}  // namespace

std::vector<QueryId> select_equidistant_subset(const AnchorBank& bank, double c, double max_gap) {
    if (bank.size() < 2) throw ContractError("subset selection needs a bank with at least two anchors");
    if (!(c > 0.0 && c < 1.0)) throw ContractError("target ratio c must lie in (0, 1)");
    const auto& entries = bank.entries();
    const std::size_t n = entries.size();
    std::vector<double> logR(n);
    for (std::size_t i = 0; i < n; ++i) logR[i] = log_of(entries[i].R);
    const double log_c = std::log(c);

    // Dense Dijkstra on the complete directed graph; ties keep the first-found predecessor.
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> pred(n, n);
    std::vector<bool> done(n, false);
    dist[0] = 0.0;
    for (;;) {
        std::size_t u = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!done[i] && std::isfinite(dist[i]) && (u == n || dist[i] < dist[u])) u = i;
        }
        if (u == n || u == n - 1) break;
        done[u] = true;
        for (std::size_t v = 0; v < n; ++v) {
            if (v == u || done[v]) continue;
            const double w = std::abs(log_c - (logR[u] - logR[v]));
            if (dist[u] + w < dist[v]) {
                dist[v] = dist[u] + w;
                pred[v] = u;
            }
        }
    }
    std::vector<std::size_t> idx;
    for (std::size_t v = n - 1; v != n; v = pred[v]) {
        idx.push_back(v);
        if (v == 0) break;
    }
    std::reverse(idx.begin(), idx.end());

    std::vector<QueryId> subset;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k > 0) {
            const double gap = std::exp(logR[idx[k]] - logR[idx[k - 1]]);
            if (gap > max_gap) {
                throw SparseBankError("no anchor between '" + entries[idx[k - 1]].query.str() + "' and '" +
                                      entries[idx[k]].query.str() + "' (ratio " + format_ratio(1.0 / gap) +
                                      "); increase the number of sampled anchors n");
            }
        }
        subset.push_back(entries[idx[k]].query);
    }
    return subset;
}

namespace {

// Reusable round-one estimate for lower/upper: upper observed at exactly 100.
std::optional<RatioEstimate> reusable_hop(std::span<const ProviderResponse> cached, const QueryId& lower,
                                          const QueryId& upper, int tau) {
    for (const auto& r : cached) {
        const InterestSeries* lo = nullptr;
        const InterestSeries* up = nullptr;
        for (const auto& s : r.series) {
            if (s.query() == lower) lo = &s;
            if (s.query() == upper) up = &s;
        }
        if (!lo || !up) continue;
        if (up->max_value() != 100) continue;
        if (lo->max_value() < tau || lo->max_value() == 0) continue;
        return pair_ratio(*lo, *up);
    }
    return std::nullopt;
}

}  // namespace

RefineResult refine_pairwise(const std::vector<QueryId>& subset, Provider& provider, const std::string& region,
                             const Timespan& timespan, const RefineOptions& options) {
    if (subset.size() < 2) throw ContractError("refinement needs at least two anchors");
    const std::size_t n_hops = subset.size() - 1;

    std::vector<std::optional<RatioEstimate>> hops(n_hops);
    std::vector<RequestSpec> requests;
    std::vector<std::size_t> request_hop;
    std::size_t reused = 0;
    for (std::size_t i = 0; i < n_hops; ++i) {
        if (auto e = reusable_hop(options.cached, subset[i], subset[i + 1], options.tau)) {
            hops[i] = std::move(*e);
            ++reused;
            continue;
        }
        requests.push_back(RequestSpec{{subset[i], subset[i + 1]}, region, timespan});
        request_hop.push_back(i);
    }
    const auto responses = fetch_all(provider, requests, options.concurrency);
    for (std::size_t j = 0; j < responses.size(); ++j) {
        const std::size_t i = request_hop[j];
        const auto& lower = responses[j].series_for(subset[i]);
        const auto& upper = responses[j].series_for(subset[i + 1]);
        if (lower.all_zero() || upper.all_zero()) {
            throw lower.all_zero() ? IrrecoverableHopError(subset[i].str(), subset[i + 1].str())
                                   : IrrecoverableHopError(subset[i + 1].str(), subset[i].str());
        }
        hops[i] = pair_ratio(lower, upper);
    }

    // Search start and default reference: the subset anchor nearest the
    // initial bank's median.
    std::size_t start = (subset.size() - 1) / 2;
    if (options.initial) {
        const auto& median = options.initial->entries()[(options.initial->size() - 1) / 2].R;
        std::optional<Rational> best;
        for (std::size_t i = 0; i < subset.size(); ++i) {
            const auto& R = options.initial->at(subset[i]).R;
            Rational d = R >= median ? R / median : median / R;
            if (!best || d < *best) {
                best = std::move(d);
                start = i;
            }
        }
    }
    std::size_t ref = start;
    switch (options.reference_policy) {
        case ReferencePolicy::close_to_median: break;
        case ReferencePolicy::most_popular: ref = subset.size() - 1; break;
        case ReferencePolicy::fixed: {
            if (!options.reference) throw ContractError("reference policy 'fixed' needs a reference id");
            auto it = std::find(subset.begin(), subset.end(), *options.reference);
            if (it == subset.end()) throw ContractError("fixed reference '" + options.reference->str() + "' is not in the subset");
            ref = static_cast<std::size_t>(it - subset.begin());
            break;
        }
    }

    std::optional<std::map<QueryId, Chain>> chains;
    if (options.graph) {
        ComparisonGraph merged = *options.graph;
        for (const auto& h : hops) merged.add(*h);
        chains = tightest_chains(merged, subset[ref]);
    }

    std::vector<AnchorBankEntry> entries;
    entries.reserve(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (chains) {
            entries.push_back(make_entry(chains->at(subset[i]).estimate));
            continue;
        }
        RatioEstimate to_ref = identity_estimate(subset[i]);
        if (i < ref) {
            to_ref = *hops[i];
            for (std::size_t h = i + 1; h < ref; ++h) to_ref = chain(to_ref, *hops[h]);
        } else if (i > ref) {
            to_ref = hops[i - 1]->inverse();
            for (std::size_t h = i - 1; h > ref; --h) to_ref = chain(to_ref, hops[h - 1]->inverse());
        }
        entries.push_back(make_entry(to_ref));
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.R < b.R; });

    RefineResult result{AnchorBank(std::move(entries), subset[ref], region, timespan,
                                   BankParams{2, options.tau, options.search_tolerance, options.seed}, subset[start]),
                        subset,
                        {},
                        requests.size(),
                        reused,
                        {}};
    for (auto& h : hops) {
        const double r = h->r.to_double();
        const double oriented = r > 1.0 ? 1.0 / r : r;
        if (oriented < options.band_lo || oriented > options.band_hi) {
            result.warnings.push_back("hop '" + h->numerator.str() + "' -> '" + h->denominator.str() + "' has ratio " +
                                      format_ratio(r) + ", outside [" + format_ratio(options.band_lo) + ", " +
                                      format_ratio(options.band_hi) + "]");
        }
        result.hops.push_back(std::move(*h));
    }
    return result;
}

RefineResult optimize_bank(const BuildResult& initial, Provider& provider, OptimizerParams params) {
    params.optimality.validate();
    const auto subset = select_equidistant_subset(initial.bank, params.optimality.target_ratio, params.max_gap);
    if (!params.refine.initial) params.refine.initial = &initial.bank;
    if (params.refine.cached.empty()) params.refine.cached = initial.responses;
    if (!params.refine.graph) params.refine.graph = &initial.graph;
    params.refine.tau = initial.bank.params().tau;
    params.refine.seed = initial.bank.params().seed;
    params.refine.search_tolerance = initial.bank.params().search_tolerance;
    return refine_pairwise(subset, provider, initial.bank.region(), initial.bank.timespan(), params.refine);
}

std::vector<EtaComparisonRow> compare_eta(const ComparisonGraph& initial_graph, const AnchorBank& optimized, double eps,
                                          const std::function<double(const QueryId&)>& r_star) {
    const auto chains = tightest_chains(initial_graph, optimized.reference());
    std::vector<EtaComparisonRow> rows;
    rows.reserve(optimized.size());
    for (const auto& e : optimized.entries()) {
        auto it = chains.find(e.query);
        if (it == chains.end()) throw NotFoundError("optimized anchor '" + e.query.str() + "' is not in the initial graph");
        double r = r_star ? r_star(e.query) : to_double(e.R);
        if (r > 1.0) r = 1.0 / r;
        rows.push_back({e.query, e.R, it->second.estimate.eta.to_double(), to_double(e.eta),
                        theoretical_optimum(r, eps)});
    }
    return rows;
}

}  // namespace trendcal
