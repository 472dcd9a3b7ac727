#include "trendcal/bank_builder.hpp"

#include "trendcal/errors.hpp"
#include "trendcal/random.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace trendcal {

// ---------------------------------------------------------------------------
// Frequency list

FrequencyList::FrequencyList(std::vector<FrequencyEntry> entries) : entries_(std::move(entries)) {
    std::set<QueryId> seen;
    for (const auto& e : entries_) {
        if (!(e.frequency >= 0.0)) throw ContractError("negative frequency for '" + e.id.str() + "'");
        if (!seen.insert(e.id).second) throw ContractError("duplicate id '" + e.id.str() + "' in frequency list");
    }
    std::stable_sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.id < b.id;
    });
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

FrequencyList FrequencyList::parse_tsv(std::istream& in) {
    std::vector<FrequencyEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (line_no == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
        if (view.empty()) continue;
        const auto tab = view.find('\t');
        if (tab == std::string_view::npos) {
            throw ContractError("frequency list line " + std::to_string(line_no) + " lacks a tab");
        }
        const auto id = trim(view.substr(0, tab));
        const auto freq = parse_double(trim(view.substr(tab + 1)));
        if (!freq) {
            if (entries.empty() && line_no == 1) continue;  // header
            throw ContractError("frequency list line " + std::to_string(line_no) + " has a non-numeric frequency");
        }
        entries.push_back({QueryId(std::string(id)), *freq});
    }
    return FrequencyList(std::move(entries));
}

FrequencyList FrequencyList::load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open frequency list '" + path + "'");
    return parse_tsv(in);
}

void FrequencyList::write_tsv(std::ostream& out) const {
    out << "id\tfrequency\n";
    for (const auto& e : entries_) {
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, e.frequency);
        out << e.id.str() << '\t' << std::string_view(buf, ptr - buf) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Round one

std::vector<QueryId> sample_anchors(const FrequencyList& freq, std::size_t N, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ContractError("sample size n must be positive");
    if (n > N) throw ContractError("sample size n=" + std::to_string(n) + " exceeds N=" + std::to_string(N));
    if (N > freq.size()) {
        throw ContractError("N=" + std::to_string(N) + " exceeds the frequency list size " + std::to_string(freq.size()));
    }
    Rng rng(mix_seed(seed, 0xa11c));
    std::vector<QueryId> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t begin = i * N / n;
        const std::size_t end = (i + 1) * N / n;
        out.push_back(freq.entries()[begin + rng.index(end - begin)].id);
    }
    return out;
}

std::vector<RequestSpec> shingle_requests(std::span<const QueryId> anchors, std::size_t k,
                                          const std::string& region, const Timespan& timespan) {
    if (k < kMinQueriesPerRequest || k > kMaxQueriesPerRequest) {
        throw ContractError("group size k must be in 2..5, got " + std::to_string(k));
    }
    if (anchors.size() < k) {
        throw ContractError("need at least k=" + std::to_string(k) + " anchors, got " + std::to_string(anchors.size()));
    }
    std::vector<RequestSpec> out;
    out.reserve(anchors.size() - k + 1);
    for (std::size_t i = 0; i + k <= anchors.size(); ++i) {
        RequestSpec r{std::vector<QueryId>(anchors.begin() + i, anchors.begin() + i + k), region, timespan};
        r.validate();
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RatioEstimate> estimate_ratios(std::span<const ProviderResponse> responses, int tau) {
    if (tau < 0 || tau > 100) throw ContractError("tau must be in 0..100");
    const Rational threshold(tau);
    std::vector<RatioEstimate> out;
    for (const auto& response : responses) {
        for (const auto& x : response.series) {
            for (const auto& y : response.series) {
                if (x.query() == y.query()) continue;
                const auto& smaller = std::min(x.max_value(), y.max_value());
                if (smaller < threshold || smaller == 0) continue;
                out.push_back(pair_ratio(x, y));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Graph

void ComparisonGraph::add_node(const QueryId& q) { adjacency_.try_emplace(q); }

void ComparisonGraph::add(const RatioEstimate& e) {
    if (e.numerator == e.denominator) throw ContractError("self edge for '" + e.numerator.str() + "'");
    if (e.eta.is_infinite()) throw ContractError("unbounded estimate cannot enter the graph");
    const bool forward = e.numerator < e.denominator;
    auto key = forward ? std::pair{e.numerator, e.denominator} : std::pair{e.denominator, e.numerator};
    auto it = best_.find(key);
    if (it == best_.end()) {
        best_.emplace(std::move(key), forward ? e : e.inverse());
    } else if (e.eta < it->second.eta) {
        it->second = forward ? e : e.inverse();
    }
    adjacency_[e.numerator].insert(e.denominator);
    adjacency_[e.denominator].insert(e.numerator);
}

std::vector<QueryId> ComparisonGraph::nodes() const {
    std::vector<QueryId> out;
    out.reserve(adjacency_.size());
    for (const auto& [q, _] : adjacency_) out.push_back(q);
    return out;
}

const std::set<QueryId>& ComparisonGraph::neighbors(const QueryId& q) const {
    auto it = adjacency_.find(q);
    if (it == adjacency_.end()) throw NotFoundError("'" + q.str() + "' is not in the graph");
    return it->second;
}

std::optional<RatioEstimate> ComparisonGraph::edge(const QueryId& from, const QueryId& to) const {
    if (from < to) {
        auto it = best_.find({from, to});
        if (it == best_.end()) return std::nullopt;
        return it->second;
    }
    auto it = best_.find({to, from});
    if (it == best_.end()) return std::nullopt;
    return it->second.inverse();
}

ComparisonGraph build_graph(std::span<const RatioEstimate> estimates) {
    ComparisonGraph g;
    for (const auto& e : estimates) g.add(e);
    return g;
}

// ---------------------------------------------------------------------------
// Tightest chains

std::map<QueryId, Chain> tightest_chains(const ComparisonGraph& graph, const QueryId& reference) {
    if (!graph.contains(reference)) throw NotFoundError("reference '" + reference.str() + "' is not in the graph");

    struct Label {
        std::optional<Rational> eta;  // nullopt: not reached yet
        std::size_t hops = 0;
        bool settled = false;
    };
    std::map<QueryId, Label> label;
    for (const auto& q : graph.nodes()) label[q];
    label[reference].eta = Rational(1);

    auto better = [](const Rational& eta_a, std::size_t hops_a, const Label& b) {
        if (!b.eta) return true;
        if (eta_a != *b.eta) return eta_a < *b.eta;
        return hops_a < b.hops;
    };

    // Dense Dijkstra over eta products; all edge factors are >= 1.
    for (;;) {
        const QueryId* pick = nullptr;
        for (auto& [q, l] : label) {
            if (l.settled || !l.eta) continue;
            if (!pick || better(*l.eta, l.hops, label[*pick])) pick = &q;
        }
        if (!pick) break;
        Label& u = label[*pick];
        u.settled = true;
        for (const auto& v : graph.neighbors(*pick)) {
            Label& lv = label[v];
            if (lv.settled) continue;
            Rational cand = graph.edge(v, *pick)->eta.value() * *u.eta;
            if (better(cand, u.hops + 1, lv)) {
                lv.eta = std::move(cand);
                lv.hops = u.hops + 1;
            }
        }
    }

    std::vector<std::string> unreachable;
    for (const auto& [q, l] : label) {
        if (!l.eta) unreachable.push_back(q.str());
    }
    if (!unreachable.empty()) throw DisconnectedGraphError(std::move(unreachable));

    // Successor: smallest id among neighbors that realize the optimum one hop closer.
    std::vector<std::pair<std::size_t, QueryId>> by_hops;
    for (const auto& [q, l] : label) by_hops.emplace_back(l.hops, q);
    std::sort(by_hops.begin(), by_hops.end());

    std::map<QueryId, Chain> chains;
    for (const auto& [hops, q] : by_hops) {
        if (q == reference) {
            chains.emplace(q, Chain{identity_estimate(q), {q}});
            continue;
        }
        const Label& lq = label[q];
        for (const auto& y : graph.neighbors(q)) {  // ascending id order
            const Label& ly = label[y];
            if (ly.hops + 1 != lq.hops) continue;
            const auto e = graph.edge(q, y);
            if (e->eta.value() * *ly.eta != *lq.eta) continue;
            const Chain& rest = chains.at(y);
            Chain c{chain(*e, rest.estimate), {q}};
            c.path.insert(c.path.end(), rest.path.begin(), rest.path.end());
            chains.emplace(q, std::move(c));
            break;
        }
    }
    return chains;
}

AnchorBank calibrate_bank(const ComparisonGraph& graph, const QueryId& reference, const BankContext& context,
                          std::vector<QueryId>* merged) {
    const auto chains = tightest_chains(graph, reference);
    std::vector<AnchorBankEntry> entries;
    entries.reserve(chains.size());
    for (const auto& [q, c] : chains) entries.push_back(make_entry(c.estimate));
    // Equal R: the reference first, then the tighter bound ratio, then the smaller id.
    std::sort(entries.begin(), entries.end(), [&](const auto& a, const auto& b) {
        if (a.R != b.R) return a.R < b.R;
        if ((a.query == reference) != (b.query == reference)) return a.query == reference;
        if (a.eta != b.eta) return a.eta < b.eta;
        return a.query < b.query;
    });
    std::vector<AnchorBankEntry> kept;
    kept.reserve(entries.size());
    for (auto& e : entries) {
        if (!kept.empty() && kept.back().R == e.R) {
            if (merged) merged->push_back(e.query);
            continue;
        }
        kept.push_back(std::move(e));
    }
    return AnchorBank(std::move(kept), reference, context.region, context.timespan, context.params);
}

std::string to_string(ReferencePolicy p) {
    switch (p) {
        case ReferencePolicy::most_popular: return "most_popular";
        case ReferencePolicy::close_to_median: return "close_to_median";
        case ReferencePolicy::fixed: return "fixed";
    }
    return "most_popular";
}

ReferencePolicy parse_reference_policy(std::string_view text) {
    if (text == "most_popular" || text == "top") return ReferencePolicy::most_popular;
    if (text == "close_to_median" || text == "median") return ReferencePolicy::close_to_median;
    if (text == "fixed") return ReferencePolicy::fixed;
    throw ContractError("unknown reference policy '" + std::string(text) + "'");
}

QueryId choose_reference(const ComparisonGraph& graph, ReferencePolicy policy) {
    if (graph.node_count() == 0) throw ContractError("cannot choose a reference in an empty graph");
    if (policy == ReferencePolicy::fixed) throw ContractError("a fixed reference must be given explicitly");
    const QueryId provisional = graph.nodes().front();
    const auto chains = tightest_chains(graph, provisional);
    std::vector<std::pair<Rational, QueryId>> ranked;
    for (const auto& [q, c] : chains) ranked.emplace_back(c.estimate.r.value(), q);
    if (policy == ReferencePolicy::most_popular) {
        // largest R; ties to the smallest id
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        return ranked.front().second;
    }
    std::sort(ranked.begin(), ranked.end());
    return ranked[(ranked.size() - 1) / 2].second;
}

// ---------------------------------------------------------------------------
// Pipeline

void BuildParams::validate() const {
    if (k < 2 || k > static_cast<int>(kMaxQueriesPerRequest)) throw ContractError("k must be in 2..5");
    if (tau < 0 || tau > 100) throw ContractError("tau must be in 0..100");
    if (n == 0 || n > N) throw ContractError("need 0 < n <= N");
    if (n + head_queries.size() < static_cast<std::size_t>(k)) {
        throw ContractError("need at least k anchors (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
    }
    if (search_tolerance <= 0 || search_tolerance >= 1) throw ContractError("search tolerance must be in (0, 1)");
    if (reference_policy == ReferencePolicy::fixed && !reference) {
        throw ContractError("reference policy 'fixed' needs a reference id");
    }
}

BuildResult build_bank(Provider& provider, const FrequencyList& freq, const BuildParams& params) {
    params.validate();
    std::vector<QueryId> anchors;
    std::set<QueryId> seen;
    for (const auto& h : params.head_queries) {
        if (seen.insert(h).second) anchors.push_back(h);
    }
    for (auto& a : sample_anchors(freq, params.N, params.n, params.seed)) {
        if (seen.insert(a).second) anchors.push_back(std::move(a));
    }
    auto requests = shingle_requests(anchors, static_cast<std::size_t>(params.k), params.region, params.timespan);
    auto responses = fetch_all(provider, requests, params.concurrency);

    std::vector<std::string> warnings;
    std::vector<QueryId> dropped;
    std::set<QueryId> informative;
    for (const auto& r : responses) {
        for (const auto& s : r.series) {
            if (!s.all_zero()) informative.insert(s.query());
        }
    }
    for (const auto& a : anchors) {
        if (!informative.contains(a)) {
            dropped.push_back(a);
            warnings.push_back("dropping anchor '" + a.str() + "': all-zero in every request");
        }
    }

    const auto estimates = estimate_ratios(responses, params.tau);
    ComparisonGraph graph = build_graph(estimates);
    for (const auto& a : anchors) {
        if (informative.contains(a)) graph.add_node(a);
    }

    QueryId reference = params.reference_policy == ReferencePolicy::fixed
                            ? *params.reference
                            : choose_reference(graph, params.reference_policy);
    BankContext context{params.region, params.timespan,
                        BankParams{params.k, params.tau, params.search_tolerance, params.seed}};
    std::vector<QueryId> merged;
    AnchorBank bank = calibrate_bank(graph, reference, context, &merged);
    for (const auto& m : merged) {
        warnings.push_back("dropping anchor '" + m.str() + "': same calibrated maximum as another anchor");
    }
    return BuildResult{std::move(bank),      std::move(graph),   std::move(anchors), std::move(requests),
                       std::move(responses), std::move(dropped), std::move(merged),  std::move(warnings)};
}

}  // namespace trendcal
