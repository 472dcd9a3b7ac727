#pragma once

// Offline phase: sample anchors, issue overlapping requests, estimate pairwise
// ratios, and calibrate every anchor against the reference through the chain
// with the smallest product of bound ratios.

#include "trendcal/model.hpp"
#include "trendcal/provider.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace trendcal {

struct FrequencyEntry {
    QueryId id;
    double frequency = 0.0;
};

// Candidate anchors ranked by a popularity proxy, most frequent first.
class FrequencyList {
public:
    FrequencyList() = default;
    // Sorts descending by frequency (ties by id); rejects duplicates and
    // negative frequencies.
    explicit FrequencyList(std::vector<FrequencyEntry> entries);

    // Tab-separated "id<TAB>frequency" lines; a first line whose second
    // column is not numeric is taken as a header. Blank lines are skipped.
    static FrequencyList parse_tsv(std::istream& in);
    static FrequencyList load_tsv(const std::string& path);
    void write_tsv(std::ostream& out) const;

    const std::vector<FrequencyEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<FrequencyEntry> entries_;
};

// Splits the top-N prefix into n contiguous rank strata of near-equal size
// and draws one id per stratum uniformly. Output keeps frequency order.
std::vector<QueryId> sample_anchors(const FrequencyList& freq, std::size_t N, std::size_t n,
                                    std::uint64_t seed);

// Request i holds anchors[i .. i+k-1]; n-k+1 requests in total.
std::vector<RequestSpec> shingle_requests(std::span<const QueryId> anchors, std::size_t k,
                                          const std::string& region, const Timespan& timespan);

// Every ordered pair within a response whose smaller maximum reaches tau.
// Pairs involving an all-zero series carry no ratio and are skipped.
std::vector<RatioEstimate> estimate_ratios(std::span<const ProviderResponse> responses, int tau);

// Directed comparison graph. One estimate is stored per unordered pair (the
// one with the smallest eta); the reverse direction is derived on demand.
class ComparisonGraph {
public:
    void add_node(const QueryId& q);
    // Keeps `e` if its pair is new or its eta is strictly smaller.
    void add(const RatioEstimate& e);

    bool contains(const QueryId& q) const { return adjacency_.contains(q); }
    std::vector<QueryId> nodes() const;
    const std::set<QueryId>& neighbors(const QueryId& q) const;
    std::optional<RatioEstimate> edge(const QueryId& from, const QueryId& to) const;
    std::size_t node_count() const noexcept { return adjacency_.size(); }
    std::size_t edge_count() const noexcept { return 2 * best_.size(); }  // both directions

private:
    std::map<QueryId, std::set<QueryId>> adjacency_;
    std::map<std::pair<QueryId, QueryId>, RatioEstimate> best_;  // key.first < key.second
};

ComparisonGraph build_graph(std::span<const RatioEstimate> estimates);

struct Chain {
    RatioEstimate estimate;      // node -> reference
    std::vector<QueryId> path;   // node, ..., reference
};

// Tightest chain from every node to `reference`, minimizing the product of
// bound ratios. Ties go to fewer hops, then to the lexicographically smallest
// node sequence. Throws DisconnectedGraphError listing unreachable nodes.
std::map<QueryId, Chain> tightest_chains(const ComparisonGraph& graph, const QueryId& reference);

struct BankContext {
    std::string region = "worldwide";
    Timespan timespan;
    BankParams params;
};

// Anchors whose calibrated R coincides with another's carry no extra
// information; only the one with the smaller eta is kept and the others are
// appended to `merged`.
AnchorBank calibrate_bank(const ComparisonGraph& graph, const QueryId& reference, const BankContext& context,
                          std::vector<QueryId>* merged = nullptr);

enum class ReferencePolicy { most_popular, close_to_median, fixed };

std::string to_string(ReferencePolicy p);
ReferencePolicy parse_reference_policy(std::string_view text);

// Picks the reference among graph nodes: the anchor with the largest R, or
// the one at the median of R (lower median). Ties go to the smallest id.
QueryId choose_reference(const ComparisonGraph& graph, ReferencePolicy policy);

struct BuildParams {
    std::size_t N = 2000;
    std::size_t n = 100;
    int k = 5;
    int tau = 10;
    Rational search_tolerance{1, 10};
    std::uint64_t seed = 0;
    std::string region = "worldwide";
    Timespan timespan = Timespan::parse("2019-01-01 2019-12-31");
    std::vector<QueryId> head_queries;  // prepended above the sampled anchors
    ReferencePolicy reference_policy = ReferencePolicy::most_popular;
    std::optional<QueryId> reference;    // required for ReferencePolicy::fixed
    std::size_t concurrency = 1;

    void validate() const;
};

struct BuildResult {
    AnchorBank bank;
    ComparisonGraph graph;
    std::vector<QueryId> anchors;  // shingling order
    std::vector<RequestSpec> requests;
    std::vector<ProviderResponse> responses;
    std::vector<QueryId> dropped;  // all-zero in every request
    std::vector<QueryId> merged;   // same R as a kept anchor
    std::vector<std::string> warnings;
};

BuildResult build_bank(Provider& provider, const FrequencyList& freq, const BuildParams& params);

}  // namespace trendcal
