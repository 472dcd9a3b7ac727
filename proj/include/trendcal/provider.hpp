#pragma once

#include "trendcal/model.hpp"

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace trendcal {

// Result of one request: every series shares one scaling context.
struct ProviderResponse {
    RequestSpec request;
    std::vector<InterestSeries> series;  // one per requested query, in request order
    std::string response_id;
    Precision precision = Precision::integer;

    const InterestSeries& series_for(const QueryId& q) const;

    // One series per query in request order, shared context, and the joint
    // maximum of 100 unless every series is all-zero.
    void validate() const;

    bool operator==(const ProviderResponse&) const = default;
};

// A source of scaled-and-rounded interest series. Implementations must be
// safe to call from several threads at once.
class Provider {
public:
    virtual ~Provider() = default;

    virtual ProviderResponse fetch(const RequestSpec& request) = 0;
    virtual std::string kind() const = 0;
};

// Fetches every request, at most `max_concurrency` in flight. The output is
// in request order regardless of completion order. The first failure is
// rethrown after in-flight requests finish.
std::vector<ProviderResponse> fetch_all(Provider& provider, std::span<const RequestSpec> requests,
                                        std::size_t max_concurrency = 1);

// Response wire format shared by the cache and the HTTP client:
//   {"request": {"queries": [...], "region": "...", "timespan": "YYYY-MM-DD YYYY-MM-DD"},
//    "response_id": "...", "precision": "integer"|"exact",
//    "series": [{"query": "...", "points": [["YYYY-MM-DD", "<rational>"], ...]}, ...]}
nlohmann::json response_to_json(const ProviderResponse& response);
ProviderResponse response_from_json(const nlohmann::json& doc);

nlohmann::json request_to_json(const RequestSpec& request);
RequestSpec request_from_json(const nlohmann::json& doc);

// Replays previous responses from one file per canonical request under
// `directory`. Misses and corrupt entries fall through to the upstream
// provider; the fresh response is then written back atomically.
class CachingProvider : public Provider {
public:
    CachingProvider(std::shared_ptr<Provider> upstream, std::filesystem::path directory);

    ProviderResponse fetch(const RequestSpec& request) override;
    std::string kind() const override { return upstream_->kind(); }

    std::filesystem::path path_for(const RequestSpec& request) const;
    void clear();

    std::size_t hits() const noexcept { return hits_.load(); }
    std::size_t upstream_calls() const noexcept { return upstream_calls_.load(); }
    std::size_t corrupt_entries() const noexcept { return corrupt_.load(); }

private:
    std::shared_ptr<Provider> upstream_;
    std::filesystem::path directory_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> upstream_calls_{0};
    std::atomic<std::size_t> corrupt_{0};
};

}  // namespace trendcal
