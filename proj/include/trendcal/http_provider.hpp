#pragma once

// Live provider speaking JSON over HTTP to a trends gateway.
//
//   GET <base_url>/v1/interest?q=<id>&q=<id>...&geo=<region>&time=<start end>
//   Authorization: Bearer <api key>        (when configured)
//
// A 200 reply carries the response wire format of provider.hpp. 429 and 503
// replies are retried with bounded exponential backoff, honoring Retry-After.
// Upstream calls are serialized through a token bucket; wrap the provider in
// a CachingProvider (see make_live_provider) so repeated requests never reach
// the network.

#include "trendcal/provider.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

namespace trendcal {

struct HttpProviderConfig {
    std::string base_url;  // e.g. "https://gateway.example.org" or "http://127.0.0.1:8080/api"
    std::string api_key;
    std::chrono::milliseconds min_interval{2000};  // one request per interval
    int max_retries = 5;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::milliseconds max_backoff{60000};
    std::chrono::seconds timeout{30};

    // Reads TRENDCAL_ENDPOINT and TRENDCAL_API_KEY.
    static HttpProviderConfig from_env();
};

// Token bucket: `burst` tokens, one refilled every `interval`.
class TokenBucket {
public:
    explicit TokenBucket(std::chrono::milliseconds interval, std::size_t burst = 1);

    void acquire();
    bool try_acquire();

private:
    void refill(std::chrono::steady_clock::time_point now);

    std::chrono::milliseconds interval_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

// Delay before retry number `attempt` (0-based): initial * 2^attempt, capped.
std::chrono::milliseconds backoff_delay(int attempt, std::chrono::milliseconds initial,
                                        std::chrono::milliseconds cap);

class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig config);

    ProviderResponse fetch(const RequestSpec& request) override;
    std::string kind() const override { return "live"; }

    std::size_t attempts() const noexcept { return attempts_; }

private:
    HttpProviderConfig config_;
    std::string origin_;
    std::string path_prefix_;
    TokenBucket bucket_;
    std::mutex upstream_;
    std::size_t attempts_ = 0;
};

// HttpProvider behind a mandatory response cache at `cache_dir`.
std::shared_ptr<CachingProvider> make_live_provider(HttpProviderConfig config,
                                                    const std::filesystem::path& cache_dir);

}  // namespace trendcal
