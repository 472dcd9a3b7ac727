#include <httplib.h>

#include "trendcal/http_provider.hpp"

#include "trendcal/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace trendcal {

using namespace std::chrono_literals;

HttpProviderConfig HttpProviderConfig::from_env() {
    HttpProviderConfig c;
    if (const char* url = std::getenv("TRENDCAL_ENDPOINT")) c.base_url = url;
    if (const char* key = std::getenv("TRENDCAL_API_KEY")) c.api_key = key;
    return c;
}

TokenBucket::TokenBucket(std::chrono::milliseconds interval, std::size_t burst)
    : interval_(interval),
      capacity_(static_cast<double>(std::max<std::size_t>(burst, 1))),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::refill(std::chrono::steady_clock::time_point now) {
    if (interval_.count() <= 0) {
        tokens_ = capacity_;
    } else {
        const double elapsed = std::chrono::duration<double, std::milli>(now - last_).count();
        tokens_ = std::min(capacity_, tokens_ + elapsed / static_cast<double>(interval_.count()));
    }
    last_ = now;
}

bool TokenBucket::try_acquire() {
    std::lock_guard lock(mutex_);
    refill(std::chrono::steady_clock::now());
    if (tokens_ < 1.0) return false;
    tokens_ -= 1.0;
    return true;
}

void TokenBucket::acquire() {
    for (;;) {
        std::chrono::duration<double, std::milli> wait{0};
        {
            std::lock_guard lock(mutex_);
            refill(std::chrono::steady_clock::now());
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait = std::chrono::duration<double, std::milli>((1.0 - tokens_) * static_cast<double>(interval_.count()));
        }
        std::this_thread::sleep_for(wait);
    }
}

std::chrono::milliseconds backoff_delay(int attempt, std::chrono::milliseconds initial,
                                        std::chrono::milliseconds cap) {
    auto delay = initial;
    for (int i = 0; i < attempt && delay < cap; ++i) delay *= 2;
    return std::min(delay, cap);
}

HttpProvider::HttpProvider(HttpProviderConfig config)
    : config_(std::move(config)), bucket_(config_.min_interval) {
    if (config_.base_url.empty()) {
        throw ContractError("live provider needs an endpoint (set TRENDCAL_ENDPOINT)");
    }
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) throw ContractError("endpoint must include a scheme: " + config_.base_url);
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    origin_ = config_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

ProviderResponse HttpProvider::fetch(const RequestSpec& request) {
    request.validate();
    std::lock_guard serial(upstream_);

    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    httplib::Params params;
    for (const auto& q : request.queries) params.emplace("q", q.str());
    params.emplace("geo", request.region);
    params.emplace("time", request.timespan.to_string());
    const std::string path = httplib::append_query_params(path_prefix_ + "/v1/interest", params);

    std::chrono::milliseconds last_wait{0};
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        bucket_.acquire();
        ++attempts_;
        auto result = client.Get(path, headers);
        std::chrono::milliseconds wait = backoff_delay(attempt, config_.initial_backoff, config_.max_backoff);
        if (result) {
            const int status = result->status;
            if (status == 200) {
                try {
                    ProviderResponse response = response_from_json(nlohmann::json::parse(result->body));
                    if (response.request.canonical_key() != request.canonical_key()) {
                        throw TransportError("upstream answered a different request", false);
                    }
                    return response;
                } catch (const nlohmann::json::exception& e) {
                    throw TransportError(std::string("malformed upstream payload: ") + e.what(), false);
                }
            }
            if (status != 429 && status != 503 && status < 500) {
                throw TransportError("upstream rejected request with HTTP " + std::to_string(status), false);
            }
            if (result->has_header("Retry-After")) {
                try {
                    wait = std::min(std::chrono::milliseconds(std::stol(result->get_header_value("Retry-After")) * 1000),
                                    config_.max_backoff);
                } catch (const std::exception&) {
                    // HTTP-date form; keep the exponential delay
                }
            }
        }
        last_wait = wait;
        if (attempt < config_.max_retries) std::this_thread::sleep_for(wait);
    }
    throw TransportError("upstream unavailable after " + std::to_string(config_.max_retries + 1) + " attempts",
                         true, last_wait);
}

std::shared_ptr<CachingProvider> make_live_provider(HttpProviderConfig config,
                                                    const std::filesystem::path& cache_dir) {
    return std::make_shared<CachingProvider>(std::make_shared<HttpProvider>(std::move(config)), cache_dir);
}

}  // namespace trendcal
