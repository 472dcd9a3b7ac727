#include "trendcal/provider.hpp"

#include "trendcal/errors.hpp"
#include "trendcal/storage.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <optional>
#include <thread>

namespace trendcal {

namespace fs = std::filesystem;
using nlohmann::json;

const InterestSeries& ProviderResponse::series_for(const QueryId& q) const {
    for (const auto& s : series) {
        if (s.query() == q) return s;
    }
    throw NotFoundError("response has no series for '" + q.str() + "'");
}

void ProviderResponse::validate() const {
    request.validate();
    if (series.size() != request.queries.size()) {
        throw ContractError("response holds " + std::to_string(series.size()) + " series for " +
                            std::to_string(request.queries.size()) + " queries");
    }
    Rational joint_max = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].query() != request.queries[i]) {
            throw ContractError("response series out of request order at '" + series[i].query().str() + "'");
        }
        if (series[i].context() != ScaleContext{response_id, precision}) {
            throw ContractError("series '" + series[i].query().str() + "' has a foreign scale context");
        }
        if (series[i].max_value() > joint_max) joint_max = series[i].max_value();
    }
    if (joint_max != 0 && joint_max != 100) {
        throw ContractError("joint maximum of a response must be 100, got " + to_string(joint_max));
    }
}

std::vector<ProviderResponse> fetch_all(Provider& provider, std::span<const RequestSpec> requests,
                                        std::size_t max_concurrency) {
    std::vector<std::optional<ProviderResponse>> slots(requests.size());
    std::vector<std::exception_ptr> errors(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) {
            try {
                slots[i] = provider.fetch(requests[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::clamp<std::size_t>(max_concurrency, 1, std::max<std::size_t>(requests.size(), 1));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    }
    std::vector<ProviderResponse> out;
    out.reserve(requests.size());
    for (std::size_t i = 0; i < requests.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        out.push_back(std::move(*slots[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Wire format

json request_to_json(const RequestSpec& request) {
    json queries = json::array();
    for (const auto& q : request.queries) queries.push_back(q.str());
    return {{"queries", std::move(queries)},
            {"region", request.region},
            {"timespan", request.timespan.to_string()}};
}

RequestSpec request_from_json(const json& doc) {
    RequestSpec r;
    for (const auto& q : doc.at("queries")) r.queries.emplace_back(q.get<std::string>());
    r.region = doc.at("region").get<std::string>();
    r.timespan = Timespan::parse(doc.at("timespan").get<std::string>());
    return r;
}

json response_to_json(const ProviderResponse& response) {
    json series = json::array();
    for (const auto& s : response.series) {
        json points = json::array();
        for (const auto& p : s.points()) points.push_back({format_date(p.date), to_string(p.value)});
        series.push_back({{"query", s.query().str()}, {"points", std::move(points)}});
    }
    return {{"request", request_to_json(response.request)},
            {"response_id", response.response_id},
            {"precision", to_string(response.precision)},
            {"series", std::move(series)}};
}

ProviderResponse response_from_json(const json& doc) {
    ProviderResponse r;
    r.request = request_from_json(doc.at("request"));
    r.response_id = doc.at("response_id").get<std::string>();
    r.precision = parse_precision(doc.at("precision").get<std::string>());
    const ScaleContext context{r.response_id, r.precision};
    for (const auto& s : doc.at("series")) {
        std::vector<SeriesPoint> points;
        for (const auto& p : s.at("points")) {
            Rational value = p.at(1).is_number_integer() ? Rational(p.at(1).get<long long>())
                                                         : parse_rational(p.at(1).get<std::string>());
            points.push_back({parse_date(p.at(0).get<std::string>()), std::move(value)});
        }
        r.series.emplace_back(QueryId(s.at("query").get<std::string>()), std::move(points), context);
    }
    r.validate();
    return r;
}

// ---------------------------------------------------------------------------
// Cache

namespace {

inline constexpr int kCacheSchemaVersion = 1;

// Cached responses are keyed by the query set; restore the caller's order.
ProviderResponse reorder_for(ProviderResponse cached, const RequestSpec& request) {
    std::map<QueryId, std::size_t> slot;
    for (std::size_t i = 0; i < cached.series.size(); ++i) slot[cached.series[i].query()] = i;
    std::vector<InterestSeries> ordered;
    ordered.reserve(request.queries.size());
    for (const auto& q : request.queries) {
        auto it = slot.find(q);
        if (it == slot.end()) throw StorageError(StorageError::Kind::invalid, "cache entry lacks '" + q.str() + "'");
        ordered.push_back(cached.series[it->second]);
    }
    cached.series = std::move(ordered);
    cached.request = request;
    return cached;
}

}  // namespace

CachingProvider::CachingProvider(std::shared_ptr<Provider> upstream, fs::path directory)
    : upstream_(std::move(upstream)), directory_(std::move(directory)) {
    if (!upstream_) throw ContractError("caching provider needs an upstream provider");
    if (directory_.empty()) throw ContractError("caching provider needs a cache directory");
    fs::create_directories(directory_);
}

fs::path CachingProvider::path_for(const RequestSpec& request) const {
    return directory_ / (sha256_hex(request.canonical_key()) + ".json");
}

void CachingProvider::clear() {
    for (const auto& entry : fs::directory_iterator(directory_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") fs::remove(entry.path());
    }
}

ProviderResponse CachingProvider::fetch(const RequestSpec& request) {
    request.validate();
    const fs::path path = path_for(request);
    std::error_code ec;
    if (fs::exists(path, ec)) {
        try {
            json content = open_document(read_file(path), kCacheSchemaVersion);
            if (content.at("key").get<std::string>() != request.canonical_key()) {
                throw StorageError(StorageError::Kind::checksum, "cache key collision");
            }
            ProviderResponse cached = reorder_for(response_from_json(content.at("response")), request);
            ++hits_;
            return cached;
        } catch (const Error&) {
            ++corrupt_;  // fall through to the source and overwrite
        } catch (const json::exception&) {
            ++corrupt_;
        }
    }
    ++upstream_calls_;
    ProviderResponse fresh = upstream_->fetch(request);
    json content{{"key", request.canonical_key()}, {"response", response_to_json(fresh)}};
    write_file_atomically(path, seal_document(content, kCacheSchemaVersion));
    return fresh;
}

}  // namespace trendcal
