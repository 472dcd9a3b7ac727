#pragma once

// Command-line front end: build | optimize | calibrate | eval.
//
// Settings come from defaults, then an optional JSON config file (--config),
// then flags; later sources win. Exit codes are a stable contract:
// 0 success, 1 partial success, 2 usage error, 3 runtime failure.

#include "trendcal/simulator.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trendcal {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct SimulatorConfig {
    std::size_t candidates = 2000;  // anchor candidates in the simulated world
    double range = 7.0;              // orders of magnitude spanned by candidates
    std::size_t queries = 1000;      // size of the simulated query population
    double query_offset = 0.75;
    double query_range = 5.5;
    std::string shape = "mixed";
    std::string rounding = "nearest";
    std::uint64_t seed = 1;
};

struct RunConfig {
    std::string provider = "simulator";  // simulator | live
    bool live = false;                   // must be set for provider "live"
    SimulatorConfig sim;
    std::string region = "worldwide";
    std::string timespan = "2019-01-01 2019-12-31";
    std::string frequencies;  // TSV "id<TAB>frequency"; simulator default: its proxy list
    std::string bank;         // bank file to read (optimize, calibrate) or write (build)
    std::string queries;      // one query id per line
    std::string cache_dir;    // response cache; TRENDCAL_CACHE_DIR when empty
    std::string out = "out";
    int k = 5;
    int tau = 10;
    std::size_t N = 2000;
    std::size_t n = 100;
    std::string search_tolerance = "1/10";
    double target_ratio = 0.36787944117144233;  // 1/e
    double max_gap = 10.0;
    std::uint64_t seed = 0;
    std::string reference_policy = "most_popular";
    std::string reference;
    std::size_t concurrency = 1;
    std::vector<std::uint64_t> seeds{1, 2, 3};  // eval

    // Every field except `live`.
    nlohmann::json to_json() const;
    // Overrides fields present in `doc`; unknown keys are rejected.
    void merge_json(const nlohmann::json& doc);
    // Throws UsageError on out-of-domain values.
    void validate() const;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

int cmd_build(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_optimize(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_calibrate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err);

// Parses `args` (without the program name) and dispatches.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trendcal
