#include "trendcal/cli.hpp"

#include "trendcal/bank_builder.hpp"
#include "trendcal/bank_optimizer.hpp"
#include "trendcal/calibrator.hpp"
#include "trendcal/errors.hpp"
#include "trendcal/harness.hpp"
#include "trendcal/http_provider.hpp"
#include "trendcal/report.hpp"
#include "trendcal/storage.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace trendcal {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

json RunConfig::to_json() const {
    return json{{"provider", provider},
                {"sim",
                 {{"candidates", sim.candidates},
                  {"range", sim.range},
                  {"queries", sim.queries},
                  {"query_offset", sim.query_offset},
                  {"query_range", sim.query_range},
                  {"shape", sim.shape},
                  {"rounding", sim.rounding},
                  {"seed", sim.seed}}},
                {"region", region},
                {"timespan", timespan},
                {"frequencies", frequencies},
                {"bank", bank},
                {"queries", queries},
                {"cache_dir", cache_dir},
                {"out", out},
                {"k", k},
                {"tau", tau},
                {"N", N},
                {"n", n},
                {"search_tolerance", search_tolerance},
                {"target_ratio", target_ratio},
                {"max_gap", max_gap},
                {"seed", seed},
                {"reference_policy", reference_policy},
                {"reference", reference},
                {"concurrency", concurrency},
                {"seeds", seeds}};
}

void RunConfig::merge_json(const json& doc) {
    if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
    auto take = [&](const json& from, const char* key, auto& field) {
        if (from.contains(key)) from.at(key).get_to(field);
    };
    try {
        for (const auto& [key, value] : doc.items()) {
            static const char* const kKnown[] = {"provider", "sim",       "region",          "timespan",     "frequencies",
                                                 "bank",     "queries",   "cache_dir",       "out",          "k",
                                                 "tau",      "N",         "n",               "search_tolerance",
                                                 "target_ratio", "max_gap", "seed",         "reference_policy",
                                                 "reference", "concurrency", "seeds"};
            if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
                throw UsageError("unknown config key '" + key + "'");
            }
            (void)value;
        }
        take(doc, "provider", provider);
        if (doc.contains("sim")) {
            const json& s = doc.at("sim");
            if (!s.is_object()) throw UsageError("config key 'sim' must be an object");
            take(s, "candidates", sim.candidates);
            take(s, "range", sim.range);
            take(s, "queries", sim.queries);
            take(s, "query_offset", sim.query_offset);
            take(s, "query_range", sim.query_range);
            take(s, "shape", sim.shape);
            take(s, "rounding", sim.rounding);
            take(s, "seed", sim.seed);
        }
        take(doc, "region", region);
        take(doc, "timespan", timespan);
        take(doc, "frequencies", frequencies);
        take(doc, "bank", bank);
        take(doc, "queries", queries);
        take(doc, "cache_dir", cache_dir);
        take(doc, "out", out);
        take(doc, "k", k);
        take(doc, "tau", tau);
        take(doc, "N", N);
        take(doc, "n", n);
        take(doc, "search_tolerance", search_tolerance);
        take(doc, "target_ratio", target_ratio);
        take(doc, "max_gap", max_gap);
        take(doc, "seed", seed);
        take(doc, "reference_policy", reference_policy);
        take(doc, "reference", reference);
        take(doc, "concurrency", concurrency);
        take(doc, "seeds", seeds);
    } catch (const json::exception& e) {
        throw UsageError(std::string("bad config value: ") + e.what());
    }
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw UsageError(msg); };
    if (provider != "simulator" && provider != "live") fail("provider must be 'simulator' or 'live'");
    if (provider == "live" && !live) fail("the live provider needs an explicit --live flag");
    if (k < static_cast<int>(kMinQueriesPerRequest) || k > static_cast<int>(kMaxQueriesPerRequest)) {
        fail("k must lie in [2, 5]");
    }
    if (n < static_cast<std::size_t>(k)) fail("n (" + std::to_string(n) + ") must be at least k (" + std::to_string(k) + ")");
    if (N < n) fail("N (" + std::to_string(N) + ") must be at least n (" + std::to_string(n) + ")");
    if (tau < 0 || tau > 100) fail("tau must lie in [0, 100]");
    try {
        const Rational tol = parse_rational(search_tolerance);
        if (tol <= 0 || tol >= 1) fail("search tolerance must lie in (0, 1)");
        Timespan::parse(timespan);
        parse_shape_family(sim.shape);
        parse_rounding_rule(sim.rounding);
        const auto policy = parse_reference_policy(reference_policy);
        if (policy == ReferencePolicy::fixed && reference.empty()) fail("reference policy 'fixed' needs --reference");
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        fail(e.what());
    }
    if (!(target_ratio > kRoundingHalfWidth && target_ratio < 1.0)) fail("target ratio must lie in (1/200, 1)");
    if (!(max_gap > 1.0)) fail("max gap must exceed 1");
    if (concurrency == 0) fail("concurrency must be at least 1");
    if (provider == "simulator" && frequencies.empty() && sim.candidates < N) {
        fail("the simulated world has " + std::to_string(sim.candidates) + " candidates, fewer than N = " +
             std::to_string(N));
    }
}

namespace {

// ---------------------------------------------------------------------------
// Sessions

ScenarioSpec scenario_spec(const RunConfig& c) {
    ScenarioSpec s;
    s.seed = c.sim.seed;
    s.n_candidates = c.sim.candidates;
    s.candidate_orders = c.sim.range;
    s.n_anchors = std::min(c.n, c.sim.candidates);
    s.k = c.k;
    s.tau = c.tau;
    s.n_queries = c.sim.queries;
    s.query_offset = c.sim.query_offset;
    s.query_orders = c.sim.query_range;
    s.shape_family = parse_shape_family(c.sim.shape);
    return s;
}

struct Session {
    std::shared_ptr<Provider> provider;
    std::optional<Scenario> scenario;
    std::shared_ptr<CachingProvider> cache;
};

fs::path cache_root(const RunConfig& c) {
    if (!c.cache_dir.empty()) return c.cache_dir;
    if (const char* env = std::getenv("TRENDCAL_CACHE_DIR")) return env;
    return {};
}

Session open_session(const RunConfig& c) {
    Session s;
    if (c.provider == "live") {
        HttpProviderConfig http = HttpProviderConfig::from_env();
        if (http.base_url.empty()) throw UsageError("set TRENDCAL_ENDPOINT to use the live provider");
        fs::path dir = cache_root(c);
        if (dir.empty()) dir = ".trendcal-cache";
        s.cache = make_live_provider(std::move(http), dir);
        s.provider = s.cache;
        return s;
    }
    s.scenario = make_scenario(scenario_spec(c));
    auto sim = std::make_shared<SimulatedProvider>(s.scenario->universe, parse_rounding_rule(c.sim.rounding));
    const fs::path dir = cache_root(c);
    if (dir.empty()) {
        s.provider = sim;
    } else {
        s.cache = std::make_shared<CachingProvider>(sim, dir);
        s.provider = s.cache;
    }
    return s;
}

std::string today() {
    const auto now = std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now());
    return format_date(now);
}

Provenance provenance_of(const RunConfig& c) {
    Provenance p;
    p.provider = c.provider;
    if (c.provider == "simulator") {
        p.universe_seed = c.sim.seed;
        p.fetch_dates = "simulated";
    } else {
        p.fetch_dates = today();
    }
    json params = c.to_json();
    // output locations do not affect content
    params.erase("out");
    params.erase("bank");
    p.parameters = std::move(params);
    return p;
}

BuildParams build_params(const RunConfig& c) {
    BuildParams p;
    p.N = c.N;
    p.n = c.n;
    p.k = c.k;
    p.tau = c.tau;
    p.search_tolerance = parse_rational(c.search_tolerance);
    p.seed = c.seed;
    p.region = c.region;
    p.timespan = Timespan::parse(c.timespan);
    p.reference_policy = parse_reference_policy(c.reference_policy);
    if (!c.reference.empty()) p.reference = QueryId(c.reference);
    p.concurrency = c.concurrency;
    return p;
}

FrequencyList frequencies_for(const RunConfig& c, const Session& s) {
    if (!c.frequencies.empty()) return FrequencyList::load_tsv(c.frequencies);
    if (s.scenario) return s.scenario->frequencies;
    throw UsageError("--frequencies is required with the live provider");
}

void write_config(const RunConfig& c, const fs::path& dir) {
    write_file_atomically(dir / "config.json", c.to_json().dump(2) + "\n");
}

std::string params_line(const RunConfig& c) {
    return "k=" + std::to_string(c.k) + " tau=" + std::to_string(c.tau) + " n=" + std::to_string(c.n) +
           " N=" + std::to_string(c.N) + " search_tolerance=" + c.search_tolerance + " seed=" + std::to_string(c.seed);
}

BuildResult run_build(const RunConfig& c, Session& s, std::ostream& out, std::ostream& err) {
    const FrequencyList freq = frequencies_for(c, s);
    if (freq.size() < c.N) {
        throw UsageError("frequency list has " + std::to_string(freq.size()) + " entries, fewer than N = " +
                         std::to_string(c.N));
    }
    BuildResult built = build_bank(*s.provider, freq, build_params(c));
    for (const auto& w : built.warnings) err << "warning: " << w << '\n';
    out << "anchors: " << built.anchors.size() << " sampled, " << built.bank.size() << " calibrated, "
        << built.dropped.size() << " all-zero, " << built.merged.size() << " duplicate\n";
    out << "requests: " << built.requests.size() << '\n';
    out << "graph: " << built.graph.node_count() << " nodes, " << built.graph.edge_count() << " directed edges\n";
    out << "reference: " << built.bank.reference() << '\n';
    return built;
}

AnchorBank require_bank(const RunConfig& c) {
    if (c.bank.empty()) throw UsageError("--bank is required");
    return load_bank(c.bank);
}

std::vector<QueryId> read_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read query file '" + path + "'");
    std::vector<QueryId> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t\r");
        out.emplace_back(line.substr(b, e - b + 1));
    }
    return out;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

int cmd_build(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        config.validate();
        out << "parameters: " << params_line(config) << '\n';
        Session s = open_session(config);
        const BuildResult built = run_build(config, s, out, err);
        const fs::path dir = config.out;
        const fs::path bank_path = config.bank.empty() ? dir / "bank.json" : fs::path(config.bank);
        save_bank(built.bank, provenance_of(config), bank_path);
        write_csv_file(dir / "bank.csv", bank_table(built.bank));
        write_config(config, dir);
        out << "wrote " << bank_path.string() << '\n';
        return kExitSuccess;
    });
}

int cmd_optimize(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        config.validate();
        const AnchorBank stored = require_bank(config);
        Session s = open_session(config);
        // The initial round (graph and responses) is replayed from the
        // configuration; it must reproduce the stored bank.
        const BuildResult built = run_build(config, s, out, err);
        if (!(built.bank == stored)) {
            throw Error("bank file '" + config.bank + "' does not match the configuration; rebuild it first");
        }
        OptimizerParams params;
        params.optimality.target_ratio = config.target_ratio;
        params.max_gap = config.max_gap;
        if (config.reference_policy == "fixed") {
            params.refine.reference_policy = ReferencePolicy::fixed;
            params.refine.reference = QueryId(config.reference);
        }
        params.refine.concurrency = config.concurrency;
        const RefineResult refined = optimize_bank(built, *s.provider, params);
        for (const auto& w : refined.warnings) err << "warning: " << w << '\n';

        std::function<double(const QueryId&)> r_star;
        if (s.scenario) {
            const auto universe = s.scenario->universe;
            const QueryId ref = refined.bank.reference();
            const Timespan span = refined.bank.timespan();
            r_star = [universe, ref, span](const QueryId& q) { return to_double(universe->true_ratio(q, ref, span)); };
        }
        const auto rows = compare_eta(built.graph, refined.bank, params.optimality.rounding_half_width, r_star);

        const fs::path dir = config.out;
        save_bank(refined.bank, provenance_of(config), dir / "optimized_bank.json");
        write_csv_file(dir / "optimized_bank.csv", bank_table(refined.bank));
        write_csv_file(dir / "eta_comparison.csv", eta_comparison_table(rows));
        write_config(config, dir);
        out << "subset: " << refined.subset.size() << " anchors, reference " << refined.bank.reference() << '\n';
        out << "requests: " << refined.requests_issued << " issued, " << refined.requests_reused << " reused\n";
        out << "wrote " << (dir / "optimized_bank.json").string() << '\n';
        return kExitSuccess;
    });
}

int cmd_calibrate(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        config.validate();
        const AnchorBank bank = require_bank(config);
        Session s = open_session(config);
        std::vector<QueryId> queries;
        if (!config.queries.empty()) {
            queries = read_queries(config.queries);
        } else if (s.scenario) {
            queries = s.scenario->queries;
        } else {
            throw UsageError("--queries is required with the live provider");
        }
        BatchOptions options;
        options.search_tolerance = parse_rational(config.search_tolerance);
        options.concurrency = config.concurrency;
        const BatchResult batch = calibrate_batch(queries, bank, *s.provider, options);

        const fs::path dir = config.out;
        for (const auto& r : batch.results) {
            write_csv_file(dir / "series" / (file_stem(r.query) + ".csv"), series_table(r));
        }
        write_csv_file(dir / "summary.csv", calibration_summary_table(batch.results));
        write_csv_file(dir / "histogram.csv", histogram_table(batch.histogram));
        write_csv_file(dir / "errors.csv", error_table(batch.errors));
        write_config(config, dir);
        for (const auto& e : batch.errors) err << "error: " << e.query << ": " << e.message << '\n';
        out << "calibrated " << batch.results.size() << "/" << queries.size() << " queries; mean requests "
            << format_double(batch.mean_requests) << ", max " << batch.max_requests << '\n';
        if (batch.errors.empty()) return kExitSuccess;
        return batch.results.empty() ? kExitRuntime : kExitPartial;
    });
}

int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        config.validate();
        if (config.seeds.empty()) throw UsageError("--seeds needs at least one seed");
        const ScenarioSpec base = scenario_spec(config);
        CsvTable table{{"seed", "experiment", "check", "passed", "detail"}, {}};
        bool all = true;
        for (const auto seed : config.seeds) {
            const fs::path dir = fs::path(config.out) / ("seed-" + std::to_string(seed));
            std::vector<ExperimentReport> reports;
            for (const auto rule : {RoundingRule::nearest, RoundingRule::none, RoundingRule::floor}) {
                ContainmentOptions o;
                o.seeds = {seed};
                o.rounding = rule;
                o.scenario = base;
                o.concurrency = config.concurrency;
                reports.push_back(exp_containment(o));
            }
            for (const auto w : {Workload::matched, Workload::mismatched}) {
                SearchCostOptions o;
                o.seeds = {seed};
                o.workload = w;
                o.scenario = base;
                o.scenario.n_anchors = std::min<std::size_t>(50, base.n_anchors);
                o.concurrency = config.concurrency;
                reports.push_back(exp_search_cost(o));
            }
            OptimalityOptions o;
            o.scenario = base;
            o.seeds.clear();
            for (std::uint64_t i = 0; i < 20; ++i) o.seeds.push_back(seed * 1000 + i);
            reports.push_back(exp_optimality(o));

            for (const auto& r : reports) {
                write_report(r, dir);
                for (const auto& c : r.checks) {
                    out << "seed " << seed << ": " << (c.passed ? "PASS " : "FAIL ") << r.name << '/' << c.name << ": "
                        << c.detail << '\n';
                    table.rows.push_back({std::to_string(seed), r.name, c.name, c.passed ? "1" : "0", c.detail});
                    all = all && c.passed;
                }
            }
            write_config(config, dir);
        }
        write_csv_file(fs::path(config.out) / "eval_summary.csv", table);
        out << (all ? "all checks passed" : "some checks failed") << '\n';
        return all ? kExitSuccess : kExitPartial;
    });
}

// ---------------------------------------------------------------------------
// Argument parsing

namespace {

void add_options(CLI::App& app, RunConfig& c, std::string& config_path) {
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    app.add_option("--provider", c.provider, "simulator | live");
    app.add_flag("--live", c.live, "allow network access (required for --provider live)");
    app.add_option("--region", c.region, "region code");
    app.add_option("--timespan", c.timespan, "\"YYYY-MM-DD YYYY-MM-DD\"");
    app.add_option("--frequencies", c.frequencies, "candidate frequency list (TSV)");
    app.add_option("--bank", c.bank, "bank file");
    app.add_option("--queries", c.queries, "query file, one id per line");
    app.add_option("--cache-dir", c.cache_dir, "response cache directory");
    app.add_option("--out", c.out, "output directory");
    app.add_option("-k,--k", c.k, "queries per request");
    app.add_option("--tau", c.tau, "minimum observed maximum for a usable pair");
    app.add_option("-N,--N,--candidates", c.N, "size of the candidate prefix");
    app.add_option("-n,--n,--anchors", c.n, "number of sampled anchors");
    app.add_option("--search-tolerance", c.search_tolerance, "binary search tolerance, e.g. 1/10");
    app.add_option("--target-ratio", c.target_ratio, "target hop ratio c for the optimizer");
    app.add_option("--max-gap", c.max_gap, "largest tolerated ratio between adjacent optimized anchors");
    app.add_option("--seed", c.seed, "sampling seed");
    app.add_option("--reference-policy", c.reference_policy, "most_popular | close_to_median | fixed");
    app.add_option("--reference", c.reference, "reference query for --reference-policy fixed");
    app.add_option("-j,--concurrency", c.concurrency, "requests in flight");
    app.add_option("--seeds", c.seeds, "seeds for eval")->delimiter(',');
    app.add_option("--sim-candidates", c.sim.candidates, "simulated anchor candidates");
    app.add_option("--sim-range", c.sim.range, "orders of magnitude spanned by simulated candidates");
    app.add_option("--sim-queries", c.sim.queries, "simulated query population size");
    app.add_option("--sim-query-offset", c.sim.query_offset, "log10 of the least popular simulated query");
    app.add_option("--sim-query-range", c.sim.query_range, "orders of magnitude spanned by simulated queries");
    app.add_option("--sim-shape", c.sim.shape, "flat | seasonal | impulse | mixed");
    app.add_option("--sim-rounding", c.sim.rounding, "nearest | floor | none");
    app.add_option("--sim-seed", c.sim.seed, "simulated world seed");
}

// Value of --config, looked up before the full parse so that flags can
// override the file.
std::optional<std::string> find_config(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return std::nullopt;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig config;
    if (const auto path = find_config(args)) {
        try {
            config.merge_json(json::parse(read_file(*path)));
        } catch (const UsageError& e) {
            err << "usage error: " << e.what() << '\n';
            return kExitUsage;
        } catch (const std::exception& e) {
            err << "usage error: cannot load config '" << *path << "': " << e.what() << '\n';
            return kExitUsage;
        }
    }

    CLI::App app{"Calibrate relative search-interest series onto one common scale"};
    app.name("trendcal");
    app.require_subcommand(1);
    std::string config_path;
    struct Command {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&, std::ostream&, std::ostream&);
    };
    const Command commands[] = {
        {"build", "sample anchors, fetch shingled requests, and write a calibrated bank", cmd_build},
        {"optimize", "select a near-equidistant anchor subset and re-measure it pairwise", cmd_optimize},
        {"calibrate", "calibrate queries against a bank and write CSV results", cmd_calibrate},
        {"eval", "run the evaluation experiments against the simulator", cmd_eval},
    };
    for (const auto& cmd : commands) add_options(*app.add_subcommand(cmd.name, cmd.help), config, config_path);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitSuccess : kExitUsage;
    }
    for (const auto& cmd : commands) {
        if (app.got_subcommand(cmd.name)) return cmd.run(config, out, err);
    }
    return kExitUsage;
}

}  // namespace trendcal
