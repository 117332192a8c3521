// amfs command line: validate, run, compare, plan, serve.

#include "amfs/json_io.hpp"
#include "amfs/plan.hpp"
#include "amfs/server.hpp"
#include "amfs/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace amfs;

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kUsage = 2;

std::atomic<bool> g_stop{false};

class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

void on_signal(int) { g_stop = true; }

/// "1,2,5-8" -> {1,2,5,6,7,8}
std::vector<std::uint64_t> parse_seeds(const std::string& s)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        auto dash = part.find('-');
        try {
            std::size_t used = 0;
            if (dash == std::string::npos) {
                out.push_back(std::stoull(part, &used));
                if (used != part.size()) throw std::invalid_argument(part);
            } else {
                auto lo = std::stoull(part.substr(0, dash));
                auto hi = std::stoull(part.substr(dash + 1));
                if (hi < lo) throw std::invalid_argument(part);
                for (auto x = lo; x <= hi; ++x) out.push_back(x);
            }
        } catch (const std::logic_error&) {
            throw UsageError("invalid seed list '" + s + "'");
        }
    }
    if (out.empty()) throw UsageError("empty seed list");
    return out;
}

RoutingStrategy strategy_arg(const std::string& s)
{
    auto v = parse_strategy(s);
    if (!v) throw UsageError("unknown strategy '" + s + "' (ssr, baseline_occupancy, static_fixed)");
    return *v;
}

void write_file(const fs::path& p, const std::string& content)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError(p.string() + ": cannot write file");
    out << content;
    if (!out) throw IoError(p.string() + ": write failed");
}

/// Maps library errors onto the exit code contract.
template <typename F>
int guarded(F&& f)
{
    try {
        return f();
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ScenarioFileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kViolation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
}

int cmd_validate(const std::vector<std::string>& paths)
{
    int code = kOk;
    for (const auto& p : paths) {
        std::ifstream in(p);
        if (!in) {
            std::cerr << p << ": cannot open file\n";
            return kUsage;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            load_descriptor(ss.str());
            std::cout << p << ": ok\n";
        } catch (const ValidationError& e) {
            code = kViolation;
            std::cout << p << ": invalid\n";
            for (const auto& v : e.report()) std::cout << "  " << v.field_path << ": " << v.reason << "\n";
        } catch (const ParseError& e) {
            code = kViolation;
            std::cout << p << ": " << e.what() << "\n";
        }
    }
    return code;
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed, std::optional<std::string> strategy,
            const std::string& out_dir)
{
    auto config = load_scenario(scenario);
    if (seed) config.seed = *seed;
    if (strategy) config.strategy = strategy_arg(*strategy);

    Simulation sim(config);
    sim.run_to_completion();
    auto metrics = compute_metrics(sim.log(), config.horizon);

    fs::create_directories(out_dir);
    fs::path dir(out_dir);
    write_file(dir / "metrics.txt", metrics_table(metrics));
    write_file(dir / "metrics.json", metrics_json(metrics));
    write_file(dir / "events.jsonl", sim.log().to_jsonl());
    if (sim.strategy() == RoutingStrategy::static_fixed) {
        RouteSet fixed;
        for (const auto& [rel, r] : sim.fixed_routes()) fixed.routes[r.route_id] = r;
        write_file(dir / "routes.json", route_plan_json(fixed));
    } else {
        write_file(dir / "routes.json", route_plan_json(sim.coordinator().routes));
    }
    std::string diag;
    for (const auto& d : sim.diagnostics()) diag += d + "\n";
    write_file(dir / "diagnostics.txt", diag);

    std::cout << metrics_table(metrics);
    for (const auto& d : sim.diagnostics()) std::cerr << "diagnostic: " << d << "\n";
    return sim.halted() ? kViolation : kOk;
}

int cmd_compare(const std::string& scenario, std::vector<std::string> strategies, const std::string& seeds_arg)
{
    auto config = load_scenario(scenario);
    auto seeds = parse_seeds(seeds_arg);
    if (strategies.empty()) strategies = {"ssr", "baseline_occupancy"};

    struct Row {
        std::string name;
        std::vector<double> throughput;
        double process_sum = 0.0;
        std::size_t delivered = 0;
        std::vector<std::uint64_t> failed;
    };
    std::vector<Row> rows;
    for (const auto& s : strategies) {
        Row row{s, {}, 0.0, 0, {}};
        auto strategy = strategy_arg(s);
        for (auto seed : seeds) {
            auto c = config;
            c.seed = seed;
            c.strategy = strategy;
            try {
                auto r = run_scenario(c);
                row.throughput.push_back(r.metrics.total_throughput());
                for (const auto& [id, rel] : r.metrics.relations) {
                    row.process_sum += rel.mean_process_time * static_cast<double>(rel.delivered);
                    row.delivered += rel.delivered;
                }
            } catch (const Error& e) {
                row.failed.push_back(seed);
                std::cerr << "error: " << s << " seed " << seed << ": " << e.what() << "\n";
            }
        }
        rows.push_back(std::move(row));
    }

    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    std::cout << std::left << std::setw(20) << "strategy" << std::right << std::setw(6) << "runs" << std::setw(12)
              << "tu_per_min" << std::setw(10) << "min" << std::setw(10) << "max" << std::setw(14) << "mean_pt_s"
              << "\n";
    std::cout << std::fixed << std::setprecision(3);
    bool partial = false;
    for (const auto& r : rows) {
        auto [lo, hi] = r.throughput.empty() ? std::pair(0.0, 0.0)
                                             : std::pair(*std::min_element(r.throughput.begin(), r.throughput.end()),
                                                         *std::max_element(r.throughput.begin(), r.throughput.end()));
        double pt = r.delivered ? r.process_sum / static_cast<double>(r.delivered) : 0.0;
        std::cout << std::left << std::setw(20) << r.name << std::right << std::setw(6) << r.throughput.size()
                  << std::setw(12) << mean(r.throughput) << std::setw(10) << lo << std::setw(10) << hi
                  << std::setw(14) << pt;
        if (!r.failed.empty()) {
            partial = true;
            std::cout << "  PARTIAL (failed seeds:";
            for (auto s : r.failed) std::cout << " " << s;
            std::cout << ")";
        }
        std::cout << "\n";
    }
    auto find = [&](std::string_view n) -> const Row* {
        for (const auto& r : rows)
            if (r.name == n) return &r;
        return nullptr;
    };
    const Row* ssr = find("ssr");
    const Row* base = find("baseline_occupancy");
    if (ssr && base) {
        double b = mean(base->throughput);
        std::cout << "ratio ssr/baseline_occupancy: ";
        if (b > 0) std::cout << mean(ssr->throughput) / b << "\n";
        else std::cout << "undefined (baseline throughput is 0)\n";
    }
    return partial ? kViolation : kOk;
}

int cmd_plan(const std::string& scenario, const std::string& out)
{
    auto config = load_scenario(scenario);
    auto plan = plan_routes(config);
    auto json = route_plan_json(plan.coordinator.routes, plan.rejected);
    if (out.empty()) std::cout << json;
    else write_file(out, json);
    for (const auto& e : plan.registration_errors) std::cerr << "registration: " << e << "\n";
    for (const auto& [rel, why] : plan.rejected) std::cerr << "relation " << rel << ": " << why << "\n";
    return plan.complete() ? kOk : kViolation;
}

int cmd_serve(const std::string& scenario, const std::string& listen, double rate, bool paused)
{
    auto config = load_scenario(scenario);
    if (!(rate > 0)) throw UsageError("--rate must be > 0");
    Simulation sim(config);
    Gateway gateway(sim, fs::path(scenario).parent_path(), paused, rate);
    ListenAddress address;
    try {
        address = parse_listen_address(listen);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    std::unique_ptr<GatewayServer> holder;
    try {
        holder = std::make_unique<GatewayServer>(gateway, address, config.name);
    } catch (const Error& e) {
        throw IoError(e.what());
    }
    auto& server = *holder;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on " << address.host << ":" << server.port() << std::endl;
    server.run(g_stop);
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Agent-based material flow system simulator"};
    app.require_subcommand(1);

    std::vector<std::string> validate_paths;
    auto* validate = app.add_subcommand("validate", "Validate module descriptor files");
    validate->add_option("paths", validate_paths, "Descriptor files")->required();

    std::string scenario, out_dir = "out", strategy, seeds = "1-10", listen = "127.0.0.1:7400", plan_out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> strategies;
    double rate = 1.0;
    bool paused = false;

    auto* run = app.add_subcommand("run", "Run a scenario and write metrics, event log and routes");
    run->add_option("--scenario", scenario, "Scenario file")->required();
    run->add_option("--seed", seed, "Seed override");
    run->add_option("--strategy", strategy, "Routing strategy override");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();

    auto* compare = app.add_subcommand("compare", "Compare routing strategies over seeds");
    compare->add_option("--scenario", scenario, "Scenario file")->required();
    compare->add_option("--strategy", strategies, "Strategies (repeat or comma separated)")->delimiter(',');
    compare->add_option("--seeds", seeds, "Seed list, e.g. 1-10 or 1,2,3")->capture_default_str();

    auto* plan = app.add_subcommand("plan", "Negotiate routes without running transports");
    plan->add_option("--scenario", scenario, "Scenario file")->required();
    plan->add_option("--out", plan_out, "Output file (default stdout)");

    auto* serve = app.add_subcommand("serve", "Host the operator gateway");
    serve->add_option("--scenario", scenario, "Scenario file")->required();
    serve->add_option("--listen", listen, "host:port")->capture_default_str();
    serve->add_option("--rate", rate, "Simulated seconds per wall second")->capture_default_str();
    serve->add_flag("--paused", paused, "Start paused");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (*validate) return cmd_validate(validate_paths);
    if (*run) return guarded([&] { return cmd_run(scenario, seed, strategy.empty() ? std::nullopt : std::optional(strategy), out_dir); });
    if (*compare) return guarded([&] { return cmd_compare(scenario, strategies, seeds); });
    if (*plan) return guarded([&] { return cmd_plan(scenario, plan_out); });
    if (*serve) return guarded([&] { return cmd_serve(scenario, listen, rate, paused); });
    return kUsage;
}
