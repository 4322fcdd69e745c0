#include "poolalloc/estimation.hpp"
#include "poolalloc/frontier.hpp"
#include "poolalloc/service.hpp"
#include "poolalloc/sirq.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

using namespace poolalloc;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kComputeError = 2;

struct EstimateArgs
{
    std::string interactions;
    std::string tests;
    std::string out;
    std::string base;
    double smoothing = 1.0;
    std::size_t window = 1;
    std::vector<std::string> overrides;
};

struct FrontierArgs
{
    std::string scenario;
    std::optional<std::int64_t> desired;
    std::uint64_t seed = 0;
    std::int64_t tolerance = -1;
    int max_iters = 40;
    std::int64_t cap = 10'000'000;
    bool serial = false;
    std::string out;
    std::size_t show = 25;
};

struct SimulateArgs
{
    std::string scenario;
    std::string strategy_file;
    int days = 80;
    std::int64_t replicates = 30;
    std::uint64_t seed = 1;
    std::string out;
    std::string plot;
    std::vector<std::string> plot_categories;
    double beta = 0.01;
    double gamma = 0.0427;
    int quarantine_days = 14;
    int test_period = 7;
    std::vector<std::int64_t> initial_infected;
    int window_first = 20;
    int window_last = 80;
    std::int64_t r0_trials = 200;
};

struct ServeArgs
{
    std::string addr = "127.0.0.1:8080";
    std::string store = "poolalloc.db";
    std::int64_t cap = 10'000'000;
    int workers = 2;
    int sync_wait_ms = 2000;
    std::string cors_origin = "*";
    bool print_config = false;
};

std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    return in;
}

std::pair<std::string, double> parse_override(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::runtime_error("--p-override expects CATEGORY=VALUE, got '" + text + "'");
    try {
        std::size_t used = 0;
        const std::string value = text.substr(eq + 1);
        const double v = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return {text.substr(0, eq), v};
    } catch (const std::logic_error&) {
        throw std::runtime_error("--p-override value is not a number in '" + text + "'");
    }
}

int run_estimate(const EstimateArgs& args)
{
    auto in_inter = open_input(args.interactions);
    auto in_tests = open_input(args.tests);
    const auto interactions = read_interactions_csv(in_inter);
    const auto tests = read_tests_csv(in_tests);

    std::optional<Scenario> base;
    std::vector<CategoryDecl> decls;
    if (!args.base.empty()) {
        base = parse_scenario(read_file(args.base));
        for (const auto& c : base->categories)
            decls.push_back({c.id, c.n});
    } else {
        // Without a base scenario, n_i is the number of distinct people seen in C_i.
        std::map<std::string, std::set<std::string>> people;
        std::vector<std::string> order;
        auto note = [&](const std::string& id) {
            if (!people.count(id))
                order.push_back(id);
            people[id];
        };
        for (const auto& r : interactions) {
            note(r.category_id);
            people[r.category_id].insert(r.person_id);
        }
        for (const auto& t : tests)
            note(t.category_id);
        for (const auto& id : order)
            decls.push_back({id, static_cast<std::int64_t>(people[id].size())});
    }

    PriorOptions prior;
    prior.smoothing = args.smoothing;
    prior.window = args.window;
    for (const auto& o : args.overrides)
        prior.overrides.insert(parse_override(o));

    EstimatedParameters est;
    est.categories = decls;
    est.exposure = estimate_exposure(interactions, decls);
    est.prior = estimate_prior(tests, decls, prior);

    json out = to_json(est);
    if (base) {
        Scenario sc = *base;
        for (std::size_t i = 0; i < sc.k(); ++i)
            sc.categories[i].p = est.prior.p[i];
        sc.exposure.d = est.exposure.d;
        json full = to_json(sc);
        full["support"] = out["support"];
        full["warnings"] = out["warnings"];
        out = std::move(full);
    }
    for (const auto& w : out["warnings"])
        std::cerr << "warning: " << w.get<std::string>() << '\n';

    const std::string text = out.dump(2) + "\n";
    if (args.out.empty() || args.out == "-")
        std::cout << text;
    else
        write_file(args.out, text);
    std::cerr << "estimated " << decls.size() << " categories from " << interactions.size() << " interaction rows and "
              << tests.size() << " test rows\n";
    return kOk;
}

std::string join_ints(const auto& values)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < values.size(); ++i)
        os << (i ? "," : "") << values[i];
    return os.str();
}

void print_frontier_table(std::ostream& os, const Scenario& sc, const FrontierResult& r, std::size_t show)
{
    os << "feasible strategies: " << r.total_feasible << " (enumerated " << r.total_enumerated << ")\n";
    os << "frontier solutions:  " << r.solutions.size() << "\n";
    if (r.target) {
        os << "target:              desired " << r.target->desired << " +-" << r.target->tolerance << ", alpha "
           << r.target->alpha << ", " << r.target->iterations << " iterations" << (r.target->capped ? ", capped" : "")
           << (r.target->reached ? "" : ", not reached") << "\n";
    }
    os << "seed:                " << r.seed << "\n\n";

    os << std::left << std::setw(10) << "id" << std::setw(18) << "t" << std::setw(14) << "g" << std::right
       << std::setw(12) << "health";
    for (const auto& c : sc.categories)
        os << std::setw(12) << ("Q:" + c.id);
    os << '\n';
    const auto n = std::min(show, r.solutions.size());
    os << std::fixed << std::setprecision(3);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& e = r.solutions[s];
        os << std::left << std::setw(10) << e.id << std::setw(18) << join_ints(e.strategy.t) << std::setw(14)
           << join_ints(e.strategy.g) << std::right << std::setw(12) << e.objectives.health;
        for (double q : e.objectives.quarantine)
            os << std::setw(12) << q;
        os << '\n';
    }
    if (n < r.solutions.size())
        os << "... " << (r.solutions.size() - n) << " more\n";
    os.unsetf(std::ios::floatfield);
}

int run_frontier(const FrontierArgs& args)
{
    const Scenario sc = parse_scenario(read_file(args.scenario));
    FrontierOptions options;
    options.feasible_cap = args.cap;
    options.parallel = !args.serial;

    FrontierResult result;
    if (args.desired) {
        if (*args.desired < 1)
            throw ValidationError("desired positive", "--desired must be >= 1");
        TargetOptions target;
        target.tolerance = args.tolerance;
        target.max_iters = args.max_iters;
        result = target_count_buckets(sc, *args.desired, args.seed, target, options).second;
    } else {
        result = args.serial ? pareto_frontier_serial(sc, options) : pareto_frontier(sc, options);
        result.seed = args.seed;
    }

    if (!args.out.empty())
        write_file(args.out, to_json(result).dump(2) + "\n");
    print_frontier_table(std::cout, sc, result, args.show);
    return kOk;
}

std::vector<sirq::LabeledStrategy> read_strategies(const std::string& path)
{
    const json j = parse_json_text(read_file(path));
    json items = json::array();
    if (j.is_array())
        items = j;
    else if (j.is_object() && j.contains("strategies"))
        items = j["strategies"];
    else
        items.push_back(j);

    std::vector<sirq::LabeledStrategy> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        sirq::LabeledStrategy ls;
        ls.strategy = strategy_from_json(items[i]);
        if (items[i].contains("label") && items[i]["label"].is_string())
            ls.label = items[i]["label"].get<std::string>();
        else
            ls.label = "strategy" + std::to_string(i + 1);
        out.push_back(std::move(ls));
    }
    if (out.empty())
        throw ValidationError("schema", "strategy file holds no strategies");
    return out;
}

int run_simulate(const SimulateArgs& args)
{
    sirq::SimConfig sim;
    sim.scenario = parse_scenario(read_file(args.scenario));
    sim.beta = args.beta;
    sim.gamma = args.gamma;
    sim.quarantine_days = args.quarantine_days;
    sim.test_period_days = args.test_period;
    sim.horizon_days = args.days;
    sim.rng_seed = args.seed;
    sim.initial_infected = args.initial_infected;
    if (sim.initial_infected.empty())
        sim.initial_infected.assign(sim.scenario.k(), 1);
    sim.validate();

    const auto strategies = read_strategies(args.strategy_file);
    for (const auto& ls : strategies) {
        const bool baseline = std::all_of(ls.strategy.t.begin(), ls.strategy.t.end(), [](auto t) { return t == 0; }) &&
                              ls.strategy.t.size() == sim.scenario.k();
        if (baseline)
            continue;
        if (auto why = feasibility_violation(sim.scenario, ls.strategy))
            throw InfeasibleStrategy("strategy '" + ls.label + "' is infeasible: " + *why);
    }

    sirq::CompareOptions options;
    options.replicates = args.replicates;
    options.window_first = args.window_first;
    options.window_last = std::min(args.window_last, args.days);
    const auto cmp = sirq::compare_profiles(sim, strategies, options);

    if (args.out.empty() || args.out == "-") {
        sirq::write_csv(std::cout, sim.scenario, cmp.runs);
    } else {
        std::ofstream out(args.out, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write '" + args.out + "'");
        sirq::write_csv(out, sim.scenario, cmp.runs);
    }

    if (!args.plot.empty()) {
        std::vector<std::size_t> cats;
        for (const auto& id : args.plot_categories) {
            std::size_t i = 0;
            while (i < sim.scenario.k() && sim.scenario.categories[i].id != id)
                ++i;
            if (i == sim.scenario.k())
                throw ValidationError("plot category", "unknown category '" + id + "' in --plot-category");
            cats.push_back(i);
        }
        if (cats.empty()) {
            for (std::size_t i = 0; i < sim.scenario.k(); ++i)
                cats.push_back(i);
        }
        write_file(args.plot, sirq::render_quarantine_svg(sim.scenario, cmp, cats));
    }

    std::ostream& log = (args.out.empty() || args.out == "-") ? std::cerr : std::cout;
    log << "mean quarantined per day, days " << cmp.window_first << "-" << cmp.window_last << ", " << args.replicates
        << " replicates\n";
    log << std::fixed << std::setprecision(3);
    for (const auto& s : cmp.summaries) {
        log << "  " << s.label << ":";
        for (std::size_t i = 0; i < sim.scenario.k(); ++i)
            log << ' ' << sim.scenario.categories[i].id << '=' << s.window_mean_quarantined[i];
        log << '\n';
    }
    if (args.r0_trials > 0) {
        const auto contact = sirq::estimate_r0(sim, args.r0_trials, sirq::IndexSelection::RandomContact);
        const auto uniform = sirq::estimate_r0(sim, args.r0_trials, sirq::IndexSelection::UniformNode);
        log << "R0 (random-contact index, " << args.r0_trials << " trials): " << contact.mean << " +- "
            << contact.standard_error << '\n';
        log << "R0 (uniform index, " << args.r0_trials << " trials):        " << uniform.mean << " +- "
            << uniform.standard_error << '\n';
    }
    return kOk;
}

ServiceConfig service_config(const ServeArgs& args)
{
    ServiceConfig cfg;
    const auto colon = args.addr.rfind(':');
    if (colon == std::string::npos)
        throw std::runtime_error("--addr expects HOST:PORT, got '" + args.addr + "'");
    cfg.host = args.addr.substr(0, colon);
    try {
        std::size_t used = 0;
        const std::string port = args.addr.substr(colon + 1);
        cfg.port = std::stoi(port, &used);
        if (used != port.size() || cfg.port < 0 || cfg.port > 65535)
            throw std::invalid_argument(port);
    } catch (const std::logic_error&) {
        throw std::runtime_error("invalid port in --addr '" + args.addr + "'");
    }
    if (args.workers < 1)
        throw std::runtime_error("--workers must be >= 1");
    if (args.cap < 1)
        throw std::runtime_error("--cap must be >= 1");
    cfg.store_path = args.store;
    cfg.feasible_cap = args.cap;
    cfg.workers = args.workers;
    cfg.sync_wait_ms = args.sync_wait_ms;
    cfg.cors_origin = args.cors_origin;
    return cfg;
}

int run_serve(const ServeArgs& args)
{
    const ServiceConfig cfg = service_config(args);
    if (args.print_config) {
        std::cout << json{{"host", cfg.host},
                          {"port", cfg.port},
                          {"store", cfg.store_path},
                          {"cap", cfg.feasible_cap},
                          {"workers", cfg.workers},
                          {"sync_wait_ms", cfg.sync_wait_ms},
                          {"cors_origin", cfg.cors_origin}}
                         .dump()
                  << '\n';
        return kOk;
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Service service(cfg);
    const int port = service.bind();
    std::cout << "listening on http://" << cfg.host << ':' << port << "/v1" << std::endl;

    std::thread watcher([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        service.stop();
    });
    service.serve();
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    return kOk;
}

template <class Fn>
int guarded(Fn&& fn)
{
    try {
        return fn();
    } catch (const CapExceeded& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kComputeError;
    } catch (const InfeasibleScenario& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kComputeError;
    } catch (const InfeasibleStrategy& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const ValidationError& e) {
        std::cerr << "error: invalid input (" << e.invariant() << "): " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Pooled-testing allocation: estimate parameters, compute frontiers, simulate, serve"};
    app.require_subcommand(1);

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "Estimate d and p from interaction and test CSVs");
    estimate->add_option("--interactions", est.interactions, "CSV: person_id,category_id,event_id")->required();
    estimate->add_option("--tests", est.tests, "CSV: category_id,tested,positive,period_label")->required();
    estimate->add_option("--out", est.out, "Output JSON (stdout if omitted)");
    estimate->add_option("--base", est.base, "Scenario supplying n, v, pi, budget and group settings");
    estimate->add_option("--smoothing", est.smoothing, "Additive smoothing for the prior")->check(CLI::NonNegativeNumber);
    estimate->add_option("--window", est.window, "Number of most recent periods to aggregate")->check(CLI::PositiveNumber);
    estimate->add_option("--p-override", est.overrides, "Manual prior CATEGORY=VALUE (repeatable)");

    FrontierArgs fr;
    auto* frontier = app.add_subcommand("frontier", "Compute the (bucketed) Pareto frontier");
    frontier->add_option("--scenario", fr.scenario, "Scenario JSON")->required();
    frontier->add_option("--desired", fr.desired, "Target solution count (bucketed frontier)");
    frontier->add_option("--seed", fr.seed, "Seed for bucket representatives");
    frontier->add_option("--tolerance", fr.tolerance, "Allowed deviation from --desired (default max(1, desired/10))");
    frontier->add_option("--max-iters", fr.max_iters, "Bisection iterations")->check(CLI::NonNegativeNumber);
    frontier->add_option("--cap", fr.cap, "Feasible strategy cap")->envname("POOLALLOC_CAP");
    frontier->add_flag("--serial", fr.serial, "Use the sequential reference");
    frontier->add_option("--out", fr.out, "Output JSON");
    frontier->add_option("--show", fr.show, "Rows in the summary table");

    SimulateArgs sm;
    auto* simulate = app.add_subcommand("simulate", "Run SIRQ simulations for one or more strategies");
    simulate->add_option("--scenario", sm.scenario, "Scenario JSON")->required();
    simulate->add_option("--strategy-file", sm.strategy_file, "Strategy JSON: object, array, or {strategies: [...]}")
        ->required();
    simulate->add_option("--days", sm.days, "Simulation horizon")->check(CLI::PositiveNumber);
    simulate->add_option("--replicates", sm.replicates, "Replicates per strategy")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sm.seed, "Base RNG seed");
    simulate->add_option("--out", sm.out, "CSV output (stdout if omitted)");
    simulate->add_option("--plot", sm.plot, "SVG of mean quarantined per day");
    simulate->add_option("--plot-category", sm.plot_categories, "Category id to plot (repeatable; default all)");
    simulate->add_option("--beta", sm.beta, "Per-contact daily infection probability");
    simulate->add_option("--gamma", sm.gamma, "Daily recovery probability");
    simulate->add_option("--quarantine-days", sm.quarantine_days, "Quarantine length");
    simulate->add_option("--test-period", sm.test_period, "Days between test rounds")->check(CLI::PositiveNumber);
    simulate->add_option("--initial-infected", sm.initial_infected, "Initial infections per category (default 1 each)")
        ->delimiter(',');
    simulate->add_option("--window-first", sm.window_first, "First day of the summary window");
    simulate->add_option("--window-last", sm.window_last, "Last day of the summary window");
    simulate->add_option("--r0-trials", sm.r0_trials, "Trials for the R0 check (0 disables)")
        ->check(CLI::NonNegativeNumber);

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "Run the REST service");
    serve->add_option("--addr", sv.addr, "Listen address HOST:PORT")->envname("POOLALLOC_ADDR");
    serve->add_option("--store", sv.store, "SQLite store path")->envname("POOLALLOC_STORE");
    serve->add_option("--cap", sv.cap, "Feasible strategy cap")->envname("POOLALLOC_CAP");
    serve->add_option("--workers", sv.workers, "Frontier worker threads")->envname("POOLALLOC_WORKERS");
    serve->add_option("--sync-wait-ms", sv.sync_wait_ms, "Wait before answering 202");
    serve->add_option("--cors-origin", sv.cors_origin, "Access-Control-Allow-Origin value");
    serve->add_flag("--print-config", sv.print_config, "Print the resolved configuration and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    }

    if (*estimate)
        return guarded([&] { return run_estimate(est); });
    if (*frontier)
        return guarded([&] { return run_frontier(fr); });
    if (*simulate)
        return guarded([&] { return run_simulate(sm); });
    return guarded([&] { return run_serve(sv); });
}
