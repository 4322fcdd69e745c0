#include "poolalloc/sirq.hpp"

#include "exception_sink.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace poolalloc::sirq {

namespace {

enum : std::uint64_t
{
    kStreamNetwork = 1,
    kStreamInitial = 2,
    kStreamDynamics = 3,
    kStreamR0Network = 4,
    kStreamR0Index = 5,
    kStreamBlock = 6,
};

enum State : std::uint8_t
{
    kSusceptible = 0,
    kInfected = 1,
    kRecovered = 2,
};

using Rng = std::mt19937_64;

double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t uniform_below(Rng& rng, std::uint64_t n)
{
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Partially shuffles pool so its first `take` entries are a uniform sample without replacement.
template <class T>
void sample_prefix(std::vector<T>& pool, std::size_t take, Rng& rng)
{
    take = std::min(take, pool.size());
    for (std::size_t x = 0; x < take; ++x) {
        const auto y = x + static_cast<std::size_t>(uniform_below(rng, pool.size() - x));
        std::swap(pool[x], pool[y]);
    }
}

bool is_no_testing(const Strategy& s)
{
    return std::all_of(s.t.begin(), s.t.end(), [](std::int64_t t) { return t == 0; });
}

struct CoreOptions
{
    const Strategy* strategy = nullptr; // null: no testing
    int horizon = 0;
    bool stop_when_index_recovered = false;
    bool record_days = true;
};

SimRun simulate(const ContactNetwork& net, const SimConfig& sim, const std::vector<std::int32_t>& index_cases,
                Rng& rng, const CoreOptions& opt)
{
    const std::size_t k = net.categories();
    const std::int32_t n = net.node_count();

    std::vector<std::uint8_t> state(static_cast<std::size_t>(n), kSusceptible);
    std::vector<int> release(static_cast<std::size_t>(n), 0); // quarantined while release > day
    std::vector<std::int32_t> index_slot(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> S(k), I(k, 0), R(k, 0), Q(k, 0);
    for (std::size_t i = 0; i < k; ++i)
        S[i] = net.category_size(i);

    SimRun out;
    out.index_cases = index_cases;
    out.index_secondary.assign(index_cases.size(), 0);

    std::vector<std::int32_t> infected;
    for (std::size_t x = 0; x < index_cases.size(); ++x) {
        const auto v = index_cases[x];
        index_slot[static_cast<std::size_t>(v)] = static_cast<std::int32_t>(x);
        if (state[static_cast<std::size_t>(v)] != kInfected) {
            state[static_cast<std::size_t>(v)] = kInfected;
            const auto c = net.category_of(v);
            --S[c];
            ++I[c];
            infected.push_back(v);
        }
    }
    std::size_t index_alive = index_cases.size();

    const int qdays = sim.quarantine_days;
    std::vector<std::vector<std::int32_t>> releases;
    std::vector<std::int32_t> pool;
    const bool testing = opt.strategy != nullptr && !is_no_testing(*opt.strategy);

    for (int day = 1; day <= opt.horizon; ++day) {
        if (static_cast<std::size_t>(day) < releases.size()) {
            for (auto v : releases[static_cast<std::size_t>(day)])
                --Q[net.category_of(v)];
            releases[static_cast<std::size_t>(day)].clear();
        }

        // (1) pooled tests on test days
        if (testing && (day - 1) % sim.test_period_days == 0) {
            for (std::size_t i = 0; i < k; ++i) {
                const auto tests = opt.strategy->t[i];
                const int g = opt.strategy->g[i];
                if (tests == 0)
                    continue;
                pool.clear();
                const auto first = net.first_node(i);
                for (std::int32_t v = first; v < first + net.category_size(i); ++v) {
                    if (release[static_cast<std::size_t>(v)] <= day)
                        pool.push_back(v);
                }
                const auto groups = std::min<std::int64_t>(tests, static_cast<std::int64_t>(pool.size()) / g);
                sample_prefix(pool, static_cast<std::size_t>(groups * g), rng);
                for (std::int64_t grp = 0; grp < groups; ++grp) {
                    const auto* members = pool.data() + grp * g;
                    const bool positive = std::any_of(members, members + g, [&](std::int32_t v) {
                        return state[static_cast<std::size_t>(v)] == kInfected;
                    });
                    if (!positive)
                        continue;
                    const int until = day + qdays;
                    if (releases.size() <= static_cast<std::size_t>(until))
                        releases.resize(static_cast<std::size_t>(until) + 1);
                    for (int m = 0; m < g; ++m) {
                        const auto v = members[m];
                        release[static_cast<std::size_t>(v)] = until;
                        releases[static_cast<std::size_t>(until)].push_back(v);
                        ++Q[net.category_of(v)];
                    }
                }
            }
        }

        // (2) transmission from free infected nodes to free susceptible neighbours
        const std::size_t active = infected.size();
        for (std::size_t x = 0; x < active; ++x) {
            const auto u = infected[x];
            if (release[static_cast<std::size_t>(u)] > day)
                continue;
            const auto slot = index_slot[static_cast<std::size_t>(u)];
            for (const auto* it = net.neighbors_begin(u); it != net.neighbors_end(u); ++it) {
                const auto v = *it;
                if (state[static_cast<std::size_t>(v)] != kSusceptible || release[static_cast<std::size_t>(v)] > day)
                    continue;
                if (uniform01(rng) >= sim.beta)
                    continue;
                state[static_cast<std::size_t>(v)] = kInfected;
                const auto c = net.category_of(v);
                --S[c];
                ++I[c];
                infected.push_back(v);
                if (slot >= 0)
                    ++out.index_secondary[static_cast<std::size_t>(slot)];
            }
        }

        // (3) recovery of nodes infectious at the start of the day, quarantined or not
        std::size_t w = 0;
        for (std::size_t x = 0; x < infected.size(); ++x) {
            const auto u = infected[x];
            if (x < active && uniform01(rng) < sim.gamma) {
                state[static_cast<std::size_t>(u)] = kRecovered;
                const auto c = net.category_of(u);
                --I[c];
                ++R[c];
                if (index_slot[static_cast<std::size_t>(u)] >= 0)
                    --index_alive;
                continue;
            }
            infected[w++] = u;
        }
        infected.resize(w);

        if (opt.record_days) {
            std::vector<DayCounts> today(k);
            for (std::size_t i = 0; i < k; ++i)
                today[i] = {S[i], I[i], R[i], Q[i]};
            out.days.push_back(std::move(today));
        }
        if (opt.stop_when_index_recovered && index_alive == 0)
            break;
    }
    return out;
}

std::vector<std::int32_t> draw_initial(const ContactNetwork& net, const std::vector<std::int64_t>& counts, Rng& rng)
{
    std::vector<std::int32_t> chosen;
    std::vector<std::int32_t> members;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0)
            continue;
        members.resize(static_cast<std::size_t>(net.category_size(i)));
        std::iota(members.begin(), members.end(), net.first_node(i));
        sample_prefix(members, static_cast<std::size_t>(counts[i]), rng);
        chosen.insert(chosen.end(), members.begin(), members.begin() + counts[i]);
    }
    return chosen;
}

void check_strategy(const SimConfig& sim, const Strategy& strategy)
{
    check_dimensions(sim.scenario, strategy);
    if (is_no_testing(strategy))
        return;
    if (auto why = feasibility_violation(sim.scenario, strategy))
        throw InfeasibleStrategy("infeasible strategy: " + *why);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replicate, std::uint64_t stream)
{
    return splitmix64(splitmix64(base ^ splitmix64(stream)) + replicate);
}

void SimConfig::validate() const
{
    scenario.validate();
    auto prob = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
    if (!prob(beta))
        throw ValidationError("beta out of range", "beta must lie in [0,1]");
    if (!prob(gamma))
        throw ValidationError("gamma out of range", "gamma must lie in [0,1]");
    if (quarantine_days < 1)
        throw ValidationError("quarantine_days positive", "quarantine_days must be >= 1");
    if (test_period_days < 1)
        throw ValidationError("test_period_days positive", "test_period_days must be >= 1");
    if (horizon_days < 1)
        throw ValidationError("horizon_days positive", "horizon_days must be >= 1");
    if (!initial_infected.empty()) {
        if (initial_infected.size() != scenario.k())
            throw ValidationError("initial_infected dimension", "initial_infected needs one count per category");
        for (std::size_t i = 0; i < scenario.k(); ++i) {
            if (initial_infected[i] < 0 || initial_infected[i] > scenario.categories[i].n)
                throw ValidationError("initial_infected range", "initial infected count outside [0, n_i]");
        }
    }
}

// ContactNetwork ----------------------------------------------------------------

ContactNetwork::ContactNetwork(std::vector<std::int64_t> sizes,
                               const std::vector<std::pair<std::int32_t, std::int32_t>>& edges)
    : sizes_(std::move(sizes))
{
    std::int64_t total = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        first_.push_back(static_cast<std::int32_t>(total));
        total += sizes_[i];
    }
    category_.resize(static_cast<std::size_t>(total));
    for (std::size_t i = 0; i < sizes_.size(); ++i)
        std::fill_n(category_.begin() + first_[i], sizes_[i], static_cast<std::uint32_t>(i));

    offsets_.assign(static_cast<std::size_t>(total) + 1, 0);
    for (const auto& [a, b] : edges) {
        ++offsets_[static_cast<std::size_t>(a) + 1];
        ++offsets_[static_cast<std::size_t>(b) + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    neighbors_.resize(offsets_.back());
    auto fill = offsets_;
    for (const auto& [a, b] : edges) {
        neighbors_[fill[static_cast<std::size_t>(a)]++] = b;
        neighbors_[fill[static_cast<std::size_t>(b)]++] = a;
    }
    for (std::int32_t v = 0; v < static_cast<std::int32_t>(total); ++v)
        std::sort(neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
                  neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
}

SquareMatrix ContactNetwork::mean_block_degree() const
{
    const std::size_t k = sizes_.size();
    SquareMatrix m(k);
    for (std::int32_t v = 0; v < node_count(); ++v) {
        const auto i = category_of(v);
        for (const auto* it = neighbors_begin(v); it != neighbors_end(v); ++it)
            m(i, category_of(*it)) += 1.0;
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j)
            m(i, j) = sizes_[i] > 0 ? m(i, j) / static_cast<double>(sizes_[i]) : 0.0;
    }
    return m;
}

ContactNetwork generate_network(const Scenario& scenario, const SquareMatrix& d, std::uint64_t seed, double tolerance)
{
    const std::size_t k = scenario.k();
    if (d.size() != k)
        throw StructuralError("contact matrix does not match the number of categories");
    std::vector<std::int64_t> sizes(k);
    std::vector<std::int64_t> first(k);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < k; ++i) {
        sizes[i] = scenario.categories[i].n;
        first[i] = total;
        total += sizes[i];
    }
    if (total > std::numeric_limits<std::int32_t>::max())
        throw std::length_error("population too large for the contact network");

    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            const auto& ci = scenario.categories[i];
            const auto& cj = scenario.categories[j];
            const double a = static_cast<double>(ci.n) * d(i, j);
            const double b = static_cast<double>(cj.n) * d(j, i);
            if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0)
                throw NetworkConsistencyError("block (" + ci.id + "," + cj.id + ") has invalid contact rates");
            const double mx = std::max(a, b);
            if (i != j && mx > 0.0 && std::fabs(a - b) / mx > tolerance) {
                std::ostringstream os;
                os << "block (" << ci.id << "," << cj.id << "): n_i*d_ij = " << a << " vs n_j*d_ji = " << b
                   << " differ by more than " << tolerance * 100.0 << "%";
                throw NetworkConsistencyError(os.str());
            }
            const auto m = static_cast<std::uint64_t>(std::llround(i == j ? a / 2.0 : (a + b) / 2.0));
            const auto ni = static_cast<std::uint64_t>(ci.n);
            const auto nj = static_cast<std::uint64_t>(cj.n);
            const std::uint64_t capacity = i == j ? ni * (ni - 1) / 2 : ni * nj;
            if (m > capacity)
                throw NetworkConsistencyError("block (" + ci.id + "," + cj.id + ") needs " + std::to_string(m) +
                                              " edges but only " + std::to_string(capacity) + " pairs exist");
            if (m == 0)
                continue;

            Rng rng(derive_seed(seed, i * k + j, kStreamBlock));
            auto endpoints = [&](std::uint64_t pair) -> std::pair<std::int32_t, std::int32_t> {
                if (i != j)
                    return {static_cast<std::int32_t>(first[i] + static_cast<std::int64_t>(pair / nj)),
                            static_cast<std::int32_t>(first[j] + static_cast<std::int64_t>(pair % nj))};
                // unrank pair index into (x < y) within the block
                auto x = static_cast<std::uint64_t>((2.0 * ni - 1.0 - std::sqrt((2.0 * ni - 1.0) * (2.0 * ni - 1.0) - 8.0 * pair)) / 2.0);
                auto row_start = [&](std::uint64_t r) { return r * (2 * ni - r - 1) / 2; };
                while (x > 0 && row_start(x) > pair)
                    --x;
                while (row_start(x + 1) <= pair)
                    ++x;
                const auto y = x + 1 + (pair - row_start(x));
                return {static_cast<std::int32_t>(first[i] + static_cast<std::int64_t>(x)),
                        static_cast<std::int32_t>(first[i] + static_cast<std::int64_t>(y))};
            };

            if (m * 2 > capacity) {
                std::vector<std::uint64_t> all(capacity);
                std::iota(all.begin(), all.end(), std::uint64_t{0});
                sample_prefix(all, m, rng);
                for (std::uint64_t e = 0; e < m; ++e)
                    edges.push_back(endpoints(all[e]));
            } else {
                std::unordered_set<std::uint64_t> taken;
                taken.reserve(m * 2);
                while (taken.size() < m) {
                    const auto pair = uniform_below(rng, capacity);
                    if (taken.insert(pair).second)
                        edges.push_back(endpoints(pair));
                }
            }
        }
    }
    return ContactNetwork(std::move(sizes), edges);
}

// Runs ------------------------------------------------------------------------

SimRun run_on(const ContactNetwork& network, const SimConfig& sim, const Strategy& strategy, const std::string& label,
              std::int64_t replicate)
{
    sim.validate();
    check_strategy(sim, strategy);
    const auto r = static_cast<std::uint64_t>(replicate);
    Rng init(derive_seed(sim.rng_seed, r, kStreamInitial));
    std::vector<std::int64_t> counts = sim.initial_infected;
    counts.resize(sim.scenario.k(), 0);
    const auto index_cases = draw_initial(network, counts, init);

    Rng dyn(derive_seed(sim.rng_seed, r, kStreamDynamics));
    CoreOptions opt;
    opt.strategy = &strategy;
    opt.horizon = sim.horizon_days;
    SimRun out = simulate(network, sim, index_cases, dyn, opt);
    out.label = label;
    out.replicate = replicate;
    return out;
}

SimRun run(const SimConfig& sim, const Strategy& strategy, const std::string& label, std::int64_t replicate)
{
    sim.validate();
    check_strategy(sim, strategy);
    const auto net = generate_network(sim.scenario, sim.scenario.exposure.d,
                                      derive_seed(sim.rng_seed, static_cast<std::uint64_t>(replicate), kStreamNetwork),
                                      sim.consistency_tolerance);
    return run_on(net, sim, strategy, label, replicate);
}

ProfileComparison compare_profiles(const SimConfig& sim, const std::vector<LabeledStrategy>& strategies,
                                   const CompareOptions& options)
{
    sim.validate();
    for (const auto& s : strategies)
        check_strategy(sim, s.strategy);
    if (options.replicates < 1)
        throw ValidationError("replicates positive", "replicates must be >= 1");

    const std::size_t k = sim.scenario.k();
    const auto reps = options.replicates;
    const std::size_t ns = strategies.size();
    ProfileComparison cmp;
    cmp.window_first = std::max(1, options.window_first);
    cmp.window_last = std::min(sim.horizon_days, options.window_last);
    cmp.runs.resize(ns * static_cast<std::size_t>(reps));

    detail::ExceptionSink errors;
#pragma omp parallel for schedule(dynamic, 1) if (options.parallel)
    for (std::int64_t r = 0; r < reps; ++r) {
        errors.run([&] {
            const auto net = generate_network(sim.scenario, sim.scenario.exposure.d,
                                              derive_seed(sim.rng_seed, static_cast<std::uint64_t>(r), kStreamNetwork),
                                              sim.consistency_tolerance);
            for (std::size_t s = 0; s < ns; ++s)
                cmp.runs[s * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)] =
                    run_on(net, sim, strategies[s].strategy, strategies[s].label, r);
        });
    }
    errors.rethrow();

    const auto days = static_cast<std::size_t>(sim.horizon_days);
    for (std::size_t s = 0; s < ns; ++s) {
        ProfileSummary sum;
        sum.label = strategies[s].label;
        sum.mean_quarantined.assign(days, std::vector<double>(k, 0.0));
        for (std::int64_t r = 0; r < reps; ++r) {
            const auto& run = cmp.runs[s * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)];
            for (std::size_t d = 0; d < days; ++d)
                for (std::size_t i = 0; i < k; ++i)
                    sum.mean_quarantined[d][i] += static_cast<double>(run.days[d][i].quarantined);
        }
        for (auto& row : sum.mean_quarantined)
            for (auto& x : row)
                x /= static_cast<double>(reps);
        sum.window_mean_quarantined.assign(k, 0.0);
        const int span = cmp.window_last - cmp.window_first + 1;
        if (span > 0) {
            for (int d = cmp.window_first; d <= cmp.window_last; ++d)
                for (std::size_t i = 0; i < k; ++i)
                    sum.window_mean_quarantined[i] += sum.mean_quarantined[static_cast<std::size_t>(d - 1)][i];
            for (auto& x : sum.window_mean_quarantined)
                x /= span;
        }
        cmp.summaries.push_back(std::move(sum));
    }
    for (std::size_t s = 0; s < ns; ++s) {
        std::vector<double> delta(k);
        for (std::size_t i = 0; i < k; ++i)
            delta[i] = cmp.summaries[s].window_mean_quarantined[i] - cmp.summaries[0].window_mean_quarantined[i];
        cmp.deltas_vs_first.push_back(std::move(delta));
    }
    return cmp;
}

R0Estimate estimate_r0(const SimConfig& sim, std::int64_t trials, IndexSelection selection, bool parallel)
{
    sim.validate();
    if (trials < 1)
        throw ValidationError("trials positive", "trials must be >= 1");
    R0Estimate est;
    est.secondary.assign(static_cast<std::size_t>(trials), 0);

    detail::ExceptionSink errors;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (std::int64_t t = 0; t < trials; ++t) {
        errors.run([&] {
            const auto tt = static_cast<std::uint64_t>(t);
            const auto net = generate_network(sim.scenario, sim.scenario.exposure.d,
                                              derive_seed(sim.rng_seed, tt, kStreamR0Network), sim.consistency_tolerance);
            Rng rng(derive_seed(sim.rng_seed, tt, kStreamR0Index));
            std::int32_t index = 0;
            const auto endpoints = 2 * net.edge_count();
            if (selection == IndexSelection::RandomContact && endpoints > 0) {
                // the endpoint of a random edge is a node drawn proportionally to its degree
                auto pos = uniform_below(rng, endpoints);
                std::int32_t v = 0;
                while (pos >= net.degree(v)) {
                    pos -= net.degree(v);
                    ++v;
                }
                index = v;
            } else {
                index = static_cast<std::int32_t>(uniform_below(rng, static_cast<std::uint64_t>(net.node_count())));
            }
            CoreOptions opt;
            opt.horizon = 100000; // bounds gamma = 0
            opt.stop_when_index_recovered = true;
            opt.record_days = false;
            const auto run = simulate(net, sim, {index}, rng, opt);
            est.secondary[static_cast<std::size_t>(t)] = run.index_secondary.front();
        });
    }
    errors.rethrow();

    double sum = 0.0, sq = 0.0;
    for (auto x : est.secondary) {
        sum += static_cast<double>(x);
        sq += static_cast<double>(x) * static_cast<double>(x);
    }
    const auto n = static_cast<double>(trials);
    est.mean = sum / n;
    const double var = trials > 1 ? (sq - n * est.mean * est.mean) / (n - 1.0) : 0.0;
    est.standard_error = std::sqrt(std::max(var, 0.0) / n);
    return est;
}

// Export ------------------------------------------------------------------------

void write_csv(std::ostream& out, const Scenario& scenario, const std::vector<SimRun>& runs)
{
    out << "day,category_id,S,I,R,Q,strategy_label,replicate\n";
    for (const auto& run : runs) {
        for (std::size_t d = 0; d < run.days.size(); ++d) {
            for (std::size_t i = 0; i < run.days[d].size(); ++i) {
                const auto& c = run.days[d][i];
                out << (d + 1) << ',' << scenario.categories[i].id << ',' << c.susceptible << ',' << c.infected << ','
                    << c.recovered << ',' << c.quarantined << ',' << run.label << ',' << run.replicate << '\n';
            }
        }
    }
}

std::string render_quarantine_svg(const Scenario& scenario, const ProfileComparison& comparison,
                                  const std::vector<std::size_t>& categories)
{
    constexpr double width = 800, height = 480, left = 70, right = 200, top = 30, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    static const char* dashes[] = {"", "4,4", "1,3", "8,3,2,3"};

    std::size_t days = 0;
    double ymax = 1.0;
    for (const auto& s : comparison.summaries) {
        days = std::max(days, s.mean_quarantined.size());
        for (const auto& row : s.mean_quarantined)
            for (auto i : categories)
                ymax = std::max(ymax, row.at(i));
    }
    ymax *= 1.05;
    auto px = [&](double day) { return left + (days > 1 ? (day - 1) / static_cast<double>(days - 1) : 0.0) * plot_w; };
    auto py = [&](double y) { return top + plot_h - y / ymax * plot_h; };

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\"" << top + plot_h
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
       << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 5; ++tick) {
        const double y = ymax * tick / 5.0;
        os << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << std::setprecision(0) << y
           << std::setprecision(2) << "</text>\n";
        const double day = 1.0 + (static_cast<double>(days) - 1.0) * tick / 5.0;
        os << "<text x=\"" << px(day) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
           << std::setprecision(0) << day << std::setprecision(2) << "</text>\n";
    }
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">day</text>\n";
    os << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << top + plot_h / 2 << ")\">mean quarantined</text>\n";

    double legend_y = top + 10;
    for (std::size_t s = 0; s < comparison.summaries.size(); ++s) {
        const auto& sum = comparison.summaries[s];
        for (std::size_t c = 0; c < categories.size(); ++c) {
            const auto i = categories[c];
            const char* color = palette[s % std::size(palette)];
            const char* dash = dashes[c % std::size(dashes)];
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"";
            if (*dash)
                os << " stroke-dasharray=\"" << dash << "\"";
            os << " points=\"";
            for (std::size_t d = 0; d < sum.mean_quarantined.size(); ++d)
                os << px(static_cast<double>(d + 1)) << ',' << py(sum.mean_quarantined[d][i]) << ' ';
            os << "\"/>\n";
            os << "<line x1=\"" << width - right + 10 << "\" y1=\"" << legend_y << "\" x2=\"" << width - right + 40
               << "\" y2=\"" << legend_y << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
            if (*dash)
                os << " stroke-dasharray=\"" << dash << "\"";
            os << "/>\n<text x=\"" << width - right + 46 << "\" y=\"" << legend_y + 4 << "\">" << sum.label << " / "
               << scenario.categories.at(i).id << "</text>\n";
            legend_y += 18;
        }
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace poolalloc::sirq
