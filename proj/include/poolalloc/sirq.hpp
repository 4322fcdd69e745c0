#pragma once

#include "poolalloc/model.hpp"

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace poolalloc::sirq {

/// Directed contact rates are incompatible with an undirected graph; names the offending block.
class NetworkConsistencyError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

struct SimConfig
{
    Scenario scenario;
    double beta = 0.01;
    double gamma = 0.0427;
    int quarantine_days = 14;
    int test_period_days = 7;
    int horizon_days = 80;
    std::vector<std::int64_t> initial_infected; // per category
    std::uint64_t rng_seed = 1;
    /// Allowed relative mismatch between n_i d_ij and n_j d_ji.
    double consistency_tolerance = 0.10;

    /// Throws ValidationError naming the violated invariant.
    void validate() const;
};

/// Undirected simple graph in CSR form; nodes of category i occupy [first_node(i), first_node(i) + n_i).
class ContactNetwork
{
public:
    ContactNetwork() = default;
    ContactNetwork(std::vector<std::int64_t> sizes, const std::vector<std::pair<std::int32_t, std::int32_t>>& edges);

    std::int32_t node_count() const noexcept { return static_cast<std::int32_t>(category_.size()); }
    std::size_t edge_count() const noexcept { return neighbors_.size() / 2; }
    std::size_t categories() const noexcept { return sizes_.size(); }
    std::int32_t first_node(std::size_t category) const { return first_.at(category); }
    std::int64_t category_size(std::size_t category) const { return sizes_.at(category); }
    std::size_t category_of(std::int32_t node) const { return category_[static_cast<std::size_t>(node)]; }

    const std::int32_t* neighbors_begin(std::int32_t node) const { return neighbors_.data() + offsets_[node]; }
    const std::int32_t* neighbors_end(std::int32_t node) const { return neighbors_.data() + offsets_[node + 1]; }
    std::size_t degree(std::int32_t node) const { return offsets_[node + 1] - offsets_[node]; }

    /// Realized mean number of C_j neighbours per C_i node.
    SquareMatrix mean_block_degree() const;

private:
    std::vector<std::int64_t> sizes_;
    std::vector<std::int32_t> first_;
    std::vector<std::uint32_t> category_;
    std::vector<std::size_t> offsets_;
    std::vector<std::int32_t> neighbors_;
};

/// Stochastic block graph whose expected C_j-degree of a C_i node is d_ij. Each block gets
/// round((n_i d_ij + n_j d_ji) / 2) distinct uniform edges (n_i d_ii / 2 on the diagonal).
/// Throws NetworkConsistencyError when n_i d_ij and n_j d_ji differ by more than `tolerance`.
ContactNetwork generate_network(const Scenario& scenario, const SquareMatrix& d, std::uint64_t seed,
                                double tolerance = 0.10);

struct DayCounts
{
    std::int64_t susceptible = 0;
    std::int64_t infected = 0;
    std::int64_t recovered = 0;
    std::int64_t quarantined = 0;

    bool operator==(const DayCounts&) const = default;
};

struct SimRun
{
    std::string label;
    std::int64_t replicate = 0;
    /// days[d][i]: counts for category i after day d + 1.
    std::vector<std::vector<DayCounts>> days;
    std::vector<std::int32_t> index_cases;
    std::vector<std::int64_t> index_secondary; // infections caused by each index case

    bool operator==(const SimRun&) const = default;
};

/// Single run over the network built from the scenario's d matrix. Deterministic given the config.
/// Throws InfeasibleStrategy if the strategy is not feasible for the scenario.
SimRun run(const SimConfig& sim, const Strategy& strategy, const std::string& label = "",
           std::int64_t replicate = 0);

/// Same, on a caller-provided network.
SimRun run_on(const ContactNetwork& network, const SimConfig& sim, const Strategy& strategy,
              const std::string& label = "", std::int64_t replicate = 0);

struct LabeledStrategy
{
    std::string label;
    Strategy strategy;
};

struct ProfileSummary
{
    std::string label;
    /// mean_quarantined[d][i] across replicates.
    std::vector<std::vector<double>> mean_quarantined;
    /// Per-category mean of mean_quarantined over [window_first, window_last] (1-based days).
    std::vector<double> window_mean_quarantined;
};

struct ProfileComparison
{
    std::vector<SimRun> runs; // strategy-major, then replicate
    std::vector<ProfileSummary> summaries;
    int window_first = 20;
    int window_last = 80;
    /// window_mean(strategy s) - window_mean(strategy 0), per category.
    std::vector<std::vector<double>> deltas_vs_first;
};

struct CompareOptions
{
    std::int64_t replicates = 30;
    int window_first = 20;
    int window_last = 80;
    bool parallel = true;
};

/// Runs every strategy over the same replicate seeds (network, initial infections and daily draws).
ProfileComparison compare_profiles(const SimConfig& sim, const std::vector<LabeledStrategy>& strategies,
                                   const CompareOptions& options = {});

enum class IndexSelection
{
    RandomContact, // endpoint of a uniformly random edge (degree-biased)
    UniformNode,
};

struct R0Estimate
{
    double mean = 0.0;
    double standard_error = 0.0;
    std::vector<std::int64_t> secondary;
};

/// Mean secondary infections of a single index case in an otherwise susceptible network, no testing.
/// Each trial draws a fresh network and runs until the index case recovers.
R0Estimate estimate_r0(const SimConfig& sim, std::int64_t trials, IndexSelection selection = IndexSelection::RandomContact,
                       bool parallel = true);

/// Per-replicate seed for a stream; stable across platforms.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replicate, std::uint64_t stream);

void write_csv(std::ostream& out, const Scenario& scenario, const std::vector<SimRun>& runs);

/// Figure-style SVG: mean quarantined per day, one line per (strategy, category).
std::string render_quarantine_svg(const Scenario& scenario, const ProfileComparison& comparison,
                                  const std::vector<std::size_t>& categories);

} // namespace poolalloc::sirq
