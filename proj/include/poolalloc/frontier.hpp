#pragma once

#include "poolalloc/json_io.hpp"
#include "poolalloc/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace poolalloc {

/// No strategy satisfies the budget, group and coverage constraints.
class InfeasibleScenario : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// The feasible set is larger than the configured enumeration cap.
class CapExceeded : public std::runtime_error
{
public:
    CapExceeded(std::int64_t feasible, std::int64_t cap);

    std::int64_t feasible() const noexcept { return feasible_; }
    std::int64_t cap() const noexcept { return cap_; }

private:
    std::int64_t feasible_;
    std::int64_t cap_;
};

struct EvaluatedStrategy
{
    std::int64_t id = 0; // position in the canonical enumeration order
    Strategy strategy;
    ObjectiveVector objectives;
    std::optional<ObjectiveVector> bucketized;
};

struct BucketSpec
{
    double rho_health = 1.0;
    std::vector<double> rho_quarantine;

    /// Throws ValidationError unless every entry is finite and > 0.
    void validate(std::size_t k) const;
};

struct TargetInfo
{
    std::int64_t desired = 0;
    std::int64_t tolerance = 0;
    double alpha = 0.0;
    int iterations = 0;
    bool capped = false;  // desired >= |exact frontier|; exact frontier returned
    bool reached = false; // final count within +-tolerance of desired
};

struct FrontierResult
{
    std::vector<EvaluatedStrategy> solutions; // sorted by id
    std::int64_t total_enumerated = 0;
    std::int64_t total_feasible = 0;
    std::optional<BucketSpec> bucket_spec;
    std::uint64_t seed = 0;
    std::optional<TargetInfo> target;
};

struct FrontierOptions
{
    std::int64_t feasible_cap = 10'000'000;
    bool parallel = true;
    /// Called with completed fraction in [0,1]; may be called from worker threads.
    std::function<void(double)> progress;
};

// Enumeration ---------------------------------------------------------------

/// The canonical feasible strategy set, partitioned into blocks (one per group-size assignment).
/// Strategy ids are assigned lexicographically over (g assignment, t composition).
class StrategySpace
{
public:
    explicit StrategySpace(const Scenario& scenario);

    const Scenario& scenario() const noexcept { return *scenario_; }
    std::size_t block_count() const noexcept { return blocks_.size(); }

    /// Distinct canonical feasible strategies (saturates at INT64_MAX).
    std::int64_t total_feasible() const noexcept { return total_feasible_; }
    /// Candidate (g, t) pairs before canonical deduplication.
    std::int64_t total_enumerated() const noexcept { return total_enumerated_; }
    bool empty() const noexcept { return total_feasible_ == 0; }

    using Visitor = std::function<void(std::int64_t id, const Strategy&)>;

    void for_each_in_block(std::size_t block, const Visitor& visit) const;
    void for_each(const Visitor& visit) const;

private:
    struct Block
    {
        std::vector<int> g;
        std::vector<std::int64_t> lo, hi;
        std::int64_t first_id = 0;
        std::int64_t count = 0;
    };

    const Scenario* scenario_;
    std::vector<Block> blocks_;
    std::int64_t total_feasible_ = 0;
    std::int64_t total_enumerated_ = 0;
};

/// Every canonical feasible strategy, in id order. Intended for small scenarios.
std::vector<Strategy> enumerate_strategies(const Scenario& scenario);

/// Closed-form count of canonical feasible strategies without enumerating.
std::int64_t count_feasible(const Scenario& scenario);

// Dominance and frontiers ---------------------------------------------------

/// a Pareto-dominates b: health no worse, every quarantine no worse, one strictly better.
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

/// Incrementally maintained set of mutually non-dominated strategies.
/// Objectives are stored flat, in minimization form (health negated).
class FrontierArchive
{
public:
    explicit FrontierArchive(std::size_t k = 0);

    /// Returns true when the candidate was admitted.
    bool offer(EvaluatedStrategy candidate);
    void merge(FrontierArchive&& other);

    std::size_t size() const noexcept { return entries_.size(); }
    std::vector<EvaluatedStrategy> take_sorted() &&;

private:
    std::size_t stride_;
    std::vector<double> values_;
    std::vector<EvaluatedStrategy> entries_;
};

/// Exact Pareto frontier; parallel over enumeration blocks when options.parallel is set.
/// Throws InfeasibleScenario or CapExceeded.
FrontierResult pareto_frontier(const Scenario& scenario, const FrontierOptions& options = {});

/// Sequential reference following the one-pass insert/remove procedure over the enumeration stream.
FrontierResult pareto_frontier_serial(const Scenario& scenario, const FrontierOptions& options = {});

/// Each component rounded half-up to the nearest multiple of its bucket size.
ObjectiveVector bucketize(const ObjectiveVector& v, const BucketSpec& spec);

/// Buckets the strategies of an exact frontier and keeps one seeded representative per
/// non-dominated bucket.
FrontierResult bucket_frontier(const FrontierResult& exact, const BucketSpec& spec, std::uint64_t seed);

FrontierResult bucketed_frontier(const Scenario& scenario, const BucketSpec& spec, std::uint64_t seed,
                                 const FrontierOptions& options = {});

struct TargetOptions
{
    std::int64_t tolerance = -1; // < 0 selects max(1, round(desired / 10))
    int max_iters = 40;
};

/// Bucket sizes alpha * (objective ranges) with alpha found by bisection so the bucketed
/// frontier holds about `desired` solutions.
std::pair<BucketSpec, FrontierResult> target_count_buckets(const FrontierResult& exact, std::int64_t desired,
                                                          std::uint64_t seed, const TargetOptions& target = {});

std::pair<BucketSpec, FrontierResult> target_count_buckets(const Scenario& scenario, std::int64_t desired,
                                                          std::uint64_t seed, const TargetOptions& target = {},
                                                          const FrontierOptions& options = {});

/// Inclusive thresholds; use +-infinity for unbounded. Ids are preserved.
FrontierResult filter_by_thresholds(const FrontierResult& frontier, double min_health,
                                    const std::vector<double>& max_quarantine);

// Serialization -------------------------------------------------------------

json to_json(const EvaluatedStrategy& s);
json to_json(const BucketSpec& spec);
json to_json(const FrontierResult& result);
FrontierResult frontier_from_json(const json& j);

} // namespace poolalloc
