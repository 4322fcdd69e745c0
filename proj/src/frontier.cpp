#include "poolalloc/frontier.hpp"

#include "exception_sink.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace poolalloc {

namespace {

constexpr std::int64_t kSaturated = std::numeric_limits<std::int64_t>::max() / 4;
constexpr double kRhoFloor = 1e-12;

// Number of vectors t with lo_i <= t_i <= hi_i and sum t = total, saturating at kSaturated.
std::int64_t count_bounded_compositions(const std::vector<std::int64_t>& lo, const std::vector<std::int64_t>& hi,
                                        std::int64_t total)
{
    std::vector<std::int64_t> ways(static_cast<std::size_t>(total) + 1, 0);
    ways[0] = 1;
    std::vector<__int128> prefix(ways.size() + 1);
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (lo[i] > hi[i])
            return 0;
        prefix[0] = 0;
        for (std::size_t b = 0; b < ways.size(); ++b)
            prefix[b + 1] = prefix[b] + ways[b];
        for (std::int64_t b = 0; b <= total; ++b) {
            // sum of ways[b - t] for t in [lo, hi]
            const std::int64_t from = b - std::min(hi[i], b);
            const std::int64_t to = b - lo[i];
            if (to < 0) {
                ways[b] = 0;
                continue;
            }
            const __int128 s = prefix[to + 1] - prefix[from];
            ways[b] = s >= kSaturated ? kSaturated : static_cast<std::int64_t>(s);
        }
    }
    return ways[total];
}

void require_same_k(const ObjectiveVector& a, const ObjectiveVector& b)
{
    if (a.quarantine.size() != b.quarantine.size())
        throw StructuralError("objective vectors have different numbers of quarantine components");
}

double round_to_multiple(double x, double rho)
{
    return std::floor(x / rho + 0.5) * rho;
}

bool lexicographic_less(const ObjectiveVector& a, const ObjectiveVector& b)
{
    if (a.health != b.health)
        return a.health < b.health;
    return a.quarantine < b.quarantine;
}

void check_enumerable(const StrategySpace& space, const FrontierOptions& options)
{
    if (space.empty())
        throw InfeasibleScenario("no feasible strategy: categories cannot absorb the budget with the allowed group sizes");
    if (space.total_feasible() > options.feasible_cap)
        throw CapExceeded(space.total_feasible(), options.feasible_cap);
}

} // namespace

CapExceeded::CapExceeded(std::int64_t feasible, std::int64_t cap)
    : std::runtime_error("feasible strategy count " + std::to_string(feasible) + " exceeds cap " + std::to_string(cap))
    , feasible_(feasible)
    , cap_(cap)
{
}

void BucketSpec::validate(std::size_t k) const
{
    if (rho_quarantine.size() != k)
        throw StructuralError("bucket spec has " + std::to_string(rho_quarantine.size()) +
                              " quarantine sizes for k=" + std::to_string(k));
    auto ok = [](double r) { return std::isfinite(r) && r > 0.0; };
    if (!ok(rho_health) || !std::all_of(rho_quarantine.begin(), rho_quarantine.end(), ok))
        throw ValidationError("bucket size positive", "bucket sizes must be finite and > 0");
}

// StrategySpace -------------------------------------------------------------

StrategySpace::StrategySpace(const Scenario& scenario)
    : scenario_(&scenario)
{
    const std::size_t k = scenario.k();
    const auto menu = scenario.effective_menu();
    const std::int64_t T = scenario.budget;

    std::vector<std::size_t> digit(k, 0);
    std::int64_t next_id = 0;
    for (;;) {
        Block b;
        b.g.resize(k);
        b.lo.resize(k);
        b.hi.resize(k);
        std::vector<std::int64_t> zero(k, 0);
        for (std::size_t i = 0; i < k; ++i) {
            b.g[i] = menu[digit[i]];
            b.lo[i] = b.g[i] == 1 ? 0 : 1; // t_i = 0 only appears under the canonical g_i = 1
            b.hi[i] = std::min<std::int64_t>(scenario.categories[i].n / b.g[i], T);
        }
        total_enumerated_ = std::min(kSaturated, total_enumerated_ + count_bounded_compositions(zero, b.hi, T));
        b.count = count_bounded_compositions(b.lo, b.hi, T);
        if (b.count > 0) {
            b.first_id = next_id;
            next_id = std::min(kSaturated, next_id + b.count);
            blocks_.push_back(std::move(b));
        }

        // odometer over menu^k, last category fastest
        std::size_t pos = k;
        while (pos > 0) {
            --pos;
            if (++digit[pos] < menu.size())
                break;
            digit[pos] = 0;
            if (pos == 0) {
                total_feasible_ = next_id;
                return;
            }
        }
        if (k == 0)
            break;
    }
    total_feasible_ = next_id;
}

void StrategySpace::for_each_in_block(std::size_t block, const Visitor& visit) const
{
    const Block& b = blocks_.at(block);
    const std::size_t k = b.g.size();
    // suffix bounds prune compositions that cannot exhaust or respect the budget
    std::vector<std::int64_t> suffix_lo(k + 1, 0), suffix_hi(k + 1, 0);
    for (std::size_t i = k; i-- > 0;) {
        suffix_lo[i] = suffix_lo[i + 1] + b.lo[i];
        suffix_hi[i] = suffix_hi[i + 1] + b.hi[i];
    }

    Strategy s;
    s.g = b.g;
    s.t.assign(k, 0);
    std::int64_t id = b.first_id;

    auto recurse = [&](auto&& self, std::size_t i, std::int64_t remaining) -> void {
        if (i == k) {
            if (remaining == 0)
                visit(id++, s);
            return;
        }
        const std::int64_t from = std::max(b.lo[i], remaining - suffix_hi[i + 1]);
        const std::int64_t to = std::min(b.hi[i], remaining - suffix_lo[i + 1]);
        for (std::int64_t t = from; t <= to; ++t) {
            s.t[i] = t;
            self(self, i + 1, remaining - t);
        }
    };
    recurse(recurse, 0, scenario_->budget);
}

void StrategySpace::for_each(const Visitor& visit) const
{
    for (std::size_t b = 0; b < blocks_.size(); ++b)
        for_each_in_block(b, visit);
}

std::vector<Strategy> enumerate_strategies(const Scenario& scenario)
{
    StrategySpace space(scenario);
    std::vector<Strategy> out;
    out.reserve(static_cast<std::size_t>(std::min<std::int64_t>(space.total_feasible(), 1 << 20)));
    space.for_each([&](std::int64_t, const Strategy& s) { out.push_back(s); });
    return out;
}

std::int64_t count_feasible(const Scenario& scenario)
{
    return StrategySpace(scenario).total_feasible();
}

// Dominance -----------------------------------------------------------------

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b)
{
    require_same_k(a, b);
    if (a.health < b.health)
        return false;
    bool strict = a.health > b.health;
    for (std::size_t i = 0; i < a.quarantine.size(); ++i) {
        if (a.quarantine[i] > b.quarantine[i])
            return false;
        strict = strict || a.quarantine[i] < b.quarantine[i];
    }
    return strict;
}

FrontierArchive::FrontierArchive(std::size_t k)
    : stride_(k + 1)
{
}

bool FrontierArchive::offer(EvaluatedStrategy candidate)
{
    const auto& obj = candidate.objectives;
    if (obj.quarantine.size() + 1 != stride_)
        throw StructuralError("candidate objective vector does not match archive dimension");

    std::vector<double> c(stride_);
    c[0] = -obj.health;
    std::copy(obj.quarantine.begin(), obj.quarantine.end(), c.begin() + 1);

    const std::size_t n = entries_.size();
    std::vector<char> dominated(n, 0);
    bool any_dominated = false;
    for (std::size_t e = 0; e < n; ++e) {
        const double* a = values_.data() + e * stride_;
        bool a_le = true, a_lt = false, c_le = true, c_lt = false;
        for (std::size_t x = 0; x < stride_; ++x) {
            if (a[x] < c[x]) {
                a_lt = true;
                c_le = false;
            } else if (a[x] > c[x]) {
                c_lt = true;
                a_le = false;
            }
        }
        if (a_le && a_lt)
            return false;
        if (c_le && c_lt) {
            dominated[e] = 1;
            any_dominated = true;
        }
    }

    if (any_dominated) {
        std::size_t w = 0;
        for (std::size_t e = 0; e < n; ++e) {
            if (dominated[e])
                continue;
            if (w != e) {
                entries_[w] = std::move(entries_[e]);
                std::copy_n(values_.begin() + e * stride_, stride_, values_.begin() + w * stride_);
            }
            ++w;
        }
        entries_.resize(w);
        values_.resize(w * stride_);
    }
    entries_.push_back(std::move(candidate));
    values_.insert(values_.end(), c.begin(), c.end());
    return true;
}

void FrontierArchive::merge(FrontierArchive&& other)
{
    for (auto& e : other.entries_)
        offer(std::move(e));
    other.entries_.clear();
    other.values_.clear();
}

std::vector<EvaluatedStrategy> FrontierArchive::take_sorted() &&
{
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    values_.clear();
    return std::move(entries_);
}

// Exact frontier --------------------------------------------------------------

FrontierResult pareto_frontier(const Scenario& scenario, const FrontierOptions& options)
{
    scenario.validate();
    const StrategySpace space(scenario);
    check_enumerable(space, options);

    const Evaluator evaluator(scenario);
    const std::size_t k = scenario.k();
    const auto blocks = static_cast<std::int64_t>(space.block_count());
    const double total = static_cast<double>(space.total_feasible());
    std::atomic<std::int64_t> done{0};
    std::vector<FrontierArchive> partials;
    detail::ExceptionSink errors;

#pragma omp parallel if (options.parallel)
    {
        FrontierArchive local(k);
#pragma omp for schedule(dynamic, 1) nowait
        for (std::int64_t b = 0; b < blocks; ++b) {
            errors.run([&] {
                std::int64_t visited = 0;
                space.for_each_in_block(static_cast<std::size_t>(b), [&](std::int64_t id, const Strategy& s) {
                    local.offer({id, s, evaluator.evaluate_unchecked(s), std::nullopt});
                    ++visited;
                });
                const auto now = done.fetch_add(visited) + visited;
                if (options.progress)
                    options.progress(static_cast<double>(now) / total);
            });
        }
#pragma omp critical(poolalloc_frontier_merge)
        errors.run([&] { partials.push_back(std::move(local)); });
    }
    errors.rethrow();

    FrontierArchive merged(k);
    for (auto& p : partials)
        merged.merge(std::move(p));

    FrontierResult result;
    result.solutions = std::move(merged).take_sorted();
    result.total_enumerated = space.total_enumerated();
    result.total_feasible = space.total_feasible();
    return result;
}

FrontierResult pareto_frontier_serial(const Scenario& scenario, const FrontierOptions& options)
{
    scenario.validate();
    const StrategySpace space(scenario);
    check_enumerable(space, options);

    const Evaluator evaluator(scenario);
    std::vector<EvaluatedStrategy> front;
    space.for_each([&](std::int64_t id, const Strategy& s) {
        EvaluatedStrategy cand{id, s, evaluator.evaluate(s), std::nullopt};
        for (const auto& f : front) {
            if (dominates(f.objectives, cand.objectives))
                return;
        }
        std::erase_if(front, [&](const EvaluatedStrategy& f) { return dominates(cand.objectives, f.objectives); });
        front.push_back(std::move(cand));
    });
    std::sort(front.begin(), front.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    FrontierResult result;
    result.solutions = std::move(front);
    result.total_enumerated = space.total_enumerated();
    result.total_feasible = space.total_feasible();
    return result;
}

// Bucketing -------------------------------------------------------------------

ObjectiveVector bucketize(const ObjectiveVector& v, const BucketSpec& spec)
{
    spec.validate(v.quarantine.size());
    ObjectiveVector out;
    out.health = round_to_multiple(v.health, spec.rho_health);
    out.quarantine.resize(v.quarantine.size());
    for (std::size_t i = 0; i < v.quarantine.size(); ++i)
        out.quarantine[i] = round_to_multiple(v.quarantine[i], spec.rho_quarantine[i]);
    return out;
}

FrontierResult bucket_frontier(const FrontierResult& exact, const BucketSpec& spec, std::uint64_t seed)
{
    FrontierResult result;
    result.total_enumerated = exact.total_enumerated;
    result.total_feasible = exact.total_feasible;
    result.bucket_spec = spec;
    result.seed = seed;
    if (exact.solutions.empty())
        return result;

    const std::size_t k = exact.solutions.front().objectives.quarantine.size();
    spec.validate(k);

    std::vector<ObjectiveVector> keys;
    keys.reserve(exact.solutions.size());
    for (const auto& s : exact.solutions)
        keys.push_back(bucketize(s.objectives, spec));

    // group members by bucket; members within a bucket stay in id order
    std::vector<std::size_t> order(exact.solutions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (lexicographic_less(keys[a], keys[b]))
            return true;
        if (lexicographic_less(keys[b], keys[a]))
            return false;
        return exact.solutions[a].id < exact.solutions[b].id;
    });
    std::vector<std::vector<std::size_t>> buckets;
    for (std::size_t x = 0; x < order.size(); ++x) {
        if (x == 0 || keys[order[x]] != keys[order[x - 1]])
            buckets.emplace_back();
        buckets.back().push_back(order[x]);
    }

    // equal keys never dominate each other, so each bucket survives or falls as a unit
    FrontierArchive archive(k);
    for (std::size_t b = 0; b < buckets.size(); ++b)
        archive.offer({static_cast<std::int64_t>(b), {}, keys[buckets[b].front()], std::nullopt});
    auto survivors = std::move(archive).take_sorted(); // sorted by bucket index == key order

    std::mt19937_64 rng(seed);
    for (const auto& sv : survivors) {
        const auto& members = buckets[static_cast<std::size_t>(sv.id)];
        const std::size_t pick = members[static_cast<std::size_t>(rng() % members.size())];
        EvaluatedStrategy rep = exact.solutions[pick];
        rep.bucketized = keys[pick];
        result.solutions.push_back(std::move(rep));
    }
    std::sort(result.solutions.begin(), result.solutions.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return result;
}

FrontierResult bucketed_frontier(const Scenario& scenario, const BucketSpec& spec, std::uint64_t seed,
                                 const FrontierOptions& options)
{
    spec.validate(scenario.k());
    return bucket_frontier(pareto_frontier(scenario, options), spec, seed);
}

// Target solution count -----------------------------------------------------------

std::pair<BucketSpec, FrontierResult> target_count_buckets(const FrontierResult& exact, std::int64_t desired,
                                                          std::uint64_t seed, const TargetOptions& target)
{
    if (desired < 1)
        throw ValidationError("desired positive", "desired solution count must be >= 1");
    if (target.max_iters < 1)
        throw ValidationError("max_iters positive", "max_iters must be >= 1");
    if (exact.solutions.empty())
        throw InfeasibleScenario("cannot bucket an empty frontier");

    TargetInfo info;
    info.desired = desired;
    info.tolerance = target.tolerance >= 0
                         ? target.tolerance
                         : std::max<std::int64_t>(1, std::llround(0.1 * static_cast<double>(desired)));

    const std::size_t k = exact.solutions.front().objectives.quarantine.size();
    const auto frontier_size = static_cast<std::int64_t>(exact.solutions.size());

    // objective ranges over the exact frontier; also track magnitudes for the collapse bound
    std::vector<double> lo(k + 1, std::numeric_limits<double>::infinity());
    std::vector<double> hi(k + 1, -std::numeric_limits<double>::infinity());
    for (const auto& s : exact.solutions) {
        const auto& o = s.objectives;
        lo[0] = std::min(lo[0], o.health);
        hi[0] = std::max(hi[0], o.health);
        for (std::size_t i = 0; i < k; ++i) {
            lo[i + 1] = std::min(lo[i + 1], o.quarantine[i]);
            hi[i + 1] = std::max(hi[i + 1], o.quarantine[i]);
        }
    }
    auto spec_for = [&](double alpha) {
        BucketSpec spec;
        spec.rho_health = std::max(alpha * (hi[0] - lo[0]), kRhoFloor);
        spec.rho_quarantine.resize(k);
        for (std::size_t i = 0; i < k; ++i)
            spec.rho_quarantine[i] = std::max(alpha * (hi[i + 1] - lo[i + 1]), kRhoFloor);
        return spec;
    };

    if (desired >= frontier_size) {
        info.capped = true;
        info.alpha = 0.0;
        info.reached = std::llabs(frontier_size - desired) <= info.tolerance;
        FrontierResult out = exact;
        out.seed = seed;
        out.target = info;
        return {spec_for(0.0), std::move(out)};
    }

    struct Best
    {
        double alpha = 1.0;
        std::int64_t count = -1;
        FrontierResult result;
    } best;
    int iterations = 0;
    auto better = [&](std::int64_t count) {
        if (best.count < 0)
            return true;
        const auto d_new = std::llabs(count - desired);
        const auto d_old = std::llabs(best.count - desired);
        return d_new < d_old || (d_new == d_old && count < best.count);
    };
    auto probe = [&](double alpha) {
        ++iterations;
        FrontierResult r = bucket_frontier(exact, spec_for(alpha), seed);
        const auto count = static_cast<std::int64_t>(r.solutions.size());
        if (better(count)) {
            best.alpha = alpha;
            best.count = count;
            best.result = std::move(r);
        }
        return count;
    };

    double lo_alpha = 0.0;
    double hi_alpha = 1.0;
    std::int64_t count = probe(hi_alpha);

    // rounding to the nearest multiple can leave several buckets at alpha = 1; widen until one
    // bucket per component is forced (rho above twice every magnitude)
    double magnitude = 0.0;
    double min_range = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c <= k; ++c) {
        magnitude = std::max({magnitude, std::fabs(lo[c]), std::fabs(hi[c])});
        if (hi[c] - lo[c] > 0.0)
            min_range = std::min(min_range, hi[c] - lo[c]);
    }
    while (count > desired && std::isfinite(min_range) && hi_alpha * min_range <= 2.0 * magnitude) {
        lo_alpha = hi_alpha;
        hi_alpha *= 2.0;
        count = probe(hi_alpha);
    }

    // bisection; count(alpha) is a non-monotone step function, so keep the closest count seen
    for (int it = 0; it < target.max_iters && best.count != desired; ++it) {
        const double mid = 0.5 * (lo_alpha + hi_alpha);
        count = probe(mid);
        if (count > desired)
            lo_alpha = mid;
        else
            hi_alpha = mid;
    }

    info.alpha = best.alpha;
    info.iterations = iterations;
    info.reached = std::llabs(best.count - desired) <= info.tolerance;
    best.result.target = info;
    return {spec_for(best.alpha), std::move(best.result)};
}

std::pair<BucketSpec, FrontierResult> target_count_buckets(const Scenario& scenario, std::int64_t desired,
                                                          std::uint64_t seed, const TargetOptions& target,
                                                          const FrontierOptions& options)
{
    return target_count_buckets(pareto_frontier(scenario, options), desired, seed, target);
}

// Filtering -------------------------------------------------------------------

FrontierResult filter_by_thresholds(const FrontierResult& frontier, double min_health,
                                    const std::vector<double>& max_quarantine)
{
    FrontierResult out = frontier;
    out.solutions.clear();
    for (const auto& s : frontier.solutions) {
        const auto& o = s.objectives;
        if (!max_quarantine.empty() && max_quarantine.size() != o.quarantine.size())
            throw StructuralError("threshold vector does not match the number of categories");
        if (o.health < min_health)
            continue;
        bool ok = true;
        for (std::size_t i = 0; i < max_quarantine.size() && ok; ++i)
            ok = o.quarantine[i] <= max_quarantine[i];
        if (ok)
            out.solutions.push_back(s);
    }
    return out;
}

// Serialization -----------------------------------------------------------------

json to_json(const EvaluatedStrategy& s)
{
    json j{
        {"id", s.id},
        {"t", s.strategy.t},
        {"g", s.strategy.g},
        {"health", s.objectives.health},
        {"quarantine", s.objectives.quarantine},
    };
    if (s.bucketized) {
        j["bucketized_health"] = s.bucketized->health;
        j["bucketized_quarantine"] = s.bucketized->quarantine;
    }
    return j;
}

json to_json(const BucketSpec& spec)
{
    return json{{"rho_health", spec.rho_health}, {"rho_quarantine", spec.rho_quarantine}};
}

json to_json(const FrontierResult& r)
{
    json sols = json::array();
    for (const auto& s : r.solutions)
        sols.push_back(to_json(s));
    json j{
        {"solutions", std::move(sols)},
        {"count", r.solutions.size()},
        {"total_enumerated", r.total_enumerated},
        {"total_feasible", r.total_feasible},
        {"bucket_spec", r.bucket_spec ? to_json(*r.bucket_spec) : json(nullptr)},
        {"seed", r.seed},
    };
    if (r.target) {
        const auto& t = *r.target;
        j["target"] = json{
            {"desired", t.desired},       {"tolerance", t.tolerance}, {"alpha", t.alpha},
            {"iterations", t.iterations}, {"capped", t.capped},       {"reached", t.reached},
        };
    }
    return j;
}

FrontierResult frontier_from_json(const json& j)
{
    try {
        FrontierResult r;
        for (const auto& sj : j.at("solutions")) {
            EvaluatedStrategy s;
            s.id = sj.at("id").get<std::int64_t>();
            s.strategy.t = sj.at("t").get<std::vector<std::int64_t>>();
            s.strategy.g = sj.at("g").get<std::vector<int>>();
            s.objectives.health = sj.at("health").get<double>();
            s.objectives.quarantine = sj.at("quarantine").get<std::vector<double>>();
            if (sj.contains("bucketized_health")) {
                ObjectiveVector b;
                b.health = sj.at("bucketized_health").get<double>();
                b.quarantine = sj.at("bucketized_quarantine").get<std::vector<double>>();
                s.bucketized = std::move(b);
            }
            r.solutions.push_back(std::move(s));
        }
        r.total_enumerated = j.at("total_enumerated").get<std::int64_t>();
        r.total_feasible = j.at("total_feasible").get<std::int64_t>();
        if (const auto& bs = j.at("bucket_spec"); !bs.is_null())
            r.bucket_spec = BucketSpec{bs.at("rho_health").get<double>(), bs.at("rho_quarantine").get<std::vector<double>>()};
        r.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("target")) {
            const auto& t = j["target"];
            r.target = TargetInfo{t.at("desired").get<std::int64_t>(), t.at("tolerance").get<std::int64_t>(),
                                  t.at("alpha").get<double>(),       t.at("iterations").get<int>(),
                                  t.at("capped").get<bool>(),        t.at("reached").get<bool>()};
        }
        return r;
    } catch (const json::exception& e) {
        throw ValidationError("schema", std::string("malformed frontier document: ") + e.what());
    }
}

} // namespace poolalloc
