#include "generators.hpp"
#include "oracles.hpp"

#include "poolalloc/frontier.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <set>

using namespace poolalloc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Scenario make(std::vector<std::int64_t> n, std::int64_t budget, std::vector<int> menu, double p = 0.1)
{
    Scenario sc;
    for (std::size_t i = 0; i < n.size(); ++i)
        sc.categories.push_back({"c" + std::to_string(i), n[i], p + 0.05 * static_cast<double>(i), 1.0});
    sc.exposure.d = SquareMatrix(n.size(), 2.0);
    sc.exposure.pi = SquareMatrix(n.size(), 0.3);
    sc.budget = budget;
    sc.group_menu = std::move(menu);
    return sc;
}

std::set<Strategy> strategies_of(const FrontierResult& r)
{
    std::set<Strategy> out;
    for (const auto& s : r.solutions)
        out.insert(s.strategy);
    return out;
}

ObjectiveVector ov(double h, std::vector<double> q)
{
    return {h, std::move(q)};
}

bool mutually_nondominated(const FrontierResult& r, bool bucketed)
{
    for (const auto& a : r.solutions) {
        for (const auto& b : r.solutions) {
            const auto& va = bucketed ? *a.bucketized : a.objectives;
            const auto& vb = bucketed ? *b.bucketized : b.objectives;
            if (a.id != b.id && dominates(va, vb))
                return false;
        }
    }
    return true;
}

} // namespace

TEST_SUITE("frontier")
{
    TEST_CASE("enumeration examples")
    {
        auto one = make({100}, 3, {1, 3});
        const auto a = enumerate_strategies(one);
        REQUIRE(a.size() == 2);
        CHECK(a[0] == Strategy{{3}, {1}});
        CHECK(a[1] == Strategy{{3}, {3}});

        const auto b = enumerate_strategies(make({10, 10}, 1, {1}));
        CHECK(std::set<Strategy>(b.begin(), b.end()) ==
              std::set<Strategy>{Strategy{{1, 0}, {1, 1}}, Strategy{{0, 1}, {1, 1}}});

        const auto sc = make({6, 100}, 4, {1, 3});
        const auto c = enumerate_strategies(sc);
        const auto brute = oracle::brute_force_strategies(sc);
        CHECK(std::set<Strategy>(c.begin(), c.end()) == brute);
        CHECK(c.size() == brute.size());
        CHECK(count_feasible(sc) == static_cast<std::int64_t>(brute.size()));
        for (const auto& s : c)
            CHECK((s.g[0] != 3 || s.t[0] <= 2));
    }

    TEST_CASE("infeasible scenario")
    {
        const auto sc = make({2, 3}, 10, {1, 3});
        CHECK(count_feasible(sc) == 0);
        CHECK(enumerate_strategies(sc).empty());
        CHECK_THROWS_AS(pareto_frontier(sc), InfeasibleScenario);
        CHECK_THROWS_AS(pareto_frontier_serial(sc), InfeasibleScenario);
    }

    TEST_CASE("feasible cap")
    {
        const auto sc = make({100, 100, 100}, 20, {1, 3, 5, 10});
        FrontierOptions opt;
        opt.feasible_cap = 10;
        try {
            pareto_frontier(sc, opt);
            FAIL("expected CapExceeded");
        } catch (const CapExceeded& e) {
            CHECK(e.cap() == 10);
            CHECK(e.feasible() == count_feasible(sc));
        }
    }

    TEST_CASE("ids follow enumeration order")
    {
        const auto sc = make({20, 30}, 5, {1, 3, 5});
        const auto all = enumerate_strategies(sc);
        StrategySpace space(sc);
        std::int64_t expected = 0;
        space.for_each([&](std::int64_t id, const Strategy& s) {
            CHECK(id == expected);
            CHECK(s == all[static_cast<std::size_t>(id)]);
            ++expected;
        });
        CHECK(expected == space.total_feasible());
        for (const auto& s : pareto_frontier(sc).solutions)
            CHECK(all[static_cast<std::size_t>(s.id)] == s.strategy);
    }

    TEST_CASE("dominance examples")
    {
        CHECK(dominates(ov(10, {1, 1}), ov(9, {1, 1})));
        CHECK_FALSE(dominates(ov(10, {1, 1}), ov(10, {1, 1})));
        CHECK_FALSE(dominates(ov(10, {2, 1}), ov(9, {1, 1})));
        CHECK_FALSE(dominates(ov(9, {1, 1}), ov(10, {2, 1})));
        CHECK(dominates(ov(10, {1, 0.5}), ov(10, {1, 1})));
        CHECK_THROWS_AS(dominates(ov(1, {1}), ov(1, {1, 2})), StructuralError);
    }

    TEST_CASE("frontier examples")
    {
        const auto single = pareto_frontier(make({100}, 3, {1}));
        CHECK(single.solutions.size() == 1);
        CHECK(single.total_feasible == 1);

        // t=[3] with g=1 or g=3: the larger group covers more people but quarantines healthy ones
        const auto two = pareto_frontier(make({100}, 3, {1, 3}));
        CHECK(two.solutions.size() == 2);

        // with p = 0 nothing is gained or lost, so both vectors tie and both survive
        auto zero = make({100}, 3, {1, 3}, 0.0);
        CHECK(pareto_frontier(zero).solutions.size() == 2);

        FrontierArchive archive(1);
        CHECK(archive.offer({0, Strategy{{1}, {1}}, ov(5, {1}), std::nullopt}));
        CHECK(archive.offer({1, Strategy{{1}, {3}}, ov(6, {1}), std::nullopt}));
        CHECK(archive.size() == 1);
        CHECK_FALSE(archive.offer({2, Strategy{{1}, {5}}, ov(4, {2}), std::nullopt}));
        const auto kept = std::move(archive).take_sorted();
        REQUIRE(kept.size() == 1);
        CHECK(kept[0].id == 1);
    }

    TEST_CASE("bucketize examples")
    {
        BucketSpec spec{5.0, {1.0}};
        CHECK(bucketize(ov(12, {3}), spec).health == 10.0);
        CHECK(bucketize(ov(12.5, {3}), spec).health == 15.0);
        for (int x = 0; x < 20; ++x)
            CHECK(bucketize(ov(x, {static_cast<double>(x)}), spec).quarantine[0] == x);
        CHECK_THROWS_AS((BucketSpec{0.0, {1.0}}.validate(1)), ValidationError);
        CHECK_THROWS_AS((BucketSpec{1.0, {-1.0}}.validate(1)), ValidationError);
        CHECK_THROWS_AS((BucketSpec{1.0, {1.0}}.validate(2)), StructuralError);
    }

    TEST_CASE("tiny buckets reproduce the exact frontier")
    {
        std::mt19937_64 rng(31);
        for (int c = 0; c < 20; ++c) {
            const auto sc = gen::feasible_scenario(rng, {}, 3000);
            const auto exact = pareto_frontier(sc);
            BucketSpec spec{1e-12, std::vector<double>(sc.k(), 1e-12)};
            const auto b = bucketed_frontier(sc, spec, 7);
            std::set<std::vector<double>> exact_keys;
            for (const auto& s : exact.solutions) {
                std::vector<double> key{s.objectives.health};
                key.insert(key.end(), s.objectives.quarantine.begin(), s.objectives.quarantine.end());
                exact_keys.insert(key);
            }
            CHECK(b.solutions.size() == exact_keys.size());
            CHECK(oracle::bucketed_keys(exact.solutions, spec).size() == b.solutions.size());
        }
    }

    TEST_CASE("huge buckets give one solution")
    {
        std::mt19937_64 rng(32);
        for (int c = 0; c < 20; ++c) {
            const auto sc = gen::feasible_scenario(rng, {}, 3000);
            const auto exact = pareto_frontier(sc);
            double mag = 1.0;
            for (const auto& s : exact.solutions) {
                mag = std::max(mag, s.objectives.health);
                for (double q : s.objectives.quarantine)
                    mag = std::max(mag, q);
            }
            BucketSpec spec{2.5 * mag, std::vector<double>(sc.k(), 2.5 * mag)};
            CHECK(bucketed_frontier(sc, spec, 3).solutions.size() == 1);
        }
    }

    TEST_CASE("target count examples")
    {
        std::mt19937_64 rng(33);
        for (int c = 0; c < 20; ++c) {
            const auto sc = gen::feasible_scenario(rng, {2, 3, 20, 60, 4, 12}, 5000);
            const auto exact = pareto_frontier(sc);
            const auto [spec, one] = target_count_buckets(exact, 1, 5);
            CHECK(one.solutions.size() == 1);
            REQUIRE(one.target.has_value());
            CHECK(one.target->reached);

            const auto size = static_cast<std::int64_t>(exact.solutions.size());
            const auto capped = target_count_buckets(exact, size + 3, 5).second;
            CHECK(capped.target->capped);
            CHECK(strategies_of(capped) == strategies_of(exact));
        }
    }

    TEST_CASE("target count validates arguments")
    {
        const auto exact = pareto_frontier(make({50, 50}, 4, {1, 3, 5}));
        CHECK_THROWS_AS(target_count_buckets(exact, 0, 1), ValidationError);
        CHECK_THROWS_AS(target_count_buckets(exact, 3, 1, TargetOptions{-1, 0}), ValidationError);
        const auto [spec, r] = target_count_buckets(exact, 3, 1);
        CHECK(r.target->tolerance == 1);
        CHECK(r.bucket_spec.has_value());
    }

    TEST_CASE("filter examples")
    {
        const auto sc = make({30, 40}, 6, {1, 3, 5});
        const auto exact = pareto_frontier(sc);
        const std::vector<double> open(2, kInf);
        CHECK(strategies_of(filter_by_thresholds(exact, -kInf, open)) == strategies_of(exact));
        CHECK(filter_by_thresholds(exact, -kInf, {}).solutions.size() == exact.solutions.size());

        double hmax = 0.0;
        for (const auto& s : exact.solutions)
            hmax = std::max(hmax, s.objectives.health);
        CHECK(filter_by_thresholds(exact, hmax + 1.0, open).solutions.empty());

        const auto& pick = exact.solutions[exact.solutions.size() / 2];
        const auto f = filter_by_thresholds(exact, pick.objectives.health, pick.objectives.quarantine);
        CHECK(std::any_of(f.solutions.begin(), f.solutions.end(), [&](const auto& s) { return s.id == pick.id; }));
        for (const auto& s : f.solutions) {
            CHECK(s.objectives.health >= pick.objectives.health);
            CHECK(s.objectives.quarantine[0] <= pick.objectives.quarantine[0]);
            CHECK(s.objectives.quarantine[1] <= pick.objectives.quarantine[1]);
        }
        CHECK_THROWS_AS(filter_by_thresholds(exact, 0.0, {1.0}), StructuralError);
    }

    TEST_CASE("frontier JSON round trip keeps full precision")
    {
        const auto sc = make({30, 40, 25}, 5, {1, 3, 5});
        const auto [spec, r] = target_count_buckets(sc, 4, 9);
        const auto back = frontier_from_json(parse_json_text(to_json(r).dump()));
        REQUIRE(back.solutions.size() == r.solutions.size());
        for (std::size_t x = 0; x < r.solutions.size(); ++x) {
            CHECK(back.solutions[x].id == r.solutions[x].id);
            CHECK(back.solutions[x].strategy == r.solutions[x].strategy);
            CHECK(back.solutions[x].objectives == r.solutions[x].objectives);
            CHECK(back.solutions[x].bucketized == r.solutions[x].bucketized);
        }
        CHECK(back.seed == 9);
        CHECK(back.total_feasible == r.total_feasible);
        CHECK(back.bucket_spec->rho_quarantine == spec.rho_quarantine);
        CHECK(to_json(back).dump() == to_json(r).dump());
    }

    TEST_CASE("progress reaches one")
    {
        const auto sc = make({30, 40, 25}, 6, {1, 3, 5});
        double last = 0.0;
        FrontierOptions opt;
        opt.parallel = false;
        opt.progress = [&](double f) { last = std::max(last, f); };
        pareto_frontier(sc, opt);
        CHECK(last == doctest::Approx(1.0));
    }
}

TEST_SUITE("frontier properties")
{
    TEST_CASE("enumeration equals the brute-force enumerator")
    {
        std::mt19937_64 rng(201);
        for (int c = 0; c < 150; ++c) {
            const auto sc = gen::scenario(rng, {1, 3, 1, 30, 1, 7});
            const auto got = enumerate_strategies(sc);
            const std::set<Strategy> unique(got.begin(), got.end());
            const auto brute = oracle::brute_force_strategies(sc);
            CHECK(unique.size() == got.size());
            CHECK(unique == brute);
            CHECK(count_feasible(sc) == static_cast<std::int64_t>(brute.size()));
            StrategySpace space(sc);
            CHECK(space.total_enumerated() >= space.total_feasible());
        }
    }

    TEST_CASE("exact frontier equals the all-pairs filter")
    {
        std::mt19937_64 rng(202);
        for (int c = 0; c < 120; ++c) {
            const auto sc = gen::feasible_scenario(rng, {}, 3000);
            const auto r = pareto_frontier(sc);
            const auto brute = oracle::brute_force_frontier(sc);
            CHECK(strategies_of(r) == brute.strategies);
            CHECK(r.total_feasible == static_cast<std::int64_t>(brute.feasible));
            CHECK(mutually_nondominated(r, false));
        }
    }

    TEST_CASE("frontier is invariant under enumeration order")
    {
        std::mt19937_64 rng(203);
        for (int c = 0; c < 100; ++c) {
            const auto sc = gen::feasible_scenario(rng, {}, 3000);
            const auto all = enumerate_strategies(sc);
            std::vector<EvaluatedStrategy> evaluated;
            for (std::size_t x = 0; x < all.size(); ++x)
                evaluated.push_back({static_cast<std::int64_t>(x), all[x], evaluate(sc, all[x]), std::nullopt});
            std::shuffle(evaluated.begin(), evaluated.end(), rng);
            FrontierArchive archive(sc.k());
            for (auto& e : evaluated)
                archive.offer(e);
            FrontierResult shuffled;
            shuffled.solutions = std::move(archive).take_sorted();
            CHECK(strategies_of(shuffled) == strategies_of(pareto_frontier_serial(sc)));
        }
    }

    TEST_CASE("parallel merge equals sequential processing")
    {
        std::mt19937_64 rng(204);
        for (int c = 0; c < 100; ++c) {
            const auto sc = gen::feasible_scenario(rng, {1, 4, 1, 40, 1, 9}, 5000);
            FrontierOptions par;
            par.parallel = true;
            const auto a = pareto_frontier(sc, par);
            const auto b = pareto_frontier_serial(sc);
            REQUIRE(a.solutions.size() == b.solutions.size());
            for (std::size_t x = 0; x < a.solutions.size(); ++x) {
                CHECK(a.solutions[x].id == b.solutions[x].id);
                CHECK(a.solutions[x].objectives == b.solutions[x].objectives);
            }

            // split the stream arbitrarily, build partial archives, merge in random order
            const auto all = enumerate_strategies(sc);
            const std::size_t parts = static_cast<std::size_t>(gen::uniform_int(rng, 2, 6));
            std::vector<FrontierArchive> archives(parts, FrontierArchive(sc.k()));
            for (std::size_t x = 0; x < all.size(); ++x) {
                const auto part = static_cast<std::size_t>(gen::uniform_int(rng, 0, static_cast<std::int64_t>(parts) - 1));
                archives[part].offer({static_cast<std::int64_t>(x), all[x], evaluate(sc, all[x]), std::nullopt});
            }
            std::shuffle(archives.begin(), archives.end(), rng);
            for (std::size_t part = 1; part < parts; ++part)
                archives[0].merge(std::move(archives[part]));
            FrontierResult merged;
            merged.solutions = std::move(archives[0]).take_sorted();
            CHECK(strategies_of(merged) == strategies_of(b));
        }
    }

    TEST_CASE("bucketed frontier matches the bucketed all-pairs oracle")
    {
        std::mt19937_64 rng(205);
        for (int c = 0; c < 120; ++c) {
            const auto sc = gen::feasible_scenario(rng, {1, 3, 5, 60, 2, 10}, 5000);
            const auto exact = pareto_frontier(sc);
            const double scale = gen::uniform(rng, 0.01, 0.5);
            BucketSpec spec{std::max(scale * 10.0 * gen::uniform(rng, 0.1, 1.0), 1e-9), {}};
            for (std::size_t i = 0; i < sc.k(); ++i)
                spec.rho_quarantine.push_back(std::max(scale * 5.0 * gen::uniform(rng, 0.1, 1.0), 1e-9));
            const auto seed = static_cast<std::uint64_t>(c);
            const auto b = bucket_frontier(exact, spec, seed);

            CHECK(b.solutions.size() <= exact.solutions.size());
            CHECK(mutually_nondominated(b, true));
            std::set<std::vector<double>> got;
            const auto exact_set = strategies_of(exact);
            for (const auto& s : b.solutions) {
                REQUIRE(s.bucketized.has_value());
                CHECK(*s.bucketized == bucketize(s.objectives, spec));
                CHECK(exact_set.count(s.strategy) == 1);
                std::vector<double> key{s.bucketized->health};
                key.insert(key.end(), s.bucketized->quarantine.begin(), s.bucketized->quarantine.end());
                CHECK(got.insert(key).second);
            }
            CHECK(got == oracle::bucketed_keys(exact.solutions, spec));

            const auto again = bucketed_frontier(sc, spec, seed);
            CHECK(to_json(again).dump() == to_json(b).dump());
        }
    }

    TEST_CASE("representatives are independent of thread count and stable per seed")
    {
        std::mt19937_64 rng(206);
        for (int c = 0; c < 100; ++c) {
            const auto sc = gen::feasible_scenario(rng, {2, 3, 10, 60, 3, 10}, 5000);
            BucketSpec spec{0.2, std::vector<double>(sc.k(), 0.2)};
            FrontierOptions serial;
            serial.parallel = false;
            const auto a = bucketed_frontier(sc, spec, 42, serial);
            const auto b = bucketed_frontier(sc, spec, 42);
            CHECK(to_json(a).dump() == to_json(b).dump());
        }
    }

    TEST_CASE("target search respects its contract")
    {
        std::mt19937_64 rng(207);
        for (int c = 0; c < 100; ++c) {
            const auto sc = gen::feasible_scenario(rng, {2, 3, 10, 60, 3, 10}, 5000);
            const auto exact = pareto_frontier(sc);
            const auto desired = gen::uniform_int(rng, 1, 15);
            const auto [spec, r] = target_count_buckets(exact, desired, 11);
            REQUIRE(r.target.has_value());
            const auto count = static_cast<std::int64_t>(r.solutions.size());
            CHECK(count <= static_cast<std::int64_t>(exact.solutions.size()));
            CHECK(r.target->reached == (std::llabs(count - desired) <= r.target->tolerance));
            if (!r.target->capped) {
                CHECK(mutually_nondominated(r, true));
                CHECK(strategies_of(bucket_frontier(exact, spec, 11)) == strategies_of(r));
            }
        }
    }

    TEST_CASE("filter preserves ids and respects thresholds")
    {
        std::mt19937_64 rng(208);
        for (int c = 0; c < 100; ++c) {
            const auto sc = gen::feasible_scenario(rng, {}, 3000);
            const auto exact = pareto_frontier(sc);
            const double h = gen::uniform(rng, 0.0, 5.0);
            std::vector<double> q;
            for (std::size_t i = 0; i < sc.k(); ++i)
                q.push_back(gen::uniform(rng, 0.0, 5.0));
            const auto f = filter_by_thresholds(exact, h, q);
            std::size_t expected = 0;
            for (const auto& s : exact.solutions) {
                bool in = s.objectives.health >= h;
                for (std::size_t i = 0; i < sc.k(); ++i)
                    in = in && s.objectives.quarantine[i] <= q[i];
                expected += in;
            }
            CHECK(f.solutions.size() == expected);
            CHECK(std::is_sorted(f.solutions.begin(), f.solutions.end(),
                                 [](const auto& a, const auto& b) { return a.id < b.id; }));
        }
    }
}
