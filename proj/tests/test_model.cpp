#include "generators.hpp"
#include "oracles.hpp"

#include "poolalloc/json_io.hpp"
#include "poolalloc/model.hpp"

#include <doctest.h>

#include <cstring>

using namespace poolalloc;

namespace {

constexpr double kEps = 1e-9;

Scenario single(std::int64_t n, double p, std::int64_t budget, double d = 0.0, double pi = 0.0, double v = 1.0)
{
    Scenario sc;
    sc.categories = {{"a", n, p, v}};
    sc.exposure.d = SquareMatrix(1, d);
    sc.exposure.pi = SquareMatrix(1, pi);
    sc.budget = budget;
    return sc;
}

Strategy strat(std::vector<std::int64_t> t, std::vector<int> g)
{
    return Strategy{std::move(t), std::move(g)};
}

} // namespace

TEST_SUITE("model")
{
    TEST_CASE("feasibility examples")
    {
        CHECK(is_feasible(single(100, 0.1, 10), strat({10}, {5})));
        CHECK_FALSE(is_feasible(single(100, 0.1, 10), strat({9}, {5})));
        CHECK_FALSE(is_feasible(single(40, 0.1, 10), strat({10}, {5})));
    }

    TEST_CASE("feasibility rejects off-menu and oversized groups")
    {
        auto sc = single(100, 0.1, 10);
        CHECK_FALSE(is_feasible(sc, strat({10}, {4})));
        sc.group_menu = {1, 3, 5, 10, 12};
        CHECK_FALSE(is_feasible(sc, strat({5}, {12})));
        CHECK(is_feasible(sc, strat({10}, {1})));
    }

    TEST_CASE("dimension mismatch is a structural error")
    {
        const auto sc = single(100, 0.1, 10);
        CHECK_THROWS_AS(is_feasible(sc, strat({5, 5}, {1, 1})), StructuralError);
        CHECK_THROWS_AS(is_feasible(sc, strat({10}, {1, 1})), StructuralError);
    }

    TEST_CASE("zero-test categories accept any placeholder group size")
    {
        Scenario sc = single(10, 0.1, 2);
        sc.categories.push_back({"b", 10, 0.1, 1.0});
        sc.exposure.d = SquareMatrix(2);
        sc.exposure.pi = SquareMatrix(2);
        CHECK(is_feasible(sc, strat({2, 0}, {1, 7})));
        CHECK(strat({2, 0}, {1, 7}).canonical() == strat({2, 0}, {1, 1}));
    }

    TEST_CASE("untested fraction examples")
    {
        const auto sc = single(100, 0.1, 10);
        CHECK(untested_fraction(sc, strat({10}, {5}), 0) == doctest::Approx(0.5).epsilon(kEps));
        CHECK(untested_fraction(single(100, 0.1, 1), strat({0}, {1}), 0) == 1.0);
        CHECK(untested_fraction(single(50, 0.1, 10), strat({10}, {5}), 0) == 0.0);
    }

    TEST_CASE("healthy free probability examples")
    {
        CHECK(healthy_free_prob(single(100, 0.1, 10), strat({0}, {1}), 0) == doctest::Approx(0.9));
        CHECK(healthy_free_prob(single(100, 0.0, 10), strat({10}, {5}), 0) == 1.0);
        const double z = healthy_free_prob(single(100, 0.1, 10), strat({10}, {5}), 0);
        CHECK(std::abs(z - (0.5 * 0.9 + 0.5 * std::pow(0.9, 5))) < kEps);
        CHECK(std::abs(z - 0.74525) < 1e-5);
        const auto mc = oracle::healthy_free_mc(single(100, 0.1, 10), strat({10}, {5}), 0, 400'000, 11);
        CHECK(mc.agrees(z));
    }

    TEST_CASE("escape probability examples")
    {
        Scenario sc = single(100, 0.1, 10, 2.0, 0.5);
        CHECK(std::abs(escape_prob(sc, strat({10}, {5}), 0, 0) - 0.950625) < kEps);
        const auto mc = oracle::escape_mc(sc, strat({10}, {5}), 0, 0, 400'000, 12);
        CHECK(mc.agrees(0.950625));
        CHECK(escape_prob(single(100, 0.1, 10, 2.0, 0.0), strat({10}, {5}), 0, 0) == 1.0);
        CHECK(escape_prob(single(100, 0.1, 10, 0.0, 0.5), strat({10}, {5}), 0, 0) == 1.0);
    }

    TEST_CASE("non-integral exposure uses a real power")
    {
        Scenario sc = single(100, 0.2, 10, 2.5, 0.3);
        const double a = escape_prob(sc, strat({10}, {3}), 0, 0);
        const double u = 0.7;
        CHECK(std::abs(a - std::pow(1.0 - 0.3 * 0.2 * u, 2.5)) < kEps);
    }

    TEST_CASE("expected criticals examples")
    {
        CHECK(expected_criticals_untested(single(100, 0.0, 1, 3.0, 0.5)) == 0.0);
        CHECK(expected_criticals_untested(single(100, 0.2, 1, 3.0, 0.0)) == 0.0);
        const auto sc = single(100, 0.1, 1, 2.0, 0.5);
        const double f0 = expected_criticals_untested(sc);
        CHECK(std::abs(f0 - 8.775) < kEps);
        CHECK(std::abs(expected_criticals(sc, strat({0}, {0})) - f0) < kEps);
        const auto mc = oracle::criticals_mc(sc, Strategy{}, 400'000, 13);
        CHECK(mc.agrees(f0));
    }

    TEST_CASE("health objective examples")
    {
        auto sc = single(100, 0.1, 10, 2.0, 0.5);
        CHECK(health_objective(sc, strat({10}, {1})) > 0.0);
        CHECK(expected_criticals_untested(sc) - expected_criticals(sc, strat({0}, {1})) == 0.0);
        auto no_crit = single(100, 0.1, 10, 2.0, 0.5, 0.0);
        CHECK(health_objective(no_crit, strat({10}, {5})) == 0.0);
    }

    TEST_CASE("full coverage health matches the contagion oracle")
    {
        Scenario sc = single(30, 0.15, 10, 3.0, 0.4);
        sc.categories.push_back({"b", 20, 0.1, 0.5});
        sc.exposure.d = SquareMatrix(2);
        sc.exposure.pi = SquareMatrix(2);
        const double d[2][2] = {{3, 2}, {1, 4}};
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                sc.exposure.d(i, j) = d[i][j];
                sc.exposure.pi(i, j) = 0.4;
            }
        }
        sc.budget = 8;
        const auto s = strat({6, 2}, {5, 10});
        REQUIRE(is_feasible(sc, s));
        CHECK(untested_fraction(sc, s, 0) == 0.0);
        CHECK(untested_fraction(sc, s, 1) == 0.0);
        const auto f = oracle::criticals_mc(sc, s, 300'000, 14);
        const auto f0 = oracle::criticals_mc(sc, Strategy{}, 300'000, 15);
        CHECK(f.agrees(expected_criticals(sc, s)));
        CHECK(f0.agrees(expected_criticals_untested(sc)));
        CHECK(expected_criticals(sc, s) == 0.0);
        CHECK(health_objective(sc, s) == doctest::Approx(expected_criticals_untested(sc)));
    }

    TEST_CASE("quarantine objective examples")
    {
        auto sc = single(100, 0.1, 2);
        CHECK(quarantine_objective(sc, strat({2}, {1}), 0) == 0.0);
        CHECK(quarantine_objective(single(100, 0.0, 2), strat({2}, {3}), 0) == 0.0);
        const double q = quarantine_objective(sc, strat({2}, {3}), 0);
        CHECK(std::abs(q - 1.026) < kEps);
        CHECK(oracle::quarantine_mc(0.1, 2, 3, 400'000, 16).agrees(q));
    }

    TEST_CASE("evaluate bundles the separate operations")
    {
        std::mt19937_64 rng(21);
        for (int c = 0; c < 50; ++c) {
            const auto sc = gen::feasible_scenario(rng, {}, 2000);
            const auto s = gen::feasible_strategy(rng, sc);
            const auto ov = evaluate(sc, s);
            CHECK(ov.health == health_objective(sc, s));
            for (std::size_t i = 0; i < sc.k(); ++i)
                CHECK(ov.quarantine[i] == quarantine_objective(sc, s, i));
            CHECK(Evaluator(sc).evaluate(s) == ov);
        }
    }

    TEST_CASE("evaluate with individual tests has zero quarantine")
    {
        Scenario sc = single(100, 0.2, 5, 2.0, 0.3);
        sc.categories.push_back({"b", 100, 0.3, 1.0});
        sc.exposure.d = SquareMatrix(2, 2.0);
        sc.exposure.pi = SquareMatrix(2, 0.3);
        const auto ov = evaluate(sc, strat({5, 0}, {1, 1}));
        CHECK(ov.health >= 0.0);
        CHECK(ov.quarantine == std::vector<double>{0.0, 0.0});
    }

    TEST_CASE("evaluate names the violated constraint")
    {
        const auto sc = single(40, 0.1, 10);
        try {
            evaluate(sc, strat({10}, {5}));
            FAIL("expected InfeasibleStrategy");
        } catch (const InfeasibleStrategy& e) {
            CHECK(std::string(e.what()).find("exceeds n_a") != std::string::npos);
        }
        try {
            evaluate(sc, strat({9}, {1}));
            FAIL("expected InfeasibleStrategy");
        } catch (const InfeasibleStrategy& e) {
            CHECK(std::string(e.what()).find("budget") != std::string::npos);
        }
    }

    TEST_CASE("scenario validation names invariants")
    {
        auto expect = [](Scenario sc, const std::string& invariant) {
            try {
                sc.validate();
                FAIL("expected ValidationError for " << invariant);
            } catch (const ValidationError& e) {
                CHECK(e.invariant() == invariant);
            }
        };
        const auto ok = single(10, 0.1, 2);
        CHECK_NOTHROW(ok.validate());
        auto s = ok;
        s.budget = 0;
        expect(s, "budget positive");
        s = ok;
        s.categories[0].p = 1.5;
        expect(s, "p out of range");
        s = ok;
        s.categories[0].v = -0.1;
        expect(s, "v out of range");
        s = ok;
        s.categories[0].n = 0;
        expect(s, "n positive");
        s = ok;
        s.exposure.d = SquareMatrix(2);
        expect(s, "exposure dimension");
        s = ok;
        s.exposure.d(0, 0) = -1;
        expect(s, "d non-negative");
        s = ok;
        s.exposure.pi(0, 0) = 2;
        expect(s, "pi out of range");
        s = ok;
        s.group_menu = {1, 20};
        expect(s, "group_menu bound");
        s = ok;
        s.categories.push_back(s.categories[0]);
        s.exposure.d = SquareMatrix(2);
        s.exposure.pi = SquareMatrix(2);
        expect(s, "id unique");
        s = ok;
        s.categories.clear();
        s.exposure = {};
        expect(s, "categories non-empty");
    }

    TEST_CASE("scenario JSON round trip and content hash")
    {
        std::mt19937_64 rng(22);
        for (int c = 0; c < 20; ++c) {
            const auto sc = gen::scenario(rng);
            const auto back = scenario_from_json(to_json(sc));
            CHECK(back == sc);
            CHECK(content_hash(back) == content_hash(sc));
        }
        auto a = single(10, 0.1, 2);
        auto b = a;
        b.categories[0].p = 0.2;
        CHECK(content_hash(a) != content_hash(b));
    }

    TEST_CASE("scenario JSON decoding errors")
    {
        CHECK_THROWS_AS(parse_scenario("{not json"), ParseError);
        try {
            parse_scenario(R"({"categories":[{"id":"a","n":10,"p":0.1}],"d":[[1,2]],"pi":[[0]],"budget":1,"max_group":10})");
            FAIL("expected exposure dimension");
        } catch (const ValidationError& e) {
            CHECK(e.invariant() == "exposure dimension");
        }
        try {
            parse_scenario(R"({"categories":[{"id":"a","n":10}],"d":[[1]],"pi":[[0]],"budget":1})");
            FAIL("expected schema error");
        } catch (const ValidationError& e) {
            CHECK(e.invariant() == "schema");
        }
        const auto sc = parse_scenario(R"({"categories":[{"id":"a","n":10,"p":0.1}],"d":[1],"pi":[0],"budget":1,"max_group":10})");
        CHECK(sc.categories[0].v == 1.0);
    }
}

TEST_SUITE("model properties")
{
    TEST_CASE("objective bounds on random feasible strategies")
    {
        std::mt19937_64 rng(101);
        for (int c = 0; c < 200; ++c) {
            const auto sc = gen::feasible_scenario(rng, {}, 3000);
            const auto s = gen::feasible_strategy(rng, sc);
            const auto ov = evaluate(sc, s);
            CHECK(ov.health >= -kEps);
            for (std::size_t i = 0; i < sc.k(); ++i) {
                const double cap = static_cast<double>(s.t[i] * s.g[i]) * sc.categories[i].q();
                CHECK(ov.quarantine[i] >= 0.0);
                CHECK(ov.quarantine[i] <= cap + kEps);
                const double z = healthy_free_prob(sc, s, i);
                CHECK(z <= sc.categories[i].q() + kEps);
                const bool trivial = s.t[i] == 0 || sc.categories[i].p == 0.0 || s.g[i] == 1;
                if (trivial) {
                    CHECK(std::abs(z - sc.categories[i].q()) < kEps);
                    CHECK(ov.quarantine[i] == 0.0);
                } else {
                    CHECK(z < sc.categories[i].q());
                }
            }
        }
    }

    TEST_CASE("extreme priors never quarantine")
    {
        std::mt19937_64 rng(102);
        for (int c = 0; c < 100; ++c) {
            auto sc = gen::feasible_scenario(rng, {}, 3000);
            for (auto& cat : sc.categories)
                cat.p = gen::uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : 1.0;
            const auto s = gen::feasible_strategy(rng, sc);
            for (std::size_t i = 0; i < sc.k(); ++i)
                CHECK(quarantine_objective(sc, s, i) == 0.0);
        }
    }

    TEST_CASE("baseline has zero health objective")
    {
        std::mt19937_64 rng(103);
        for (int c = 0; c < 100; ++c) {
            const auto sc = gen::scenario(rng);
            Strategy zero{std::vector<std::int64_t>(sc.k(), 0), std::vector<int>(sc.k(), 0)};
            CHECK(expected_criticals(sc, zero) == expected_criticals_untested(sc));
        }
    }

    TEST_CASE("health gain is monotone in tests with groups fixed")
    {
        std::mt19937_64 rng(104);
        int checked = 0;
        while (checked < 150) {
            auto sc = gen::scenario(rng, {1, 3, 5, 80, 1, 8});
            if (count_feasible(sc) == 0)
                continue;
            const auto base = gen::feasible_strategy(rng, sc);
            const auto i = static_cast<std::size_t>(gen::uniform_int(rng, 0, static_cast<std::int64_t>(sc.k()) - 1));
            auto more = base;
            more.t[i] += 1;
            if (more.t[i] * more.g[i] > sc.categories[i].n)
                continue;
            auto bigger = sc;
            bigger.budget += 1;
            REQUIRE(is_feasible(bigger, more));
            CHECK(health_objective(bigger, more) >= health_objective(sc, base) - kEps);
            ++checked;
        }
    }

    TEST_CASE("evaluate is deterministic")
    {
        std::mt19937_64 rng(105);
        for (int c = 0; c < 100; ++c) {
            const auto sc = gen::feasible_scenario(rng, {}, 3000);
            const auto s = gen::feasible_strategy(rng, sc);
            const auto a = evaluate(sc, s);
            const auto b = evaluate(Scenario(sc), Strategy(s));
            CHECK(std::memcmp(&a.health, &b.health, sizeof(double)) == 0);
            CHECK(a == b);
        }
    }

    TEST_CASE("closed forms agree with oracles on random integral scenarios")
    {
        std::mt19937_64 rng(106);
        gen::ScenarioShape shape;
        shape.integral_d = true;
        shape.n_max = 60;
        for (int c = 0; c < 100; ++c) {
            const auto sc = gen::feasible_scenario(rng, shape, 3000);
            const auto s = gen::feasible_strategy(rng, sc);
            const auto i = static_cast<std::size_t>(gen::uniform_int(rng, 0, static_cast<std::int64_t>(sc.k()) - 1));
            const auto j = static_cast<std::size_t>(gen::uniform_int(rng, 0, static_cast<std::int64_t>(sc.k()) - 1));
            const auto seed = static_cast<std::uint64_t>(1000 + c);
            // 4 standard errors keeps the family-wise false alarm rate low over 300 comparisons.
            CHECK(oracle::healthy_free_mc(sc, s, i, 40'000, seed).agrees(healthy_free_prob(sc, s, i), 4.0));
            {
                const auto mc = oracle::escape_mc(sc, s, i, j, 40'000, seed + 1);
                INFO("case ", c, " d=", sc.exposure.d(i, j), " pi=", sc.exposure.pi(i, j), " p=", sc.categories[j].p,
                     " n=", sc.categories[j].n, " t=", s.t[j], " g=", s.g[j], " mc=", mc.mean, " se=", mc.se,
                     " closed=", escape_prob(sc, s, i, j));
                CHECK(mc.agrees(escape_prob(sc, s, i, j), 4.0));
            }
            CHECK(oracle::criticals_mc(sc, s, 40'000, seed + 2).agrees(expected_criticals(sc, s), 4.0));
        }
    }
}
