#include "poolalloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace poolalloc {

namespace {

bool is_probability(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

// f_H given per-category untested fractions u and healthy-free probabilities z.
double criticals_from(const Scenario& sc, std::span<const double> u, std::span<const double> z)
{
    const std::size_t k = sc.k();
    const auto& d = sc.exposure.d;
    const auto& pi = sc.exposure.pi;
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const auto& c = sc.categories[i];
        double escape = 1.0;
        for (std::size_t j = 0; j < k; ++j) {
            escape *= std::pow(1.0 - pi(i, j) * sc.categories[j].p * u[j], d(i, j));
        }
        total += static_cast<double>(c.n) * c.v * z[i] * (1.0 - escape);
    }
    return total;
}

double untested(const Category& c, std::int64_t t, int g)
{
    return static_cast<double>(c.n - t * g) / static_cast<double>(c.n);
}

double healthy_free(const Category& c, double u, int g)
{
    const double q = c.q();
    return u * q + (1.0 - u) * std::pow(q, g);
}

} // namespace

void Scenario::validate() const
{
    const std::size_t k = categories.size();
    if (k == 0)
        throw ValidationError("categories non-empty", "scenario has no categories");

    std::set<std::string> ids;
    for (const auto& c : categories) {
        if (c.id.empty())
            throw ValidationError("id non-empty", "category id is empty");
        if (!ids.insert(c.id).second)
            throw ValidationError("id unique", "duplicate category id '" + c.id + "'");
        if (c.n < 1)
            throw ValidationError("n positive", "category '" + c.id + "' has n < 1");
        if (!is_probability(c.p))
            throw ValidationError("p out of range", "category '" + c.id + "' has p outside [0,1]");
        if (!is_probability(c.v))
            throw ValidationError("v out of range", "category '" + c.id + "' has v outside [0,1]");
    }

    if (exposure.d.size() != k || exposure.pi.size() != k)
        throw ValidationError("exposure dimension", "exposure matrices must be " + std::to_string(k) + "x" + std::to_string(k));
    for (double x : exposure.d.data()) {
        if (!std::isfinite(x) || x < 0.0)
            throw ValidationError("d non-negative", "contact count d_ij must be finite and >= 0");
    }
    for (double x : exposure.pi.data()) {
        if (!is_probability(x))
            throw ValidationError("pi out of range", "transmission probability pi_ij outside [0,1]");
    }

    if (budget < 1)
        throw ValidationError("budget positive", "budget must be >= 1");
    if (max_group < 1)
        throw ValidationError("max_group positive", "max_group must be >= 1");
    for (int g : group_menu) {
        if (g < 1)
            throw ValidationError("group_menu positive", "group sizes must be >= 1");
        if (g > max_group)
            throw ValidationError("group_menu bound", "group size " + std::to_string(g) + " exceeds max_group");
    }
}

std::vector<int> Scenario::effective_menu() const
{
    std::vector<int> menu{1};
    for (int g : group_menu) {
        if (g >= 1 && g <= max_group)
            menu.push_back(g);
    }
    std::sort(menu.begin(), menu.end());
    menu.erase(std::unique(menu.begin(), menu.end()), menu.end());
    return menu;
}

Strategy& Strategy::canonicalize()
{
    for (std::size_t i = 0; i < t.size() && i < g.size(); ++i) {
        if (t[i] == 0)
            g[i] = 1;
    }
    return *this;
}

Strategy Strategy::canonical() const
{
    Strategy s = *this;
    s.canonicalize();
    return s;
}

void check_dimensions(const Scenario& scenario, const Strategy& strategy)
{
    const std::size_t k = scenario.k();
    if (strategy.t.size() != k || strategy.g.size() != k) {
        std::ostringstream os;
        os << "strategy has |t|=" << strategy.t.size() << ", |g|=" << strategy.g.size() << " but scenario has k=" << k;
        throw StructuralError(os.str());
    }
}

std::optional<std::string> feasibility_violation(const Scenario& scenario, const Strategy& strategy)
{
    check_dimensions(scenario, strategy);
    const auto menu = scenario.effective_menu();
    std::int64_t used = 0;
    for (std::size_t i = 0; i < scenario.k(); ++i) {
        const auto& c = scenario.categories[i];
        const auto t = strategy.t[i];
        const auto g = strategy.g[i];
        if (t < 0)
            return "t_" + c.id + " is negative";
        // placeholder group sizes are ignored when a category receives no tests
        if (t == 0)
            continue;
        if (g < 1)
            return "g_" + c.id + " must be >= 1";
        if (g > scenario.max_group)
            return "g_" + c.id + " exceeds max_group";
        if (!std::binary_search(menu.begin(), menu.end(), g))
            return "g_" + c.id + " = " + std::to_string(g) + " is not in the group menu";
        if (t * g > c.n)
            return "t_" + c.id + " * g_" + c.id + " exceeds n_" + c.id;
        used += t;
    }
    if (used != scenario.budget)
        return "sum of tests " + std::to_string(used) + " != budget " + std::to_string(scenario.budget);
    return std::nullopt;
}

bool is_feasible(const Scenario& scenario, const Strategy& strategy)
{
    return !feasibility_violation(scenario, strategy).has_value();
}

double untested_fraction(const Scenario& scenario, const Strategy& strategy, std::size_t i)
{
    return untested(scenario.categories.at(i), strategy.t.at(i), strategy.g.at(i));
}

double healthy_free_prob(const Scenario& scenario, const Strategy& strategy, std::size_t i)
{
    const auto& c = scenario.categories.at(i);
    return healthy_free(c, untested(c, strategy.t.at(i), strategy.g.at(i)), strategy.g.at(i));
}

double escape_prob(const Scenario& scenario, const Strategy& strategy, std::size_t i, std::size_t j)
{
    const double u = untested_fraction(scenario, strategy, j);
    const double pj = scenario.categories.at(j).p;
    return std::pow(1.0 - scenario.exposure.pi(i, j) * pj * u, scenario.exposure.d(i, j));
}

double expected_criticals(const Scenario& scenario, const Strategy& strategy)
{
    check_dimensions(scenario, strategy);
    const std::size_t k = scenario.k();
    std::vector<double> u(k), z(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& c = scenario.categories[i];
        const auto t = strategy.t[i];
        // the all-zeros baseline carries g = 0; treat it as untested
        const int g = t == 0 ? 1 : strategy.g[i];
        u[i] = untested(c, t, g);
        z[i] = healthy_free(c, u[i], g);
    }
    return criticals_from(scenario, u, z);
}

double expected_criticals_untested(const Scenario& scenario)
{
    const std::size_t k = scenario.k();
    std::vector<double> u(k, 1.0), z(k);
    for (std::size_t i = 0; i < k; ++i)
        z[i] = scenario.categories[i].q();
    return criticals_from(scenario, u, z);
}

double health_objective(const Scenario& scenario, const Strategy& strategy)
{
    return expected_criticals_untested(scenario) - expected_criticals(scenario, strategy);
}

double quarantine_objective(const Scenario& scenario, const Strategy& strategy, std::size_t i)
{
    const auto& c = scenario.categories.at(i);
    const auto t = strategy.t.at(i);
    const int g = strategy.g.at(i);
    if (t == 0)
        return 0.0;
    const double q = c.q();
    return static_cast<double>(t * g) * (q - std::pow(q, g));
}

ObjectiveVector evaluate(const Scenario& scenario, const Strategy& strategy)
{
    return Evaluator(scenario).evaluate(strategy);
}

Evaluator::Evaluator(const Scenario& scenario)
    : scenario_(&scenario)
    , baseline_(expected_criticals_untested(scenario))
{
}

ObjectiveVector Evaluator::evaluate_unchecked(const Strategy& strategy) const
{
    const Scenario& sc = *scenario_;
    ObjectiveVector out;
    out.health = baseline_ - expected_criticals(sc, strategy);
    out.quarantine.resize(sc.k());
    for (std::size_t i = 0; i < sc.k(); ++i)
        out.quarantine[i] = quarantine_objective(sc, strategy, i);
    return out;
}

ObjectiveVector Evaluator::evaluate(const Strategy& strategy) const
{
    if (auto why = feasibility_violation(*scenario_, strategy))
        throw InfeasibleStrategy("infeasible strategy: " + *why);
    return evaluate_unchecked(strategy);
}

} // namespace poolalloc
