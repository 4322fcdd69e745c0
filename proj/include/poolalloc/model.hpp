#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace poolalloc {

/// Input violates a named Scenario/record invariant (maps to HTTP 422).
class ValidationError : public std::invalid_argument
{
public:
    ValidationError(std::string invariant, const std::string& message)
        : std::invalid_argument(message)
        , invariant_(std::move(invariant))
    {
    }

    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

/// Vector or matrix dimensions disagree with the number of categories.
class StructuralError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

/// Strategy violates a feasibility constraint; names the constraint.
class InfeasibleStrategy : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major k x k matrix. Row index is the receiving category.
class SquareMatrix
{
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t k, double fill = 0.0)
        : k_(k)
        , data_(k * k, fill)
    {
    }

    std::size_t size() const noexcept { return k_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * k_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * k_ + j]; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * k_, k_}; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const SquareMatrix&) const = default;

private:
    std::size_t k_ = 0;
    std::vector<double> data_;
};

struct Category
{
    std::string id;
    std::int64_t n = 1;
    double p = 0.0; // prior infection probability
    double v = 1.0; // probability an infection turns critical

    double q() const noexcept { return 1.0 - p; }

    bool operator==(const Category&) const = default;
};

struct ExposureMatrix
{
    SquareMatrix d;  // mean contacts a C_i member has with C_j members
    SquareMatrix pi; // per-contact transmission probability from C_j to C_i

    bool operator==(const ExposureMatrix&) const = default;
};

/// A complete problem instance. Construct freely, then call validate().
struct Scenario
{
    std::vector<Category> categories;
    ExposureMatrix exposure;
    std::int64_t budget = 1;
    int max_group = 10;
    std::vector<int> group_menu{1, 3, 5, 10};

    std::size_t k() const noexcept { return categories.size(); }

    /// Throws ValidationError naming the first violated invariant.
    void validate() const;

    /// Sorted, deduplicated menu with 1 always present and entries > max_group dropped.
    std::vector<int> effective_menu() const;

    bool operator==(const Scenario&) const = default;
};

/// Decision variable: t_i group tests of size g_i in category i.
struct Strategy
{
    std::vector<std::int64_t> t;
    std::vector<int> g;

    /// Categories without tests carry g_i = 1.
    Strategy& canonicalize();
    Strategy canonical() const;

    bool operator==(const Strategy&) const = default;
    auto operator<=>(const Strategy&) const = default;
};

struct ObjectiveVector
{
    double health = 0.0;
    std::vector<double> quarantine;

    bool operator==(const ObjectiveVector&) const = default;
};

// Feasibility -------------------------------------------------------------

/// Throws StructuralError when t or g does not have length k.
void check_dimensions(const Scenario& scenario, const Strategy& strategy);

/// Human-readable description of the first violated constraint, or nullopt if feasible.
std::optional<std::string> feasibility_violation(const Scenario& scenario, const Strategy& strategy);

bool is_feasible(const Scenario& scenario, const Strategy& strategy);

// Closed-form quantities of the single-step contagion model -----------------

/// u_i: probability a member of category i is not in any group.
double untested_fraction(const Scenario& scenario, const Strategy& strategy, std::size_t i);

/// z_i: probability a member of category i is healthy and not quarantined before contagion.
double healthy_free_prob(const Scenario& scenario, const Strategy& strategy, std::size_t i);

/// alpha_ij: probability a free, healthy member of i escapes infection from category j.
double escape_prob(const Scenario& scenario, const Strategy& strategy, std::size_t i, std::size_t j);

/// f_H(t, g): expected critical infections in the contagion step.
double expected_criticals(const Scenario& scenario, const Strategy& strategy);

/// f_H with no testing at all (z_i = q_i, u_j = 1).
double expected_criticals_untested(const Scenario& scenario);

/// O_H = f_H(untested) - f_H(t, g).
double health_objective(const Scenario& scenario, const Strategy& strategy);

/// O_Q,i = t_i g_i (q_i - q_i^g_i).
double quarantine_objective(const Scenario& scenario, const Strategy& strategy, std::size_t i);

/// Throws InfeasibleStrategy naming the violated constraint.
ObjectiveVector evaluate(const Scenario& scenario, const Strategy& strategy);

/// Caches the no-testing baseline so repeated evaluations only pay for f_H(t, g).
/// Produces results bit-identical to evaluate().
class Evaluator
{
public:
    explicit Evaluator(const Scenario& scenario);

    const Scenario& scenario() const noexcept { return *scenario_; }
    double baseline() const noexcept { return baseline_; }

    /// No feasibility check; callers enumerate feasible strategies only.
    ObjectiveVector evaluate_unchecked(const Strategy& strategy) const;
    ObjectiveVector evaluate(const Strategy& strategy) const;

private:
    const Scenario* scenario_;
    double baseline_;
};

} // namespace poolalloc
