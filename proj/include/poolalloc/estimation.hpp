#pragma once

#include "poolalloc/json_io.hpp"
#include "poolalloc/model.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace poolalloc {

/// CSV content error; carries the 1-based line number.
class CsvError : public std::runtime_error
{
public:
    CsvError(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message)
        , line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct InteractionRecord
{
    std::string person_id;
    std::string category_id;
    std::string event_id;
};

struct TestRecord
{
    std::string category_id;
    std::int64_t tested = 0;
    std::int64_t positive = 0;
    std::string period_label;
};

/// Declared population segment used by the estimators.
struct CategoryDecl
{
    std::string id;
    std::int64_t n = 0;
};

struct ExposureEstimate
{
    SquareMatrix d;
    SquareMatrix support; // co-occurrence count behind each cell
    std::vector<std::string> warnings;
};

struct PriorEstimate
{
    std::vector<double> p;
    std::vector<bool> pooled_fallback;
    std::vector<std::string> warnings;
};

struct PriorOptions
{
    double smoothing = 1.0;
    /// Number of most recent period labels (in lexicographic order) to aggregate.
    std::size_t window = 1;
    /// Manual overrides, e.g. from residual-water signals.
    std::map<std::string, double> overrides;
};

/// Mean number of co-present pairs per member of C_i with members of C_j, over all n_i members.
/// Repeat co-presence in distinct events counts each time; duplicate rows within an event do not.
/// Throws ValidationError if a record references an undeclared category.
ExposureEstimate estimate_exposure(const std::vector<InteractionRecord>& records,
                                   const std::vector<CategoryDecl>& categories);

/// p_i = (positives + s) / (tested + 2s) over the most recent window; categories without tests
/// fall back to the pooled estimate across categories.
PriorEstimate estimate_prior(const std::vector<TestRecord>& tests, const std::vector<CategoryDecl>& categories,
                             const PriorOptions& options = {});

std::vector<InteractionRecord> read_interactions_csv(std::istream& in);
std::vector<TestRecord> read_tests_csv(std::istream& in);

struct EstimatedParameters
{
    std::vector<CategoryDecl> categories;
    ExposureEstimate exposure;
    PriorEstimate prior;
};

/// Scenario JSON fragment: categories (with estimated p, v = 1), d and per-cell support.
json to_json(const EstimatedParameters& est);

} // namespace poolalloc
