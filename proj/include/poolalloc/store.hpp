#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

struct sqlite3;

namespace poolalloc {

class StoreError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct StoredScenarioRow
{
    std::string scenario_id;
    std::string label;
    std::string created_at;
    std::string content_hash;
    std::string body; // canonical scenario JSON
};

struct SavedSolutionRow
{
    std::string saved_id;
    std::string scenario_id;
    std::int64_t solution_id = 0;
    std::string note;
    std::string saved_at;
    std::string solution; // EvaluatedStrategy JSON
};

/// Single-file SQLite document store. Every method is serialized on one mutex.
class Store
{
public:
    /// ":memory:" opens a private in-memory database. Throws StoreError on failure.
    explicit Store(const std::string& path);
    ~Store();

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    void put_scenario(const StoredScenarioRow& row);
    std::optional<StoredScenarioRow> get_scenario(const std::string& scenario_id) const;
    std::vector<StoredScenarioRow> list_scenarios() const;

    /// Frontier bodies keyed by scenario content hash + request parameters.
    void put_frontier(const std::string& cache_key, const std::string& body);
    std::optional<std::string> get_frontier(const std::string& cache_key) const;

    /// Most recently computed frontier for a scenario.
    void set_latest(const std::string& scenario_id, const std::string& cache_key);
    std::optional<std::string> get_latest(const std::string& scenario_id) const;

    void put_solution(const SavedSolutionRow& row);
    std::vector<SavedSolutionRow> list_solutions(const std::string& scenario_id) const;
    /// Returns false when nothing was deleted.
    bool delete_solution(const std::string& scenario_id, const std::string& saved_id);

private:
    void exec(const std::string& sql);

    sqlite3* db_ = nullptr;
    mutable std::mutex mutex_;
};

} // namespace poolalloc
