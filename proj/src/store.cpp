#include "poolalloc/store.hpp"

#include <sqlite3.h>

namespace poolalloc {

namespace {

// RAII prepared statement with positional text/int binding.
class Statement
{
public:
    Statement(sqlite3* db, const char* sql)
        : db_(db)
    {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK)
            throw StoreError(std::string("prepare failed: ") + sqlite3_errmsg(db));
    }
    ~Statement() { sqlite3_finalize(stmt_); }

    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(int pos, const std::string& text)
    {
        sqlite3_bind_text(stmt_, pos, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT);
        return *this;
    }
    Statement& bind(int pos, std::int64_t value)
    {
        sqlite3_bind_int64(stmt_, pos, value);
        return *this;
    }

    /// True while a row is available.
    bool step()
    {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW)
            return true;
        if (rc == SQLITE_DONE)
            return false;
        throw StoreError(std::string("step failed: ") + sqlite3_errmsg(db_));
    }

    std::string text(int col) const
    {
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))) : std::string{};
    }
    std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

} // namespace

Store::Store(const std::string& path)
{
    if (sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX, nullptr) !=
        SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        db_ = nullptr;
        throw StoreError("cannot open store '" + path + "': " + msg);
    }
    try {
        exec("PRAGMA foreign_keys = ON");
        exec(R"sql(
            CREATE TABLE IF NOT EXISTS scenarios (
                scenario_id TEXT PRIMARY KEY,
                label TEXT NOT NULL,
                created_at TEXT NOT NULL,
                content_hash TEXT NOT NULL,
                body TEXT NOT NULL);
            CREATE TABLE IF NOT EXISTS frontiers (
                cache_key TEXT PRIMARY KEY,
                body TEXT NOT NULL);
            CREATE TABLE IF NOT EXISTS latest_frontier (
                scenario_id TEXT PRIMARY KEY REFERENCES scenarios(scenario_id),
                cache_key TEXT NOT NULL REFERENCES frontiers(cache_key));
            CREATE TABLE IF NOT EXISTS saved_solutions (
                saved_id TEXT PRIMARY KEY,
                scenario_id TEXT NOT NULL REFERENCES scenarios(scenario_id),
                solution_id INTEGER NOT NULL,
                note TEXT NOT NULL,
                saved_at TEXT NOT NULL,
                solution TEXT NOT NULL);
        )sql");
    } catch (...) {
        sqlite3_close(db_);
        db_ = nullptr;
        throw;
    }
}

Store::~Store()
{
    sqlite3_close(db_);
}

void Store::exec(const std::string& sql)
{
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw StoreError("store statement failed: " + msg);
    }
}

void Store::put_scenario(const StoredScenarioRow& row)
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "INSERT INTO scenarios (scenario_id, label, created_at, content_hash, body) VALUES (?,?,?,?,?)");
    st.bind(1, row.scenario_id).bind(2, row.label).bind(3, row.created_at).bind(4, row.content_hash).bind(5, row.body);
    st.step();
}

std::optional<StoredScenarioRow> Store::get_scenario(const std::string& scenario_id) const
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "SELECT scenario_id, label, created_at, content_hash, body FROM scenarios WHERE scenario_id = ?");
    st.bind(1, scenario_id);
    if (!st.step())
        return std::nullopt;
    return StoredScenarioRow{st.text(0), st.text(1), st.text(2), st.text(3), st.text(4)};
}

std::vector<StoredScenarioRow> Store::list_scenarios() const
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "SELECT scenario_id, label, created_at, content_hash, body FROM scenarios ORDER BY created_at, scenario_id");
    std::vector<StoredScenarioRow> rows;
    while (st.step())
        rows.push_back({st.text(0), st.text(1), st.text(2), st.text(3), st.text(4)});
    return rows;
}

void Store::put_frontier(const std::string& cache_key, const std::string& body)
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "INSERT OR REPLACE INTO frontiers (cache_key, body) VALUES (?,?)");
    st.bind(1, cache_key).bind(2, body);
    st.step();
}

std::optional<std::string> Store::get_frontier(const std::string& cache_key) const
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "SELECT body FROM frontiers WHERE cache_key = ?");
    st.bind(1, cache_key);
    if (!st.step())
        return std::nullopt;
    return st.text(0);
}

void Store::set_latest(const std::string& scenario_id, const std::string& cache_key)
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "INSERT OR REPLACE INTO latest_frontier (scenario_id, cache_key) VALUES (?,?)");
    st.bind(1, scenario_id).bind(2, cache_key);
    st.step();
}

std::optional<std::string> Store::get_latest(const std::string& scenario_id) const
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "SELECT cache_key FROM latest_frontier WHERE scenario_id = ?");
    st.bind(1, scenario_id);
    if (!st.step())
        return std::nullopt;
    return st.text(0);
}

void Store::put_solution(const SavedSolutionRow& row)
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "INSERT INTO saved_solutions (saved_id, scenario_id, solution_id, note, saved_at, solution) "
                      "VALUES (?,?,?,?,?,?)");
    st.bind(1, row.saved_id).bind(2, row.scenario_id).bind(3, row.solution_id).bind(4, row.note).bind(5, row.saved_at);
    st.bind(6, row.solution);
    st.step();
}

std::vector<SavedSolutionRow> Store::list_solutions(const std::string& scenario_id) const
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "SELECT saved_id, scenario_id, solution_id, note, saved_at, solution FROM saved_solutions "
                      "WHERE scenario_id = ? ORDER BY saved_at, rowid");
    st.bind(1, scenario_id);
    std::vector<SavedSolutionRow> rows;
    while (st.step())
        rows.push_back({st.text(0), st.text(1), st.integer(2), st.text(3), st.text(4), st.text(5)});
    return rows;
}

bool Store::delete_solution(const std::string& scenario_id, const std::string& saved_id)
{
    std::lock_guard lock(mutex_);
    Statement st(db_, "DELETE FROM saved_solutions WHERE scenario_id = ? AND saved_id = ?");
    st.bind(1, scenario_id).bind(2, saved_id);
    st.step();
    return sqlite3_changes(db_) > 0;
}

} // namespace poolalloc
