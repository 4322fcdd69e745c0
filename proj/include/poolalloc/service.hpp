#pragma once

#include "poolalloc/frontier.hpp"
#include "poolalloc/store.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace poolalloc {

struct ServiceConfig
{
    std::string host = "127.0.0.1";
    int port = 8080; // 0 binds an ephemeral port
    std::string store_path = "poolalloc.db";
    std::int64_t feasible_cap = 10'000'000;
    int workers = 2;
    /// How long POST .../frontier waits for a fresh job before answering 202.
    int sync_wait_ms = 2000;
    std::string cors_origin = "*";
};

/// REST front end under /v1. Frontier computations run on a bounded worker pool.
class Service
{
public:
    /// Opens the store; throws StoreError if the path is unusable.
    explicit Service(ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    const ServiceConfig& config() const noexcept { return config_; }

    /// Binds the configured address; returns the bound port. Throws std::runtime_error if binding fails.
    int bind();
    /// Serves until stop(); call bind() first.
    void serve();
    void stop();

private:
    struct Job
    {
        std::string job_id;
        std::string scenario_id;
        std::string cache_key;
        Scenario scenario;
        std::optional<std::int64_t> desired;
        std::uint64_t seed = 0;
        TargetOptions target;
        std::string state = "queued"; // queued | running | done | failed
        double progress = 0.0;
        int error_status = 0;
        json error;
    };

    void install_routes();
    void worker_loop();
    void run_job(const std::shared_ptr<Job>& job);
    json job_json(const Job& job) const;

    ServiceConfig config_;
    Store store_;
    std::unique_ptr<httplib::Server> server_;

    mutable std::mutex jobs_mutex_;
    std::condition_variable jobs_cv_;
    std::deque<std::shared_ptr<Job>> queue_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;            // by job id
    std::map<std::string, std::shared_ptr<Job>> active_by_key_;   // cache key -> unfinished job
    std::map<std::string, std::shared_ptr<Job>> latest_by_scenario_;
    std::map<std::string, std::unique_ptr<std::mutex>> solution_locks_;
    bool shutting_down_ = false;
    std::vector<std::thread> workers_;
    std::uint64_t next_job_ = 1;
};

} // namespace poolalloc
