#include "poolalloc/service.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace poolalloc {

namespace {

std::string now_iso8601()
{
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto micros =
        std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count() % 1'000'000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(6) << std::setfill('0') << micros << 'Z';
    return os.str();
}

std::string make_uuid()
{
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    const std::uint64_t hi = (rng() & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;
    const std::uint64_t lo = (rng() & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(8) << (hi >> 32) << '-' << std::setw(4) << ((hi >> 16) & 0xffff)
       << '-' << std::setw(4) << (hi & 0xffff) << '-' << std::setw(4) << (lo >> 48) << '-' << std::setw(12)
       << (lo & 0xffffffffffffULL);
    return os.str();
}

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                json detail = json::object())
{
    send_json(res, status, json{{"code", code}, {"message", message}, {"detail", std::move(detail)}});
}

/// Query parameter parse failure; reported as 400.
struct BadRequest : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

double parse_double(const std::string& s, const std::string& name)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || std::isnan(v))
            throw BadRequest("parameter '" + name + "' is not a number");
        return v;
    } catch (const std::logic_error&) {
        throw BadRequest("parameter '" + name + "' is not a number");
    }
}

std::int64_t parse_int(const std::string& s, const std::string& name)
{
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size())
            throw BadRequest("parameter '" + name + "' is not an integer");
        return v;
    } catch (const std::logic_error&) {
        throw BadRequest("parameter '" + name + "' is not an integer");
    }
}

std::uint64_t parse_uint(const std::string& s, const std::string& name)
{
    try {
        std::size_t used = 0;
        if (!s.empty() && s[0] == '-')
            throw BadRequest("parameter '" + name + "' must be non-negative");
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size())
            throw BadRequest("parameter '" + name + "' is not an integer");
        return v;
    } catch (const std::logic_error&) {
        throw BadRequest("parameter '" + name + "' is not an integer");
    }
}

json scenario_row_json(const StoredScenarioRow& row)
{
    return json{{"scenario_id", row.scenario_id},
                {"label", row.label},
                {"created_at", row.created_at},
                {"content_hash", row.content_hash},
                {"scenario", parse_json_text(row.body)}};
}

json saved_row_json(const SavedSolutionRow& row)
{
    return json{{"saved_id", row.saved_id}, {"scenario_id", row.scenario_id}, {"solution", parse_json_text(row.solution)},
                {"note", row.note},         {"saved_at", row.saved_at}};
}

// Maps library exceptions onto the {code, message, detail} error body.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn)
{
    try {
        fn();
    } catch (const BadRequest& e) {
        send_error(res, 400, "bad_request", e.what());
    } catch (const ParseError& e) {
        send_error(res, 400, "malformed_json", e.what());
    } catch (const ValidationError& e) {
        send_error(res, 422, "invalid", e.invariant() + ": " + e.what(), json{{"invariant", e.invariant()}});
    } catch (const StructuralError& e) {
        send_error(res, 422, "dimension_mismatch", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

} // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config))
    , store_(config_.store_path)
    , server_(std::make_unique<httplib::Server>())
{
    install_routes();
    const int n = std::max(1, config_.workers);
    for (int w = 0; w < n; ++w)
        workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service()
{
    stop();
    {
        std::lock_guard lock(jobs_mutex_);
        shutting_down_ = true;
    }
    jobs_cv_.notify_all();
    for (auto& t : workers_)
        t.join();
}

int Service::bind()
{
    int port = config_.port;
    if (port == 0) {
        port = server_->bind_to_any_port(config_.host);
        if (port < 0)
            throw std::runtime_error("cannot bind " + config_.host);
    } else if (!server_->bind_to_port(config_.host, port)) {
        throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(port) + " (port in use?)");
    }
    config_.port = port;
    return port;
}

void Service::serve()
{
    server_->listen_after_bind();
}

void Service::stop()
{
    if (server_)
        server_->stop();
}

json Service::job_json(const Job& job) const
{
    json j{{"job_id", job.job_id},
           {"scenario_id", job.scenario_id},
           {"state", job.state},
           {"progress", job.progress},
           {"status_url", "/v1/jobs/" + job.job_id}};
    if (job.state == "failed")
        j["error"] = job.error;
    return j;
}

void Service::worker_loop()
{
    for (;;) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lock(jobs_mutex_);
            jobs_cv_.wait(lock, [&] { return shutting_down_ || !queue_.empty(); });
            if (shutting_down_)
                return;
            job = queue_.front();
            queue_.pop_front();
            job->state = "running";
        }
        run_job(job);
    }
}

void Service::run_job(const std::shared_ptr<Job>& job)
{
    FrontierOptions options;
    options.feasible_cap = config_.feasible_cap;
    options.progress = [this, job](double fraction) {
        std::lock_guard lock(jobs_mutex_);
        job->progress = std::max(job->progress, std::min(fraction, 1.0) * (job->desired ? 0.9 : 1.0));
    };

    int status = 0;
    json error;
    try {
        FrontierResult result;
        if (job->desired)
            result = target_count_buckets(job->scenario, *job->desired, job->seed, job->target, options).second;
        else {
            result = pareto_frontier(job->scenario, options);
            result.seed = job->seed;
        }
        store_.put_frontier(job->cache_key, to_json(result).dump());
        store_.set_latest(job->scenario_id, job->cache_key);
    } catch (const CapExceeded& e) {
        status = 409;
        error = json{{"code", "cap_exceeded"}, {"message", e.what()}, {"detail", {{"cap", e.cap()}, {"feasible", e.feasible()}}}};
    } catch (const InfeasibleScenario& e) {
        status = 422;
        error = json{{"code", "infeasible"}, {"message", e.what()}, {"detail", json::object()}};
    } catch (const ValidationError& e) {
        status = 422;
        error = json{{"code", "invalid"}, {"message", e.what()}, {"detail", {{"invariant", e.invariant()}}}};
    } catch (const std::exception& e) {
        status = 500;
        error = json{{"code", "internal"}, {"message", e.what()}, {"detail", json::object()}};
    }

    {
        std::lock_guard lock(jobs_mutex_);
        if (status == 0) {
            job->state = "done";
            job->progress = 1.0;
        } else {
            job->state = "failed";
            job->error_status = status;
            job->error = std::move(error);
        }
        active_by_key_.erase(job->cache_key);
    }
    jobs_cv_.notify_all();
}

void Service::install_routes()
{
    auto& srv = *server_;
    srv.set_default_headers({{"Access-Control-Allow-Origin", config_.cors_origin}});
    srv.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    srv.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, json{{"status", "ok"}});
    });

    srv.Post("/v1/scenarios", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json body = parse_json_text(req.body);
            Scenario sc = scenario_from_json(body);
            sc.validate();
            StoredScenarioRow row;
            row.scenario_id = make_uuid();
            if (body.contains("label")) {
                if (!body["label"].is_string())
                    throw ValidationError("schema", "field 'label' must be a string");
                row.label = body["label"].get<std::string>();
            }
            row.created_at = now_iso8601();
            row.content_hash = content_hash(sc);
            row.body = to_json(sc).dump();
            store_.put_scenario(row);
            send_json(res, 201, scenario_row_json(row));
        });
    });

    srv.Get("/v1/scenarios", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            json list = json::array();
            for (const auto& row : store_.list_scenarios())
                list.push_back(scenario_row_json(row));
            send_json(res, 200, json{{"scenarios", std::move(list)}});
        });
    });

    srv.Get(R"(/v1/scenarios/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto row = store_.get_scenario(req.matches[1]);
            if (!row)
                return send_error(res, 404, "not_found", "unknown scenario");
            send_json(res, 200, scenario_row_json(*row));
        });
    });

    srv.Post(R"(/v1/scenarios/([^/]+)/frontier)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            auto row = store_.get_scenario(id);
            if (!row)
                return send_error(res, 404, "not_found", "unknown scenario");

            auto job = std::make_shared<Job>();
            job->scenario_id = id;
            job->scenario = parse_scenario(row->body);
            if (req.has_param("desired")) {
                job->desired = parse_int(req.get_param_value("desired"), "desired");
                if (*job->desired < 1)
                    throw ValidationError("desired positive", "desired must be >= 1");
            }
            if (req.has_param("seed"))
                job->seed = parse_uint(req.get_param_value("seed"), "seed");
            if (req.has_param("tolerance"))
                job->target.tolerance = parse_int(req.get_param_value("tolerance"), "tolerance");
            if (req.has_param("max_iters"))
                job->target.max_iters = static_cast<int>(parse_int(req.get_param_value("max_iters"), "max_iters"));

            std::ostringstream key;
            key << row->content_hash << "|desired=" << (job->desired ? std::to_string(*job->desired) : "none")
                << "|seed=" << job->seed << "|tol=" << job->target.tolerance << "|iters=" << job->target.max_iters;
            job->cache_key = key.str();

            if (auto cached = store_.get_frontier(job->cache_key)) {
                store_.set_latest(id, job->cache_key);
                res.status = 200;
                res.set_content(*cached, "application/json");
                return;
            }

            const auto feasible = count_feasible(job->scenario);
            if (feasible == 0)
                return send_error(res, 422, "infeasible", "no feasible strategy exists for this scenario");
            if (feasible > config_.feasible_cap)
                return send_error(res, 409, "cap_exceeded",
                                  "feasible strategy count exceeds the configured cap of " +
                                      std::to_string(config_.feasible_cap),
                                  json{{"cap", config_.feasible_cap}, {"feasible", feasible}});

            std::shared_ptr<Job> active;
            {
                std::unique_lock lock(jobs_mutex_);
                if (auto it = active_by_key_.find(job->cache_key); it != active_by_key_.end()) {
                    active = it->second;
                } else {
                    job->job_id = std::to_string(next_job_++);
                    active = job;
                    jobs_[job->job_id] = job;
                    active_by_key_[job->cache_key] = job;
                    queue_.push_back(job);
                }
                latest_by_scenario_[id] = active;
                jobs_cv_.notify_all();
                jobs_cv_.wait_for(lock, std::chrono::milliseconds(config_.sync_wait_ms),
                                  [&] { return active->state == "done" || active->state == "failed"; });
                if (active->state == "failed")
                    return send_json(res, active->error_status, active->error);
                if (active->state != "done")
                    return send_json(res, 202, job_json(*active));
            }
            auto body = store_.get_frontier(active->cache_key);
            if (!body)
                return send_error(res, 500, "internal", "finished frontier missing from store");
            store_.set_latest(id, active->cache_key);
            res.status = 200;
            res.set_content(*body, "application/json");
        });
    });

    srv.Get(R"(/v1/scenarios/([^/]+)/frontier/status)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            {
                std::lock_guard lock(jobs_mutex_);
                if (auto it = latest_by_scenario_.find(id); it != latest_by_scenario_.end())
                    return send_json(res, 200, job_json(*it->second));
            }
            if (store_.get_latest(id))
                return send_json(res, 200, json{{"scenario_id", id}, {"state", "done"}, {"progress", 1.0}});
            send_error(res, 404, "not_found", "no frontier computation for this scenario");
        });
    });

    srv.Get(R"(/v1/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(jobs_mutex_);
        auto it = jobs_.find(req.matches[1]);
        if (it == jobs_.end())
            return send_error(res, 404, "not_found", "unknown job");
        send_json(res, 200, job_json(*it->second));
    });

    auto latest_frontier = [this](const std::string& id, httplib::Response& res) -> std::optional<std::string> {
        if (!store_.get_scenario(id)) {
            send_error(res, 404, "not_found", "unknown scenario");
            return std::nullopt;
        }
        auto key = store_.get_latest(id);
        auto body = key ? store_.get_frontier(*key) : std::nullopt;
        if (!body)
            send_error(res, 409, "compute_first", "compute first: no frontier has been computed for this scenario");
        return body;
    };

    srv.Get(R"(/v1/scenarios/([^/]+)/frontier)", [latest_frontier](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            if (auto body = latest_frontier(req.matches[1], res)) {
                res.status = 200;
                res.set_content(*body, "application/json");
            }
        });
    });

    srv.Get(R"(/v1/scenarios/([^/]+)/frontier/filter)",
            [this, latest_frontier](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                    const std::string id = req.matches[1];
                    auto body = latest_frontier(id, res);
                    if (!body)
                        return;
                    const auto frontier = frontier_from_json(parse_json_text(*body));
                    const auto sc = parse_scenario(store_.get_scenario(id)->body);
                    const std::size_t k = sc.k();

                    const double inf = std::numeric_limits<double>::infinity();
                    double min_health = -inf;
                    std::vector<double> max_q(k, inf);
                    if (req.has_param("min_health"))
                        min_health = parse_double(req.get_param_value("min_health"), "min_health");
                    if (req.has_param("max_q")) {
                        std::stringstream ss(req.get_param_value("max_q"));
                        std::string item;
                        std::size_t i = 0;
                        while (std::getline(ss, item, ',')) {
                            if (i >= k)
                                throw BadRequest("max_q has more than k entries");
                            if (!item.empty())
                                max_q[i] = parse_double(item, "max_q");
                            ++i;
                        }
                    }
                    for (const auto& [name, value] : req.params) {
                        if (name.rfind("max_q_", 0) != 0)
                            continue;
                        const std::string which = name.substr(6);
                        std::size_t i = k;
                        for (std::size_t c = 0; c < k; ++c) {
                            if (sc.categories[c].id == which)
                                i = c;
                        }
                        if (i == k) {
                            const auto idx = parse_int(which, name);
                            if (idx < 0 || static_cast<std::size_t>(idx) >= k)
                                throw BadRequest("unknown category in '" + name + "'");
                            i = static_cast<std::size_t>(idx);
                        }
                        max_q[i] = parse_double(value, name);
                    }
                    auto filtered = filter_by_thresholds(frontier, min_health, max_q);
                    send_json(res, 200, to_json(filtered));
                });
            });

    auto scenario_lock = [this](const std::string& id) -> std::mutex& {
        std::lock_guard lock(jobs_mutex_);
        auto& slot = solution_locks_[id];
        if (!slot)
            slot = std::make_unique<std::mutex>();
        return *slot;
    };

    srv.Post(R"(/v1/scenarios/([^/]+)/solutions)", [this, scenario_lock](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            if (!store_.get_scenario(id))
                return send_error(res, 404, "not_found", "unknown scenario");
            const json body = parse_json_text(req.body);
            if (!body.is_object() || !body.contains("solution_id") || !body["solution_id"].is_number_integer())
                throw ValidationError("schema", "body needs an integer 'solution_id'");
            std::string note;
            if (body.contains("note")) {
                if (!body["note"].is_string())
                    throw ValidationError("schema", "field 'note' must be a string");
                note = body["note"].get<std::string>();
            }
            const auto solution_id = body["solution_id"].get<std::int64_t>();

            std::lock_guard write(scenario_lock(id));
            auto key = store_.get_latest(id);
            auto frontier_body = key ? store_.get_frontier(*key) : std::nullopt;
            if (!frontier_body)
                return send_error(res, 422, "dangling_reference", "no frontier has been computed for this scenario",
                                  json{{"solution_id", solution_id}});
            const auto frontier = frontier_from_json(parse_json_text(*frontier_body));
            const EvaluatedStrategy* found = nullptr;
            for (const auto& s : frontier.solutions) {
                if (s.id == solution_id)
                    found = &s;
            }
            if (!found)
                return send_error(res, 422, "dangling_reference",
                                  "solution " + std::to_string(solution_id) + " is not in the latest frontier",
                                  json{{"solution_id", solution_id}});

            SavedSolutionRow row;
            row.saved_id = make_uuid();
            row.scenario_id = id;
            row.solution_id = solution_id;
            row.note = note;
            row.saved_at = now_iso8601();
            row.solution = to_json(*found).dump();
            store_.put_solution(row);
            send_json(res, 201, saved_row_json(row));
        });
    });

    srv.Get(R"(/v1/scenarios/([^/]+)/solutions)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            if (!store_.get_scenario(id))
                return send_error(res, 404, "not_found", "unknown scenario");
            json list = json::array();
            for (const auto& row : store_.list_solutions(id))
                list.push_back(saved_row_json(row));
            const auto count = list.size();
            send_json(res, 200, json{{"solutions", std::move(list)}, {"count", count}});
        });
    });

    srv.Delete(R"(/v1/scenarios/([^/]+)/solutions/([^/]+))",
               [this, scenario_lock](const httplib::Request& req, httplib::Response& res) {
                   guarded(res, [&] {
                       const std::string id = req.matches[1];
                       std::lock_guard write(scenario_lock(id));
                       if (!store_.delete_solution(id, req.matches[2]))
                           return send_error(res, 404, "not_found", "unknown saved solution");
                       res.status = 204;
                   });
               });
}

} // namespace poolalloc
