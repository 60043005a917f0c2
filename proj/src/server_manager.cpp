#include "bridgekit/server_manager.hpp"

#include "bridgekit/error.hpp"
#include "bridgekit/rpc_channel.hpp"

#include <spdlog/spdlog.h>

#include <deque>
#include <future>

namespace bridgekit {

std::string_view to_string(ServerState state) {
    switch (state) {
        case ServerState::starting: return "starting";
        case ServerState::healthy: return "healthy";
        case ServerState::degraded: return "degraded";
        case ServerState::stopped: return "stopped";
    }
    return "unknown";
}

namespace detail {

/// One server process (or SSE session) with its FIFO request queue. A single
/// worker thread drains the queue, so at most one request is in flight.
class Instance {
public:
    explicit Instance(std::unique_ptr<RpcChannel> channel) : channel_(std::move(channel)) {
        worker_ = std::thread([this] { run(); });
    }

    ~Instance() { stop(ErrorCode::server_stopped, "server stopped", std::chrono::milliseconds(0)); }

    RpcChannel& channel() { return *channel_; }

    std::future<json> submit(std::string method, json params, Clock::time_point deadline,
                             std::shared_ptr<std::atomic<bool>> cancelled = nullptr) {
        Job job{std::move(method), std::move(params), deadline, std::move(cancelled), {}};
        auto future = job.promise.get_future();
        {
            std::lock_guard lock(mutex_);
            if (stopping_) {
                job.promise.set_exception(
                    std::make_exception_ptr(Error(stop_code_, "server is shutting down")));
                return future;
            }
            queue_.push_back(std::move(job));
        }
        cv_.notify_one();
        return future;
    }

    void stop(ErrorCode code, const std::string& reason, std::chrono::milliseconds grace) {
        std::deque<Job> drained;
        {
            std::lock_guard lock(mutex_);
            if (stopping_) return;
            stopping_ = true;
            stop_code_ = code;
            drained.swap(queue_);
        }
        cv_.notify_all();
        for (auto& job : drained) job.promise.set_exception(std::make_exception_ptr(Error(code, reason)));
        channel_->close(code, reason, grace);
        if (worker_.joinable()) worker_.join();
    }

    std::size_t depth() const {
        std::lock_guard lock(mutex_);
        return queue_.size() + (busy_ ? 1 : 0);
    }

    bool idle() const { return depth() == 0; }

    bool alive() { return channel_->alive(); }

    std::vector<pid_t> pids() const { return channel_->pids(); }

private:
    struct Job {
        std::string method;
        json params;
        Clock::time_point deadline;
        std::shared_ptr<std::atomic<bool>> cancelled;
        std::promise<json> promise;
    };

    void run() {
        for (;;) {
            Job job;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (stopping_ && queue_.empty()) return;
                job = std::move(queue_.front());
                queue_.pop_front();
                busy_ = true;
            }
            try {
                if (job.cancelled && *job.cancelled) {
                    throw Error(ErrorCode::request_timeout, "request abandoned by caller");
                }
                const auto left =
                    std::chrono::duration_cast<std::chrono::milliseconds>(job.deadline - Clock::now());
                if (left.count() <= 0) throw Error(ErrorCode::request_timeout, job.method + " timed out in queue");
                job.promise.set_value(channel_->call(job.method, job.params, left));
            } catch (...) {
                job.promise.set_exception(std::current_exception());
            }
            std::lock_guard lock(mutex_);
            busy_ = false;
        }
    }

    std::unique_ptr<RpcChannel> channel_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Job> queue_;
    bool busy_ = false;
    bool stopping_ = false;
    ErrorCode stop_code_ = ErrorCode::server_stopped;
    std::thread worker_;
};

struct Connection {
    std::string id;
    ServerConfig config;

    mutable std::mutex mutex;
    Capabilities caps;
    ServerState state = ServerState::starting;
    std::vector<std::shared_ptr<Instance>> instances;
    std::uint64_t generation = 1;
    WallClock::time_point last_heartbeat;
    double handshake_ms = 0.0;
    int reconnects = 0;

    std::atomic<std::size_t> round_robin{0};
    std::atomic<std::uint64_t> routed{0};
    std::atomic<bool> reconnecting{false};
    std::atomic<bool> removed{false};
};

}  // namespace detail

using detail::Connection;
using detail::Instance;

ServerManager::ServerManager(SupervisorOptions options) : options_(options) {}

ServerManager::~ServerManager() { stop_all(); }

void ServerManager::on_state_change(StateListener listener) {
    std::lock_guard lock(listener_mutex_);
    listeners_.push_back(std::move(listener));
}

void ServerManager::emit(const std::string& id, ServerState state) {
    std::vector<StateListener> copy;
    {
        std::lock_guard lock(listener_mutex_);
        copy = listeners_;
    }
    for (auto& l : copy) l(id, state);
}

void ServerManager::set_state(Connection& conn, ServerState state) {
    {
        std::lock_guard lock(conn.mutex);
        if (conn.state == state) return;
        conn.state = state;
    }
    spdlog::info("server {} ({}) -> {}", conn.config.name, conn.id, to_string(state));
    emit(conn.id, state);
}

std::vector<std::shared_ptr<Instance>> ServerManager::spawn_instances(const ServerConfig& config,
                                                                       const std::string& id,
                                                                       std::uint64_t generation,
                                                                       Capabilities& caps) {
    std::vector<std::shared_ptr<Instance>> instances;
    const int count = config.transport == TransportKind::stdio ? config.pool_size : 1;
    try {
        for (int i = 0; i < count; ++i) {
            std::unique_ptr<Transport> transport;
            if (config.transport == TransportKind::stdio) {
                SpawnOptions spawn;
                spawn.argv.push_back(config.command);
                spawn.argv.insert(spawn.argv.end(), config.args.begin(), config.args.end());
                spawn.env = config.env;
                try {
                    transport = std::make_unique<StdioTransport>(spawn);
                } catch (const Error& e) {
                    throw Error(ErrorCode::spawn_failed, std::string("Failed to start MCP server: ") + e.what());
                }
            } else {
                transport = std::make_unique<SseTransport>(config.url, config.message_url,
                                                           std::chrono::milliseconds(config.connect_timeout_ms));
            }
            auto channel = std::make_unique<RpcChannel>(std::move(transport));
            channel->start([this, id, generation](const std::string& reason) {
                instance_closed(id, generation, reason);
            });
            auto instance = std::make_shared<Instance>(std::move(channel));
            instances.push_back(instance);
            auto discovered =
                initialize_handshake(instance->channel(), std::chrono::milliseconds(config.connect_timeout_ms));
            if (i == 0) caps = std::move(discovered);
        }
    } catch (...) {
        for (auto& inst : instances) inst->stop(ErrorCode::server_stopped, "startup failed", std::chrono::milliseconds(0));
        throw;
    }
    return instances;
}

ServerConnection ServerManager::start_server(const ServerConfig& config) {
    validate(config);
    if (auto existing = find(config.name); existing && existing->config.name == config.name) {
        throw Error(ErrorCode::invalid_config, "Invalid server configuration: name '" + config.name + "' already in use");
    }
    auto conn = std::make_shared<Connection>();
    conn->id = make_uuid();
    conn->config = config;

    const auto t0 = Clock::now();
    Capabilities caps;
    auto instances = spawn_instances(config, conn->id, conn->generation, caps);
    {
        std::lock_guard lock(conn->mutex);
        conn->caps = std::move(caps);
        conn->instances = std::move(instances);
        conn->handshake_ms = to_ms(Clock::now() - t0);
        conn->last_heartbeat = WallClock::now();
        conn->state = ServerState::healthy;
    }
    {
        std::unique_lock lock(registry_mutex_);
        bool duplicate = false;
        for (const auto& [_, other] : registry_) duplicate |= other->config.name == config.name;
        if (!duplicate) registry_.emplace(conn->id, conn);
        lock.unlock();
        if (duplicate) {
            for (auto& inst : conn->instances) inst->stop(ErrorCode::server_stopped, "duplicate", std::chrono::milliseconds(0));
            throw Error(ErrorCode::invalid_config,
                        "Invalid server configuration: name '" + config.name + "' already in use");
        }
    }
    spdlog::info("server {} started as {} with {} tools", config.name, conn->id, conn->caps.tools.size());
    emit(conn->id, ServerState::healthy);
    return view(*conn);
}

void ServerManager::stop_server(const std::string& id) {
    std::shared_ptr<Connection> conn;
    {
        std::unique_lock lock(registry_mutex_);
        auto it = registry_.find(id);
        if (it == registry_.end()) {
            for (auto i = registry_.begin(); i != registry_.end(); ++i) {
                if (i->second->config.name == id) it = i;
            }
        }
        if (it == registry_.end()) throw Error(ErrorCode::not_found, "Server not found");
        conn = it->second;
        registry_.erase(it);
    }
    conn->removed = true;
    supervisor_cv_.notify_all();
    std::vector<std::shared_ptr<Instance>> instances;
    {
        std::lock_guard lock(conn->mutex);
        instances.swap(conn->instances);
        conn->state = ServerState::stopped;
    }
    for (auto& inst : instances) inst->stop(ErrorCode::server_stopped, "server stopped", options_.shutdown_grace);
    emit(conn->id, ServerState::stopped);
}

std::shared_ptr<Connection> ServerManager::find(const std::string& id_or_name) const {
    std::shared_lock lock(registry_mutex_);
    if (auto it = registry_.find(id_or_name); it != registry_.end()) return it->second;
    for (const auto& [_, conn] : registry_) {
        if (conn->config.name == id_or_name) return conn;
    }
    return nullptr;
}

std::vector<std::shared_ptr<Connection>> ServerManager::snapshot() const {
    std::shared_lock lock(registry_mutex_);
    std::vector<std::shared_ptr<Connection>> out;
    for (const auto& [_, conn] : registry_) out.push_back(conn);
    return out;
}

json ServerManager::route_request(const std::string& id, const std::string& tool, const json& arguments) {
    auto conn = find(id);
    if (!conn) throw Error(ErrorCode::not_found, "Server not found");
    std::shared_ptr<Instance> instance;
    {
        std::lock_guard lock(conn->mutex);
        if (conn->state != ServerState::healthy || conn->instances.empty()) {
            throw Error(ErrorCode::server_unavailable,
                        "Server '" + conn->config.name + "' is " + std::string(to_string(conn->state)));
        }
        instance = conn->instances[conn->round_robin++ % conn->instances.size()];
    }
    ++conn->routed;
    const auto deadline = Clock::now() + options_.request_timeout;
    auto cancelled = std::make_shared<std::atomic<bool>>(false);
    auto future = instance->submit("tools/call",
                                   {{"name", tool}, {"arguments", arguments.is_null() ? json::object() : arguments}},
                                   deadline, cancelled);
    // The worker enforces the deadline; the slack only covers scheduling.
    if (future.wait_until(deadline + std::chrono::milliseconds(250)) != std::future_status::ready) {
        *cancelled = true;
        throw Error(ErrorCode::request_timeout, "tools/call timed out");
    }
    return future.get();
}

std::vector<std::pair<std::string, ServerState>> ServerManager::heartbeat_tick() {
    struct Probe {
        std::shared_ptr<Connection> conn;
        std::uint64_t generation;
        bool failed = false;
        std::vector<std::future<json>> pings;
    };
    std::vector<Probe> probes;
    const auto deadline = Clock::now() + options_.heartbeat_deadline;
    for (auto& conn : snapshot()) {
        Probe probe{conn, 0, false, {}};
        std::lock_guard lock(conn->mutex);
        probe.generation = conn->generation;
        if (conn->state == ServerState::healthy) {
            for (auto& inst : conn->instances) {
                if (!inst->alive()) {
                    probe.failed = true;
                } else if (inst->idle()) {
                    probe.pings.push_back(inst->submit("ping", json::object(), deadline));
                }
                // Busy instances are making progress; their own request timeout covers hangs.
            }
        }
        probes.push_back(std::move(probe));
    }

    std::vector<std::pair<std::string, ServerState>> out;
    for (auto& probe : probes) {
        for (auto& ping : probe.pings) {
            try {
                if (ping.wait_until(deadline + std::chrono::milliseconds(100)) != std::future_status::ready) {
                    probe.failed = true;
                    continue;
                }
                ping.get();
            } catch (const RpcFault&) {
                // An error reply still proves the server is alive.
            } catch (const std::exception&) {
                probe.failed = true;
            }
        }
        auto& conn = *probe.conn;
        bool degrade = false;
        {
            std::lock_guard lock(conn.mutex);
            if (conn.state == ServerState::healthy && conn.generation == probe.generation) {
                if (probe.failed) {
                    degrade = true;
                } else {
                    conn.last_heartbeat = WallClock::now();
                }
            }
        }
        if (degrade) {
            set_state(conn, ServerState::degraded);
            schedule_reconnect(probe.conn);
        }
        std::lock_guard lock(conn.mutex);
        out.emplace_back(conn.id, conn.state);
    }
    return out;
}

void ServerManager::instance_closed(const std::string& id, std::uint64_t generation, const std::string& reason) {
    auto conn = find(id);
    if (!conn || conn->removed) return;
    bool degrade = false;
    {
        std::lock_guard lock(conn->mutex);
        degrade = conn->generation == generation && conn->state == ServerState::healthy;
    }
    if (!degrade) return;
    spdlog::warn("server {} lost: {}", conn->config.name, reason);
    set_state(*conn, ServerState::degraded);
    schedule_reconnect(conn);
}

void ServerManager::schedule_reconnect(const std::shared_ptr<Connection>& conn) {
    std::lock_guard lock(supervisor_mutex_);
    if (!options_.auto_reconnect || shutting_down_ || !supervisor_.joinable()) return;
    if (conn->reconnecting) return;
    const std::string id = conn->id;
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::thread worker([this, id, done] {
        try {
            reconnect(id);
        } catch (const std::exception& e) {
            spdlog::warn("automatic reconnect of {} gave up: {}", id, e.what());
        }
        *done = true;
    });
    reconnect_threads_.push_back({std::move(worker), std::move(done)});
}

ServerConnection ServerManager::reconnect(const std::string& id) {
    auto conn = find(id);
    if (!conn) throw Error(ErrorCode::not_found, "Server not found");
    {
        std::lock_guard lock(conn->mutex);
        if (conn->state == ServerState::healthy) return view(*conn);
    }
    if (conn->reconnecting.exchange(true)) {
        // Someone else is already on it; wait for the outcome.
        while (conn->reconnecting && !conn->removed) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        return view(*conn);
    }
    struct Reset {
        std::atomic<bool>& flag;
        ~Reset() { flag = false; }
    } reset{conn->reconnecting};

    std::vector<std::shared_ptr<Instance>> old;
    std::uint64_t generation;
    {
        std::lock_guard lock(conn->mutex);
        old.swap(conn->instances);
        generation = ++conn->generation;
    }
    for (auto& inst : old) inst->stop(ErrorCode::transport_failure, "server lost", std::chrono::milliseconds(0));

    auto delay = options_.backoff_initial;
    for (int attempt = 1; attempt <= options_.max_reconnect_attempts; ++attempt) {
        {
            std::unique_lock lock(supervisor_mutex_);
            supervisor_cv_.wait_for(lock, delay, [&] { return shutting_down_ || conn->removed.load(); });
            if (shutting_down_ || conn->removed) return view(*conn);
        }
        try {
            const auto t0 = Clock::now();
            Capabilities caps;
            auto instances = spawn_instances(conn->config, conn->id, generation, caps);
            bool abandoned = false;
            {
                std::lock_guard lock(conn->mutex);
                abandoned = conn->removed || conn->state == ServerState::stopped;
                if (!abandoned) {
                    conn->instances = std::move(instances);
                    conn->caps = std::move(caps);
                    conn->handshake_ms = to_ms(Clock::now() - t0);
                    conn->last_heartbeat = WallClock::now();
                    ++conn->reconnects;
                }
            }
            if (abandoned) {
                for (auto& inst : instances) inst->stop(ErrorCode::server_stopped, "server removed", std::chrono::milliseconds(0));
                return view(*conn);
            }
            spdlog::info("server {} reconnected on attempt {}", conn->config.name, attempt);
            set_state(*conn, ServerState::healthy);
            return view(*conn);
        } catch (const std::exception& e) {
            spdlog::warn("reconnect attempt {} for {} failed: {}", attempt, conn->config.name, e.what());
        }
        delay = std::min(delay * 2, options_.backoff_cap);
    }
    set_state(*conn, ServerState::stopped);
    throw Error(ErrorCode::server_unavailable,
                "Server '" + conn->config.name + "' could not be restarted after " +
                    std::to_string(options_.max_reconnect_attempts) + " attempts");
}

void ServerManager::start_supervisor() {
    std::lock_guard lock(supervisor_mutex_);
    if (supervisor_.joinable()) return;
    shutting_down_ = false;
    supervisor_ = std::thread([this] { supervisor_loop(); });
}

void ServerManager::supervisor_loop() {
    for (;;) {
        {
            std::unique_lock lock(supervisor_mutex_);
            supervisor_cv_.wait_for(lock, options_.heartbeat_interval, [&] { return shutting_down_; });
            if (shutting_down_) return;
        }
        heartbeat_tick();
        std::lock_guard lock(supervisor_mutex_);
        std::erase_if(reconnect_threads_, [](ReconnectTask& task) {
            if (!*task.done) return false;
            task.thread.join();
            return true;
        });
    }
}

void ServerManager::stop_all() {
    std::vector<ReconnectTask> threads;
    {
        std::lock_guard lock(supervisor_mutex_);
        shutting_down_ = true;
    }
    supervisor_cv_.notify_all();
    if (supervisor_.joinable()) supervisor_.join();
    {
        std::lock_guard lock(supervisor_mutex_);
        threads.swap(reconnect_threads_);
    }
    for (auto& task : threads) {
        if (task.thread.joinable()) task.thread.join();
    }
    std::vector<std::shared_ptr<Connection>> all;
    {
        std::unique_lock lock(registry_mutex_);
        for (auto& [_, conn] : registry_) all.push_back(conn);
        registry_.clear();
    }
    for (auto& conn : all) {
        conn->removed = true;
        std::vector<std::shared_ptr<Instance>> instances;
        {
            std::lock_guard lock(conn->mutex);
            instances.swap(conn->instances);
            conn->state = ServerState::stopped;
        }
        for (auto& inst : instances) inst->stop(ErrorCode::server_stopped, "bridge shutting down", options_.shutdown_grace);
    }
}

ServerConnection ServerManager::view(const Connection& conn) const {
    ServerConnection v;
    v.id = conn.id;
    v.config = conn.config;
    std::lock_guard lock(conn.mutex);
    v.capabilities = conn.caps;
    v.state = conn.state;
    v.last_heartbeat = conn.last_heartbeat;
    v.handshake_ms = conn.handshake_ms;
    v.reconnects = conn.reconnects;
    v.requests_routed = conn.routed;
    for (const auto& inst : conn.instances) {
        v.queue_depth += inst->depth();
        for (auto pid : inst->pids()) v.pids.push_back(pid);
    }
    return v;
}

std::optional<ServerConnection> ServerManager::get(const std::string& id_or_name) const {
    auto conn = find(id_or_name);
    if (!conn) return std::nullopt;
    return view(*conn);
}

std::vector<ServerConnection> ServerManager::list() const {
    std::vector<ServerConnection> out;
    for (const auto& conn : snapshot()) out.push_back(view(*conn));
    return out;
}

std::size_t ServerManager::size() const {
    std::shared_lock lock(registry_mutex_);
    return registry_.size();
}

std::vector<pid_t> ServerManager::live_pids() const {
    std::vector<pid_t> out;
    for (const auto& v : list()) out.insert(out.end(), v.pids.begin(), v.pids.end());
    return out;
}

}  // namespace bridgekit
