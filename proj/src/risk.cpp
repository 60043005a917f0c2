#include "bridgekit/risk.hpp"

#include "bridgekit/error.hpp"

#include <spdlog/spdlog.h>

namespace bridgekit {

RiskLevel risk_level_from_int(int value) {
    if (value < 1 || value > 3) throw Error(ErrorCode::invalid_config, "risk level must be 1, 2 or 3");
    return static_cast<RiskLevel>(value);
}

RiskLevel classify(const ServerConfig& config, const std::string& tool) {
    if (const auto it = config.tool_risk.find(tool); it != config.tool_risk.end()) {
        return risk_level_from_int(it->second);
    }
    return risk_level_from_int(config.risk_level);
}

RiskLevel classify(const ServerConnection& server, const std::string& tool) {
    return classify(server.config, tool);
}

ConfirmationStore::ConfirmationStore(std::chrono::seconds ttl, std::size_t capacity, ClockFn clock)
    : ttl_(ttl), capacity_(capacity), clock_(std::move(clock)) {
    if (ttl_.count() <= 0) throw Error(ErrorCode::invalid_config, "confirmation TTL must be positive");
}

PendingConfirmation ConfirmationStore::create(const std::string& server_id, const std::string& tool,
                                              const json& params) {
    PendingConfirmation p;
    p.confirmation_id = make_uuid();
    p.token = random_hex(16);
    p.server_id = server_id;
    p.tool = tool;
    p.params = params;
    p.created_at = clock_();
    p.expires_at = p.created_at + ttl_;

    std::lock_guard lock(mutex_);
    if (entries_.size() >= capacity_) {
        // Expired entries do not count against the bound.
        std::erase_if(entries_, [&](const auto& kv) { return kv.second.expires_at <= p.created_at; });
        if (entries_.size() >= capacity_) {
            throw Error(ErrorCode::resource_exhausted, "too many pending confirmations");
        }
    }
    entries_.emplace(p.confirmation_id, p);
    return p;
}

std::variant<json, Cancelled> ConfirmationStore::resolve(const std::string& confirmation_id,
                                                         const std::string& token, Decision decision,
                                                         const Executor& execute) {
    static const std::string kNotFound = "Invalid confirmation ID or expired request";
    PendingConfirmation taken;
    {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(confirmation_id);
        if (it == entries_.end()) throw Error(ErrorCode::not_found, kNotFound);
        if (!constant_time_equal(it->second.token, token)) {
            spdlog::info("confirmation {}: Invalid confirmation token", confirmation_id);
            throw Error(ErrorCode::not_found, kNotFound);
        }
        if (it->second.expires_at <= clock_()) {
            entries_.erase(it);
            spdlog::info("confirmation {}: Confirmation expired", confirmation_id);
            throw Error(ErrorCode::not_found, kNotFound);
        }
        taken = std::move(it->second);
        entries_.erase(it);
    }
    if (decision == Decision::reject) return Cancelled{};
    return execute(taken);
}

std::optional<PendingConfirmation> ConfirmationStore::peek(const std::string& confirmation_id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(confirmation_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::size_t ConfirmationStore::purge_expired(WallClock::time_point now) {
    std::lock_guard lock(mutex_);
    return std::erase_if(entries_, [&](const auto& kv) { return kv.second.expires_at <= now; });
}

std::size_t ConfirmationStore::live_count() const {
    const auto now = clock_();
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& [_, p] : entries_) n += p.expires_at > now ? 1 : 0;
    return n;
}

std::size_t ConfirmationStore::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace bridgekit
