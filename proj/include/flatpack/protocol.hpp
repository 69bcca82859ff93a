#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flatpack/catalog.hpp"
#include "flatpack/env.hpp"
#include "flatpack/record.hpp"
#include "flatpack/version.hpp"

namespace flatpack {

// Wire format: one JSON object per WebSocket text frame.
//   request:  {"type": <string>, "id": <integer>, ...payload}
//   reply:    {"type": "result", "id": <same>, "result": {...}}
//         or  {"type": "error",  "id": <same or null>, "error": {"code", "message"}}

using Clock = std::chrono::steady_clock;
using ConnectionId = std::uint64_t;

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(std::string code, const std::string& message) : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct Recorder {
    std::unique_ptr<TrajectoryWriter> writer;
    bool include_obs = false;
};

struct Session {
    std::string id;
    ConnectionId owner = 0;
    Env env;
    std::optional<Recorder> recorder;
    Clock::time_point created;
    Clock::time_point last_active;
    // Serializes all work on this session's env.
    std::mutex mutex;

    Session(std::string id_, ConnectionId owner_, Env env_, Clock::time_point now)
        : id(std::move(id_)), owner(owner_), env(std::move(env_)), created(now), last_active(now) {}

    /// Closes the recording if one is open; returns (path, steps) of the file.
    std::optional<std::pair<std::string, int>> stop_recording() {
        if (!recorder) return std::nullopt;
        auto out = std::make_pair(recorder->writer->path().string(), recorder->writer->steps_written());
        recorder->writer->close();
        recorder.reset();
        return out;
    }
};

struct SessionTableOptions {
    std::filesystem::path record_dir = "recordings";
    Clock::duration idle_timeout = std::chrono::minutes(10);
};

/// Every live session, keyed by id. A session is only visible to the
/// connection that created it.
class SessionTable {
public:
    explicit SessionTable(SessionTableOptions opts = {}) : opts_(std::move(opts)) {}

    std::shared_ptr<Session> create(ConnectionId owner, Env env, Clock::time_point now = Clock::now()) {
        std::lock_guard lock(mutex_);
        auto id = "s" + std::to_string(++counter_);
        auto s = std::make_shared<Session>(id, owner, std::move(env), now);
        sessions_.emplace(id, s);
        return s;
    }

    std::shared_ptr<Session> find(ConnectionId owner, const std::string& id) const {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end() || it->second->owner != owner) return nullptr;
        return it->second;
    }

    bool erase(ConnectionId owner, const std::string& id) {
        std::shared_ptr<Session> s;
        {
            std::lock_guard lock(mutex_);
            auto it = sessions_.find(id);
            if (it == sessions_.end() || it->second->owner != owner) return false;
            s = it->second;
            sessions_.erase(it);
        }
        finish(*s);
        return true;
    }

    /// Drops every session owned by `owner`; returns their ids.
    std::vector<std::string> erase_owner(ConnectionId owner) {
        return erase_if([&](const Session& s) { return s.owner == owner; });
    }

    /// Drops sessions idle for longer than the configured timeout.
    std::vector<std::string> evict_idle(Clock::time_point now = Clock::now()) {
        return erase_if([&](Session& s) {
            std::unique_lock lock(s.mutex, std::try_to_lock);
            return lock.owns_lock() && now - s.last_active > opts_.idle_timeout;
        });
    }

    std::vector<std::string> clear() {
        return erase_if([](const Session&) { return true; });
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

    const SessionTableOptions& options() const { return opts_; }

private:
    static void finish(Session& s) {
        std::lock_guard lock(s.mutex);
        try {
            s.stop_recording();
        } catch (const Error&) {
            // The connection is going away; nothing left to report the failure to.
        }
    }

    template <class Pred>
    std::vector<std::string> erase_if(Pred pred) {
        std::vector<std::shared_ptr<Session>> dropped;
        {
            std::lock_guard lock(mutex_);
            for (auto it = sessions_.begin(); it != sessions_.end();) {
                if (pred(*it->second)) {
                    dropped.push_back(it->second);
                    it = sessions_.erase(it);
                } else {
                    ++it;
                }
            }
        }
        std::vector<std::string> ids;
        for (const auto& s : dropped) {
            finish(*s);
            ids.push_back(s->id);
        }
        return ids;
    }

    SessionTableOptions opts_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t counter_ = 0;
};

namespace detail {

inline const json& require(const json& msg, const char* key) {
    auto it = msg.find(key);
    if (it == msg.end()) throw ProtocolError("bad_request", std::string("missing field '") + key + "'");
    return *it;
}

inline std::string require_string(const json& msg, const char* key) {
    const json& v = require(msg, key);
    if (!v.is_string()) throw ProtocolError("bad_request", std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

inline std::shared_ptr<Session> require_session(SessionTable& table, ConnectionId conn, const json& msg) {
    const std::string id = require_string(msg, "session_id");
    auto s = table.find(conn, id);
    if (!s) throw ProtocolError("unknown_session", "no session '" + id + "' on this connection");
    return s;
}

/// Resolves a client-supplied recording name inside `root`, refusing anything
/// that would escape it.
inline std::filesystem::path confined_path(const std::filesystem::path& root, const std::string& name) {
    const std::filesystem::path rel(name);
    if (name.empty() || rel.is_absolute() || rel.has_root_name())
        throw ProtocolError("io_error", "recording path must be relative to the server's record directory");
    for (const auto& part : rel)
        if (part == "..") throw ProtocolError("io_error", "recording path may not contain '..'");
    std::filesystem::path out = root / rel;
    if (out.filename().string().find(".traj.jsonl") == std::string::npos) out += ".traj.jsonl";
    return out;
}

inline json observation_reply(const Env& env, const Observation& obs) {
    return {{"obs", to_json(obs)}, {"digest", env.digest()}};
}

inline json handle_hello(const json& msg) {
    if (auto it = msg.find("protocol"); it != msg.end()) {
        if (!it->is_number_integer()) throw ProtocolError("bad_request", "field 'protocol' must be an integer");
        if (it->get<std::int64_t>() != kProtocolVersion)
            throw ProtocolError("version_mismatch", "server speaks protocol version " + std::to_string(kProtocolVersion));
    }
    return {{"engine", kEngineVersion}, {"protocol", kProtocolVersion}};
}

inline json handle_list_models() {
    json models = json::array();
    for (const auto& m : list_bundled_models())
        models.push_back({{"name", m.name}, {"parts", m.part_count}, {"connectors", m.connector_count}});
    return {{"models", std::move(models)}};
}

inline json handle_make(SessionTable& table, ConnectionId conn, const json& msg) {
    json cfg_json;
    if (auto it = msg.find("config"); it != msg.end()) {
        cfg_json = *it;
    } else {
        cfg_json = json::object();
        cfg_json["model"] = require_string(msg, "model");
    }
    const EpisodeConfig cfg = episode_config_from_json(cfg_json);
    auto s = table.create(conn, Env::make(cfg));
    return {{"session_id", s->id}, {"config", to_json(s->env.config())}};
}

inline json handle_session_message(SessionTable& table, ConnectionId conn, const std::string& type, const json& msg) {
    auto s = require_session(table, conn, msg);
    std::lock_guard lock(s->mutex);
    s->last_active = Clock::now();
    Env& env = s->env;

    if (type == "reset") {
        const json& seed = require(msg, "seed");
        if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
            throw ProtocolError("bad_request", "field 'seed' must be a non-negative integer");
        // A recording covers exactly one episode.
        json reply;
        if (auto stopped = s->stop_recording())
            reply["recording_stopped"] = {{"path", stopped->first}, {"steps", stopped->second}};
        const Observation obs = env.reset(seed.get<std::uint64_t>());
        reply.update(observation_reply(env, obs));
        return reply;
    }
    if (type == "step") {
        const Action action = action_from_json(require(msg, "action"));
        const StepResult r = env.step(action);
        if (s->recorder)
            s->recorder->writer->append(env.history().back(),
                                        s->recorder->include_obs ? std::optional<json>(to_json(r.observation))
                                                                 : std::nullopt);
        json reply = to_json(r);
        reply["digest"] = env.digest();
        return reply;
    }
    if (type == "observe") return observation_reply(env, env.observe());
    if (type == "record_start") {
        if (!env.is_reset()) throw Error(Errc::not_reset, "reset the session before recording");
        if (s->recorder) throw ProtocolError("bad_request", "session is already recording");
        const auto path = confined_path(table.options().record_dir, require_string(msg, "path"));
        bool include_obs = false;
        if (auto it = msg.find("include_obs"); it != msg.end()) {
            if (!it->is_boolean()) throw ProtocolError("bad_request", "field 'include_obs' must be a boolean");
            include_obs = it->get<bool>();
        }
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        auto writer = std::make_unique<TrajectoryWriter>(path, header_for(env));
        // Steps taken before recording began are written first so the file
        // always replays from the reset.
        for (const auto& entry : env.history()) writer->append(entry);
        s->recorder = Recorder{std::move(writer), include_obs};
        return {{"path", path.string()}, {"steps", s->recorder->writer->steps_written()}};
    }
    if (type == "record_stop") {
        auto stopped = s->stop_recording();
        if (!stopped) throw ProtocolError("bad_request", "session is not recording");
        return {{"path", stopped->first}, {"steps", stopped->second}};
    }
    throw ProtocolError("unknown_type", "unknown message type '" + type + "'");
}

}  // namespace detail

inline json error_reply(const json& id, std::string_view code, std::string_view message) {
    return {{"type", "error"}, {"id", id}, {"error", {{"code", code}, {"message", message}}}};
}

/// Handles one request from connection `conn` and returns exactly one reply.
/// Never throws: every failure becomes an error reply.
inline json handle_message(SessionTable& table, ConnectionId conn, const json& msg) {
    json id = nullptr;
    try {
        if (!msg.is_object()) throw ProtocolError("bad_request", "message must be a JSON object");
        if (auto it = msg.find("id"); it != msg.end() && it->is_number_integer()) id = *it;
        else throw ProtocolError("bad_request", "field 'id' must be an integer");
        const std::string type = detail::require_string(msg, "type");

        json result;
        if (type == "hello") result = detail::handle_hello(msg);
        else if (type == "list_models") result = detail::handle_list_models();
        else if (type == "make") result = detail::handle_make(table, conn, msg);
        else if (type == "close") {
            const std::string sid = detail::require_string(msg, "session_id");
            if (!table.erase(conn, sid)) throw ProtocolError("unknown_session", "no session '" + sid + "' on this connection");
            result = {{"session_id", sid}, {"closed", true}};
        } else if (type == "reset" || type == "step" || type == "observe" || type == "record_start" ||
                   type == "record_stop")
            result = detail::handle_session_message(table, conn, type, msg);
        else
            throw ProtocolError("unknown_type", "unknown message type '" + type + "'");
        return {{"type", "result"}, {"id", id}, {"result", std::move(result)}};
    } catch (const ProtocolError& e) {
        return error_reply(id, e.code(), e.what());
    } catch (const Error& e) {
        return error_reply(id, to_string(e.code()), e.what());
    } catch (const json::exception& e) {
        return error_reply(id, "bad_request", e.what());
    } catch (const std::exception& e) {
        return error_reply(id, "internal", e.what());
    }
}

/// Text-frame entry point: parses `text` and dispatches it.
inline std::string handle_text(SessionTable& table, ConnectionId conn, std::string_view text) {
    // Replies are dumped with replacement so messages echoing invalid UTF-8 cannot throw.
    auto dump = [](const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); };
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::exception& e) {
        return dump(error_reply(nullptr, "bad_json", e.what()));
    }
    return dump(handle_message(table, conn, msg));
}

}  // namespace flatpack
