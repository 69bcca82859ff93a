#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "flatpack/digest.hpp"
#include "flatpack/env.hpp"
#include "flatpack/oracle.hpp"
#include "flatpack/version.hpp"

namespace flatpack {

struct TrajectoryHeader {
    int version = kTrajectoryFormatVersion;
    std::string model;
    EpisodeConfig config;
    std::uint64_t seed = 0;
    std::string engine = kEngineVersion;
};

inline json to_json(const TrajectoryHeader& h) {
    return {{"version", h.version}, {"model", h.model}, {"config", to_json(h.config)}, {"seed", h.seed}, {"engine", h.engine}};
}

inline TrajectoryHeader header_for(const Env& env) {
    return {kTrajectoryFormatVersion, env.model().name, env.config(), env.seed(), kEngineVersion};
}

/// One line per step. `chain` hashes the previous chain value together with
/// this record, so editing any recorded action is detected on replay.
struct StepRecord {
    int t = 0;
    Action action;
    double reward = 0.0;
    bool done = false;
    std::string digest;
    std::string chain;
    std::optional<json> obs;
};

inline json to_json(const StepRecord& r) {
    json j = {{"t", r.t},           {"action", to_json(r.action)}, {"reward", r.reward},
              {"done", r.done},     {"digest", r.digest},          {"chain", r.chain}};
    if (r.obs) j["obs"] = *r.obs;
    return j;
}

// The engine string is left out so a file from another engine version can still replay cleanly.
inline std::string chain_start(const TrajectoryHeader& h) {
    json j = to_json(h);
    j.erase("engine");
    return sha256_hex(canonical_dump(j));
}

inline std::string chain_next(const std::string& previous, int t, const Action& action, double reward, bool done,
                              const std::string& digest) {
    const json link = {{"t", t}, {"action", to_json(action)}, {"reward", reward}, {"done", done}, {"digest", digest}};
    return sha256_hex(previous + "\n" + canonical_dump(link));
}

/// Streams a `.traj.jsonl` file: header line, then one line per step.
class TrajectoryWriter {
public:
    TrajectoryWriter(const std::filesystem::path& path, TrajectoryHeader header)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc), chain_(chain_start(header)) {
        if (!out_) throw Error(Errc::io_error, "cannot open '" + path.string() + "' for writing");
        out_ << canonical_dump(to_json(header)) << '\n';
        if (!out_) throw Error(Errc::io_error, "write to '" + path.string() + "' failed");
    }

    void append(const HistoryEntry& entry, std::optional<json> obs = std::nullopt) {
        StepRecord r{next_t_, entry.action, entry.reward, entry.done, entry.digest, {}, std::move(obs)};
        r.chain = chain_next(chain_, r.t, r.action, r.reward, r.done, r.digest);
        chain_ = r.chain;
        ++next_t_;
        out_ << canonical_dump(to_json(r)) << '\n';
        if (!out_) throw Error(Errc::io_error, "write to '" + path_.string() + "' failed");
    }

    void close() {
        if (!out_.is_open()) return;
        out_.flush();
        const bool good = static_cast<bool>(out_);
        out_.close();
        if (!good) throw Error(Errc::io_error, "flush of '" + path_.string() + "' failed");
    }

    int steps_written() const { return next_t_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::string chain_;
    int next_t_ = 0;
};

struct RecordOptions {
    bool include_obs = false;
    int step_limit = -1;  // < 0: run until the episode ends
};

struct RecordSummary {
    int steps = 0;
    bool success = false;
    double episode_return = 0.0;
    int connections = 0;
};

/// Resets `env` with `seed`, runs `policy` and writes the trajectory to `path`.
/// The file is opened before the first step, so I/O errors surface early.
inline RecordSummary record_episode(Env& env, std::uint64_t seed, const Policy& policy,
                                    const std::filesystem::path& path, const RecordOptions& opts = {}) {
    {
        std::ofstream probe(path, std::ios::binary | std::ios::trunc);
        if (!probe) throw Error(Errc::io_error, "cannot open '" + path.string() + "' for writing");
    }
    Observation obs = env.reset(seed);
    TrajectoryWriter writer(path, header_for(env));
    RecordSummary summary;
    while (!env.done() && (opts.step_limit < 0 || summary.steps < opts.step_limit)) {
        const StepResult r = env.step(policy(obs));
        obs = r.observation;
        writer.append(env.history().back(), opts.include_obs ? std::optional<json>(to_json(obs)) : std::nullopt);
        ++summary.steps;
        summary.episode_return += r.reward;
        summary.connections += static_cast<int>(std::count_if(
            r.info.events.begin(), r.info.events.end(), [](const Event& e) { return e.kind == "connected"; }));
    }
    writer.close();
    summary.success = env.success();
    return summary;
}

struct ReplayReport {
    bool ok = false;
    std::optional<int> divergence;
    std::string reason;
    std::vector<std::string> warnings;
    int steps = 0;
};

namespace detail {

inline json parse_line(const std::string& line, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, e.what(), "line " + std::to_string(lineno));
    }
}

template <class T>
T field(const json& j, const char* key, std::size_t lineno) {
    auto it = j.find(key);
    if (it == j.end())
        throw Error(Errc::parse_error, std::string("missing key '") + key + "'", "line " + std::to_string(lineno));
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::parse_error, std::string("bad value for '") + key + "'", "line " + std::to_string(lineno));
    }
}

}  // namespace detail

/// Rebuilds the episode from the header, replays every recorded action and
/// compares digest, reward, done and chain at each step.
inline ReplayReport replay_check(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw Error(Errc::parse_error, "empty trajectory file", "line 1");

    const json hj = detail::parse_line(lines[0], 1);
    if (!hj.is_object()) throw Error(Errc::parse_error, "header must be an object", "line 1");
    TrajectoryHeader header;
    header.version = detail::field<int>(hj, "version", 1);
    if (header.version != kTrajectoryFormatVersion)
        throw Error(Errc::version_mismatch, "trajectory format version " + std::to_string(header.version) +
                                                " is not supported (expected " +
                                                std::to_string(kTrajectoryFormatVersion) + ")");
    header.model = detail::field<std::string>(hj, "model", 1);
    header.seed = detail::field<std::uint64_t>(hj, "seed", 1);
    header.engine = detail::field<std::string>(hj, "engine", 1);
    if (!hj.contains("config")) throw Error(Errc::parse_error, "missing key 'config'", "line 1");
    try {
        header.config = episode_config_from_json(hj.at("config"));
    } catch (const Error& e) {
        throw Error(Errc::parse_error, e.what(), "line 1");
    }
    if (header.config.model != header.model)
        throw Error(Errc::parse_error, "header model does not match config model", "line 1");

    ReplayReport report;
    if (header.engine != kEngineVersion)
        report.warnings.push_back("recorded with engine '" + header.engine + "', replaying with '" +
                                  std::string(kEngineVersion) + "'");

    Env env = Env::make(header.config);
    env.reset(header.seed);
    std::string chain = chain_start(header);
    auto diverge = [&](int t, std::string why) {
        report.ok = false;
        report.divergence = t;
        report.reason = std::move(why);
        return report;
    };

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const json sj = detail::parse_line(lines[i], i + 1);
        if (!sj.is_object()) throw Error(Errc::parse_error, "step record must be an object", "line " + std::to_string(i + 1));
        const int t = detail::field<int>(sj, "t", i + 1);
        if (t != static_cast<int>(i - 1))
            throw Error(Errc::parse_error, "step index " + std::to_string(t) + " out of sequence",
                        "line " + std::to_string(i + 1));
        if (!sj.contains("action")) throw Error(Errc::parse_error, "missing key 'action'", "line " + std::to_string(i + 1));
        const double reward = detail::field<double>(sj, "reward", i + 1);
        const bool done = detail::field<bool>(sj, "done", i + 1);
        const auto digest = detail::field<std::string>(sj, "digest", i + 1);
        const auto recorded_chain = detail::field<std::string>(sj, "chain", i + 1);

        Action action;
        StepResult r;
        try {
            action = action_from_json(sj.at("action"));
            r = env.step(action);
        } catch (const Error& e) {
            return diverge(t, std::string("replayed step failed: ") + e.what());
        }
        report.steps = t + 1;
        const std::string replay_digest = env.history().back().digest;
        if (replay_digest != digest) return diverge(t, "state digest differs");
        if (r.reward != reward) return diverge(t, "reward differs");
        if (r.done != done) return diverge(t, "done flag differs");
        chain = chain_next(chain, t, action, r.reward, r.done, replay_digest);
        if (chain != recorded_chain) return diverge(t, "record chain differs");
    }
    report.ok = true;
    return report;
}

}  // namespace flatpack
