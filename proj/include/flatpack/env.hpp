#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flatpack/agents.hpp"
#include "flatpack/assembly.hpp"
#include "flatpack/catalog.hpp"
#include "flatpack/digest.hpp"
#include "flatpack/version.hpp"

namespace flatpack {

/// Counter-based generator: draw i is SplitMix64(seed + (i + 1) * golden).
/// Portable across platforms and standard libraries.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * ++counter_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

enum class OrientationRandomization { none, yaw, full };

inline std::string_view to_string(OrientationRandomization o) {
    switch (o) {
        case OrientationRandomization::none: return "none";
        case OrientationRandomization::yaw: return "yaw";
        case OrientationRandomization::full: return "full";
    }
    return "yaw";
}

struct RewardConfig {
    double connect_reward = 1.0;
    double success_bonus = 0.0;
    double step_penalty = 0.0;
    bool dense_shaping = false;
    double shaping_scale = 0.1;

    bool operator==(const RewardConfig&) const = default;
};

struct EpisodeConfig {
    std::string model = "block";
    ActionMode mode = ActionMode::continuous;
    int max_steps = 500;
    // Unset: the model's own thresholds, else the library defaults.
    std::optional<AlignmentThresholds> thresholds;
    double move_step = 0.02;
    double rot_step = deg_to_rad(3.0);
    bool collision_check = false;
    bool settle = false;
    bool random_subset = false;
    OrientationRandomization orientation_randomization = OrientationRandomization::yaw;
    RewardConfig reward;

    bool operator==(const EpisodeConfig&) const = default;
};

inline json to_json(const EpisodeConfig& c) {
    json j = {{"model", c.model},
              {"mode", to_string(c.mode)},
              {"max_steps", c.max_steps},
              {"move_step", c.move_step},
              {"rot_step", c.rot_step},
              {"collision_check", c.collision_check},
              {"settle", c.settle},
              {"random_subset", c.random_subset},
              {"orientation_randomization", to_string(c.orientation_randomization)},
              {"reward",
               {{"connect_reward", c.reward.connect_reward},
                {"success_bonus", c.reward.success_bonus},
                {"step_penalty", c.reward.step_penalty},
                {"dense_shaping", c.reward.dense_shaping},
                {"shaping_scale", c.reward.shaping_scale}}}};
    if (c.thresholds) {
        j["thresholds"] = {{"distance", c.thresholds->epsilon_distance},
                           {"up", c.thresholds->epsilon_up},
                           {"forward", c.thresholds->epsilon_forward}};
    }
    return j;
}

namespace detail {

inline void config_fail(const std::string& what) { throw Error(Errc::invalid_config, what); }

inline double config_real(const json& j, const char* key) {
    if (!j.is_number() || !std::isfinite(j.get<double>())) config_fail(std::string(key) + " must be a finite number");
    return j.get<double>();
}

inline bool config_bool(const json& j, const char* key) {
    if (!j.is_boolean()) config_fail(std::string(key) + " must be a boolean");
    return j.get<bool>();
}

}  // namespace detail

/// Builds a config from JSON; omitted keys keep their defaults, unknown keys are rejected.
inline EpisodeConfig episode_config_from_json(const json& j) {
    using detail::config_bool;
    using detail::config_fail;
    using detail::config_real;
    if (!j.is_object()) config_fail("config must be an object");
    EpisodeConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "model") {
            if (!v.is_string()) config_fail("model must be a string");
            c.model = v.get<std::string>();
        } else if (key == "mode") {
            const std::string s = v.is_string() ? v.get<std::string>() : "";
            if (s == "continuous") c.mode = ActionMode::continuous;
            else if (s == "discrete") c.mode = ActionMode::discrete;
            else config_fail("mode must be \"continuous\" or \"discrete\"");
        } else if (key == "max_steps") {
            if (!v.is_number_integer()) config_fail("max_steps must be an integer");
            const auto n = v.get<std::int64_t>();
            if (n < 1 || n > std::numeric_limits<int>::max()) config_fail("max_steps must be >= 1");
            c.max_steps = static_cast<int>(n);
        } else if (key == "thresholds") {
            if (!v.is_object()) config_fail("thresholds must be an object");
            AlignmentThresholds t;
            for (const auto& [tk, tv] : v.items()) {
                if (tk == "distance") t.epsilon_distance = config_real(tv, "thresholds.distance");
                else if (tk == "up") t.epsilon_up = config_real(tv, "thresholds.up");
                else if (tk == "forward") t.epsilon_forward = config_real(tv, "thresholds.forward");
                else config_fail("unknown thresholds field '" + tk + "'");
            }
            c.thresholds = t;
        } else if (key == "move_step") {
            c.move_step = config_real(v, "move_step");
        } else if (key == "rot_step") {
            c.rot_step = config_real(v, "rot_step");
        } else if (key == "collision_check") {
            c.collision_check = config_bool(v, "collision_check");
        } else if (key == "settle") {
            c.settle = config_bool(v, "settle");
        } else if (key == "random_subset") {
            c.random_subset = config_bool(v, "random_subset");
        } else if (key == "orientation_randomization") {
            const std::string s = v.is_string() ? v.get<std::string>() : "";
            if (s == "none") c.orientation_randomization = OrientationRandomization::none;
            else if (s == "yaw") c.orientation_randomization = OrientationRandomization::yaw;
            else if (s == "full") c.orientation_randomization = OrientationRandomization::full;
            else config_fail("orientation_randomization must be none, yaw or full");
        } else if (key == "reward") {
            if (!v.is_object()) config_fail("reward must be an object");
            for (const auto& [rk, rv] : v.items()) {
                if (rk == "connect_reward") c.reward.connect_reward = config_real(rv, "reward.connect_reward");
                else if (rk == "success_bonus") c.reward.success_bonus = config_real(rv, "reward.success_bonus");
                else if (rk == "step_penalty") c.reward.step_penalty = config_real(rv, "reward.step_penalty");
                else if (rk == "dense_shaping") c.reward.dense_shaping = config_bool(rv, "reward.dense_shaping");
                else if (rk == "shaping_scale") c.reward.shaping_scale = config_real(rv, "reward.shaping_scale");
                else config_fail("unknown reward field '" + rk + "'");
            }
        } else {
            config_fail("unknown config field '" + key + "'");
        }
    }
    return c;
}

inline void validate_config(const EpisodeConfig& c) {
    if (c.max_steps < 1) detail::config_fail("max_steps must be >= 1");
    if (!(c.move_step > 0.0) || !std::isfinite(c.move_step)) detail::config_fail("move_step must be positive");
    if (!(c.rot_step > 0.0) || !std::isfinite(c.rot_step)) detail::config_fail("rot_step must be positive");
    if (c.thresholds && !thresholds_valid(*c.thresholds))
        detail::config_fail("thresholds need distance > 0 and up, forward in (-1, 1]");
}

// ---------------------------------------------------------------------------
// Observation

struct PartObservation {
    std::string id;
    Vec3 pos;
    UnitQuat quat;
    std::string group;
};

struct CursorObservation {
    Vec3 pos;
    std::optional<std::string> held;
};

struct AttachableObservation {
    std::string pair;
    double distance = 0.0;
    double up_sim = 0.0;
    double forward_sim = 0.0;
};

struct Observation {
    std::vector<PartObservation> parts;
    std::array<CursorObservation, 2> cursors;
    std::vector<AttachableObservation> attachable;
    std::vector<std::string> connected;
    int connected_count = 0;
    int step = 0;

    const PartObservation* find_part(std::string_view id) const {
        for (const auto& p : parts)
            if (p.id == id) return &p;
        return nullptr;
    }
    bool is_attachable(std::string_view pair) const {
        for (const auto& a : attachable)
            if (a.pair == pair) return true;
        return false;
    }
    bool is_connected(std::string_view pair) const {
        return std::find(connected.begin(), connected.end(), pair) != connected.end();
    }
};

inline json to_json(const Observation& o) {
    json parts = json::array();
    for (const auto& p : o.parts) {
        parts.push_back({{"id", p.id},
                         {"pos", {p.pos.x, p.pos.y, p.pos.z}},
                         {"quat", {p.quat.w(), p.quat.x(), p.quat.y(), p.quat.z()}},
                         {"group", p.group}});
    }
    json cursors = json::array();
    for (const auto& c : o.cursors)
        cursors.push_back({{"pos", {c.pos.x, c.pos.y, c.pos.z}}, {"held", c.held ? json(*c.held) : json(nullptr)}});
    json attachable = json::array();
    for (const auto& a : o.attachable)
        attachable.push_back(
            {{"pair", a.pair}, {"distance", a.distance}, {"up_sim", a.up_sim}, {"forward_sim", a.forward_sim}});
    return {{"parts", std::move(parts)},
            {"cursors", std::move(cursors)},
            {"attachable", std::move(attachable)},
            {"connected", o.connected},
            {"connected_count", o.connected_count},
            {"step", o.step}};
}

inline Observation observation_from_json(const json& j) {
    auto vec = [](const json& a) { return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()}; };
    Observation o;
    for (const auto& p : j.at("parts")) {
        const json& q = p.at("quat");
        o.parts.push_back({p.at("id").get<std::string>(), vec(p.at("pos")),
                           quat_from_stored(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                                            q.at(3).get<double>()),
                           p.at("group").get<std::string>()});
    }
    const json& cursors = j.at("cursors");
    for (std::size_t i = 0; i < 2; ++i) {
        o.cursors[i].pos = vec(cursors.at(i).at("pos"));
        const json& held = cursors.at(i).at("held");
        if (!held.is_null()) o.cursors[i].held = held.get<std::string>();
    }
    for (const auto& a : j.at("attachable")) {
        o.attachable.push_back({a.at("pair").get<std::string>(), a.at("distance").get<double>(),
                                a.at("up_sim").get<double>(), a.at("forward_sim").get<double>()});
    }
    o.connected = j.at("connected").get<std::vector<std::string>>();
    o.connected_count = j.at("connected_count").get<int>();
    o.step = j.at("step").get<int>();
    return o;
}

/// Canonical observation bytes: sorted keys, shortest round-trip floats.
inline std::string serialize_observation(const Observation& o) { return canonical_dump(to_json(o)); }

struct StepInfo {
    std::vector<Event> events;
    bool success = false;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

inline json to_json(const StepResult& r) {
    json events = json::array();
    for (const auto& e : r.info.events) events.push_back(to_json(e));
    return {{"obs", to_json(r.observation)},
            {"reward", r.reward},
            {"done", r.done},
            {"info", {{"events", std::move(events)}, {"success", r.info.success}}}};
}

// ---------------------------------------------------------------------------
// Randomization

inline constexpr double kSpawnHalfWidth = 0.8;
inline constexpr int kMaxPlacementAttempts = 100;

namespace detail {

inline double bounding_radius(const Part& part) {
    double r = 0.0;
    for (const auto& s : part.shapes) {
        const double shape_r = s.kind == ShapeKind::sphere ? s.radius : norm(s.half_extents);
        r = std::max(r, norm(s.offset.pos) + shape_r);
    }
    return r;
}

inline UnitQuat shoemake_quaternion(CounterRng& rng) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    const double t2 = 2.0 * std::numbers::pi * u2;
    const double t3 = 2.0 * std::numbers::pi * u3;
    return quat_normalize(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
}

inline bool subset_connected(const std::vector<std::string>& ids, unsigned mask,
                             const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::size_t first = 0;
    while (!(mask & (1u << first))) ++first;
    unsigned reached = 1u << first;
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [a, b] : edges) {
            const unsigned ba = 1u << a;
            const unsigned bb = 1u << b;
            if (!(mask & ba) || !(mask & bb)) continue;
            if ((reached & ba) && !(reached & bb)) reached |= bb, grew = true;
            if ((reached & bb) && !(reached & ba)) reached |= ba, grew = true;
        }
    }
    (void)ids;
    return reached == mask;
}

}  // namespace detail

/// Uniformly random connected subset (>= 2 parts) of the goal assembly graph.
inline std::vector<std::string> random_connected_subset(const FurnitureModel& m, CounterRng& rng) {
    const auto ids = m.part_ids();
    if (ids.size() < 2) return ids;
    auto index_of = [&](const std::string& id) {
        return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& pair : m.mate_pairs()) edges.emplace_back(index_of(pair.first.part), index_of(pair.second.part));

    if (ids.size() <= 16) {
        std::vector<unsigned> candidates;
        for (unsigned mask = 1; mask < (1u << ids.size()); ++mask) {
            if (__builtin_popcount(mask) < 2) continue;
            if (detail::subset_connected(ids, mask, edges)) candidates.push_back(mask);
        }
        if (candidates.empty()) return ids;
        const unsigned pick = candidates[rng.index(candidates.size())];
        std::vector<std::string> out;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (pick & (1u << i)) out.push_back(ids[i]);
        return out;
    }

    // Large models: grow a random connected set from a random seed part. Not
    // uniform over subsets, but always connected.
    const std::size_t target = 2 + rng.index(ids.size() - 1);
    std::set<std::size_t> chosen{rng.index(ids.size())};
    while (chosen.size() < target) {
        std::vector<std::size_t> frontier;
        for (const auto& [a, b] : edges) {
            if (chosen.count(a) && !chosen.count(b)) frontier.push_back(b);
            if (chosen.count(b) && !chosen.count(a)) frontier.push_back(a);
        }
        if (frontier.empty()) break;
        std::sort(frontier.begin(), frontier.end());
        frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
        chosen.insert(frontier[rng.index(frontier.size())]);
    }
    std::vector<std::string> out;
    for (auto i : chosen) out.push_back(ids[i]);
    return out;
}

/// Spawn poses for `parts`: uniform x, y in the spawn square, resting on the
/// floor, with orientation per `orientation`. Bounding spheres never overlap.
inline std::map<std::string, Pose> randomize_layout(const FurnitureModel& m, const std::vector<std::string>& parts,
                                                    CounterRng& rng, OrientationRandomization orientation) {
    std::map<std::string, Pose> out;
    std::vector<std::pair<Vec3, double>> placed;
    for (const auto& id : parts) {
        const Part& part = m.part(id);
        UnitQuat rot;
        switch (orientation) {
            case OrientationRandomization::none: break;
            case OrientationRandomization::yaw:
                rot = axis_angle(kUpAxis, rng.uniform(0.0, 2.0 * std::numbers::pi));
                break;
            case OrientationRandomization::full: rot = detail::shoemake_quaternion(rng); break;
        }
        const double rest_z = -part_aabb(part, Pose::rotation(rot)).lo.z;
        const double radius = detail::bounding_radius(part);
        bool ok = false;
        for (int attempt = 0; attempt < kMaxPlacementAttempts && !ok; ++attempt) {
            const Vec3 pos{rng.uniform(-kSpawnHalfWidth, kSpawnHalfWidth), rng.uniform(-kSpawnHalfWidth, kSpawnHalfWidth),
                           rest_z};
            ok = std::all_of(placed.begin(), placed.end(), [&](const auto& other) {
                return euclidean_distance(pos, other.first) >= radius + other.second;
            });
            if (ok) {
                placed.emplace_back(pos, radius);
                out.emplace(id, Pose{pos, rot});
            }
        }
        if (!ok)
            throw Error(Errc::placement_failure, "could not place part '" + id + "' after " +
                                                     std::to_string(kMaxPlacementAttempts) + " attempts");
    }
    return out;
}

inline bool is_success(const AssemblyState& state, const std::vector<std::string>& active) {
    if (active.empty()) return false;
    const std::string& root = state.weld.root(active.front());
    return std::all_of(active.begin(), active.end(), [&](const auto& id) { return state.weld.root(id) == root; });
}

/// Smallest connector distance over unconnected mate pairs between spawned
/// parts in different groups; nullopt when there is none.
inline std::optional<double> min_open_pair_distance(const AssemblyState& state, const FurnitureModel& m) {
    std::optional<double> best;
    for (const auto& pair : m.mate_pairs()) {
        if (!state.has_part(pair.first.part) || !state.has_part(pair.second.part)) continue;
        if (state.connected_pairs.count(pair.id())) continue;
        if (state.weld.same_group(pair.first.part, pair.second.part)) continue;
        const double d = euclidean_distance(connector_world_frame(state, m, pair.first).pos,
                                            connector_world_frame(state, m, pair.second).pos);
        if (!best || d < *best) best = d;
    }
    return best;
}

inline double compute_reward(const std::vector<Event>& events, const AssemblyState& state, const FurnitureModel& m,
                             const RewardConfig& cfg, bool became_complete) {
    const auto connections =
        std::count_if(events.begin(), events.end(), [](const Event& e) { return e.kind == "connected"; });
    double reward = cfg.connect_reward * static_cast<double>(connections);
    if (became_complete) reward += cfg.success_bonus;
    reward -= cfg.step_penalty;
    if (cfg.dense_shaping) {
        if (auto d = min_open_pair_distance(state, m)) reward -= cfg.shaping_scale * *d;
    }
    return reward;
}

// ---------------------------------------------------------------------------
// Environment

inline constexpr Vec3 kCursorHome0{-0.3, 0.0, 0.3};
inline constexpr Vec3 kCursorHome1{0.3, 0.0, 0.3};

struct HistoryEntry {
    Action action;
    double reward = 0.0;
    bool done = false;
    std::string digest;
};

class Env {
public:
    Env(std::shared_ptr<const FurnitureModel> model, EpisodeConfig cfg) : model_(std::move(model)), cfg_(std::move(cfg)) {
        if (!model_) throw Error(Errc::unknown_model, "null model");
        validate_config(cfg_);
        const Diagnostics diag = validate_model(*model_);
        if (!diag.ok()) {
            const auto& e = diag.errors.front();
            throw Error(Errc::invalid_model, "model '" + model_->name + "' is invalid: " + e.code + ": " + e.message,
                        e.path);
        }
        cfg_.model = model_->name;
        thresholds_ = cfg_.thresholds ? *cfg_.thresholds : model_->thresholds.value_or(AlignmentThresholds{});
        agent_.move_step = cfg_.move_step;
        agent_.rot_step = cfg_.rot_step;
        agent_.collision_check = cfg_.collision_check;
        agent_.settle = cfg_.settle;
    }

    /// Looks the model up by name (FLATPACK_MODEL_PATH, then bundled).
    static Env make(const EpisodeConfig& cfg) {
        validate_config(cfg);
        return Env(find_model(cfg.model), cfg);
    }

    Observation reset(std::uint64_t seed) {
        CounterRng rng(seed);
        active_ = cfg_.random_subset ? random_connected_subset(*model_, rng) : model_->part_ids();
        state_ = AssemblyState::with_poses(randomize_layout(*model_, active_, rng, cfg_.orientation_randomization));
        state_.cursors[0] = CursorState{kCursorHome0, std::nullopt, 0.06};
        state_.cursors[1] = CursorState{kCursorHome1, std::nullopt, 0.06};
        seed_ = seed;
        step_ = 0;
        done_ = false;
        success_ = false;
        reset_ = true;
        history_.clear();
        return observe();
    }

    StepResult step(const Action& action) {
        if (!reset_) throw Error(Errc::not_reset, "step called before reset");
        if (done_) throw Error(Errc::not_reset, "episode is over; call reset");
        const CursorCommand cmd = decode_action(action, cfg_.mode);

        StepResult result;
        auto& events = result.info.events;
        events = apply_cursor_command(state_, *model_, cmd, agent_);
        if (cmd.connect > 0.0) {
            auto connect_events = connect(state_, *model_, thresholds_);
            events.insert(events.end(), connect_events.begin(), connect_events.end());
        }
        const bool was_success = success_;
        success_ = is_success(state_, active_);
        result.reward = compute_reward(events, state_, *model_, cfg_.reward, success_ && !was_success);
        ++step_;
        done_ = success_ || step_ >= cfg_.max_steps;
        result.done = done_;
        result.info.success = success_;
        result.observation = observe();
        history_.push_back({action, result.reward, result.done, state_digest(state_)});
        return result;
    }

    Observation observe() const {
        if (!reset_) throw Error(Errc::not_reset, "environment has not been reset");
        Observation o;
        for (const auto& [id, pose] : state_.poses) o.parts.push_back({id, pose.pos, pose.rot, state_.weld.root(id)});
        for (std::size_t i = 0; i < 2; ++i) o.cursors[i] = {state_.cursors[i].pos, state_.cursors[i].held};
        for (const auto& entry : scan_attachable(state_, *model_, thresholds_)) {
            if (!entry.result.attachable) continue;
            o.attachable.push_back(
                {entry.pair.id(), entry.result.distance, entry.result.up_sim, entry.result.forward_sim});
        }
        o.connected.assign(state_.connected_pairs.begin(), state_.connected_pairs.end());
        o.connected_count = static_cast<int>(state_.connected_pairs.size());
        o.step = step_;
        return o;
    }

    std::string digest() const { return state_digest(state_); }

    bool is_reset() const { return reset_; }
    bool done() const { return done_; }
    bool success() const { return success_; }
    int step_count() const { return step_; }
    std::uint64_t seed() const { return seed_; }

    const FurnitureModel& model() const { return *model_; }
    std::shared_ptr<const FurnitureModel> model_ptr() const { return model_; }
    const EpisodeConfig& config() const { return cfg_; }
    const AlignmentThresholds& thresholds() const { return thresholds_; }
    const AgentConfig& agent_config() const { return agent_; }
    const std::vector<std::string>& active_parts() const { return active_; }
    const AssemblyState& state() const { return state_; }
    const std::vector<HistoryEntry>& history() const { return history_; }

    /// Direct state access for scenario setup in tests and tools.
    AssemblyState& mutable_state() { return state_; }

private:
    std::shared_ptr<const FurnitureModel> model_;
    EpisodeConfig cfg_;
    AlignmentThresholds thresholds_;
    AgentConfig agent_;
    AssemblyState state_;
    std::vector<std::string> active_;
    std::vector<HistoryEntry> history_;
    std::uint64_t seed_ = 0;
    int step_ = 0;
    bool reset_ = false;
    bool done_ = false;
    bool success_ = false;
};

}  // namespace flatpack
