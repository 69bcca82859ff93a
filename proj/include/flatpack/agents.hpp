#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "flatpack/assembly.hpp"
#include "flatpack/canonical_json.hpp"
#include "flatpack/collision.hpp"

namespace flatpack {

enum class ActionMode { continuous, discrete };

inline std::string_view to_string(ActionMode m) { return m == ActionMode::continuous ? "continuous" : "discrete"; }

// Continuous layout, per cursor: move x y z, rot x y z, hold; then connect.
inline constexpr std::size_t kChannelsPerCursor = 7;
inline constexpr std::size_t kContinuousActionSize = 2 * kChannelsPerCursor + 1;

// Discrete ids: cursor * 14 + primitive, plus one global connect id.
inline constexpr std::int64_t kPrimitivesPerCursor = 14;
inline constexpr std::int64_t kDiscreteConnectId = 2 * kPrimitivesPerCursor;
inline constexpr std::int64_t kDiscreteActionCount = kDiscreteConnectId + 1;

enum class Primitive : std::int64_t {
    move_x_pos, move_x_neg, move_y_pos, move_y_neg, move_z_pos, move_z_neg,
    rot_x_pos, rot_x_neg, rot_y_pos, rot_y_neg, rot_z_pos, rot_z_neg,
    hold, release,
};

inline constexpr std::int64_t discrete_id(int cursor, Primitive p) {
    return cursor * kPrimitivesPerCursor + static_cast<std::int64_t>(p);
}

/// Raw action payload as it travels on the wire: 15 reals or one discrete id.
struct Action {
    std::variant<std::vector<double>, std::int64_t> payload;

    static Action continuous(std::vector<double> values) { return {std::move(values)}; }
    static Action discrete(std::int64_t id) { return {id}; }

    bool operator==(const Action&) const = default;
};

inline json to_json(const Action& a) {
    if (const auto* v = std::get_if<std::vector<double>>(&a.payload)) return json(*v);
    return json(std::get<std::int64_t>(a.payload));
}

inline Action action_from_json(const json& j) {
    if (j.is_number_integer()) return Action::discrete(j.get<std::int64_t>());
    if (j.is_array()) {
        std::vector<double> values;
        values.reserve(j.size());
        for (const auto& v : j) {
            if (!v.is_number()) throw Error(Errc::bad_action, "continuous action components must be numbers");
            values.push_back(v.get<double>());
        }
        return Action::continuous(std::move(values));
    }
    throw Error(Errc::bad_action, "action must be an integer or an array of numbers");
}

struct CursorChannels {
    Vec3 move;
    Vec3 rot;
    double hold = 0.0;
    // Discrete non-hold primitives leave the grasp untouched.
    bool hold_driven = true;

    bool operator==(const CursorChannels&) const = default;
};

struct CursorCommand {
    std::array<CursorChannels, 2> cursors;
    double connect = 0.0;

    bool operator==(const CursorCommand&) const = default;
};

inline CursorCommand decode_action(const Action& action, ActionMode mode) {
    CursorCommand cmd;
    if (mode == ActionMode::continuous) {
        const auto* values = std::get_if<std::vector<double>>(&action.payload);
        if (values == nullptr) throw Error(Errc::bad_action, "continuous mode expects an array of 15 numbers");
        if (values->size() != kContinuousActionSize)
            throw Error(Errc::bad_action, "continuous action needs 15 components, got " + std::to_string(values->size()));
        std::array<double, kContinuousActionSize> v{};
        for (std::size_t i = 0; i < kContinuousActionSize; ++i) {
            if (!std::isfinite((*values)[i])) throw Error(Errc::bad_action, "action component is not finite");
            v[i] = std::clamp((*values)[i], -1.0, 1.0);
        }
        for (std::size_t c = 0; c < 2; ++c) {
            const std::size_t o = c * kChannelsPerCursor;
            cmd.cursors[c].move = {v[o], v[o + 1], v[o + 2]};
            cmd.cursors[c].rot = {v[o + 3], v[o + 4], v[o + 5]};
            cmd.cursors[c].hold = v[o + 6];
        }
        cmd.connect = v[2 * kChannelsPerCursor];
        return cmd;
    }

    const auto* id = std::get_if<std::int64_t>(&action.payload);
    if (id == nullptr) throw Error(Errc::bad_action, "discrete mode expects an integer action id");
    if (*id < 0 || *id >= kDiscreteActionCount)
        throw Error(Errc::bad_action, "discrete action id " + std::to_string(*id) + " outside [0, 29)");
    for (auto& c : cmd.cursors) c.hold_driven = false;
    if (*id == kDiscreteConnectId) {
        cmd.connect = 1.0;
        return cmd;
    }
    CursorChannels& ch = cmd.cursors[static_cast<std::size_t>(*id / kPrimitivesPerCursor)];
    const auto prim = *id % kPrimitivesPerCursor;
    const double sign = prim % 2 == 0 ? 1.0 : -1.0;
    switch (static_cast<Primitive>(prim)) {
        case Primitive::move_x_pos: case Primitive::move_x_neg: ch.move.x = sign; break;
        case Primitive::move_y_pos: case Primitive::move_y_neg: ch.move.y = sign; break;
        case Primitive::move_z_pos: case Primitive::move_z_neg: ch.move.z = sign; break;
        case Primitive::rot_x_pos: case Primitive::rot_x_neg: ch.rot.x = sign; break;
        case Primitive::rot_y_pos: case Primitive::rot_y_neg: ch.rot.y = sign; break;
        case Primitive::rot_z_pos: case Primitive::rot_z_neg: ch.rot.z = sign; break;
        case Primitive::hold:
            ch.hold_driven = true;
            ch.hold = 1.0;
            break;
        case Primitive::release:
            ch.hold_driven = true;
            ch.hold = -1.0;
            break;
    }
    return cmd;
}

struct Workspace {
    Vec3 lo{-1.25, -1.25, 0.0};
    Vec3 hi{1.25, 1.25, 1.5};

    Vec3 clamp(const Vec3& p) const {
        return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y), std::clamp(p.z, lo.z, hi.z)};
    }
    bool contains(const Vec3& p) const { return clamp(p) == p; }
};

struct AgentConfig {
    double move_step = 0.02;             // meters per unit command
    double rot_step = deg_to_rad(3.0);   // radians per unit command
    bool collision_check = false;
    bool settle = false;
    Workspace workspace;
};

inline Aabb cursor_cube(const CursorState& c) {
    const Vec3 h{c.half_extent, c.half_extent, c.half_extent};
    return {c.pos - h, c.pos + h};
}

/// Spawned parts whose world AABB touches the cursor cube, sorted by id.
inline std::vector<std::string> holdable_parts(const AssemblyState& state, const FurnitureModel& m, int cursor) {
    const Aabb cube = cursor_cube(state.cursors.at(static_cast<std::size_t>(cursor)));
    std::vector<std::string> out;
    for (const auto& [id, pose] : state.poses)
        if (part_aabb(m.part(id), pose).intersects(cube)) out.push_back(id);
    return out;
}

namespace detail {

inline std::map<std::string, Pose> snapshot_group(const AssemblyState& state, std::string_view root) {
    std::map<std::string, Pose> out;
    for (const auto& id : state.weld.members(root)) out.emplace(id, state.pose(id));
    return out;
}

inline void restore(AssemblyState& state, const std::map<std::string, Pose>& saved) {
    for (const auto& [id, pose] : saved) state.poses.at(id) = pose;
}

inline double group_lowest_point(const AssemblyState& state, const FurnitureModel& m, std::string_view root) {
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& id : state.weld.members(root)) {
        const Part& part = m.part(id);
        lowest = std::min(lowest, part_aabb(part, state.pose(id)).lo.z);
    }
    return lowest;
}

// Drops a released group along -z until it rests on the floor or on another group.
inline bool settle_group(AssemblyState& state, const FurnitureModel& m, std::string_view root) {
    const double drop = group_lowest_point(state, m, root);
    if (!(drop > 0.0)) return false;
    const auto saved = snapshot_group(state, root);
    if (collide(state, m, root)) return false;
    auto drop_by = [&](double d) {
        restore(state, saved);
        transform_group(state, root, Pose::translation({0, 0, -d}), {});
    };
    drop_by(drop);
    if (!collide(state, m, root)) return true;
    double lo = 0.0;
    double hi = drop;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        drop_by(mid);
        (collide(state, m, root) ? hi : lo) = mid;
    }
    drop_by(lo);
    return lo > 0.0;
}

}  // namespace detail

/// Applies one decoded command to both cursors, cursor 0 first. Each cursor:
/// grasp or release, then translation, then rotation of the held group about
/// the cursor center. The connect channel is not handled here.
inline std::vector<Event> apply_cursor_command(AssemblyState& state, const FurnitureModel& m, const CursorCommand& cmd,
                                               const AgentConfig& cfg) {
    std::vector<Event> events;
    for (std::size_t i = 0; i < 2; ++i) {
        const CursorChannels& ch = cmd.cursors[i];
        const std::string who = "cursor" + std::to_string(i);

        if (ch.hold_driven) {
            CursorState& c = state.cursors[i];
            if (ch.hold > 0.0 && !c.held) {
                const auto candidates = holdable_parts(state, m, static_cast<int>(i));
                if (candidates.empty()) {
                    events.push_back({"grasp_none", who, {}});
                } else {
                    c.held = candidates.front();
                    events.push_back({"grasp", who, candidates.front()});
                }
            } else if (ch.hold <= 0.0 && c.held) {
                const std::string part = *c.held;
                c.held.reset();
                events.push_back({"release", who, part});
                const std::string root = state.weld.root(part);
                if (cfg.settle && !state.group_held(root) && detail::settle_group(state, m, root))
                    events.push_back({"settle", who, root});
            }
        }

        const Vec3 delta = ch.move * cfg.move_step;
        if (delta != Vec3{}) {
            CursorState& c = state.cursors[i];
            const Vec3 wanted = c.pos + delta;
            const Vec3 reached = cfg.workspace.clamp(wanted);
            if (reached != wanted) events.push_back({"clamped", who, {}});
            const Vec3 start = c.pos;
            c.pos = reached;
            if (c.held) {
                const std::string root = state.weld.root(*c.held);
                const auto saved = detail::snapshot_group(state, root);
                transform_group(state, root, Pose::translation(reached - start), {});
                if (cfg.collision_check && collide(state, m, root)) {
                    detail::restore(state, saved);
                    state.cursors[i].pos = start;
                    events.push_back({"blocked", who, "move"});
                }
            }
        }

        const Vec3 angles = ch.rot * cfg.rot_step;
        if (state.cursors[i].held && angles != Vec3{}) {
            const CursorState& c = state.cursors[i];
            const std::string root = state.weld.root(*c.held);
            const auto saved = detail::snapshot_group(state, root);
            // Rotation-vector increment: single-axis commands match the
            // intrinsic x-y-z increment, and a negated command is the exact inverse.
            transform_group(state, root, Pose::rotation(from_rotation_vector(angles)), c.pos);
            if (cfg.collision_check && collide(state, m, root)) {
                detail::restore(state, saved);
                events.push_back({"blocked", who, "rotate"});
            }
        }
    }
    return events;
}

}  // namespace flatpack
