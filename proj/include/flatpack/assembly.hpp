#pragma once

#include <array>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flatpack/canonical_json.hpp"
#include "flatpack/collision.hpp"
#include "flatpack/geom.hpp"
#include "flatpack/model.hpp"
#include "flatpack/weld.hpp"

namespace flatpack {

inline constexpr Vec3 kUpAxis{0.0, 0.0, 1.0};
inline constexpr Vec3 kForwardAxis{1.0, 0.0, 0.0};

struct CursorState {
    Vec3 pos;
    std::optional<std::string> held;
    double half_extent = 0.06;

    bool operator==(const CursorState&) const = default;
};

/// Authoritative episode state: world poses of the spawned parts, the weld
/// partition, the set of connected mate pairs and both cursors.
struct AssemblyState {
    std::map<std::string, Pose> poses;
    WeldPartition weld;
    std::set<std::string> connected_pairs;
    std::array<CursorState, 2> cursors;

    static AssemblyState with_poses(std::map<std::string, Pose> poses) {
        AssemblyState s;
        std::vector<std::string> ids;
        for (const auto& [id, _] : poses) ids.push_back(id);
        s.weld = WeldPartition(std::move(ids));
        s.poses = std::move(poses);
        return s;
    }

    bool has_part(std::string_view id) const { return poses.find(std::string(id)) != poses.end(); }

    const Pose& pose(std::string_view id) const {
        auto it = poses.find(std::string(id));
        if (it == poses.end()) throw Error(Errc::unknown_part, "no part '" + std::string(id) + "' in the scene");
        return it->second;
    }

    /// True if either cursor holds a part of the group rooted at `root`.
    bool group_held(std::string_view root) const {
        for (const auto& c : cursors)
            if (c.held && weld.root(*c.held) == root) return true;
        return false;
    }
};

struct WorldConnectorFrame {
    Vec3 pos;
    Vec3 up;
    Vec3 forward;
    Pose pose;
    QualifiedId owner;
};

struct AttachabilityResult {
    bool pos_ok = false;
    bool up_ok = false;
    bool forward_ok = false;
    bool attachable = false;
    double distance = 0.0;
    double up_sim = 0.0;
    double forward_sim = 0.0;

    bool operator==(const AttachabilityResult&) const = default;
};

inline WorldConnectorFrame connector_world_frame(const AssemblyState& state, const FurnitureModel& m,
                                                 const QualifiedId& c) {
    const Connector& conn = m.connector(c);
    const Pose world = pose_compose(state.pose(c.part), conn.local);
    return {world.pos, quat_rotate(world.rot, kUpAxis), quat_rotate(world.rot, kForwardAxis), world, c};
}

/// Attachability of a connector pair: position within epsilon_distance, up
/// similarity above epsilon_up and forward similarity above epsilon_forward.
/// With symmetry_order n > 1 the forward check accepts any of the n images of
/// a's forward vector rotated about a's up axis.
inline AttachabilityResult check_alignment(const WorldConnectorFrame& a, const WorldConnectorFrame& b,
                                           const AlignmentThresholds& t, int symmetry_order = 1) {
    AttachabilityResult r;
    r.distance = euclidean_distance(a.pos, b.pos);
    r.up_sim = cosine_similarity(a.up, b.up);
    r.forward_sim = cosine_similarity(a.forward, b.forward);
    for (int k = 1; k < symmetry_order; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / symmetry_order;
        const Vec3 image = quat_rotate(axis_angle(a.up, angle), a.forward);
        r.forward_sim = std::max(r.forward_sim, cosine_similarity(image, b.forward));
    }
    r.pos_ok = r.distance < t.epsilon_distance;
    r.up_ok = r.up_sim > t.epsilon_up;
    r.forward_ok = r.forward_sim > t.epsilon_forward;
    r.attachable = r.pos_ok && r.up_ok && r.forward_ok;
    return r;
}

inline int pair_symmetry_order(const FurnitureModel& m, const MatePair& pair) {
    return std::min(m.connector(pair.first).symmetry_order, m.connector(pair.second).symmetry_order);
}

inline AttachabilityResult check_pair(const AssemblyState& state, const FurnitureModel& m, const MatePair& pair,
                                      const AlignmentThresholds& t) {
    return check_alignment(connector_world_frame(state, m, pair.first), connector_world_frame(state, m, pair.second),
                           t, pair_symmetry_order(m, pair));
}

struct ScanEntry {
    MatePair pair;
    AttachabilityResult result;
};

/// Evaluates every declared mate pair between spawned parts that is not yet
/// connected and spans two weld groups, in lexicographic pair order.
inline std::vector<ScanEntry> scan_attachable(const AssemblyState& state, const FurnitureModel& m,
                                              const AlignmentThresholds& t) {
    std::vector<ScanEntry> out;
    for (const auto& pair : m.mate_pairs()) {
        if (!state.has_part(pair.first.part) || !state.has_part(pair.second.part)) continue;
        if (state.connected_pairs.count(pair.id())) continue;
        if (state.weld.same_group(pair.first.part, pair.second.part)) continue;
        out.push_back({pair, check_pair(state, m, pair, t)});
    }
    return out;
}

/// World transform T such that T composed with the moving connector frame
/// equals the target frame (or, for symmetric connectors, the symmetric image
/// of the target closest to the moving frame's current forward direction).
inline Pose snap_transform(const WorldConnectorFrame& target, const WorldConnectorFrame& moving,
                           int symmetry_order = 1) {
    Pose goal = target.pose;
    double best = cosine_similarity(target.forward, moving.forward);
    for (int k = 1; k < symmetry_order; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / symmetry_order;
        const Pose image = pose_compose(target.pose, Pose::rotation(axis_angle(kUpAxis, angle)));
        const double sim = cosine_similarity(quat_rotate(image.rot, kForwardAxis), moving.forward);
        if (sim > best) {
            best = sim;
            goal = image;
        }
    }
    return pose_compose(goal, pose_inverse(moving.pose));
}

/// Rigidly moves every part of the group containing `root`: rotation by
/// delta.rot about `pivot`, then translation by delta.pos.
inline void transform_group(AssemblyState& state, std::string_view root, const Pose& delta, const Vec3& pivot) {
    for (const auto& id : state.weld.members(root)) {
        Pose& p = state.poses.at(id);
        p.pos = pivot + quat_rotate(delta.rot, p.pos - pivot) + delta.pos;
        p.rot = delta.rot * p.rot;
    }
}

/// True iff a shape of the group containing `root` strictly overlaps a shape
/// of any other weld group.
inline bool collide(const AssemblyState& state, const FurnitureModel& m, std::string_view root) {
    const auto members = state.weld.members(root);
    const std::string& group = state.weld.root(root);
    for (const auto& id : members) {
        const Part& pa = m.part(id);
        const Pose& a = state.pose(id);
        for (const auto& [other, b] : state.poses) {
            if (state.weld.root(other) == group) continue;
            if (parts_overlap(pa, a, m.part(other), b)) return true;
        }
    }
    return false;
}

struct Event {
    std::string kind;
    std::string subject;
    std::string detail;

    bool operator==(const Event&) const = default;
};

inline json to_json(const Event& e) {
    json j = {{"kind", e.kind}};
    if (!e.subject.empty()) j["subject"] = e.subject;
    if (!e.detail.empty()) j["detail"] = e.detail;
    return j;
}

namespace detail {

inline Event connect_pair(AssemblyState& state, const FurnitureModel& m, const MatePair& pair) {
    const std::string ra = state.weld.root(pair.first.part);
    const std::string rb = state.weld.root(pair.second.part);
    const bool held_a = state.group_held(ra);
    const bool held_b = state.group_held(rb);
    bool move_a = false;
    if (held_a != held_b) {
        move_a = held_a;
    } else {
        const auto na = state.weld.members(ra).size();
        const auto nb = state.weld.members(rb).size();
        move_a = na != nb ? na < nb : ra < rb;
    }
    const QualifiedId& moving = move_a ? pair.first : pair.second;
    const QualifiedId& target = move_a ? pair.second : pair.first;
    const Pose snap = snap_transform(connector_world_frame(state, m, target), connector_world_frame(state, m, moving),
                                     pair_symmetry_order(m, pair));
    const std::string moving_root = move_a ? ra : rb;
    transform_group(state, moving_root, snap, {});
    state.weld.unite(ra, rb);
    state.connected_pairs.insert(pair.id());
    return {"connected", pair.id(), moving_root};
}

}  // namespace detail

/// Connects `pair` if it is attachable, or, when no pair is named, the
/// attachable pair with the smallest connector distance. The moving group is
/// snapped exactly onto the target frame and the two weld groups merge.
inline std::vector<Event> connect(AssemblyState& state, const FurnitureModel& m, const AlignmentThresholds& t,
                                  const std::optional<MatePair>& pair = std::nullopt) {
    if (pair) {
        const auto pairs = m.mate_pairs();
        if (std::find(pairs.begin(), pairs.end(), *pair) == pairs.end())
            throw Error(Errc::unknown_pair, "'" + pair->id() + "' is not a declared mate pair");
        if (state.connected_pairs.count(pair->id())) return {{"already_connected", pair->id(), {}}};
        if (!state.has_part(pair->first.part) || !state.has_part(pair->second.part))
            return {{"not_spawned", pair->id(), {}}};
        if (state.weld.same_group(pair->first.part, pair->second.part)) return {{"same_group", pair->id(), {}}};
        if (!check_pair(state, m, *pair, t).attachable) return {{"not_attachable", pair->id(), {}}};
        return {detail::connect_pair(state, m, *pair)};
    }
    const ScanEntry* best = nullptr;
    const auto scan = scan_attachable(state, m, t);
    for (const auto& entry : scan) {
        if (!entry.result.attachable) continue;
        if (best == nullptr || entry.result.distance < best->result.distance) best = &entry;
    }
    if (best == nullptr) return {{"no_op", {}, "no attachable pair"}};
    return {detail::connect_pair(state, m, best->pair)};
}

}  // namespace flatpack
