#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "flatpack/env.hpp"

namespace flatpack {

/// A policy maps the latest observation to the next action.
using Policy = std::function<Action(const Observation&)>;

/// Uniformly random actions, reproducible from a seed.
class RandomPolicy {
public:
    RandomPolicy(std::uint64_t seed, ActionMode mode) : rng_(seed), mode_(mode) {}

    Action operator()(const Observation&) {
        if (mode_ == ActionMode::discrete)
            return Action::discrete(static_cast<std::int64_t>(rng_.index(kDiscreteActionCount)));
        std::vector<double> v(kContinuousActionSize);
        for (auto& x : v) x = rng_.uniform(-1.0, 1.0);
        return Action::continuous(std::move(v));
    }

private:
    CounterRng rng_;
    ActionMode mode_;
};

struct PlanStep {
    MatePair pair;
    QualifiedId target;  // side already in the base group
    QualifiedId moving;  // side brought to it
};

struct AssemblyPlan {
    std::string base;
    std::vector<PlanStep> steps;
};

/// Breadth-first traversal of the goal assembly restricted to `spawned`,
/// starting from the lexicographically smallest spawned part.
inline AssemblyPlan plan(const FurnitureModel& m, std::vector<std::string> spawned) {
    std::sort(spawned.begin(), spawned.end());
    AssemblyPlan out;
    if (spawned.empty()) return out;
    const std::set<std::string> active(spawned.begin(), spawned.end());
    out.base = spawned.front();

    std::vector<MatePair> pairs;
    for (const auto& p : m.mate_pairs())
        if (active.count(p.first.part) && active.count(p.second.part)) pairs.push_back(p);

    std::set<std::string> visited{out.base};
    std::queue<std::string> frontier;
    frontier.push(out.base);
    while (!frontier.empty()) {
        const std::string cur = frontier.front();
        frontier.pop();
        for (const auto& p : pairs) {
            const bool first_here = p.first.part == cur;
            if (!first_here && p.second.part != cur) continue;
            const QualifiedId& here = first_here ? p.first : p.second;
            const QualifiedId& there = first_here ? p.second : p.first;
            if (!visited.insert(there.part).second) continue;
            out.steps.push_back({p, here, there});
            frontier.push(there.part);
        }
    }
    if (visited.size() != active.size())
        throw Error(Errc::disconnected_subset, "spawned parts do not form a connected goal subassembly");
    return out;
}

struct OracleParams {
    ActionMode mode = ActionMode::continuous;
    double move_step = 0.02;
    double rot_step = deg_to_rad(3.0);
    double cursor_half_extent = 0.06;
    int cursor = 1;
    // With collision checking on, parts approach their goal along the target
    // connector's up axis from this far out, so the final motion is a straight insert.
    bool collision_check = false;
    double approach_clearance = 0.12;
};

inline OracleParams oracle_params(const Env& env) {
    OracleParams p;
    p.mode = env.config().mode;
    p.move_step = env.config().move_step;
    p.rot_step = env.config().rot_step;
    p.cursor_half_extent = env.state().cursors[1].half_extent;
    p.collision_check = env.config().collision_check;
    return p;
}

struct OracleProgress {
    std::size_t next = 0;
};

namespace detail {

inline std::string group_of(const Observation& obs, std::string_view part) {
    const PartObservation* p = obs.find_part(part);
    return p ? p->group : std::string();
}

inline Pose observed_pose(const Observation& obs, std::string_view part) {
    const PartObservation* p = obs.find_part(part);
    if (p == nullptr) throw Error(Errc::unknown_part, "part '" + std::string(part) + "' is not in the observation");
    return {p->pos, p->quat};
}

// First part (by id) a cursor cube at `center` would grasp.
inline std::optional<std::string> first_holdable(const FurnitureModel& m, const Observation& obs, const Vec3& center,
                                                 double half) {
    const Aabb cube{center - Vec3{half, half, half}, center + Vec3{half, half, half}};
    for (const auto& p : obs.parts)  // parts are sorted by id
        if (part_aabb(m.part(p.id), {p.pos, p.quat}).intersects(cube)) return p.id;
    return std::nullopt;
}

// Point inside the part's AABB, closest to its center, where a grasp would
// pick this part's group rather than a lexicographically smaller neighbor.
inline Vec3 grasp_point(const FurnitureModel& m, const Observation& obs, const std::string& part, double half) {
    const Aabb box = part_aabb(m.part(part), observed_pose(obs, part));
    const Vec3 center = box.center();
    const std::string group = group_of(obs, part);
    constexpr int kGrid = 5;
    std::vector<Vec3> candidates;
    for (int i = 0; i < kGrid; ++i)
        for (int j = 0; j < kGrid; ++j)
            for (int k = 0; k < kGrid; ++k) {
                const double fx = static_cast<double>(i) / (kGrid - 1);
                const double fy = static_cast<double>(j) / (kGrid - 1);
                const double fz = static_cast<double>(k) / (kGrid - 1);
                candidates.push_back({box.lo.x + fx * (box.hi.x - box.lo.x), box.lo.y + fy * (box.hi.y - box.lo.y),
                                      box.lo.z + fz * (box.hi.z - box.lo.z)});
            }
    std::stable_sort(candidates.begin(), candidates.end(), [&](const Vec3& a, const Vec3& b) {
        return euclidean_distance(a, center) < euclidean_distance(b, center);
    });
    for (const auto& c : candidates) {
        const auto first = first_holdable(m, obs, c, half);
        if (first && group_of(obs, *first) == group) return c;
    }
    return center;
}

inline Vec3 clamp_components(const Vec3& v) {
    return {std::clamp(v.x, -1.0, 1.0), std::clamp(v.y, -1.0, 1.0), std::clamp(v.z, -1.0, 1.0)};
}

inline double max_abs(const Vec3& v) { return std::max({std::abs(v.x), std::abs(v.y), std::abs(v.z)}); }

// Continuous action with one cursor's channels set.
inline Action cursor_action(int cursor, const Vec3& move, const Vec3& rot, double hold, double connect) {
    std::vector<double> v(kContinuousActionSize, 0.0);
    const std::size_t o = static_cast<std::size_t>(cursor) * kChannelsPerCursor;
    v[o] = move.x;
    v[o + 1] = move.y;
    v[o + 2] = move.z;
    v[o + 3] = rot.x;
    v[o + 4] = rot.y;
    v[o + 5] = rot.z;
    v[o + 6] = hold;
    v[2 * kChannelsPerCursor] = connect;
    return Action::continuous(std::move(v));
}

// Single discrete primitive approximating a continuous move/rot command.
inline Action discrete_from(int cursor, const Vec3& move, const Vec3& rot) {
    double best = 0.5;
    std::int64_t id = -1;
    for (int axis = 0; axis < 3; ++axis) {
        const double mv = move[axis];
        if (std::abs(mv) > best) {
            best = std::abs(mv);
            id = discrete_id(cursor, static_cast<Primitive>(2 * axis + (mv < 0 ? 1 : 0)));
        }
        const double rv = rot[axis];
        if (std::abs(rv) > best) {
            best = std::abs(rv);
            id = discrete_id(cursor, static_cast<Primitive>(6 + 2 * axis + (rv < 0 ? 1 : 0)));
        }
    }
    return Action::discrete(id < 0 ? kDiscreteConnectId : id);
}

}  // namespace detail

/// World pose the moving part must reach for `step`, taking the symmetric
/// image of the target connector closest to the part's current orientation.
inline Pose goal_pose_for(const FurnitureModel& m, const Observation& obs, const PlanStep& step) {
    const Connector& target = m.connector(step.target);
    const Connector& moving = m.connector(step.moving);
    const int order = pair_symmetry_order(m, step.pair);
    const Pose base = detail::observed_pose(obs, step.target.part);
    const Pose current = detail::observed_pose(obs, step.moving.part);
    Pose best;
    double best_angle = std::numeric_limits<double>::infinity();
    for (int k = 0; k < order; ++k) {
        const Pose image = Pose::rotation(axis_angle(kUpAxis, 2.0 * std::numbers::pi * k / order));
        const Pose goal = pose_compose(pose_compose(base, pose_compose(target.local, image)), pose_inverse(moving.local));
        const double angle = rotation_angle(goal.rot * conjugate(current.rot));
        if (angle < best_angle) {
            best_angle = angle;
            best = goal;
        }
    }
    return best;
}

/// One greedy grasp -> align -> attach decision for the scripted assembler.
/// Uses only the observation and the model; always returns a legal action.
inline Action oracle_step(const FurnitureModel& m, const Observation& obs, const AssemblyPlan& plan,
                          OracleProgress& progress, const OracleParams& params) {
    const int cur = params.cursor;
    const bool discrete = params.mode == ActionMode::discrete;
    const CursorObservation& cursor = obs.cursors.at(static_cast<std::size_t>(cur));
    auto release = [&]() {
        return discrete ? Action::discrete(discrete_id(cur, Primitive::release))
                        : detail::cursor_action(cur, {}, {}, 0.0, 0.0);
    };

    while (progress.next < plan.steps.size()) {
        const PlanStep& s = plan.steps[progress.next];
        if (obs.is_connected(s.pair.id()) ||
            detail::group_of(obs, s.moving.part) == detail::group_of(obs, s.target.part))
            ++progress.next;
        else
            break;
    }
    if (progress.next >= plan.steps.size()) {
        if (cursor.held) return release();
        return discrete ? Action::discrete(kDiscreteConnectId) : detail::cursor_action(cur, {}, {}, 0.0, 0.0);
    }

    const PlanStep& step = plan.steps[progress.next];
    const std::string moving_group = detail::group_of(obs, step.moving.part);
    const bool holding_moving = cursor.held && detail::group_of(obs, *cursor.held) == moving_group;

    if (cursor.held && !holding_moving) return release();

    if (!holding_moving) {
        const auto first = detail::first_holdable(m, obs, cursor.pos, params.cursor_half_extent);
        if (first && detail::group_of(obs, *first) == moving_group)
            return discrete ? Action::discrete(discrete_id(cur, Primitive::hold))
                            : detail::cursor_action(cur, {}, {}, 1.0, 0.0);
        const Vec3 target = detail::grasp_point(m, obs, step.moving.part, params.cursor_half_extent);
        const Vec3 move = detail::clamp_components((target - cursor.pos) / params.move_step);
        return discrete ? detail::discrete_from(cur, move, {}) : detail::cursor_action(cur, move, {}, 0.0, 0.0);
    }

    if (obs.is_attachable(step.pair.id()))
        return discrete ? Action::discrete(kDiscreteConnectId) : detail::cursor_action(cur, {}, {}, 1.0, 1.0);

    const Pose current = detail::observed_pose(obs, step.moving.part);
    Pose goal = goal_pose_for(m, obs, step);
    if (params.collision_check) {
        const Pose base = detail::observed_pose(obs, step.target.part);
        const Vec3 up = quat_rotate(base.rot * m.connector(step.target).local.rot, kUpAxis);
        const Vec3 off = current.pos - goal.pos;
        const double along = dot(off, up);
        const double lateral = norm(off - up * along);
        const double angle = rotation_angle(goal.rot * conjugate(current.rot));
        const bool lined_up = lateral < 0.5 * params.move_step && angle < 0.5 * params.rot_step && along > -1e-9;
        if (!lined_up) {
            goal.pos += up * params.approach_clearance;
            // Travel above everything else: lift first, then cross, then drop onto the approach point.
            double clear_z = -std::numeric_limits<double>::infinity();
            double low_z = std::numeric_limits<double>::infinity();
            for (const auto& p : obs.parts) {
                const Aabb box = part_aabb(m.part(p.id), {p.pos, p.quat});
                if (p.group == moving_group) low_z = std::min(low_z, box.lo.z);
                else clear_z = std::max(clear_z, box.hi.z);
            }
            const Vec3 flat{goal.pos.x - current.pos.x, goal.pos.y - current.pos.y, 0.0};
            if (norm(flat) > params.move_step && low_z < clear_z + 0.02) {
                const Action lift = detail::cursor_action(cur, {0, 0, 1}, {}, 1.0, 0.0);
                return discrete ? Action::discrete(discrete_id(cur, Primitive::move_z_pos)) : lift;
            }
            if (norm(flat) > params.move_step) goal.pos.z = std::max(goal.pos.z, current.pos.z);
        }
    }
    Vec3 rot = to_rotation_vector(goal.rot * conjugate(current.rot)) / params.rot_step;
    if (const double peak = detail::max_abs(rot); peak > 1.0) rot = rot / peak;
    const UnitQuat turn = from_rotation_vector(rot * params.rot_step);
    const Vec3 lever = current.pos - cursor.pos;
    const Vec3 shift = goal.pos - cursor.pos - quat_rotate(turn, lever);
    const Vec3 move = detail::clamp_components(shift / params.move_step);
    if (discrete) return detail::discrete_from(cur, move, rot);
    return detail::cursor_action(cur, move, rot, 1.0, 0.0);
}

/// Stateful wrapper usable wherever a Policy is expected.
class OraclePolicy {
public:
    explicit OraclePolicy(const Env& env)
        : model_(env.model_ptr()), plan_(plan(env.model(), env.active_parts())), params_(oracle_params(env)) {}

    Action operator()(const Observation& obs) { return oracle_step(*model_, obs, plan_, progress_, params_); }

    const AssemblyPlan& assembly_plan() const { return plan_; }

private:
    std::shared_ptr<const FurnitureModel> model_;
    AssemblyPlan plan_;
    OracleParams params_;
    OracleProgress progress_;
};

struct OracleOutcome {
    bool success = false;
    int steps_used = 0;
    int connections = 0;
    double episode_return = 0.0;
};

/// Drives a freshly reset env with the oracle until success, episode end or `budget` steps.
inline OracleOutcome run_oracle(Env& env, int budget) {
    OraclePolicy policy(env);
    OracleOutcome out;
    Observation obs = env.observe();
    while (!env.done() && out.steps_used < budget) {
        const StepResult r = env.step(policy(obs));
        ++out.steps_used;
        out.episode_return += r.reward;
        out.connections += static_cast<int>(std::count_if(r.info.events.begin(), r.info.events.end(),
                                                          [](const Event& e) { return e.kind == "connected"; }));
        obs = r.observation;
    }
    out.success = env.success();
    return out;
}

}  // namespace flatpack
