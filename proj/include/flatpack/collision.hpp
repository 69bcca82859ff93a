#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "flatpack/geom.hpp"
#include "flatpack/model.hpp"

namespace flatpack {

/// Overlap shallower than this counts as touching, not colliding.
inline constexpr double kContactTolerance = 1e-9;

struct WorldShape {
    ShapeKind kind = ShapeKind::box;
    Vec3 center;
    UnitQuat rot;
    Vec3 half_extents;
    double radius = 0.0;
};

inline WorldShape world_shape(const Pose& part_pose, const ConvexShape& s) {
    const Pose p = pose_compose(part_pose, s.offset);
    return {s.kind, p.pos, p.rot, s.half_extents, s.radius};
}

struct Aabb {
    Vec3 lo;
    Vec3 hi;

    bool intersects(const Aabb& o) const {
        return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y && lo.z <= o.hi.z &&
               o.lo.z <= hi.z;
    }
    Vec3 center() const { return (lo + hi) * 0.5; }
};

inline Aabb aabb_of(const WorldShape& s) {
    if (s.kind == ShapeKind::sphere) {
        const Vec3 r{s.radius, s.radius, s.radius};
        return {s.center - r, s.center + r};
    }
    const Vec3 ax = quat_rotate(s.rot, {1, 0, 0});
    const Vec3 ay = quat_rotate(s.rot, {0, 1, 0});
    const Vec3 az = quat_rotate(s.rot, {0, 0, 1});
    const Vec3 h = s.half_extents;
    const Vec3 ext{std::abs(ax.x) * h.x + std::abs(ay.x) * h.y + std::abs(az.x) * h.z,
                   std::abs(ax.y) * h.x + std::abs(ay.y) * h.y + std::abs(az.y) * h.z,
                   std::abs(ax.z) * h.x + std::abs(ay.z) * h.y + std::abs(az.z) * h.z};
    return {s.center - ext, s.center + ext};
}

inline Aabb merge(const Aabb& a, const Aabb& b) {
    return {{std::min(a.lo.x, b.lo.x), std::min(a.lo.y, b.lo.y), std::min(a.lo.z, b.lo.z)},
            {std::max(a.hi.x, b.hi.x), std::max(a.hi.y, b.hi.y), std::max(a.hi.z, b.hi.z)}};
}

inline Aabb part_aabb(const Part& part, const Pose& pose) {
    Aabb box = aabb_of(world_shape(pose, part.shapes.front()));
    for (std::size_t i = 1; i < part.shapes.size(); ++i) box = merge(box, aabb_of(world_shape(pose, part.shapes[i])));
    return box;
}

namespace detail {

inline std::array<Vec3, 3> box_axes(const WorldShape& s) {
    return {quat_rotate(s.rot, {1, 0, 0}), quat_rotate(s.rot, {0, 1, 0}), quat_rotate(s.rot, {0, 0, 1})};
}

inline double projected_radius(const std::array<Vec3, 3>& axes, const Vec3& half, const Vec3& axis) {
    return half.x * std::abs(dot(axes[0], axis)) + half.y * std::abs(dot(axes[1], axis)) +
           half.z * std::abs(dot(axes[2], axis));
}

// Separating-axis test over the 3 + 3 face normals and the 9 edge cross products.
inline bool boxes_overlap(const WorldShape& a, const WorldShape& b) {
    const auto aa = box_axes(a);
    const auto ba = box_axes(b);
    const Vec3 t = b.center - a.center;
    auto separated_along = [&](const Vec3& axis) {
        const double len = norm(axis);
        if (len < 1e-9) return false;  // parallel edges; covered by face axes
        const Vec3 l = axis / len;
        const double gap = std::abs(dot(t, l)) - projected_radius(aa, a.half_extents, l) -
                           projected_radius(ba, b.half_extents, l);
        return gap >= -kContactTolerance;
    };
    for (const auto& axis : aa)
        if (separated_along(axis)) return false;
    for (const auto& axis : ba)
        if (separated_along(axis)) return false;
    for (const auto& ea : aa)
        for (const auto& eb : ba)
            if (separated_along(cross(ea, eb))) return false;
    return true;
}

inline bool sphere_box_overlap(const WorldShape& sphere, const WorldShape& box) {
    const Vec3 local = quat_rotate(conjugate(box.rot), sphere.center - box.center);
    const Vec3 h = box.half_extents;
    const Vec3 closest{std::clamp(local.x, -h.x, h.x), std::clamp(local.y, -h.y, h.y), std::clamp(local.z, -h.z, h.z)};
    return norm(local - closest) < sphere.radius - kContactTolerance;
}

}  // namespace detail

/// Strict overlap test between two convex primitives; touching is not overlap.
inline bool shapes_overlap(const WorldShape& a, const WorldShape& b) {
    if (a.kind == ShapeKind::box && b.kind == ShapeKind::box) return detail::boxes_overlap(a, b);
    if (a.kind == ShapeKind::sphere && b.kind == ShapeKind::sphere)
        return euclidean_distance(a.center, b.center) < a.radius + b.radius - kContactTolerance;
    if (a.kind == ShapeKind::sphere) return detail::sphere_box_overlap(a, b);
    return detail::sphere_box_overlap(b, a);
}

inline bool parts_overlap(const Part& pa, const Pose& a, const Part& pb, const Pose& b) {
    if (!part_aabb(pa, a).intersects(part_aabb(pb, b))) return false;
    for (const auto& sa : pa.shapes)
        for (const auto& sb : pb.shapes)
            if (shapes_overlap(world_shape(a, sa), world_shape(b, sb))) return true;
    return false;
}

}  // namespace flatpack
