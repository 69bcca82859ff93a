#include <gtest/gtest.h>

#include "flatpack/collision.hpp"
#include "oracles.hpp"

namespace flatpack {
namespace {

using namespace flatpack::testing;

WorldShape box(Vec3 center, Vec3 half, UnitQuat rot = UnitQuat::identity()) {
    return {ShapeKind::box, center, rot, half, 0.0};
}
WorldShape sphere(Vec3 center, double r) { return {ShapeKind::sphere, center, UnitQuat::identity(), {}, r}; }

TEST(ShapesOverlap, Examples) {
    EXPECT_FALSE(shapes_overlap(box({0, 0, 0}, {0.5, 0.5, 0.5}), box({3, 0, 0}, {0.5, 0.5, 0.5})));
    EXPECT_TRUE(shapes_overlap(box({0, 0, 0}, {0.5, 0.5, 0.5}), box({0, 0, 0}, {0.5, 0.5, 0.5})));
    // Penetration 0.05: the sphere reaches x = 0.45 inside the face at x = 0.5.
    EXPECT_TRUE(shapes_overlap(box({0, 0, 0}, {0.5, 0.5, 0.5}), sphere({0.55, 0, 0}, 0.1)));
    EXPECT_TRUE(shapes_overlap(sphere({0.55, 0, 0}, 0.1), box({0, 0, 0}, {0.5, 0.5, 0.5})));
}

TEST(ShapesOverlap, TouchingIsNotColliding) {
    EXPECT_FALSE(shapes_overlap(box({0, 0, 0}, {0.5, 0.5, 0.5}), box({1, 0, 0}, {0.5, 0.5, 0.5})));
    EXPECT_FALSE(shapes_overlap(box({0, 0, 0}, {0.5, 0.5, 0.5}), sphere({0.6, 0, 0}, 0.1)));
    EXPECT_FALSE(shapes_overlap(sphere({0, 0, 0}, 0.5), sphere({1, 0, 0}, 0.5)));
    EXPECT_TRUE(shapes_overlap(sphere({0, 0, 0}, 0.5), sphere({0.999, 0, 0}, 0.5)));
    // Flush faces straight from a snap (lower top at z = 0.05, upper bottom at z = 0.05).
    EXPECT_FALSE(shapes_overlap(box({0, 0, 0}, {0.05, 0.05, 0.05}), box({0, 0, 0.1}, {0.05, 0.05, 0.05})));
}

TEST(ShapesOverlap, EdgeEdgeCaseNeedsCrossAxes) {
    // Two boxes rotated 45 degrees about orthogonal axes whose face normals do
    // not separate them but an edge-edge axis does.
    const double s = std::sqrt(0.5);
    const WorldShape a = box({0, 0, 0}, {0.5, 0.5, 0.5}, quat_normalize(std::cos(std::numbers::pi / 8), 0, 0,
                                                                       std::sin(std::numbers::pi / 8)));
    const WorldShape b = box({0, 0, 0}, {0.5, 0.5, 0.5}, quat_normalize(std::cos(std::numbers::pi / 8),
                                                                       std::sin(std::numbers::pi / 8), 0, 0));
    std::mt19937_64 rng(99);
    for (double dz : {1.0 * s + 0.6, 1.2, 1.3, 1.5}) {
        WorldShape moved = b;
        moved.center = {0.0, 0.0, dz};
        const double truth = sampled_min_distance(a, moved, rng, 20000);
        if (std::abs(truth) < 1e-3) continue;
        EXPECT_EQ(shapes_overlap(a, moved), truth < 0) << "dz=" << dz << " truth=" << truth;
    }
}

TEST(ShapesOverlap, SymmetricAndAgreesWithSamplingOracle) {
    std::mt19937_64 rng(2024);
    int checked = 0, overlapping = 0;
    while (checked < 100) {
        const WorldShape a = random_world_shape(rng, 0.5);
        const WorldShape b = random_world_shape(rng, 0.5);
        const double truth = sampled_min_distance(a, b, rng, 20000);
        if (std::abs(truth) <= 1e-3) continue;
        ++checked;
        overlapping += truth < 0;
        EXPECT_EQ(shapes_overlap(a, b), shapes_overlap(b, a));
        EXPECT_EQ(shapes_overlap(a, b), truth < 0) << "kinds " << int(a.kind) << "," << int(b.kind) << " truth "
                                                   << truth;
    }
    EXPECT_GT(overlapping, 20);
    EXPECT_LT(overlapping, 80);
}

TEST(Aabb, CornerOverlapByOneMillimetre) {
    const Aabb a = aabb_of(box({0, 0, 0}, {0.1, 0.1, 0.1}));
    const Aabb cube{{0.099, 0.099, 0.099}, {0.2, 0.2, 0.2}};
    EXPECT_TRUE(a.intersects(cube));
    const Aabb miss{{0.101, 0.099, 0.099}, {0.2, 0.2, 0.2}};
    EXPECT_FALSE(a.intersects(miss));
}

TEST(Aabb, RotatedBoxBoundsContainCorners) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const WorldShape s = random_world_shape(rng, 1.0);
        const Aabb bb = aabb_of(s);
        for (int c = 0; c < 8 && s.kind == ShapeKind::box; ++c) {
            const Vec3 l{(c & 1 ? 1 : -1) * s.half_extents.x, (c & 2 ? 1 : -1) * s.half_extents.y,
                         (c & 4 ? 1 : -1) * s.half_extents.z};
            const Vec3 p = to_world(s, l);
            EXPECT_GE(p.x, bb.lo.x - 1e-12);
            EXPECT_LE(p.x, bb.hi.x + 1e-12);
            EXPECT_GE(p.z, bb.lo.z - 1e-12);
            EXPECT_LE(p.z, bb.hi.z + 1e-12);
        }
    }
}

}  // namespace
}  // namespace flatpack
