#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "flatpack/geom.hpp"
#include "oracles.hpp"

namespace flatpack {
namespace {

using namespace flatpack::testing;
constexpr double kPi = std::numbers::pi;

UnitQuat rot_z(double a) { return quat_normalize(std::cos(a / 2), 0, 0, std::sin(a / 2)); }

TEST(EuclideanDistance, Examples) {
    EXPECT_EQ(euclidean_distance({0, 0, 0}, {0, 0, 0}), 0.0);
    EXPECT_EQ(euclidean_distance({1, 0, 0}, {0, 0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(euclidean_distance({1, 2, 2}, {0, 0, 0}), 3.0);
}

TEST(EuclideanDistance, SymmetricAndTriangleInequality) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 a = random_vec(rng, -5, 5), b = random_vec(rng, -5, 5), c = random_vec(rng, -5, 5);
        EXPECT_EQ(euclidean_distance(a, b), euclidean_distance(b, a));
        EXPECT_LE(euclidean_distance(a, c), euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-9);
    }
}

TEST(CosineSimilarity, Examples) {
    EXPECT_EQ(cosine_similarity({1, 0, 0}, {1, 0, 0}), 1.0);
    EXPECT_EQ(cosine_similarity({1, 0, 0}, {0, 1, 0}), 0.0);
    EXPECT_NEAR(cosine_similarity({1, 1, 0}, {1, 0, 0}), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(CosineSimilarity, DegenerateVectorThrows) {
    try {
        cosine_similarity({0, 0, 0}, {1, 0, 0});
        FAIL() << "expected degenerate error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::degenerate);
    }
    EXPECT_THROW(cosine_similarity({1, 0, 0}, {1e-13, 0, 0}), Error);
}

TEST(CosineSimilarity, ScaleInvariant) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 u = random_vec(rng, -1, 1), v = random_vec(rng, -1, 1);
        const double s = cosine_similarity(u, v);
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
        EXPECT_NEAR(cosine_similarity(u * scale(rng), v * scale(rng)), s, 1e-9);
    }
}

TEST(QuatNormalize, Examples) {
    EXPECT_EQ(quat_normalize(2, 0, 0, 0), UnitQuat::identity());
    EXPECT_EQ(quat_normalize(-1, 0, 0, 0), UnitQuat::identity());
    const UnitQuat q = quat_normalize(1, 1, 1, 1);
    EXPECT_DOUBLE_EQ(q.w(), 0.5);
    EXPECT_DOUBLE_EQ(q.x(), 0.5);
    EXPECT_DOUBLE_EQ(q.y(), 0.5);
    EXPECT_DOUBLE_EQ(q.z(), 0.5);
}

TEST(QuatNormalize, DegenerateThrows) {
    EXPECT_THROW(quat_normalize(0, 0, 0, 0), Error);
    EXPECT_THROW(quat_normalize(1e-13, 0, 0, 0), Error);
}

TEST(QuatFromStored, KeepsUnitComponentsExactly) {
    const UnitQuat q = quat_from_stored(0.34827351234648635, 0, 0, 0.9373929595414306);
    EXPECT_EQ(q.w(), 0.34827351234648635);
    EXPECT_EQ(q.z(), 0.9373929595414306);
    EXPECT_EQ(quat_from_stored(2, 0, 0, 0), UnitQuat::identity());
    const UnitQuat flipped = quat_from_stored(-1, 0, 0, 0);
    EXPECT_EQ(flipped.w(), 1.0);
}

TEST(QuatNormalize, CanonicalAndIdempotent) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 3);
    for (int i = 0; i < 1000; ++i) {
        const UnitQuat q = quat_normalize(n(rng), n(rng), n(rng), n(rng));
        EXPECT_GE(q.w(), 0.0);
        EXPECT_NEAR(q.w() * q.w() + q.x() * q.x() + q.y() * q.y() + q.z() * q.z(), 1.0, 1e-12);
        const UnitQuat again = quat_normalize(q.components());
        EXPECT_NEAR(again.w(), q.w(), 1e-15);
        EXPECT_NEAR(again.x(), q.x(), 1e-15);
        EXPECT_NEAR(again.y(), q.y(), 1e-15);
        EXPECT_NEAR(again.z(), q.z(), 1e-15);
    }
}

TEST(QuatRotate, MatchesRotationMatrixOracle) {
    const Vec3 v{1, 2, 3};
    EXPECT_EQ(quat_rotate(UnitQuat::identity(), v), v);
    EXPECT_LT(vec_max_diff(quat_rotate(rot_z(kPi / 2), {1, 0, 0}), mat_apply(mat_rot_z(kPi / 2), {1, 0, 0})), 1e-12);
    EXPECT_LT(vec_max_diff(quat_rotate(rot_z(kPi / 2), {1, 0, 0}), {0, 1, 0}), 1e-12);
    const UnitQuat rx180 = quat_normalize(0, 1, 0, 0);
    EXPECT_LT(vec_max_diff(quat_rotate(rx180, {0, 1, 0}), mat_apply(mat_rot_x(kPi), {0, 1, 0})), 1e-12);
    EXPECT_LT(vec_max_diff(quat_rotate(rx180, {0, 1, 0}), {0, -1, 0}), 1e-12);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        const UnitQuat q = random_quat(rng);
        const Vec3 p = random_vec(rng, -3, 3);
        EXPECT_LT(vec_max_diff(quat_rotate(q, p), mat_apply(mat_from_quat(q), p)), 1e-12);
    }
}

TEST(QuatRotate, IsAnIsometry) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        const UnitQuat q = random_quat(rng);
        const Vec3 a = random_vec(rng, -2, 2), b = random_vec(rng, -2, 2);
        EXPECT_NEAR(norm(quat_rotate(q, a)), norm(a), 1e-9);
        EXPECT_NEAR(dot(quat_rotate(q, a), quat_rotate(q, b)), dot(a, b), 1e-9);
    }
}

TEST(PoseCompose, Examples) {
    std::mt19937_64 rng(1);
    const Pose p{random_vec(rng, -1, 1), random_quat(rng)};
    const Pose ip = pose_compose(Pose::identity(), p);
    EXPECT_LT(vec_max_diff(ip.pos, p.pos), 1e-12);
    EXPECT_LT(quat_rotation_diff(ip.rot, p.rot), 1e-12);

    const Pose t = pose_compose(Pose::translation({1, 0, 0}), Pose::translation({0, 1, 0}));
    EXPECT_EQ(t.pos, (Vec3{1, 1, 0}));

    const Pose r = pose_compose(Pose::rotation(rot_z(kPi / 2)), Pose::translation({1, 0, 0}));
    EXPECT_LT(vec_max_diff(r.pos, mat_apply(mat_rot_z(kPi / 2), {1, 0, 0})), 1e-12);
    EXPECT_LT(quat_rotation_diff(r.rot, rot_z(kPi / 2)), 1e-12);
}

TEST(PoseCompose, AssociativeWithIdentityUnit) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 500; ++i) {
        const Pose a{random_vec(rng, -1, 1), random_quat(rng)};
        const Pose b{random_vec(rng, -1, 1), random_quat(rng)};
        const Pose c{random_vec(rng, -1, 1), random_quat(rng)};
        const Pose l = pose_compose(pose_compose(a, b), c);
        const Pose r = pose_compose(a, pose_compose(b, c));
        EXPECT_LT(vec_max_diff(l.pos, r.pos), 1e-9);
        EXPECT_LT(quat_rotation_diff(l.rot, r.rot), 1e-9);
        const Pose ai = pose_compose(a, Pose::identity());
        EXPECT_LT(vec_max_diff(ai.pos, a.pos), 1e-12);
        EXPECT_LT(quat_rotation_diff(ai.rot, a.rot), 1e-12);
    }
}

TEST(PoseInverse, Examples) {
    EXPECT_EQ(pose_inverse(Pose::identity()), Pose::identity());
    EXPECT_EQ(pose_inverse(Pose::translation({1, 2, 3})).pos, (Vec3{-1, -2, -3}));
    const Pose p{{1, 0, 0}, rot_z(kPi / 2)};
    const Pose inv = pose_inverse(p);
    // -R^T p: rotating (1,0,0) by -90 degrees about z gives (0,-1,0), negated.
    EXPECT_LT(vec_max_diff(inv.pos, Vec3{0, 1, 0}), 1e-12);
    EXPECT_LT(quat_rotation_diff(inv.rot, rot_z(-kPi / 2)), 1e-12);
    const Pose id = pose_compose(p, inv);
    EXPECT_LT(vec_max_diff(id.pos, {}), 1e-12);
    EXPECT_LT(quat_rotation_diff(id.rot, UnitQuat::identity()), 1e-12);
}

TEST(PoseInverse, ComposesToIdentity) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 500; ++i) {
        const Pose p{random_vec(rng, -2, 2), random_quat(rng)};
        const Pose id = pose_compose(p, pose_inverse(p));
        EXPECT_LT(vec_max_diff(id.pos, {}), 1e-9);
        EXPECT_LT(quat_rotation_diff(id.rot, UnitQuat::identity()), 1e-9);
    }
}

TEST(EulerIncrement, Examples) {
    std::mt19937_64 rng(2);
    const UnitQuat q = random_quat(rng);
    EXPECT_LT(quat_rotation_diff(euler_increment(q, {0, 0, 0}), q), 1e-12);
    const UnitQuat r90 = euler_increment(UnitQuat::identity(), {0, 0, kPi / 2});
    EXPECT_LT(mat_max_diff(mat_from_quat(r90), mat_rot_z(kPi / 2)), 1e-12);
    const UnitQuat r180 = euler_increment(r90, {0, 0, kPi / 2});
    EXPECT_LT(mat_max_diff(mat_from_quat(r180), mat_mul(mat_rot_z(kPi / 2), mat_rot_z(kPi / 2))), 1e-12);
}

TEST(EulerIncrement, IntrinsicXyzMatchesMatrixProduct) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> a(-kPi, kPi);
    for (int i = 0; i < 300; ++i) {
        const UnitQuat q = random_quat(rng);
        const Vec3 d{a(rng), a(rng), a(rng)};
        const Mat3 expected =
            mat_mul(mat_mul(mat_mul(mat_from_quat(q), mat_rot_x(d.x)), mat_rot_y(d.y)), mat_rot_z(d.z));
        EXPECT_LT(mat_max_diff(mat_from_quat(euler_increment(q, d)), expected), 1e-12);
    }
}

TEST(RotationVector, RoundTripAndNegationInverts) {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 300; ++i) {
        const Vec3 v = random_vec(rng, -1.5, 1.5);
        EXPECT_LT(vec_max_diff(to_rotation_vector(from_rotation_vector(v)), v), 1e-12);
        const UnitQuat id = from_rotation_vector(v) * from_rotation_vector(-v);
        EXPECT_LT(quat_rotation_diff(id, UnitQuat::identity()), 1e-12);
    }
}

TEST(QuatFromFrame, RecoversAxes) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 300; ++i) {
        const UnitQuat q = random_quat(rng);
        const UnitQuat r = quat_from_frame(quat_rotate(q, {1, 0, 0}), quat_rotate(q, {0, 0, 1}));
        EXPECT_LT(quat_rotation_diff(q, r), 1e-12);
    }
}

}  // namespace
}  // namespace flatpack
