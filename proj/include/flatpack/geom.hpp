#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "flatpack/error.hpp"

namespace flatpack {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr bool operator==(const Vec3&) const = default;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

inline constexpr double kDegenerateNorm = 1e-12;

inline Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    if (!(n >= kDegenerateNorm)) throw Error(Errc::degenerate, "cannot normalize a zero-length vector");
    return v / n;
}

/// d_L2 between two points.
inline double euclidean_distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

/// Cosine similarity u.v / (|u||v|), clamped to [-1, 1]. Higher means more aligned.
inline double cosine_similarity(const Vec3& u, const Vec3& v) {
    const double nu = norm(u);
    const double nv = norm(v);
    if (!(nu >= kDegenerateNorm) || !(nv >= kDegenerateNorm))
        throw Error(Errc::degenerate, "cosine similarity of a zero-length vector");
    const double c = dot(u, v) / (nu * nv);
    return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

/// Unit quaternion in (w, x, y, z) order with canonical sign w >= 0.
/// The only ways to build one are identity() and quat_normalize(), so the
/// invariant holds for every instance.
class UnitQuat {
public:
    constexpr UnitQuat() = default;

    static constexpr UnitQuat identity() { return {}; }

    constexpr double w() const { return w_; }
    constexpr double x() const { return x_; }
    constexpr double y() const { return y_; }
    constexpr double z() const { return z_; }
    constexpr Vec3 vec() const { return {x_, y_, z_}; }
    constexpr std::array<double, 4> components() const { return {w_, x_, y_, z_}; }

    constexpr bool operator==(const UnitQuat&) const = default;

    friend UnitQuat quat_normalize(double w, double x, double y, double z);
    friend UnitQuat quat_from_stored(double w, double x, double y, double z);

private:
    constexpr UnitQuat(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

    double w_ = 1.0;
    double x_ = 0.0;
    double y_ = 0.0;
    double z_ = 0.0;
};

inline UnitQuat quat_normalize(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > kDegenerateNorm) || !std::isfinite(n))
        throw Error(Errc::degenerate, "cannot normalize a zero-norm quaternion");
    const double s = (w < 0.0 ? -1.0 : 1.0) / n;
    return UnitQuat(w * s, x * s, y * s, z * s);
}

/// For values read back from serialized output: components that are already
/// unit length (to 1e-12) with w >= 0 are kept bit-for-bit.
inline UnitQuat quat_from_stored(double w, double x, double y, double z) {
    const double n2 = w * w + x * x + y * y + z * z;
    if (w >= 0.0 && std::abs(n2 - 1.0) < 1e-12) return UnitQuat(w, x, y, z);
    return quat_normalize(w, x, y, z);
}

inline UnitQuat quat_normalize(const std::array<double, 4>& wxyz) {
    return quat_normalize(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
}

/// Hamilton product, renormalized.
inline UnitQuat operator*(const UnitQuat& a, const UnitQuat& b) {
    return quat_normalize(a.w() * b.w() - a.x() * b.x() - a.y() * b.y() - a.z() * b.z(),
                          a.w() * b.x() + a.x() * b.w() + a.y() * b.z() - a.z() * b.y(),
                          a.w() * b.y() - a.x() * b.z() + a.y() * b.w() + a.z() * b.x(),
                          a.w() * b.z() + a.x() * b.y() - a.y() * b.x() + a.z() * b.w());
}

inline UnitQuat conjugate(const UnitQuat& q) { return quat_normalize(q.w(), -q.x(), -q.y(), -q.z()); }

inline Vec3 quat_rotate(const UnitQuat& q, const Vec3& v) {
    const Vec3 u = q.vec();
    const Vec3 t = cross(u, v) * 2.0;
    return v + t * q.w() + cross(u, t);
}

/// Rotation of `angle` radians about `axis` (need not be unit length).
inline UnitQuat axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = normalized(axis);
    const double s = std::sin(angle / 2.0);
    return quat_normalize(std::cos(angle / 2.0), a.x * s, a.y * s, a.z * s);
}

/// Exponential map: rotation by |v| radians about v.
inline UnitQuat from_rotation_vector(const Vec3& v) {
    const double angle = norm(v);
    if (angle < 1e-300) return UnitQuat::identity();
    const double s = std::sin(angle / 2.0) / angle;
    return quat_normalize(std::cos(angle / 2.0), v.x * s, v.y * s, v.z * s);
}

/// Logarithm map; the result has norm in [0, pi].
inline Vec3 to_rotation_vector(const UnitQuat& q) {
    const Vec3 u = q.vec();
    const double s = norm(u);
    if (s < 1e-300) return {};
    const double angle = 2.0 * std::atan2(s, q.w());
    return u * (angle / s);
}

/// Rotation angle in [0, pi].
inline double rotation_angle(const UnitQuat& q) { return norm(to_rotation_vector(q)); }

/// Quaternion whose local x axis maps to `forward` and local z axis to `up`.
/// Inputs must be (near) orthonormal; y is rebuilt as up x forward.
inline UnitQuat quat_from_frame(const Vec3& forward, const Vec3& up) {
    const Vec3 fx = normalized(forward);
    const Vec3 fz = normalized(up - fx * dot(up, fx));
    const Vec3 fy = cross(fz, fx);
    // Columns of the rotation matrix are fx, fy, fz.
    const double m00 = fx.x, m01 = fy.x, m02 = fz.x;
    const double m10 = fx.y, m11 = fy.y, m12 = fz.y;
    const double m20 = fx.z, m21 = fy.z, m22 = fz.z;
    const double trace = m00 + m11 + m22;
    if (trace > 0.0) {
        const double s = std::sqrt(trace + 1.0) * 2.0;
        return quat_normalize(0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s);
    }
    if (m00 > m11 && m00 > m22) {
        const double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
        return quat_normalize((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s);
    }
    if (m11 > m22) {
        const double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
        return quat_normalize((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s);
    }
    const double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
    return quat_normalize((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s);
}

/// Incremental rotation by `delta` radians applied intrinsically: first about
/// the body x axis, then the new y axis, then the new z axis.
inline UnitQuat euler_increment(const UnitQuat& q, const Vec3& delta) {
    const UnitQuat rx = from_rotation_vector({delta.x, 0.0, 0.0});
    const UnitQuat ry = from_rotation_vector({0.0, delta.y, 0.0});
    const UnitQuat rz = from_rotation_vector({0.0, 0.0, delta.z});
    return q * rx * ry * rz;
}

struct Pose {
    Vec3 pos;
    UnitQuat rot;

    static Pose identity() { return {}; }
    static Pose translation(const Vec3& p) { return {p, UnitQuat::identity()}; }
    static Pose rotation(const UnitQuat& q) { return {{}, q}; }

    bool operator==(const Pose&) const = default;
};

inline Pose pose_compose(const Pose& parent, const Pose& local) {
    return {parent.pos + quat_rotate(parent.rot, local.pos), parent.rot * local.rot};
}

inline Pose pose_inverse(const Pose& p) {
    const UnitQuat inv = conjugate(p.rot);
    return {-quat_rotate(inv, p.pos), inv};
}

inline Vec3 transform_point(const Pose& p, const Vec3& local) { return p.pos + quat_rotate(p.rot, local); }

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace flatpack
