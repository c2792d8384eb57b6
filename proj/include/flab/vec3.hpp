#pragma once

#include <algorithm>
#include <cmath>

namespace flab {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return {v.x / n, v.y / n, v.z / n};
}

inline bool is_unit(const Vec3& v, double tol = 1e-9) {
    return std::abs(dot(v, v) - 1.0) <= tol;
}

// Angle in degrees. With antipodal=true, v and -v are identified and the
// result lies in [0, 90]; otherwise in [0, 180]. The dot product is clamped
// before acos.
inline double angle_between_deg(const Vec3& a, const Vec3& b, bool antipodal) {
    double d = std::clamp(dot(a, b), -1.0, 1.0);
    if (antipodal) d = std::abs(d);
    return rad2deg(std::acos(d));
}

inline double antipodal_angle_rad(const Vec3& a, const Vec3& b) {
    double d = std::clamp(std::abs(dot(a, b)), 0.0, 1.0);
    return std::acos(d);
}

// Canonical representative of an antipodal pair: z > 0, ties broken by
// y > 0 then x > 0.
inline bool is_canonical(const Vec3& v) {
    if (v.z != 0.0) return v.z > 0.0;
    if (v.y != 0.0) return v.y > 0.0;
    return v.x > 0.0;
}

inline Vec3 canonicalize(const Vec3& v) { return is_canonical(v) ? v : -v; }

}  // namespace flab
