#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace calibnet {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

// Counter-clockwise quarter turn.
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

inline Vec2 normalized(Vec2 a) {
    double n = norm(a);
    if (n == 0.0) throw std::domain_error("normalizing zero vector");
    return a / n;
}

inline Vec2 from_angle(double t) { return {std::cos(t), std::sin(t)}; }
inline double angle_of(Vec2 a) { return std::atan2(a.y, a.x); }

// Angle in [0, 2pi).
inline double wrap_2pi(double t) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    t = std::fmod(t, two_pi);
    if (t < 0) t += two_pi;
    if (t >= two_pi) t = 0.0;
    return t;
}

// Unsigned angle between two nonzero vectors, in [0, pi].
inline double angle_between(Vec2 a, Vec2 b) {
    return std::atan2(std::abs(cross(a, b)), dot(a, b));
}

// Parameter in [0,1] of the closest point of segment [a,b] to p.
inline double project_param(Vec2 p, Vec2 a, Vec2 b) {
    Vec2 d = b - a;
    double l2 = norm2(d);
    if (l2 == 0.0) return 0.0;
    return std::clamp(dot(p - a, d) / l2, 0.0, 1.0);
}

inline Vec2 closest_on_segment(Vec2 p, Vec2 a, Vec2 b) {
    return a + (b - a) * project_param(p, a, b);
}

inline double dist_point_segment(Vec2 p, Vec2 a, Vec2 b) {
    return dist(p, closest_on_segment(p, a, b));
}

inline double dist_segment_segment(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

// Proper or touching intersection test with exact orientation signs.
inline int orient_sign(Vec2 a, Vec2 b, Vec2 c) {
    double v = cross(b - a, c - a);
    return (v > 0) - (v < 0);
}

inline bool on_segment_collinear(Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    int o1 = orient_sign(a, b, c), o2 = orient_sign(a, b, d);
    int o3 = orient_sign(c, d, a), o4 = orient_sign(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment_collinear(a, b, c)) return true;
    if (o2 == 0 && on_segment_collinear(a, b, d)) return true;
    if (o3 == 0 && on_segment_collinear(c, d, a)) return true;
    if (o4 == 0 && on_segment_collinear(c, d, b)) return true;
    return false;
}

inline double dist_segment_segment(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    if (segments_intersect(a, b, c, d)) return 0.0;
    return std::min({dist_point_segment(a, c, d), dist_point_segment(b, c, d),
                     dist_point_segment(c, a, b), dist_point_segment(d, a, b)});
}

// Parameters (s on [a,b], t on [c,d]) of a proper crossing of two non-parallel segments.
inline bool segment_crossing(Vec2 a, Vec2 b, Vec2 c, Vec2 d, double& s, double& t) {
    Vec2 r = b - a, q = d - c;
    double den = cross(r, q);
    if (den == 0.0) return false;
    s = cross(c - a, q) / den;
    t = cross(c - a, r) / den;
    return s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0;
}

// Intersections of segment [a,b] with the circle |y - c| = r, as parameters in [0,1].
inline int segment_circle_params(Vec2 a, Vec2 b, Vec2 c, double r, double out[2]) {
    Vec2 d = b - a, f = a - c;
    double A = norm2(d), B = 2 * dot(f, d), C = norm2(f) - r * r;
    if (A == 0.0) return 0;
    double disc = B * B - 4 * A * C;
    if (disc < 0) return 0;
    double sq = std::sqrt(disc);
    // Numerically stable pair of roots.
    double qv = -0.5 * (B + (B >= 0 ? sq : -sq));
    double t1 = qv / A, t2 = (qv != 0.0) ? C / qv : -B / (2 * A);
    if (t1 > t2) std::swap(t1, t2);
    int n = 0;
    if (t1 >= 0.0 && t1 <= 1.0) out[n++] = t1;
    if (t2 >= 0.0 && t2 <= 1.0 && (n == 0 || t2 != out[0])) out[n++] = t2;
    return n;
}

// Length of [a,b] inside the open disc |y - c| < r.
inline double segment_length_in_disc(Vec2 a, Vec2 b, Vec2 c, double r) {
    Vec2 d = b - a, f = a - c;
    double A = norm2(d);
    if (A == 0.0) return 0.0;
    double B = 2 * dot(f, d), C = norm2(f) - r * r;
    double disc = B * B - 4 * A * C;
    if (disc <= 0) return 0.0;
    double sq = std::sqrt(disc);
    double t1 = (-B - sq) / (2 * A), t2 = (-B + sq) / (2 * A);
    double lo = std::max(t1, 0.0), hi = std::min(t2, 1.0);
    return hi > lo ? (hi - lo) * std::sqrt(A) : 0.0;
}

struct DiscDomain {
    Vec2 center{0.0, 0.0};
    double radius = 1.0;

    bool contains(Vec2 p, double tol = 0.0) const { return dist(p, center) <= radius + tol; }
    double dist_to_boundary(Vec2 p) const { return std::abs(radius - dist(p, center)); }
    Vec2 outward_normal(Vec2 p) const { return normalized(p - center); }
    Vec2 point_at(double angle) const { return center + from_angle(angle) * radius; }
    double angle_at(Vec2 p) const { return wrap_2pi(angle_of(p - center)); }
    double area() const { return std::numbers::pi * radius * radius; }
};

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace calibnet
