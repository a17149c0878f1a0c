#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "calibnet/geometry.hpp"
#include "calibnet/network.hpp"
#include "calibnet/partition.hpp"

namespace calibnet::fixtures {

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

// Rays from the disc centre to the circle at the given angles (radians, increasing). The
// sector counter-clockwise after ray k carries sector_phase[k].
inline FlatPartition star(const std::vector<double>& angles, const std::vector<int>& sector_phase,
                          SurfaceTensionMatrix tensions, double R = 1.0) {
    FlatPartition p;
    p.net.domain = {{0.0, 0.0}, R};
    p.net.tensions = std::move(tensions);
    p.net.vertices.push_back({0.0, 0.0});
    const int m = static_cast<int>(angles.size());
    for (int k = 0; k < m; ++k) {
        p.net.vertices.push_back(from_angle(angles[k]) * R);
        int left = sector_phase[k];
        int right = sector_phase[(k + m - 1) % m];
        p.net.edges.push_back({0, k + 1, left, right});
    }
    return p;
}

inline FlatPartition diameter(double R = 1.0) {
    FlatPartition p;
    p.net.domain = {{0.0, 0.0}, R};
    p.net.tensions = SurfaceTensionMatrix::equal(2);
    p.net.vertices = {{-R, 0.0}, {R, 0.0}};
    p.net.edges = {{0, 1, 0, 1}};
    return p;
}

// Triple junction at the centre with sector angles (degrees) a, b, c counter-clockwise
// starting from the ray at 90 degrees.
inline FlatPartition junction_with_angles(double a, double b, double c, double R = 1.0) {
    (void)c;
    std::vector<double> ang{deg(90.0), deg(90.0 + a), deg(90.0 + a + b)};
    return star(ang, {0, 1, 2}, SurfaceTensionMatrix::equal(3), R);
}

inline FlatPartition junction(double R = 1.0) { return junction_with_angles(120.0, 120.0, 120.0, R); }

// Tensions (sigma_12, sigma_23, sigma_31) = (1, 1, sqrt 3) with balanced angles.
inline FlatPartition weighted_junction(double R = 1.0) {
    SurfaceTensionMatrix s = SurfaceTensionMatrix::equal(3);
    s.sigma[0][2] = s.sigma[2][0] = std::sqrt(3.0);
    // Rays: I_12 at 0, I_23 at 60, I_31 at 210 degrees; sectors after them are phases 2, 3, 1.
    return star({deg(0.0), deg(60.0), deg(210.0)}, {1, 2, 0}, s, R);
}

inline FlatPartition cross(double R = 1.0) {
    return star({0.0, deg(90.0), deg(180.0), deg(270.0)}, {0, 1, 2, 3}, SurfaceTensionMatrix::equal(4), R);
}

inline FlatPartition star8(double R = 1.0) {
    std::vector<double> ang;
    std::vector<int> ph;
    for (int k = 0; k < 8; ++k) { ang.push_back(deg(45.0 * k)); ph.push_back(k); }
    return star(ang, ph, SurfaceTensionMatrix::equal(8), R);
}

// Regular hexagon of circumradius rho with six radial spokes to the circle of radius R.
// Phase 1 is the hexagon, phases 2..7 the outer sectors.
inline FlatPartition hexagon(double rho, double R = 2.0) {
    if (!(rho > 0.0 && rho < R)) throw InputError("hexagon: rho must lie in (0, R)");
    FlatPartition p;
    p.net.domain = {{0.0, 0.0}, R};
    p.net.tensions = SurfaceTensionMatrix::equal(7);
    for (int k = 0; k < 6; ++k) p.net.vertices.push_back(from_angle(deg(60.0 * k)) * rho);
    for (int k = 0; k < 6; ++k) p.net.vertices.push_back(from_angle(deg(60.0 * k)) * R);
    auto sector = [](int k) { return 1 + ((k % 6) + 6) % 6; };  // between spokes k and k+1
    for (int k = 0; k < 6; ++k) p.net.edges.push_back({k, (k + 1) % 6, 0, sector(k)});
    for (int k = 0; k < 6; ++k) p.net.edges.push_back({k, 6 + k, sector(k), sector(k - 1)});
    return p;
}

inline Vec2 ray_to_circle(Vec2 from, double angle, double R) {
    Vec2 d = from_angle(angle);
    double b = dot(from, d), c = norm2(from) - R * R;
    return from + d * (-b + std::sqrt(b * b - c));
}

// Two junctions joined by a horizontal segment; phases: 1 left, 2 right, 3 top, 4 bottom.
// Phases 1 and 2 never touch.
inline FlatPartition four_phase(double half_gap = 0.25, double R = 1.0) {
    FlatPartition p;
    p.net.domain = {{0.0, 0.0}, R};
    p.net.tensions = SurfaceTensionMatrix::equal(4);
    Vec2 j1{-half_gap, 0.0}, j2{half_gap, 0.0};
    p.net.vertices = {j1, j2, ray_to_circle(j1, deg(120.0), R), ray_to_circle(j1, deg(240.0), R),
                      ray_to_circle(j2, deg(60.0), R), ray_to_circle(j2, deg(300.0), R)};
    const int L = 0, Rt = 1, T = 2, B = 3;
    p.net.edges = {{0, 1, T, B}, {0, 2, L, T}, {0, 3, B, L}, {1, 4, T, Rt}, {1, 5, Rt, B}};
    return p;
}

}  // namespace calibnet::fixtures
