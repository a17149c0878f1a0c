#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "calibnet/energy.hpp"
#include "calibnet/geometry.hpp"
#include "calibnet/network.hpp"

namespace calibnet {

inline constexpr double kCircleTolerance = 1e-9;
inline constexpr double kAngleTolerance = 1e-6;

class NonGenericRadius : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnstableHitCount : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------------------------
// Test fields for the equilibrium equation.

struct Jacobian {
    double a11 = 0, a12 = 0, a21 = 0, a22 = 0;  // a_ij = d eta_i / d x_j
};

// eta(y) = (1 - |y-c|^2/rho^2)^2 v inside the ball, 0 outside: C^1 with compact support.
struct RadialBump {
    Vec2 center;
    double radius = 1.0;
    Vec2 direction{1.0, 0.0};

    Vec2 value(Vec2 y) const {
        double s = norm2(y - center) / (radius * radius);
        if (s >= 1.0) return {};
        return direction * ((1.0 - s) * (1.0 - s));
    }
    Jacobian jacobian(Vec2 y) const {
        double s = norm2(y - center) / (radius * radius);
        if (s >= 1.0) return {};
        double dphi = -2.0 * (1.0 - s);
        Vec2 g = (y - center) * (dphi * 2.0 / (radius * radius));
        return {direction.x * g.x, direction.x * g.y, direction.y * g.x, direction.y * g.y};
    }
};

// Sum of radial bumps.
struct TestField {
    std::vector<RadialBump> bumps;

    Vec2 value(Vec2 y) const {
        Vec2 s{};
        for (const auto& b : bumps) s += b.value(y);
        return s;
    }
    Jacobian jacobian(Vec2 y) const {
        Jacobian J;
        for (const auto& b : bumps) {
            Jacobian k = b.jacobian(y);
            J.a11 += k.a11; J.a12 += k.a12; J.a21 += k.a21; J.a22 += k.a22;
        }
        return J;
    }
};

inline std::vector<std::string> builtin_field_names() {
    return {"bump-x", "bump-y", "bump-diag", "offset-x", "offset-skew"};
}

inline TestField builtin_field(const std::string& name, const DiscDomain& D) {
    const double R = D.radius;
    const Vec2 c = D.center;
    const double s = 1.0 / std::sqrt(2.0);
    if (name == "bump-x") return {{{c, 0.5 * R, {1.0, 0.0}}}};
    if (name == "bump-y") return {{{c, 0.5 * R, {0.0, 1.0}}}};
    if (name == "bump-diag") return {{{c, 0.7 * R, {s, s}}}};
    if (name == "offset-x") return {{{c + Vec2{0.25 * R, 0.1 * R}, 0.6 * R, {1.0, 0.0}}}};
    if (name == "offset-skew") return {{{c + Vec2{-0.2 * R, 0.3 * R}, 0.6 * R, {0.6, -0.8}}}};
    throw InputError("unknown builtin field '" + name + "'");
}

struct ELResidual {
    double residual = 0.0;    // |quadrature sum|
    double telescoped = 0.0;  // |endpoint sum|
};

// Sum over phases of the tangential divergence of eta along the interfaces, weighted by the
// surface tensions (each interface appears once per adjacent phase). Per edge the integrand is
// t . (grad eta) t; Gauss-Legendre is exact on the pieces cut at the bump supports.
inline ELResidual euler_lagrange_residual(const Network& net, const TestField& eta) {
    for (const auto& b : eta.bumps)
        if (!(dist(b.center, net.domain.center) + b.radius < net.domain.radius))
            throw InputError("test field support touches the domain boundary");
    ELResidual out;
    double quad = 0.0, tele = 0.0;
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) {
        Vec2 a = net.A(e), b = net.B(e), t = net.tangent(e);
        double L = net.length(e), w = 2.0 * net.sigma(e);
        std::vector<double> cuts{0.0, 1.0};
        for (const auto& bump : eta.bumps) {
            double ps[2];
            int n = segment_circle_params(a, b, bump.center, bump.radius, ps);
            for (int k = 0; k < n; ++k) cuts.push_back(ps[k]);
        }
        std::sort(cuts.begin(), cuts.end());
        auto integrand = [&](double s) {
            Jacobian J = eta.jacobian(a + (b - a) * s);
            return t.x * (J.a11 * t.x + J.a12 * t.y) + t.y * (J.a21 * t.x + J.a22 * t.y);
        };
        double sum = 0.0;
        for (size_t k = 0; k + 1 < cuts.size(); ++k)
            if (cuts[k + 1] > cuts[k]) sum += gauss_legendre(integrand, cuts[k], cuts[k + 1]);
        quad += w * L * sum;
        tele += w * dot(eta.value(b) - eta.value(a), t);
    }
    out.residual = std::abs(quad);
    out.telescoped = std::abs(tele);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Circle cuts.

struct CircleHit {
    Vec2 point;
    double alpha = 0.0;  // angle between the interface and the radial direction, in [0, pi/2]
    int edge = -1;
};

struct CircleCut {
    Vec2 center;
    double radius = 0.0;
    std::vector<CircleHit> hits;  // sorted by polar angle around the centre
    double length_in_ball = 0.0;
    double ratio = 0.0;
    double weighted_ratio = 0.0;  // sigma-weighted length over r; equals ratio for unit tensions
    double sum_cos = 0.0;
    bool identity_applies = false;  // no vertex inside the ball other than the centre
    double identity_residual = 0.0;
};

inline CircleCut circle_cut(const Network& net, Vec2 x, double r) {
    if (!(r > 0.0)) throw InputError("circle_cut: radius must be positive");
    if (!(dist(x, net.domain.center) + r < net.domain.radius + net.boundary_tol()))
        throw InputError("circle_cut: ball is not inside the domain");
    const double tol = 1e-12 * std::max(r, 1e-300) + 1e-14 * net.domain.radius;
    CircleCut cc;
    cc.center = x;
    cc.radius = r;
    cc.identity_applies = true;
    for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v) {
        double d = dist(net.vertices[v], x);
        if (std::abs(d - r) <= tol)
            throw NonGenericRadius("vertex " + std::to_string(v + 1) + " lies on the circle");
        if (d < r && d > tol) cc.identity_applies = false;
    }
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) {
        Vec2 a = net.A(e), b = net.B(e);
        double foot = project_param(x, a, b);
        if (foot > 0.0 && foot < 1.0 && std::abs(dist(x, a + (b - a) * foot) - r) <= tol)
            throw NonGenericRadius("segment " + std::to_string(e + 1) + " is tangent to the circle");
        double ps[2];
        int n = segment_circle_params(a, b, x, r, ps);
        Vec2 t = net.tangent(e);
        for (int k = 0; k < n; ++k) {
            Vec2 y = a + (b - a) * ps[k];
            double c = std::min(1.0, std::abs(dot(t, (y - x) / r)));
            cc.hits.push_back({y, std::acos(c), e});
            cc.sum_cos += c;
        }
        double len = segment_length_in_disc(a, b, x, r);
        cc.length_in_ball += len;
        cc.weighted_ratio += net.sigma(e) * len;
    }
    std::sort(cc.hits.begin(), cc.hits.end(), [&](const CircleHit& p, const CircleHit& q) {
        return wrap_2pi(angle_of(p.point - x)) < wrap_2pi(angle_of(q.point - x));
    });
    cc.ratio = cc.length_in_ball / r;
    cc.weighted_ratio /= r;
    cc.identity_residual = std::abs(cc.ratio - cc.sum_cos);
    return cc;
}

// Ratios are sigma-weighted, so unequal-tension networks that balance their own tensions are
// monotone too. With unit tensions this is the plain length ratio.
struct MonotonicityProfile {
    std::vector<std::pair<double, double>> samples;  // (r, ratio)
    std::vector<std::pair<double, double>> violations;  // consecutive radii where the ratio drops
    bool nondecreasing = true;
};

inline MonotonicityProfile monotonicity_profile(const Network& net, Vec2 x, const std::vector<double>& radii,
                                                double tol = kCircleTolerance) {
    MonotonicityProfile mp;
    std::vector<double> rs = radii;
    std::sort(rs.begin(), rs.end());
    for (double r : rs) mp.samples.push_back({r, circle_cut(net, x, r).weighted_ratio});
    for (size_t k = 0; k + 1 < mp.samples.size(); ++k)
        if (mp.samples[k + 1].second < mp.samples[k].second - tol) {
            mp.nondecreasing = false;
            mp.violations.push_back({mp.samples[k].first, mp.samples[k + 1].first});
        }
    return mp;
}

// ---------------------------------------------------------------------------------------------
// Steiner forks.

inline double fork_length(double alpha) {
    constexpr double top = 2.0 * std::numbers::pi / 3.0;
    if (!(alpha > 0.0 && alpha <= top * (1.0 + 1e-15)))
        throw InputError("fork_length: angle must lie in (0, 2pi/3]");
    return 2.0 * std::sin(alpha / 2.0 + std::numbers::pi / 6.0);
}

struct ForkCompetitor {
    Vec2 center;
    double radius = 0.0;
    Vec2 a, b;
    Vec2 branch;
    double alpha = 0.0;
    double total_length = 0.0;  // measured from the three segments
    std::array<std::pair<Vec2, Vec2>, 3> segments;
};

inline ForkCompetitor build_fork(Vec2 x, double r, Vec2 a, Vec2 b) {
    if (std::abs(dist(a, x) - r) > 1e-9 * r || std::abs(dist(b, x) - r) > 1e-9 * r)
        throw InputError("build_fork: endpoints must lie on the circle");
    ForkCompetitor f;
    f.center = x;
    f.radius = r;
    f.a = a;
    f.b = b;
    f.alpha = angle_between(a - x, b - x);
    (void)fork_length(f.alpha);
    Vec2 u = normalized((a - x) + (b - x));
    double s = r * (std::cos(f.alpha / 2.0) - std::sin(f.alpha / 2.0) / std::sqrt(3.0));
    f.branch = x + u * s;
    f.segments = {std::pair{x, f.branch}, std::pair{f.branch, a}, std::pair{f.branch, b}};
    f.total_length = dist(x, f.branch) + dist(f.branch, a) + dist(f.branch, b);
    return f;
}

// ---------------------------------------------------------------------------------------------
// Filling a ball with one phase.

struct FillBallResult {
    PolygonalPartition competitor;
    double length_in_ball_before = 0.0;
    double length_in_ball_after = 0.0;
};

inline FillBallResult fill_ball_competitor(const Network& q, Vec2 x, double r, int m, int arc_pieces = 256) {
    if (!(dist(x, q.domain.center) + r < q.domain.radius)) throw InputError("fill_ball: ball touches the boundary");
    if (m < 0 || m >= q.P()) throw InputError("fill_ball: phase out of range");
    FillBallResult out;
    Network n;
    n.domain = q.domain;
    n.tensions = q.tensions;
    std::vector<int> keep(q.vertices.size(), -1);
    auto vid = [&](int v) {
        if (keep[v] < 0) {
            keep[v] = static_cast<int>(n.vertices.size());
            n.vertices.push_back(q.vertices[v]);
        }
        return keep[v];
    };
    struct Hit { double angle; int vertex; int ccw_phase; };
    std::vector<Hit> hits;
    for (int e = 0; e < static_cast<int>(q.edges.size()); ++e) {
        const Edge& E = q.edges[e];
        Vec2 a = q.A(e), b = q.B(e);
        out.length_in_ball_before += segment_length_in_disc(a, b, x, r);
        double ps[2];
        int k = segment_circle_params(a, b, x, r, ps);
        std::vector<double> cuts{0.0};
        for (int i = 0; i < k; ++i) if (ps[i] > 0.0 && ps[i] < 1.0) cuts.push_back(ps[i]);
        cuts.push_back(1.0);
        std::vector<int> ids(cuts.size(), -1);
        for (size_t i = 0; i < cuts.size(); ++i) {
            if (cuts[i] == 0.0) continue;
            if (cuts[i] == 1.0) continue;
            Vec2 y = a + (b - a) * cuts[i];
            ids[i] = static_cast<int>(n.vertices.size());
            n.vertices.push_back(y);
            // Phase counter-clockwise of y along the circle, seen from outside the ball.
            Vec2 tau = perp(y - x);
            Vec2 t = b - a;
            int ccw = cross(t, tau) > 0 ? E.left : E.right;
            hits.push_back({wrap_2pi(angle_of(y - x)), ids[i], ccw});
        }
        for (size_t i = 0; i + 1 < cuts.size(); ++i) {
            Vec2 mid = a + (b - a) * (0.5 * (cuts[i] + cuts[i + 1]));
            if (dist(mid, x) < r) continue;
            int va = cuts[i] == 0.0 ? vid(E.a) : ids[i];
            int vb = cuts[i + 1] == 1.0 ? vid(E.b) : ids[i + 1];
            n.edges.push_back({va, vb, E.left, E.right});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& p, const Hit& s) { return p.angle < s.angle; });
    const double two_pi = 2.0 * std::numbers::pi;
    auto add_arc = [&](double t0, double t1, int v0, int v1, int outside) {
        if (outside == m) return;
        int pieces = std::max(1, static_cast<int>(std::ceil(arc_pieces * (t1 - t0) / two_pi)));
        int prev = v0;
        for (int k = 1; k <= pieces; ++k) {
            int cur;
            if (k == pieces && v1 >= 0) {
                cur = v1;
            } else if (k == pieces) {
                cur = v0;
            } else {
                n.vertices.push_back(x + from_angle(t0 + (t1 - t0) * k / pieces) * r);
                cur = static_cast<int>(n.vertices.size()) - 1;
            }
            // Traversed counter-clockwise, so the ball interior is on the left.
            n.edges.push_back({prev, cur, m, outside});
            prev = cur;
        }
    };
    if (hits.empty()) {
        Vec2 probe = x + Vec2{r * (1.0 + 1e-9), 0.0};
        int outside = q.edges.empty() ? m : phase_at(q, probe);
        if (outside != m) {
            n.vertices.push_back(x + Vec2{r, 0.0});
            add_arc(0.0, two_pi, static_cast<int>(n.vertices.size()) - 1, -1, outside);
        }
    } else {
        for (size_t k = 0; k < hits.size(); ++k) {
            const Hit& h = hits[k];
            const Hit& g = hits[(k + 1) % hits.size()];
            double t1 = (k + 1 < hits.size()) ? g.angle : g.angle + two_pi;
            add_arc(h.angle, t1, h.vertex, g.vertex, h.ccw_phase);
        }
    }
    for (int e = 0; e < static_cast<int>(n.edges.size()); ++e)
        out.length_in_ball_after += segment_length_in_disc(n.A(e), n.B(e), x, r * (1.0 + 1e-12));
    out.competitor.net = std::move(n);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Point classification.

enum class PointClass { Empty, InteriorSegment, Triple120, NonStationary };

inline std::string to_string(PointClass c) {
    switch (c) {
        case PointClass::Empty: return "EMPTY";
        case PointClass::InteriorSegment: return "INTERIOR_SEGMENT";
        case PointClass::Triple120: return "TRIPLE_120";
        case PointClass::NonStationary: return "NON_STATIONARY";
    }
    return "?";
}

struct Witness2 {
    std::string kind;  // "chord", "fork", "removal"
    std::vector<std::pair<Vec2, Vec2>> segments;  // replacement network inside the ball
    double length_before = 0.0;
    double length_after = 0.0;
    double gain = 0.0;
    double alpha = 0.0;          // fork arc angle or chord angle
    double predicted_gain = 0.0; // (2 - f(alpha)) r for forks, 2r(1 - sin(beta/2)) for chords
    double gain_coefficient = 0.0;  // chord gain / (deviation^2 r)
};

struct Classification {
    PointClass cls = PointClass::Empty;
    int hits = 0;
    std::vector<double> gaps;  // consecutive angular gaps between hits
    std::optional<Witness2> witness;
};

inline Classification classify_point(const Network& net, Vec2 x, double r, double angle_tol = kAngleTolerance) {
    CircleCut c1 = circle_cut(net, x, r);
    CircleCut c2 = circle_cut(net, x, r / 2.0);
    if (c1.hits.size() != c2.hits.size())
        throw UnstableHitCount("hit count changes between r and r/2 (" + std::to_string(c1.hits.size()) + " vs " +
                               std::to_string(c2.hits.size()) + ")");
    Classification out;
    out.hits = static_cast<int>(c1.hits.size());
    if (out.hits == 0) return out;
    double dnet = 1e300;
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e)
        dnet = std::min(dnet, dist_point_segment(x, net.A(e), net.B(e)));
    if (dnet > 1e-9 * r) throw UnstableHitCount("probe point is off the network but the ball meets it");

    const int k = out.hits;
    std::vector<double> ang;
    for (const auto& h : c1.hits) ang.push_back(wrap_2pi(angle_of(h.point - x)));
    for (int i = 0; i < k; ++i) {
        double g = (i + 1 < k) ? ang[i + 1] - ang[i] : ang[0] + 2.0 * std::numbers::pi - ang[i];
        out.gaps.push_back(g);
    }
    const double pi = std::numbers::pi;
    Witness2 w;
    w.length_before = c1.length_in_ball;
    if (k == 2) {
        double beta = angle_between(c1.hits[0].point - x, c1.hits[1].point - x);
        if (std::abs(beta - pi) <= angle_tol) { out.cls = PointClass::InteriorSegment; return out; }
        w.kind = "chord";
        w.segments = {{c1.hits[0].point, c1.hits[1].point}};
        w.length_after = dist(c1.hits[0].point, c1.hits[1].point);
        w.alpha = beta;
        w.predicted_gain = 2.0 * r * (1.0 - std::sin(beta / 2.0));
        double dev = pi - beta;
        w.gain = w.length_before - w.length_after;
        w.gain_coefficient = w.gain / (dev * dev * r);
    } else if (k == 1) {
        w.kind = "removal";
        w.length_after = 0.0;
        w.gain = w.length_before;
    } else {
        if (k == 3) {
            bool balanced = true;
            const double s0 = net.sigma(c1.hits[0].edge);
            bool equal = true;
            for (const auto& h : c1.hits) equal = equal && net.sigma(h.edge) == s0;
            if (equal) {
                for (double g : out.gaps) balanced = balanced && std::abs(g - 2.0 * pi / 3.0) <= angle_tol;
            } else {
                // Unequal tensions: force balance of the weighted hit directions.
                Vec2 f{};
                double smax = 0.0;
                for (const auto& h : c1.hits) {
                    f += (h.point - x) / r * net.sigma(h.edge);
                    smax = std::max(smax, net.sigma(h.edge));
                }
                balanced = norm(f) <= angle_tol * smax;
            }
            if (balanced) { out.cls = PointClass::Triple120; return out; }
        }
        int best = 0;
        for (int i = 1; i < k; ++i)
            if (out.gaps[i] < out.gaps[best]) best = i;
        Vec2 a = c1.hits[best].point, b = c1.hits[(best + 1) % k].point;
        // Project onto the circle exactly so the fork construction sees clean endpoints.
        a = x + normalized(a - x) * r;
        b = x + normalized(b - x) * r;
        ForkCompetitor f = build_fork(x, r, a, b);
        w.kind = "fork";
        for (const auto& s : f.segments) w.segments.push_back(s);
        w.length_after = f.total_length;
        for (int i = 0; i < k; ++i) {
            if (i == best || i == (best + 1) % k) continue;
            w.segments.push_back({x, c1.hits[i].point});
            w.length_after += dist(x, c1.hits[i].point);
        }
        w.alpha = f.alpha;
        w.predicted_gain = (2.0 - fork_length(f.alpha)) * r;
        w.gain = w.length_before - w.length_after;
    }
    out.cls = PointClass::NonStationary;
    out.witness = w;
    return out;
}

// Junctions and segment midpoints: the probe set for flat partitions.
inline std::vector<Vec2> auto_probe_points(const Network& net) {
    std::vector<Vec2> pts;
    auto inc = net.incidence();
    for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v)
        if (!net.on_boundary(v) && !inc[v].empty()) pts.push_back(net.vertices[v]);
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) pts.push_back((net.A(e) + net.B(e)) * 0.5);
    return pts;
}

// A probe radius that keeps the ball clear of other vertices, of non-incident edges and of the
// boundary: a quarter of the smallest clearance.
inline double auto_probe_radius(const Network& net, Vec2 x) {
    double d = net.domain.radius - dist(x, net.domain.center);
    const double tol = 1e-9 * net.domain.radius;
    for (Vec2 v : net.vertices) {
        double dv = dist(v, x);
        if (dv > tol) d = std::min(d, dv);
    }
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) {
        double de = dist_point_segment(x, net.A(e), net.B(e));
        if (de > tol) d = std::min(d, de);
    }
    return 0.25 * d;
}

}  // namespace calibnet
