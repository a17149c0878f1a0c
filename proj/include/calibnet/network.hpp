#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "calibnet/geometry.hpp"
#include "calibnet/tensions.hpp"

namespace calibnet {

// Straight edge from vertex a to vertex b. Phases are zero-based; `left` lies on the
// counter-clockwise side of the direction a->b.
struct Edge {
    int a = 0;
    int b = 0;
    int left = 0;
    int right = 0;
};

// A planar straight-line graph in a disc whose edges carry the phases on either side.
// Shared by reference partitions and polygonal competitors; faces are implied by the labels.
struct Network {
    DiscDomain domain;
    SurfaceTensionMatrix tensions;
    std::vector<Vec2> vertices;
    std::vector<Edge> edges;

    int P() const { return tensions.P; }
    Vec2 A(int e) const { return vertices[edges[e].a]; }
    Vec2 B(int e) const { return vertices[edges[e].b]; }
    double length(int e) const { return dist(A(e), B(e)); }
    Vec2 tangent(int e) const { return normalized(B(e) - A(e)); }
    double sigma(int e) const { return tensions(edges[e].left, edges[e].right); }

    // Unit normal pointing from phase i into phase j across edge e.
    Vec2 normal(int e, int i, int j) const {
        Vec2 n = perp(tangent(e));  // points into `left`
        const Edge& E = edges[e];
        if (i == E.right && j == E.left) return n;
        if (i == E.left && j == E.right) return -n;
        throw std::invalid_argument("normal: phases do not match edge");
    }

    double boundary_tol() const { return 1e-9 * domain.radius; }
    bool on_boundary(int v) const {
        return std::abs(dist(vertices[v], domain.center) - domain.radius) <= boundary_tol();
    }

    std::vector<std::vector<int>> incidence() const {
        std::vector<std::vector<int>> inc(vertices.size());
        for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
            inc[edges[e].a].push_back(e);
            inc[edges[e].b].push_back(e);
        }
        return inc;
    }

    // Direction of e leaving vertex v.
    Vec2 outgoing(int e, int v) const {
        return edges[e].a == v ? tangent(e) : -tangent(e);
    }
    // Phase on the counter-clockwise (resp. clockwise) side of e as seen leaving v.
    int phase_ccw(int e, int v) const { return edges[e].a == v ? edges[e].left : edges[e].right; }
    int phase_cw(int e, int v) const { return edges[e].a == v ? edges[e].right : edges[e].left; }
};

// ---------------------------------------------------------------------------------------------
// Horizontal scan lines. Everything that needs "which phase is here" goes through these, which
// makes phase lookup exact along rows and cheap for grid quadrature.

struct RowCrossing {
    double x;
    int from;  // phase on the -x side
    int to;    // phase on the +x side
};

inline std::vector<RowCrossing> row_crossings(const Network& net, double y) {
    std::vector<RowCrossing> out;
    for (const Edge& E : net.edges) {
        Vec2 a = net.vertices[E.a], b = net.vertices[E.b];
        if (a.y == b.y) continue;
        bool up = b.y > a.y;
        double lo = up ? a.y : b.y, hi = up ? b.y : a.y;
        if (!(lo <= y && y < hi)) continue;
        double x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
        // Going +x across an upward edge passes from its left side to its right side.
        out.push_back(up ? RowCrossing{x, E.left, E.right} : RowCrossing{x, E.right, E.left});
    }
    std::sort(out.begin(), out.end(), [](const RowCrossing& p, const RowCrossing& q) {
        if (p.x != q.x) return p.x < q.x;
        if (p.from != q.from) return p.from < q.from;
        return p.to < q.to;
    });
    return out;
}

// Phase of the sector at vertex v that contains direction dir.
inline int sector_phase(const Network& net, const std::vector<int>& inc, int v, Vec2 dir) {
    if (inc.size() == 1) {
        int e = inc[0];
        return cross(net.outgoing(e, v), dir) >= 0 ? net.phase_ccw(e, v) : net.phase_cw(e, v);
    }
    double t = angle_of(dir);
    int best = -1;
    double best_gap = 1e300;
    for (int e : inc) {
        double gap = wrap_2pi(t - angle_of(net.outgoing(e, v)));
        if (gap < best_gap) { best_gap = gap; best = e; }
    }
    return net.phase_ccw(best, v);
}

// Fallback point location: side of the nearest edge (or sector at its nearest endpoint).
inline int phase_by_nearest_edge(const Network& net, Vec2 p) {
    if (net.edges.empty()) throw std::logic_error("phase lookup on a network without edges");
    int best = -1;
    double bd = 1e300, bt = 0.0;
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) {
        double t = project_param(p, net.A(e), net.B(e));
        double d = dist(p, net.A(e) + (net.B(e) - net.A(e)) * t);
        if (d < bd) { bd = d; best = e; bt = t; }
    }
    const Edge& E = net.edges[best];
    if (bt > 0.0 && bt < 1.0)
        return cross(net.B(best) - net.A(best), p - net.A(best)) >= 0 ? E.left : E.right;
    int v = bt <= 0.0 ? E.a : E.b;
    std::vector<int> inc;
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e)
        if (net.edges[e].a == v || net.edges[e].b == v) inc.push_back(e);
    return sector_phase(net, inc, v, p - net.vertices[v]);
}

inline int phase_at(const Network& net, Vec2 p) {
    auto cr = row_crossings(net, p.y);
    if (!cr.empty()) {
        int phase = cr.front().from;
        for (const auto& c : cr) {
            if (c.x <= p.x) phase = c.to;
            else break;
        }
        return phase;
    }
    return phase_by_nearest_edge(net, p);
}

// Phase intervals along the chord of the disc at height y: (x_begin, x_end, phase).
struct RowInterval {
    double x0, x1;
    int phase;
};

inline std::vector<RowInterval> row_intervals(const Network& net, double y) {
    std::vector<RowInterval> out;
    double dy = y - net.domain.center.y;
    double R = net.domain.radius;
    if (std::abs(dy) >= R) return out;
    double w = std::sqrt(R * R - dy * dy);
    double xl = net.domain.center.x - w, xr = net.domain.center.x + w;
    auto cr = row_crossings(net, y);
    if (cr.empty()) {
        out.push_back({xl, xr, phase_by_nearest_edge(net, {0.5 * (xl + xr), y})});
        return out;
    }
    double x = xl;
    int phase = cr.front().from;
    for (const auto& c : cr) {
        double cx = std::clamp(c.x, xl, xr);
        if (cx > x) out.push_back({x, cx, phase});
        x = std::max(x, cx);
        phase = c.to;
    }
    if (xr > x) out.push_back({x, xr, phase});
    return out;
}

// Critical heights: vertex ordinates and the top/bottom of the disc, sorted and unique.
inline std::vector<double> critical_heights(const Network& net) {
    std::vector<double> ys;
    ys.push_back(net.domain.center.y - net.domain.radius);
    ys.push_back(net.domain.center.y + net.domain.radius);
    for (Vec2 v : net.vertices) ys.push_back(v.y);
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    return ys;
}

struct LabelIssue {
    double y;
    double x;
    int phase_before;
    int phase_after;
};

// Checks that each face carries one phase: along one scan line per slab between critical
// heights (every face meets at least one of them), neighbouring crossings must agree on the
// phase in between. Also collects the set of phases that occupy positive area.
inline std::vector<LabelIssue> check_face_labels(const Network& net, std::vector<bool>* seen = nullptr) {
    std::vector<LabelIssue> issues;
    if (seen) seen->assign(net.P(), false);
    auto ys = critical_heights(net);
    double lo = net.domain.center.y - net.domain.radius, hi = net.domain.center.y + net.domain.radius;
    for (size_t k = 0; k + 1 < ys.size(); ++k) {
        if (ys[k] < lo || ys[k + 1] > hi) continue;
        if (ys[k + 1] - ys[k] <= 1e-14 * net.domain.radius) continue;
        double y = 0.5 * (ys[k] + ys[k + 1]);
        auto cr = row_crossings(net, y);
        for (size_t c = 0; c + 1 < cr.size(); ++c)
            if (cr[c].to != cr[c + 1].from)
                issues.push_back({y, 0.5 * (cr[c].x + cr[c + 1].x), cr[c].to, cr[c + 1].from});
        if (seen) {
            for (const auto& iv : row_intervals(net, y))
                if (iv.phase >= 0 && iv.phase < net.P()) (*seen)[iv.phase] = true;
        }
    }
    return issues;
}

// ---------------------------------------------------------------------------------------------
// Boundary trace: cyclic arcs of the circle with the phase touching them.

struct TraceArc {
    double start;  // angle in [0, 2pi)
    double end;    // start < end <= start + 2pi
    int phase;
};

inline std::vector<TraceArc> boundary_trace(const Network& net) {
    auto inc = net.incidence();
    std::vector<std::pair<double, int>> bv;
    for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v)
        if (net.on_boundary(v) && !inc[v].empty()) bv.push_back({net.domain.angle_at(net.vertices[v]), v});
    std::sort(bv.begin(), bv.end());
    std::vector<TraceArc> arcs;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (bv.empty()) {
        Vec2 probe = net.domain.center + Vec2{net.domain.radius * (1.0 - 1e-9), 0.0};
        int ph = net.edges.empty() ? 0 : phase_at(net, probe);
        arcs.push_back({0.0, two_pi, ph});
        return arcs;
    }
    for (size_t k = 0; k < bv.size(); ++k) {
        int v = bv[k].second;
        double t0 = bv[k].first;
        double t1 = (k + 1 < bv.size()) ? bv[k + 1].first : bv[0].first + two_pi;
        // Phase just counter-clockwise of v along the circle.
        Vec2 tau = perp(net.vertices[v] - net.domain.center);
        int ph = sector_phase(net, inc[v], v, tau);
        arcs.push_back({t0, t1, ph});
    }
    return arcs;
}

// Phase on the trace at angle t.
inline int trace_phase_at(const std::vector<TraceArc>& arcs, double t) {
    t = wrap_2pi(t);
    for (const auto& a : arcs) {
        if (t >= a.start && t < a.end) return a.phase;
        if (t + 2.0 * std::numbers::pi >= a.start && t + 2.0 * std::numbers::pi < a.end) return a.phase;
    }
    return arcs.back().phase;
}

// ---------------------------------------------------------------------------------------------
// Structural checks shared by reference partitions and competitors.

struct Issue {
    std::string clause;   // which requirement failed
    std::string entity;   // e.g. "segment 3", "vertex 2", "phase 4" (one-based)
    std::string message;
};

inline std::string vname(int v) { return "vertex " + std::to_string(v + 1); }
inline std::string ename(int e) { return "segment " + std::to_string(e + 1); }
inline std::string pname(int p) { return "phase " + std::to_string(p + 1); }

// Index ranges, phase labels, containment in the disc and pairwise non-crossing of edges.
inline std::vector<Issue> structural_issues(const Network& net) {
    std::vector<Issue> out;
    const int nv = static_cast<int>(net.vertices.size());
    const int ne = static_cast<int>(net.edges.size());
    bool indices_ok = true;
    for (int e = 0; e < ne; ++e) {
        const Edge& E = net.edges[e];
        if (E.a < 0 || E.a >= nv || E.b < 0 || E.b >= nv) {
            out.push_back({"ii", ename(e), "vertex index out of range"});
            indices_ok = false;
            continue;
        }
        if (E.left < 0 || E.left >= net.P() || E.right < 0 || E.right >= net.P())
            out.push_back({"i", ename(e), "phase label out of range"});
        if (E.left == E.right) out.push_back({"i", ename(e), "left and right phase coincide"});
        if (E.a == E.b || net.length(e) <= 1e-12 * net.domain.radius)
            out.push_back({"ii", ename(e), "degenerate segment"});
    }
    for (int v = 0; v < nv; ++v) {
        double d = dist(net.vertices[v], net.domain.center);
        if (!std::isfinite(d)) out.push_back({"ii", vname(v), "non-finite coordinates"});
        else if (d > net.domain.radius + net.boundary_tol()) out.push_back({"ii", vname(v), "outside the domain"});
    }
    if (!indices_ok) return out;
    for (int e = 0; e < ne; ++e) {
        const Edge& E = net.edges[e];
        for (int f = e + 1; f < ne; ++f) {
            const Edge& F = net.edges[f];
            int shared = (E.a == F.a) + (E.a == F.b) + (E.b == F.a) + (E.b == F.b);
            Vec2 a = net.A(e), b = net.B(e), c = net.A(f), d = net.B(f);
            if (shared >= 2) {
                out.push_back({"ii", ename(e) + "," + ename(f), "duplicate segment"});
            } else if (shared == 1) {
                int sv = (E.a == F.a || E.a == F.b) ? E.a : E.b;
                int eo = (E.a == sv) ? E.b : E.a, fo = (F.a == sv) ? F.b : F.a;
                Vec2 s = net.vertices[sv], pe = net.vertices[eo], pf = net.vertices[fo];
                Vec2 u = normalized(pe - s), w = normalized(pf - s);
                if (std::abs(cross(u, w)) <= 1e-12 && dot(u, w) > 0)
                    out.push_back({"ii", ename(e) + "," + ename(f), "overlapping collinear segments"});
            } else if (segments_intersect(a, b, c, d)) {
                out.push_back({"iii", ename(e) + "," + ename(f), "segments intersect away from shared endpoints"});
            }
        }
    }
    return out;
}

}  // namespace calibnet
