#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "calibnet/geometry.hpp"
#include "calibnet/network.hpp"
#include "calibnet/tensions.hpp"

namespace calibnet {

inline constexpr double kHerringTolerance = 1e-9;

// Reference partition: interfaces are straight segments meeting at triple junctions or at
// the circle.
struct FlatPartition {
    Network net;
};

struct ValidationReport {
    bool valid = true;
    std::vector<Issue> issues;
    std::vector<std::pair<int, double>> herring;  // (junction vertex, residual)
};

inline double herring_residual(const Network& net, int v) {
    auto inc = net.incidence();
    if (v < 0 || v >= static_cast<int>(net.vertices.size()) || inc[v].size() != 3 || net.on_boundary(v))
        throw InputError(vname(v) + " is not a triple junction");
    std::vector<int> es = inc[v];
    std::sort(es.begin(), es.end(), [&](int e, int f) {
        return angle_of(net.outgoing(e, v)) < angle_of(net.outgoing(f, v));
    });
    Vec2 sum{};
    for (int e : es) {
        int from = net.phase_cw(e, v), into = net.phase_ccw(e, v);
        sum += net.normal(e, from, into) * net.tensions(from, into);
    }
    return norm(sum);
}

inline double herring_residual(const FlatPartition& p, int v) { return herring_residual(p.net, v); }

inline ValidationReport validate_flat_partition(const FlatPartition& p) {
    const Network& net = p.net;
    ValidationReport rep;
    auto add = [&](Issue is) { rep.issues.push_back(std::move(is)); };

    if (!(net.domain.radius > 0.0)) add({"domain", "domain", "radius must be positive"});
    try {
        check_well_formed(net.tensions);
        auto emb = embed_simplex(net.tensions);
        if (auto* na = std::get_if<NotAdmissible>(&emb))
            add({"tensions", "tensions", na->reason + " (eigenvalue " + std::to_string(na->eigenvalue) + ")"});
    } catch (const InputError& e) {
        add({"tensions", "tensions", e.what()});
    }
    if (!rep.issues.empty()) { rep.valid = false; return rep; }

    auto structural = structural_issues(net);
    bool fatal = false;
    for (auto& is : structural) {
        if (is.message.find("out of range") != std::string::npos) fatal = true;
        add(is);
    }
    if (net.edges.empty()) add({"i", "network", "no interfaces"});
    if (fatal || net.edges.empty()) { rep.valid = false; return rep; }

    auto inc = net.incidence();
    for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v) {
        size_t deg = inc[v].size();
        if (net.on_boundary(v)) {
            if (deg != 1) {
                add({"iv", vname(v), "boundary vertex must have exactly one segment, has " + std::to_string(deg)});
                continue;
            }
            int e = inc[v][0];
            Vec2 d = net.outgoing(e, v);
            Vec2 tau = normalized(perp(net.vertices[v] - net.domain.center));
            double s = cross(tau, d);  // sine of the contact angle measured from the tangent
            if (!(std::abs(s) > 1e-9) || dot(d, net.domain.outward_normal(net.vertices[v])) >= 0)
                add({"iv", vname(v), "segment does not meet the boundary transversally"});
            continue;
        }
        if (deg == 0) { add({"ii", vname(v), "isolated vertex"}); continue; }
        if (deg != 3) {
            add({"iii", vname(v), "interior vertex must be a triple junction, has degree " + std::to_string(deg)});
            continue;
        }
        std::set<int> ph;
        for (int e : inc[v]) { ph.insert(net.edges[e].left); ph.insert(net.edges[e].right); }
        if (ph.size() != 3) {
            add({"iii", vname(v), "triple junction must separate three distinct phases"});
            continue;
        }
        // Sector labels must agree between consecutive segments.
        std::vector<int> es = inc[v];
        std::sort(es.begin(), es.end(), [&](int e, int f) {
            return angle_of(net.outgoing(e, v)) < angle_of(net.outgoing(f, v));
        });
        bool consistent = true;
        for (int k = 0; k < 3; ++k)
            if (net.phase_ccw(es[k], v) != net.phase_cw(es[(k + 1) % 3], v)) consistent = false;
        if (!consistent) {
            add({"i", vname(v), "inconsistent phase labels around junction"});
            continue;
        }
        double h = herring_residual(net, v);
        rep.herring.push_back({v, h});
        if (!(h <= kHerringTolerance))
            add({"herring", vname(v), "Herring residual " + std::to_string(h) + " exceeds tolerance"});
    }

    std::vector<bool> seen;
    auto labels = check_face_labels(net, &seen);
    for (const auto& li : labels)
        add({"i", "face near (" + std::to_string(li.x) + "," + std::to_string(li.y) + ")",
             "face carries two phases (" + std::to_string(li.phase_before + 1) + " and " +
                 std::to_string(li.phase_after + 1) + ")"});
    for (int i = 0; i < net.P(); ++i)
        if (!seen[i]) add({"i", pname(i), "phase is empty"});

    rep.valid = rep.issues.empty();
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Topological features.

enum class PointKind { Junction, Boundary };

struct PointFeature {
    PointKind kind;
    int vertex;
    std::vector<int> segments;  // incident segment ids, sorted
    std::vector<int> phases;    // present phases, sorted
};

struct FeatureDecomposition {
    std::vector<int> segments;                  // edge ids, sorted
    std::vector<PointFeature> points;           // junctions first, then boundary endpoints
    std::vector<int> junctions;                 // indices into points
    std::vector<int> boundary;                  // indices into points
    std::vector<std::array<int, 2>> seg_ends;   // per segment: point index at a and at b (-1 if none)

    // Phases present at segment c, sorted.
    std::array<int, 2> segment_phases(const Network& net, int c) const {
        const Edge& E = net.edges[c];
        return {std::min(E.left, E.right), std::max(E.left, E.right)};
    }
    bool incident(int c, int n) const { return seg_ends[c][0] == n || seg_ends[c][1] == n; }
};

inline FeatureDecomposition decompose_features(const FlatPartition& p) {
    auto rep = validate_flat_partition(p);
    if (!rep.valid) throw InputError("decompose_features: invalid partition (" + rep.issues.front().message + ")");
    const Network& net = p.net;
    auto inc = net.incidence();
    FeatureDecomposition fd;
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) fd.segments.push_back(e);
    std::vector<int> point_of(net.vertices.size(), -1);
    auto add_point = [&](PointKind k, int v) {
        PointFeature pf{k, v, inc[v], {}};
        std::sort(pf.segments.begin(), pf.segments.end());
        std::set<int> ph;
        for (int e : inc[v]) { ph.insert(net.edges[e].left); ph.insert(net.edges[e].right); }
        pf.phases.assign(ph.begin(), ph.end());
        point_of[v] = static_cast<int>(fd.points.size());
        fd.points.push_back(std::move(pf));
    };
    for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v)
        if (!net.on_boundary(v) && inc[v].size() == 3) {
            fd.junctions.push_back(static_cast<int>(fd.points.size()));
            add_point(PointKind::Junction, v);
        }
    for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v)
        if (net.on_boundary(v) && inc[v].size() == 1) {
            fd.boundary.push_back(static_cast<int>(fd.points.size()));
            add_point(PointKind::Boundary, v);
        }
    for (int e : fd.segments) fd.seg_ends.push_back({point_of[net.edges[e].a], point_of[net.edges[e].b]});
    return fd;
}

// ---------------------------------------------------------------------------------------------
// Localization scales and dumbbell neighbourhoods.

struct LocalizationScales {
    double r_bar = 0.0;
    double delta = 0.0;
};

class NoAdmissibleScales : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Supremum of r for the separation clauses (point features, non-incident segments,
// boundary) and the boundary ball condition. Each constraint reads dist > 4r.
inline double separation_bound(const FlatPartition& p, const FeatureDecomposition& fd) {
    const Network& net = p.net;
    double R = net.domain.radius;
    double d = 2.0 * R;  // boundary ball condition on scale 2r: 2r < R
    auto pt = [&](int n) { return net.vertices[fd.points[n].vertex]; };
    auto to_circle = [&](Vec2 x) { return R - dist(x, net.domain.center); };
    for (size_t a = 0; a < fd.points.size(); ++a) {
        for (size_t b = a + 1; b < fd.points.size(); ++b)
            if (fd.points[a].kind == fd.points[b].kind) d = std::min(d, dist(pt(a), pt(b)));
        if (fd.points[a].kind == PointKind::Junction) d = std::min(d, to_circle(pt(a)));
        for (int c : fd.segments)
            if (!fd.incident(c, static_cast<int>(a)))
                d = std::min(d, dist_point_segment(pt(a), net.A(c), net.B(c)));
    }
    for (int c : fd.segments) {
        bool touches_boundary = false;
        for (int n : fd.seg_ends[c])
            if (n >= 0 && fd.points[n].kind == PointKind::Boundary) touches_boundary = true;
        if (!touches_boundary) d = std::min({d, to_circle(net.A(c)), to_circle(net.B(c))});
        for (int c2 : fd.segments) {
            if (c2 <= c) continue;
            bool share_junction = false;
            for (int n : fd.seg_ends[c])
                if (n >= 0 && fd.points[n].kind == PointKind::Junction && fd.incident(c2, n)) share_junction = true;
            if (!share_junction)
                d = std::min(d, dist_segment_segment(net.A(c), net.B(c), net.A(c2), net.B(c2)));
        }
    }
    return std::min(d / 4.0, 1.0);
}

// Smallest angle between consecutive segments at any junction (pi if there are none).
inline double min_junction_angle(const FlatPartition& p, const FeatureDecomposition& fd) {
    double m = std::numbers::pi;
    for (int n : fd.junctions) {
        int v = fd.points[n].vertex;
        for (size_t a = 0; a < fd.points[n].segments.size(); ++a)
            for (size_t b = a + 1; b < fd.points[n].segments.size(); ++b) {
                Vec2 u = p.net.outgoing(fd.points[n].segments[a], v);
                Vec2 w = p.net.outgoing(fd.points[n].segments[b], v);
                m = std::min(m, angle_between(u, w));
            }
    }
    return m;
}

// Two delta*r tubes around rays meeting at angle phi overlap out to distance
// delta*r / sin(phi/2) from the apex; that must stay strictly inside B_{r/2}.
inline bool tube_overlap_ok(double delta, double phi) {
    double s = std::sin(std::min(phi, std::numbers::pi) / 2.0);
    return delta / s < 0.5;
}

struct ErosionCheck {
    bool ok = true;
    int face_components = 0;
    std::string failure;
};

// Rasterized erosion check at resolution r/20: every connected face component, minus the
// closed r-neighbourhood of its boundary, must have at most one connected piece.
inline ErosionCheck check_erosion(const FlatPartition& p, double r) {
    const Network& net = p.net;
    const double R = net.domain.radius;
    const double hr = r / 20.0;
    const int N = static_cast<int>(std::ceil(2.0 * R / hr));
    const double x0 = net.domain.center.x - R, y0 = net.domain.center.y - R;
    std::vector<int> phase(static_cast<size_t>(N) * N, -1);
    std::vector<char> deep(static_cast<size_t>(N) * N, 0);
    for (int j = 0; j < N; ++j) {
        double y = y0 + (j + 0.5) * hr;
        auto ivs = row_intervals(net, y);
        size_t k = 0;
        for (int i = 0; i < N; ++i) {
            double x = x0 + (i + 0.5) * hr;
            while (k < ivs.size() && ivs[k].x1 <= x) ++k;
            if (k >= ivs.size() || x < ivs[k].x0) continue;
            size_t id = static_cast<size_t>(j) * N + i;
            phase[id] = ivs[k].phase;
            Vec2 q{x, y};
            double d = R - dist(q, net.domain.center);
            for (int e = 0; e < static_cast<int>(net.edges.size()) && d > r; ++e)
                d = std::min(d, dist_point_segment(q, net.A(e), net.B(e)));
            deep[id] = d > r;
        }
    }
    ErosionCheck out;
    std::vector<int> comp(phase.size(), -1);
    std::vector<int> sub(phase.size(), -1);
    auto flood = [&](std::vector<int>& lab, size_t start, int id, auto&& same) {
        std::queue<size_t> q;
        q.push(start);
        lab[start] = id;
        while (!q.empty()) {
            size_t c = q.front();
            q.pop();
            int ci = static_cast<int>(c % N), cj = static_cast<int>(c / N);
            const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                int ni = ci + di[k], nj = cj + dj[k];
                if (ni < 0 || nj < 0 || ni >= N || nj >= N) continue;
                size_t nc = static_cast<size_t>(nj) * N + ni;
                if (lab[nc] != -1 || !same(c, nc)) continue;
                lab[nc] = id;
                q.push(nc);
            }
        }
    };
    int nc = 0;
    for (size_t c = 0; c < phase.size(); ++c) {
        if (phase[c] < 0 || comp[c] != -1) continue;
        flood(comp, c, nc++, [&](size_t a, size_t b) { return phase[a] == phase[b]; });
    }
    out.face_components = nc;
    std::vector<int> pieces(nc, 0);
    int ns = 0;
    for (size_t c = 0; c < phase.size(); ++c) {
        if (phase[c] < 0 || !deep[c] || sub[c] != -1) continue;
        pieces[comp[c]]++;
        flood(sub, c, ns++, [&](size_t a, size_t b) { return deep[b] && comp[a] == comp[b]; });
    }
    for (int k = 0; k < nc; ++k)
        if (pieces[k] > 1) {
            out.ok = false;
            out.failure = "eroded face component splits into " + std::to_string(pieces[k]) + " pieces";
            break;
        }
    return out;
}

inline LocalizationScales find_localization_scales(const FlatPartition& p) {
    auto fd = decompose_features(p);
    double r = 0.9 * separation_bound(p, fd);
    if (!(r > 0.0)) throw NoAdmissibleScales("separation bound is not positive");
    double delta = 0.5;
    double phi = min_junction_angle(p, fd);
    for (int it = 0; !tube_overlap_ok(delta, phi); ++it) {
        delta *= 0.9;
        if (it > 400) throw NoAdmissibleScales("no admissible delta for junction angle");
    }
    for (int it = 0;; ++it) {
        if (check_erosion(p, r).ok) break;
        r *= 0.8;
        if (it > 40 || r < 1e-9 * p.net.domain.radius)
            throw NoAdmissibleScales("erosion condition fails at every tested radius");
    }
    return {r, delta};
}

struct DumbbellTarget {
    enum class Kind { Network, Interface, PhaseBoundary } kind = Kind::Network;
    int i = -1;
    int j = -1;

    static DumbbellTarget network() { return {}; }
    static DumbbellTarget interface(int i, int j) { return {Kind::Interface, i, j}; }
    static DumbbellTarget phase_boundary(int i) { return {Kind::PhaseBoundary, i, -1}; }
};

// Segments and point features that make up a dumbbell target.
struct DumbbellFeatures {
    std::vector<int> segments;
    std::vector<int> points;
};

inline DumbbellFeatures dumbbell_features(const FlatPartition& p, const FeatureDecomposition& fd,
                                          const DumbbellTarget& t) {
    DumbbellFeatures out;
    const int P = p.net.P();
    auto has = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };
    switch (t.kind) {
        case DumbbellTarget::Kind::Network:
            out.segments = fd.segments;
            for (int n = 0; n < static_cast<int>(fd.points.size()); ++n) out.points.push_back(n);
            break;
        case DumbbellTarget::Kind::Interface: {
            if (t.i < 0 || t.j < 0 || t.i >= P || t.j >= P || t.i == t.j)
                throw InputError("dumbbell: invalid phase pair");
            for (int c : fd.segments) {
                auto ph = fd.segment_phases(p.net, c);
                if (ph[0] == std::min(t.i, t.j) && ph[1] == std::max(t.i, t.j)) out.segments.push_back(c);
            }
            if (out.segments.empty()) throw InputError("dumbbell: interface is empty");
            for (int n = 0; n < static_cast<int>(fd.points.size()); ++n)
                if (has(fd.points[n].phases, t.i) && has(fd.points[n].phases, t.j)) out.points.push_back(n);
            break;
        }
        case DumbbellTarget::Kind::PhaseBoundary: {
            if (t.i < 0 || t.i >= P) throw InputError("dumbbell: invalid phase");
            std::set<int> segs, pts;
            for (int j = 0; j < P; ++j) {
                if (j == t.i) continue;
                bool nonempty = false;
                for (int c : fd.segments) {
                    auto ph = fd.segment_phases(p.net, c);
                    if (ph[0] == std::min(t.i, j) && ph[1] == std::max(t.i, j)) { nonempty = true; segs.insert(c); }
                }
                if (!nonempty) continue;
                for (int n = 0; n < static_cast<int>(fd.points.size()); ++n)
                    if (has(fd.points[n].phases, t.i) && has(fd.points[n].phases, j)) pts.insert(n);
            }
            out.segments.assign(segs.begin(), segs.end());
            out.points.assign(pts.begin(), pts.end());
            break;
        }
    }
    return out;
}

// Membership in the union of open delta*r tubes around the target's segments and open r balls
// around its point features. (Tubes minus balls, then union with the balls, is this union.)
inline bool dumbbell_contains(const FlatPartition& p, const FeatureDecomposition& fd, const DumbbellTarget& t,
                              double r, double delta, Vec2 x) {
    auto f = dumbbell_features(p, fd, t);
    for (int n : f.points)
        if (dist(x, p.net.vertices[fd.points[n].vertex]) < r) return true;
    for (int c : f.segments)
        if (dist_point_segment(x, p.net.A(c), p.net.B(c)) < delta * r) return true;
    return false;
}

}  // namespace calibnet
