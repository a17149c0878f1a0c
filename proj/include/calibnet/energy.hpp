#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "calibnet/calibration.hpp"
#include "calibnet/geometry.hpp"
#include "calibnet/network.hpp"
#include "calibnet/partition.hpp"

namespace calibnet {

// Competitor partition. Faces are implied by the edge labels; the trace is derived.
struct PolygonalPartition {
    Network net;

    static PolygonalPartition from(const FlatPartition& p) { return {p.net}; }
};

inline std::vector<Issue> validate_polygonal(const PolygonalPartition& q) {
    auto out = structural_issues(q.net);
    if (!out.empty()) return out;
    for (const auto& li : check_face_labels(q.net))
        out.push_back({"i", "face near (" + std::to_string(li.x) + "," + std::to_string(li.y) + ")",
                       "face carries two phases"});
    return out;
}

// ---------------------------------------------------------------------------------------------
// Gauss-Legendre rule of order 8 on [-1, 1].

inline constexpr std::array<double, 8> kGLNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGLWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

inline double gauss_legendre(const std::function<double(double)>& f, double a, double b) {
    double m = 0.5 * (a + b), h = 0.5 * (b - a), s = 0.0;
    for (int k = 0; k < 8; ++k) s += kGLWeights[k] * f(m + h * kGLNodes[k]);
    return s * h;
}

// Adaptive bisection driven by the difference between one panel and its two halves.
inline double adaptive_gl(const std::function<double(double)>& f, double a, double b, double tol, int depth = 0) {
    double whole = gauss_legendre(f, a, b);
    double m = 0.5 * (a + b);
    double left = gauss_legendre(f, a, m), right = gauss_legendre(f, m, b);
    if (std::abs(left + right - whole) <= tol || depth >= 40 || (b - a) <= 1e-15 * (std::abs(a) + std::abs(b) + 1.0))
        return left + right;
    return adaptive_gl(f, a, m, 0.5 * tol, depth + 1) + adaptive_gl(f, m, b, 0.5 * tol, depth + 1);
}

// ---------------------------------------------------------------------------------------------
// Interface energy. The ordered-pair convention counts each interface for (i,j) and (j,i).

inline double physical_length(const Network& net) {
    double s = 0.0;
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) s += net.length(e);
    return s;
}

inline double physical_energy(const Network& net) {
    double s = 0.0;
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) s += net.sigma(e) * net.length(e);
    return s;
}

inline double interface_energy(const Network& net) { return 2.0 * physical_energy(net); }
inline double interface_energy(const PolygonalPartition& q) { return interface_energy(q.net); }
inline double interface_energy(const FlatPartition& p) { return interface_energy(p.net); }

// ---------------------------------------------------------------------------------------------
// Row overlays of two networks on the same disc.

struct OverlayPiece {
    double x0, x1;
    int a;  // competitor phase
    int b;  // reference phase
};

inline std::vector<OverlayPiece> row_overlay(const Network& q, const Network& p, double y) {
    auto iq = row_intervals(q, y), ip = row_intervals(p, y);
    std::vector<OverlayPiece> out;
    size_t s = 0, t = 0;
    while (s < iq.size() && t < ip.size()) {
        double lo = std::max(iq[s].x0, ip[t].x0), hi = std::min(iq[s].x1, ip[t].x1);
        if (hi > lo) out.push_back({lo, hi, iq[s].phase, ip[t].phase});
        if (iq[s].x1 < ip[t].x1) ++s;
        else ++t;
    }
    return out;
}

inline void check_same_domain(const Network& q, const Network& p) {
    if (q.domain.center != p.domain.center || q.domain.radius != p.domain.radius)
        throw InputError("competitor and reference live on different domains");
    if (q.P() != p.P()) throw InputError("competitor and reference have different phase counts");
}

// Per phase, area of the symmetric difference. Exact slab decomposition: between consecutive
// critical heights (vertices of both networks, their mutual crossings, disc extremes) the
// overlay lengths are affine in y except for the circular ends, which adaptive quadrature resolves.
inline std::vector<double> l1_distance(const PolygonalPartition& q, const FlatPartition& p) {
    check_same_domain(q.net, p.net);
    const int P = p.net.P();
    const double R = p.net.domain.radius;
    const double arc_tol = 1e-8 * R;
    std::vector<double> ys = critical_heights(q.net);
    auto yp = critical_heights(p.net);
    ys.insert(ys.end(), yp.begin(), yp.end());
    for (int e = 0; e < static_cast<int>(q.net.edges.size()); ++e)
        for (int f = 0; f < static_cast<int>(p.net.edges.size()); ++f) {
            double s, t;
            if (segment_crossing(q.net.A(e), q.net.B(e), p.net.A(f), p.net.B(f), s, t))
                ys.push_back(q.net.A(e).y + s * (q.net.B(e).y - q.net.A(e).y));
        }
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    const double ylo = p.net.domain.center.y - R, yhi = p.net.domain.center.y + R;
    std::vector<double> area(P, 0.0);
    for (int i = 0; i < P; ++i) {
        double total = 0.0;
        for (size_t k = 0; k + 1 < ys.size(); ++k) {
            double a = std::max(ys[k], ylo), b = std::min(ys[k + 1], yhi);
            if (!(b > a)) continue;
            auto f = [&](double y) {
                double s = 0.0;
                for (const auto& pc : row_overlay(q.net, p.net, y))
                    if (pc.a != pc.b && (pc.a == i || pc.b == i)) s += pc.x1 - pc.x0;
                return s;
            };
            total += adaptive_gl(f, a, b, arc_tol * (b - a));
        }
        area[i] = total;
    }
    return area;
}

// ---------------------------------------------------------------------------------------------
// Boundary trace comparison.

inline bool same_trace(const Network& q, const Network& p, double arc_tol = -1.0) {
    if (q.domain.center != p.domain.center || q.domain.radius != p.domain.radius) return false;
    if (arc_tol < 0) arc_tol = 1e-8 * p.domain.radius;
    auto tq = boundary_trace(q), tp = boundary_trace(p);
    if (tq.size() != tp.size()) return false;
    const double R = p.domain.radius;
    auto close = [&](double s, double t) {
        double d = std::abs(wrap_2pi(s - t + std::numbers::pi) - std::numbers::pi);
        return d * R <= arc_tol;
    };
    const size_t n = tq.size();
    if (n == 1) return tq[0].phase == tp[0].phase;
    for (size_t rot = 0; rot < n; ++rot) {
        bool ok = true;
        for (size_t k = 0; k < n && ok; ++k) {
            const auto& A = tq[(k + rot) % n];
            const auto& B = tp[k];
            ok = A.phase == B.phase && close(A.start, B.start) && close(A.end, B.end);
        }
        if (ok) return true;
    }
    return false;
}

inline bool same_trace(const PolygonalPartition& q, const FlatPartition& p) { return same_trace(q.net, p.net); }

// ---------------------------------------------------------------------------------------------
// Energy terms against a calibration.

struct QuadratureConfig {
    double h = 0.0;     // area grid; 0: delta' r / 20
    double fd_h = 0.0;  // 0: 1e-5 r
    double line_tol = 1e-12;
};

inline QuadratureConfig resolve(const QuadratureConfig& q, const CalibrationField& f) {
    QuadratureConfig out = q;
    if (!(out.h > 0)) out.h = f.delta_prime * f.scales.r_bar / 20.0;
    if (!(out.fd_h > 0)) out.fd_h = 1e-5 * f.scales.r_bar;
    return out;
}

// Sum over edges of sigma * integral of (1 - (xi_i - xi_j) . n_ij / sigma), both orientations.
inline double relative_energy(const Network& q, const FieldFamily& field, double tol = 1e-12) {
    if (field.phases() != q.P()) throw InputError("field/partition phase-count mismatch");
    const int P = q.P();
    std::vector<Vec2> xi(P);
    double total = 0.0;
    for (int e = 0; e < static_cast<int>(q.edges.size()); ++e) {
        const Edge& E = q.edges[e];
        Vec2 a = q.A(e), b = q.B(e);
        Vec2 n = q.normal(e, E.right, E.left);
        double s = q.tensions(E.left, E.right), L = q.length(e);
        auto g = [&](double t) {
            field.eval_all(a + (b - a) * t, xi.data());
            return s - dot(xi[E.right] - xi[E.left], n);
        };
        total += 2.0 * L * adaptive_gl(g, 0.0, 1.0, tol);
    }
    return total;
}

// Grid quadrature of sum_{i != j} 2 (chi_i - chibar_i) chibar_j (div xi_i - div xi_j): only
// cells where competitor phase a differs from reference phase b contribute 2 (div xi_a - div xi_b).
inline double bulk_divergence_term(const Network& q, const Network& p, const FieldFamily& field, double h,
                                   double fd_h) {
    if (!(h > 0)) throw InputError("quadrature step must be positive");
    check_same_domain(q, p);
    const DiscDomain& D = p.domain;
    const int N = static_cast<int>(std::ceil(2.0 * D.radius / h));
    const double x0 = D.center.x - D.radius, y0 = D.center.y - D.radius;
    std::vector<double> div(field.phases());
    std::vector<double> rows(N, 0.0);
    for (int j = 0; j < N; ++j) {
        double y = y0 + (j + 0.5) * h;
        double row = 0.0;
        for (const auto& pc : row_overlay(q, p, y)) {
            if (pc.a == pc.b) continue;
            long k0 = static_cast<long>(std::ceil((pc.x0 - x0) / h - 0.5));
            for (long k = std::max(k0, 0L);; ++k) {
                double x = x0 + (k + 0.5) * h;
                if (x >= pc.x1) break;
                if (x < pc.x0) continue;
                divergence_all(field, {x, y}, fd_h, div.data());
                row += 2.0 * (div[pc.a] - div[pc.b]);
            }
        }
        rows[j] = row * h * h;
    }
    // Pairwise summation keeps the reduction order fixed.
    std::function<double(size_t, size_t)> sum = [&](size_t lo, size_t hi) -> double {
        if (hi - lo <= 8) {
            double s = 0.0;
            for (size_t k = lo; k < hi; ++k) s += rows[k];
            return s;
        }
        size_t mid = lo + (hi - lo) / 2;
        return sum(lo, mid) + sum(mid, hi);
    };
    return sum(0, rows.size());
}

// Sum_i of the boundary integral of 2 (chi_i - chibar_i) n . xi_i, with n the inward unit normal
// of the disc; with this orientation the identity closes as E = Ebar + E_rel + boundary + bulk.
inline double boundary_trace_term(const Network& q, const Network& p, const FieldFamily& field, double tol = 1e-12) {
    check_same_domain(q, p);
    const DiscDomain& D = p.domain;
    auto tq = boundary_trace(q), tp = boundary_trace(p);
    std::vector<double> cuts;
    for (const auto& a : tq) cuts.push_back(wrap_2pi(a.start));
    for (const auto& a : tp) cuts.push_back(wrap_2pi(a.start));
    cuts.push_back(0.0);
    cuts.push_back(2.0 * std::numbers::pi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<Vec2> xi(field.phases());
    double total = 0.0;
    for (size_t k = 0; k + 1 < cuts.size(); ++k) {
        double t0 = cuts[k], t1 = cuts[k + 1];
        if (!(t1 > t0)) continue;
        double tm = 0.5 * (t0 + t1);
        int a = trace_phase_at(tq, tm), b = trace_phase_at(tp, tm);
        if (a == b) continue;
        auto g = [&](double t) {
            Vec2 x = D.point_at(t);
            field.eval_all(x, xi.data());
            Vec2 n_in = -from_angle(t);
            return 2.0 * dot(n_in, xi[a] - xi[b]) * D.radius;
        };
        total += adaptive_gl(g, t0, t1, tol);
    }
    return total;
}

struct EnergyReport {
    double E_competitor = 0.0;
    double E_reference = 0.0;
    double relative_energy = 0.0;
    double bulk_term = 0.0;
    double boundary_term = 0.0;
    double identity_residual = 0.0;
    double physical_competitor = 0.0;
    double physical_reference = 0.0;
    double h = 0.0;
    double fd_h = 0.0;
    bool same_trace = true;
};

inline EnergyReport verify_energy_identity(const Network& q, const CalibrationField& field,
                                           const QuadratureConfig& quad = {}) {
    const Network& p = field.partition.net;
    check_same_domain(q, p);
    auto cfg = resolve(quad, field);
    EnergyReport r;
    r.h = cfg.h;
    r.fd_h = cfg.fd_h;
    r.E_competitor = interface_energy(q);
    r.E_reference = interface_energy(p);
    r.physical_competitor = physical_energy(q);
    r.physical_reference = physical_energy(p);
    r.relative_energy = relative_energy(q, field, cfg.line_tol);
    r.bulk_term = bulk_divergence_term(q, p, field, cfg.h, cfg.fd_h);
    r.boundary_term = boundary_trace_term(q, p, field, cfg.line_tol);
    r.same_trace = same_trace(q, p);
    r.identity_residual =
        std::abs(r.E_competitor - (r.E_reference + r.relative_energy + r.bulk_term + r.boundary_term));
    return r;
}

inline EnergyReport verify_energy_identity(const PolygonalPartition& q, const CalibrationField& field,
                                           const QuadratureConfig& quad = {}) {
    return verify_energy_identity(q.net, field, quad);
}

}  // namespace calibnet
