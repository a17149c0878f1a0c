#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "calibnet/geometry.hpp"
#include "calibnet/network.hpp"
#include "calibnet/partition.hpp"
#include "calibnet/tensions.hpp"

namespace calibnet {

// Cutoff profile: 1 on (-inf, 1/4], 0 on [3/4, inf), quintic smoothstep in between.
inline double theta(double t) {
    if (t <= 0.25) return 1.0;
    if (t >= 0.75) return 0.0;
    double s = 2.0 * (t - 0.25);
    return 1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

inline double theta_prime(double t) {
    if (t <= 0.25 || t >= 0.75) return 0.0;
    double s = 2.0 * (t - 0.25);
    return -2.0 * 30.0 * s * s * (s - 1.0) * (s - 1.0);
}

inline constexpr double kThetaPrimeSup = 3.75;  // attained at t = 1/2

// A family of P vector fields that can be evaluated together.
class FieldFamily {
public:
    virtual ~FieldFamily() = default;
    virtual int phases() const = 0;
    virtual void eval_all(Vec2 x, Vec2* out) const = 0;
};

// ---------------------------------------------------------------------------------------------
// Auxiliary vectors.

inline Vec2 two_phase_vector(const Network& net, int c, int i, int k, int l) {
    const auto& s = net.tensions;
    Vec2 n_kl = net.normal(c, k, l);
    return (-n_kl) * (s(i, k) / 2.0) + n_kl * (s(i, l) / 2.0);
}

inline void check_phase(const Network& net, int i) {
    if (i < 0 || i >= net.P()) throw InputError("phase index out of range");
}

inline Vec2 aux_vector_segment(const FlatPartition& p, int i, int c) {
    check_phase(p.net, i);
    if (c < 0 || c >= static_cast<int>(p.net.edges.size())) throw InputError("segment index out of range");
    const Edge& E = p.net.edges[c];
    return two_phase_vector(p.net, c, i, E.left, E.right);
}

// Boundary endpoints carry the two phases of their only segment.
inline Vec2 aux_vector_boundary(const FlatPartition& p, const FeatureDecomposition& fd, int i, int b) {
    check_phase(p.net, i);
    const PointFeature& pf = fd.points.at(b);
    if (pf.kind != PointKind::Boundary) throw InputError("feature is not a boundary endpoint");
    return aux_vector_segment(p, i, pf.segments[0]);
}

// Frame of a triple junction: orthonormal basis of the plane through q_k, q_l, q_m and the
// planar isometry pinned by the images of the three present vertices.
struct JunctionFrame {
    int point = -1;
    std::array<int, 3> phases{};          // k, l, m
    Eigen::VectorXd origin;               // q_k
    Eigen::VectorXd e1, e2;               // basis of E^p
    Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();
    Vec2 shift;                           // image of q_k
    double procrustes_residual = 0.0;
    bool reflection = false;

    Vec2 map(const Eigen::VectorXd& q) const {
        Eigen::VectorXd d = q - origin;
        Eigen::Vector2d c(d.dot(e1), d.dot(e2));
        Eigen::Vector2d r = Q * c;
        return shift + Vec2{r(0), r(1)};
    }
};

// Segment of junction n that separates phases a and b.
inline int junction_segment(const Network& net, const PointFeature& pf, int a, int b) {
    for (int e : pf.segments) {
        const Edge& E = net.edges[e];
        if ((E.left == a && E.right == b) || (E.left == b && E.right == a)) return e;
    }
    throw InputError("junction has no segment between " + pname(a) + " and " + pname(b));
}

inline JunctionFrame build_junction_frame(const FlatPartition& p, const FeatureDecomposition& fd,
                                          const SimplexEmbedding& emb, int n) {
    const Network& net = p.net;
    const auto& s = net.tensions;
    const PointFeature& pf = fd.points.at(n);
    if (pf.kind != PointKind::Junction || pf.phases.size() != 3) throw InputError("feature is not a triple junction");
    JunctionFrame f;
    f.point = n;
    int k = pf.phases[0], l = pf.phases[1], m = pf.phases[2];
    f.phases = {k, l, m};
    auto nrm = [&](int a, int b) { return net.normal(junction_segment(net, pf, a, b), a, b); };
    auto image = [&](int a, int b, int c) { return nrm(a, b) * (s(a, b) / 3.0) + nrm(a, c) * (s(a, c) / 3.0); };
    Vec2 bk = image(k, l, m), bl = image(l, k, m), bm = image(m, k, l);

    f.origin = emb.points[k];
    Eigen::VectorXd ql = emb.points[l] - f.origin, qm = emb.points[m] - f.origin;
    f.e1 = ql.normalized();
    Eigen::VectorXd w = qm - qm.dot(f.e1) * f.e1;
    f.e2 = w.normalized();
    Eigen::Matrix2d A, B;
    A << ql.dot(f.e1), qm.dot(f.e1), ql.dot(f.e2), qm.dot(f.e2);
    B << bl.x - bk.x, bm.x - bk.x, bl.y - bk.y, bm.y - bk.y;
    // Orthogonal Procrustes, solved separately for det +1 and det -1.
    Eigen::Matrix2d H = B * A.transpose();
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d U = svd.matrixU(), V = svd.matrixV();
    double sgn = (U * V.transpose()).determinant() > 0 ? 1.0 : -1.0;
    Eigen::Matrix2d Qrot = U * Eigen::Vector2d(1.0, sgn).asDiagonal() * V.transpose();
    Eigen::Matrix2d Qref = U * Eigen::Vector2d(1.0, -sgn).asDiagonal() * V.transpose();
    double rrot = (Qrot * A - B).cwiseAbs().maxCoeff();
    double rref = (Qref * A - B).cwiseAbs().maxCoeff();
    f.reflection = rref < rrot;
    f.Q = f.reflection ? Qref : Qrot;
    f.procrustes_residual = std::min(rrot, rref);
    f.shift = bk;
    double scale = std::max({s(k, l), s(k, m), s(l, m)});
    if (!(f.procrustes_residual <= 1e-9 * std::max(1.0, scale)))
        throw InputError("junction at " + vname(pf.vertex) + ": Procrustes residual " +
                         std::to_string(f.procrustes_residual) + " (inconsistent Herring data)");
    return f;
}

inline Vec2 aux_vector_junction(const FlatPartition& p, const FeatureDecomposition& fd, const SimplexEmbedding& emb,
                                int i, int n) {
    check_phase(p.net, i);
    return build_junction_frame(p, fd, emb, n).map(emb.points[i]);
}

struct AuxiliaryVectors {
    std::vector<std::vector<Vec2>> segment;  // [segment][phase]
    std::vector<std::vector<Vec2>> point;    // [point feature][phase]
    std::vector<JunctionFrame> frames;       // parallel to FeatureDecomposition::junctions
    double delta1 = 0.0;
    double calibration_residual = 0.0;
};

struct AuxCheck {
    double calibration_residual = 0.0;
    double delta1 = 0.0;
    // Where delta1 is attained: feature label and phase pair.
    std::string delta1_feature;
    std::array<int, 2> delta1_pair{-1, -1};
};

inline AuxCheck verify_aux_vectors(const AuxiliaryVectors& v, const FlatPartition& p, const FeatureDecomposition& fd) {
    const Network& net = p.net;
    const int P = net.P();
    AuxCheck out;
    auto scan = [&](const std::vector<Vec2>& xi, const std::vector<int>& present, auto normal_of,
                    const std::string& label) {
        for (int i = 0; i < P; ++i)
            for (int j = i + 1; j < P; ++j) {
                bool pi = std::find(present.begin(), present.end(), i) != present.end();
                bool pj = std::find(present.begin(), present.end(), j) != present.end();
                Vec2 d = xi[i] - xi[j];
                double s = net.tensions(i, j);
                if (pi && pj) {
                    out.calibration_residual = std::max(out.calibration_residual, norm(d - normal_of(i, j) * s));
                } else if (norm(d) / s > out.delta1) {
                    out.delta1 = norm(d) / s;
                    out.delta1_feature = label;
                    out.delta1_pair = {i, j};
                }
            }
    };
    for (int c : fd.segments) {
        auto ph = fd.segment_phases(net, c);
        scan(v.segment[c], {ph[0], ph[1]}, [&](int i, int j) { return net.normal(c, i, j); }, ename(c));
    }
    for (int n = 0; n < static_cast<int>(fd.points.size()); ++n) {
        const PointFeature& pf = fd.points[n];
        scan(v.point[n], pf.phases,
             [&](int i, int j) { return net.normal(junction_segment(net, pf, i, j), i, j); }, vname(pf.vertex));
    }
    if (!(out.delta1 < 1.0))
        throw InputError("auxiliary vectors: delta1 = " + std::to_string(out.delta1) + " is not below 1");
    return out;
}

inline AuxiliaryVectors build_aux_vectors(const FlatPartition& p, const FeatureDecomposition& fd,
                                          const SimplexEmbedding& emb) {
    const int P = p.net.P();
    AuxiliaryVectors v;
    v.segment.assign(fd.segments.size(), std::vector<Vec2>(P));
    v.point.assign(fd.points.size(), std::vector<Vec2>(P));
    for (int c : fd.segments)
        for (int i = 0; i < P; ++i) v.segment[c][i] = aux_vector_segment(p, i, c);
    for (int n : fd.junctions) {
        v.frames.push_back(build_junction_frame(p, fd, emb, n));
        for (int i = 0; i < P; ++i) v.point[n][i] = v.frames.back().map(emb.points[i]);
    }
    for (int n : fd.boundary)
        for (int i = 0; i < P; ++i) v.point[n][i] = aux_vector_boundary(p, fd, i, n);
    auto chk = verify_aux_vectors(v, p, fd);
    v.delta1 = chk.delta1;
    v.calibration_residual = chk.calibration_residual;
    return v;
}

// ---------------------------------------------------------------------------------------------
// Wedges around junctions: one per incident segment, bounded by the bisectors of the angles to
// the neighbouring segments.

struct Wedge {
    int segment = -1;
    Vec2 dir;              // outgoing unit direction of the segment
    double half_cw = 0.0;  // angular extent to the clockwise boundary
    double half_ccw = 0.0; // angular extent to the counter-clockwise boundary
};

struct JunctionWedges {
    int point = -1;
    Vec2 apex;
    std::vector<Wedge> wedges;  // counter-clockwise order

    // Wedge containing direction d (boundaries go to the clockwise-later wedge).
    int locate(Vec2 d) const {
        double t = angle_of(d);
        for (int k = 0; k < static_cast<int>(wedges.size()); ++k) {
            double rel = wrap_2pi(t - angle_of(wedges[k].dir) + wedges[k].half_cw);
            if (rel < wedges[k].half_cw + wedges[k].half_ccw) return k;
        }
        return 0;
    }
};

inline std::vector<JunctionWedges> build_wedges(const FlatPartition& p, const FeatureDecomposition& fd) {
    std::vector<JunctionWedges> out;
    for (int n : fd.junctions) {
        const PointFeature& pf = fd.points[n];
        JunctionWedges jw;
        jw.point = n;
        jw.apex = p.net.vertices[pf.vertex];
        for (int e : pf.segments) jw.wedges.push_back({e, p.net.outgoing(e, pf.vertex), 0.0, 0.0});
        std::sort(jw.wedges.begin(), jw.wedges.end(),
                  [](const Wedge& a, const Wedge& b) { return angle_of(a.dir) < angle_of(b.dir); });
        const int m = static_cast<int>(jw.wedges.size());
        for (int k = 0; k < m; ++k) {
            const Wedge& nx = jw.wedges[(k + 1) % m];
            double gap = wrap_2pi(angle_of(nx.dir) - angle_of(jw.wedges[k].dir));
            if (m == 1) gap = 2.0 * std::numbers::pi;
            jw.wedges[k].half_ccw = gap / 2.0;
            jw.wedges[(k + 1) % m].half_cw = gap / 2.0;
        }
        out.push_back(std::move(jw));
    }
    return out;
}

// Largest delta' in (0, delta] whose slab {axial in (r/4, 3r/4), lateral < delta' r} lies
// strictly inside the ball and the wedge, checked on a boundary sample of the slab.
inline double slab_fits(const Wedge& w, double r, double dp) {
    const int n = 64;
    Vec2 u = w.dir, v = perp(w.dir);
    auto inside = [&](double s, double t) {
        Vec2 x = u * s + v * t;
        double rho = norm(x);
        if (!(rho < r)) return false;
        double a = std::atan2(t, s);  // signed angle from the segment, ccw positive
        return a > -w.half_cw && a < w.half_ccw;
    };
    for (int k = 0; k <= n; ++k) {
        double s = r * (0.25 + 0.5 * k / n);
        double t = dp * r * (-1.0 + 2.0 * k / n);
        if (!inside(s, dp * r) || !inside(s, -dp * r)) return false;
        if (!inside(0.25 * r, t) || !inside(0.75 * r, t)) return false;
    }
    return true;
}

inline constexpr double kDeltaPrimeSafety = 0.9;

inline double compute_delta_prime(const FlatPartition& p, const LocalizationScales& sc,
                                  const std::vector<JunctionWedges>& wedges) {
    (void)p;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& jw : wedges)
        for (const auto& w : jw.wedges) {
            double dp;
            if (slab_fits(w, sc.r_bar, sc.delta)) {
                dp = sc.delta;
            } else {
                double lo = 0.0, hi = sc.delta;
                for (int it = 0; it < 80; ++it) {
                    double mid = 0.5 * (lo + hi);
                    (slab_fits(w, sc.r_bar, mid) ? lo : hi) = mid;
                }
                dp = lo;
            }
            best = std::min(best, dp);
        }
    if (!std::isfinite(best)) return sc.delta;
    if (!(best > 0.0)) throw InputError("no positive delta' (degenerate wedge)");
    return kDeltaPrimeSafety * best;
}

// ---------------------------------------------------------------------------------------------
// The calibration field.

class CalibrationField : public FieldFamily {
public:
    FlatPartition partition;
    FeatureDecomposition features;
    LocalizationScales scales;
    double delta_prime = 0.0;
    AuxiliaryVectors aux;
    std::vector<JunctionWedges> wedges;

    int phases() const override { return partition.net.P(); }

    // Which formula applies at x.
    enum class Region { Junction, Boundary, Segment, Bulk };
    struct Locus {
        Region region = Region::Bulk;
        int feature = -1;   // point feature or segment id
        int segment = -1;   // segment whose cutoffs are used
        double eta = 0.0;
        double lambda = 0.0;
    };

    Locus locate(Vec2 x) const {
        const Network& net = partition.net;
        const double r = scales.r_bar;
        const double band = delta_prime * r;
        for (const auto& jw : wedges) {
            Vec2 d = x - jw.apex;
            if (norm2(d) < r * r) {
                const Wedge& w = jw.wedges[jw.locate(d)];
                int c = w.segment;
                Vec2 pc = closest_on_segment(x, net.A(c), net.B(c));
                Locus L{Region::Junction, jw.point, c, theta(dist(x, pc) / band), theta(dist(pc, jw.apex) / r)};
                return L;
            }
        }
        for (int n : features.boundary) {
            Vec2 t = net.vertices[features.points[n].vertex];
            if (norm2(x - t) < r * r) {
                int c = features.points[n].segments[0];
                return {Region::Boundary, n, c, theta(dist_point_segment(x, net.A(c), net.B(c)) / band), 0.0};
            }
        }
        for (int c : features.segments) {
            double d = dist_point_segment(x, net.A(c), net.B(c));
            if (d < scales.delta * r) return {Region::Segment, c, c, theta(d / band), 0.0};
        }
        return {};
    }

    // Evaluates every phase at x without the domain check (finite differences step outside).
    void eval_all(Vec2 x, Vec2* out) const override {
        const int P = phases();
        Locus L = locate(x);
        switch (L.region) {
            case Region::Bulk:
                for (int i = 0; i < P; ++i) out[i] = {};
                return;
            case Region::Segment: {
                const auto& a = aux.segment[L.feature];
                for (int i = 0; i < P; ++i) out[i] = a[i] * L.eta;
                return;
            }
            case Region::Boundary: {
                const auto& a = aux.point[L.feature];
                for (int i = 0; i < P; ++i) out[i] = a[i] * L.eta;
                return;
            }
            case Region::Junction: {
                const auto& a = aux.point[L.feature];
                const auto& b = aux.segment[L.segment];
                for (int i = 0; i < P; ++i) out[i] = (a[i] * L.lambda + b[i] * (1.0 - L.lambda)) * L.eta;
                return;
            }
        }
    }

    Vec2 eval_xi(int i, Vec2 x) const {
        check_phase(partition.net, i);
        if (!partition.net.domain.contains(x, partition.net.boundary_tol()))
            throw InputError("eval_xi: point outside the closed domain");
        std::vector<Vec2> v(phases());
        eval_all(x, v.data());
        return v[i];
    }

    // Evaluates through a specific wedge of a junction (continuity checks across wedges).
    Vec2 eval_in_wedge(int i, int junction_index, int wedge, Vec2 x) const {
        const Network& net = partition.net;
        const auto& jw = wedges.at(junction_index);
        int c = jw.wedges.at(wedge).segment;
        Vec2 pc = closest_on_segment(x, net.A(c), net.B(c));
        double eta = theta(dist(x, pc) / (delta_prime * scales.r_bar));
        double lam = theta(dist(pc, jw.apex) / scales.r_bar);
        return (aux.point[jw.point][i] * lam + aux.segment[c][i] * (1.0 - lam)) * eta;
    }

    double max_aux_norm() const {
        double m = 0.0;
        for (const auto& v : aux.segment) for (Vec2 a : v) m = std::max(m, norm(a));
        for (const auto& v : aux.point) for (Vec2 a : v) m = std::max(m, norm(a));
        return m;
    }

    double lipschitz_bound() const {
        double M = max_aux_norm();
        double r = scales.r_bar, b = delta_prime * r;
        return M * (kThetaPrimeSup / b + kThetaPrimeSup / r) + kThetaPrimeSup * M / b;
    }
};

inline CalibrationField build_calibration(const FlatPartition& p, std::optional<LocalizationScales> scales = {}) {
    CalibrationField f;
    f.partition = p;
    f.features = decompose_features(p);
    f.scales = scales ? *scales : find_localization_scales(p);
    const auto emb = embed_simplex(p.net.tensions);
    f.aux = build_aux_vectors(p, f.features, require_embedding(emb));
    f.wedges = build_wedges(p, f.features);
    f.delta_prime = compute_delta_prime(p, f.scales, f.wedges);
    return f;
}

// Central-difference divergence of every phase at x.
inline void divergence_all(const FieldFamily& f, Vec2 x, double h, double* out) {
    const int P = f.phases();
    std::vector<Vec2> xp(P), xm(P), yp(P), ym(P);
    f.eval_all({x.x + h, x.y}, xp.data());
    f.eval_all({x.x - h, x.y}, xm.data());
    f.eval_all({x.x, x.y + h}, yp.data());
    f.eval_all({x.x, x.y - h}, ym.data());
    for (int i = 0; i < P; ++i) out[i] = (xp[i].x - xm[i].x + yp[i].y - ym[i].y) / (2.0 * h);
}

// ---------------------------------------------------------------------------------------------
// Verification of the coercivity properties by structured sampling.

struct SamplingConfig {
    double grid_h = 0.0;          // 0: delta' r / 10
    double fd_h = 0.0;            // 0: 1e-5 r
    std::vector<double> kappas{0.2, 0.1, 0.05};
    int outside_samples = 10000;
    int interface_samples = 257;  // per segment
    int lipschitz_pairs = 10000;
    double identity_tol = 1e-9;
    double ratio_tol = 1e-9;
    double flux_factor = 10.0;    // flux tolerance = flux_factor * fd_h
    std::uint64_t seed = 1;
};

struct PairValue {
    int i = -1, j = -1;
    double value = 0.0;
};

struct Witness {
    std::string property;
    Vec2 point;
    int i = -1, j = -1;
    double value = 0.0;
};

struct CalibrationReport {
    bool passed = true;
    std::vector<Witness> failures;

    double grid_h = 0.0, fd_h = 0.0;
    std::size_t grid_points = 0, outside_points = 0, interface_points = 0;

    // i
    double max_outside = 0.0;
    // ii
    double max_ratio = 0.0;
    double interface_residual = 0.0;
    double delta1_aux = 0.0;
    double delta1 = 0.0;  // measured sup outside the halved interface dumbbells
    std::vector<PairValue> delta1_pairs;
    // iii
    std::vector<std::pair<double, double>> delta2;  // (kappa, delta2)
    // iv
    double delta3 = 0.0;
    double max_flux = 0.0;
    double flux_tolerance = 0.0;
    std::vector<PairValue> delta3_pairs;
    // Lipschitz
    double lipschitz_sampled = 0.0;
    double lipschitz_bound = 0.0;
};

// splitmix64, used for reproducible sampling.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t s) : state(s) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline Vec2 uniform_in_disc(SplitMix64& rng, const DiscDomain& D) {
    double r = D.radius * std::sqrt(rng.uniform());
    double t = 2.0 * std::numbers::pi * rng.uniform();
    return D.center + from_angle(t) * r;
}

inline CalibrationReport verify_calibration(const CalibrationField& f, const SamplingConfig& cfg = {}) {
    const FlatPartition& p = f.partition;
    const Network& net = p.net;
    const FeatureDecomposition& fd = f.features;
    const int P = net.P();
    const double r = f.scales.r_bar, delta = f.scales.delta;
    const DiscDomain& D = net.domain;

    CalibrationReport rep;
    rep.grid_h = cfg.grid_h > 0 ? cfg.grid_h : f.delta_prime * r / 10.0;
    rep.fd_h = cfg.fd_h > 0 ? cfg.fd_h : 1e-5 * r;
    rep.flux_tolerance = cfg.flux_factor * rep.fd_h;
    rep.delta1_aux = f.aux.delta1;

    auto fail = [&](std::string prop, Vec2 x, int i, int j, double v) {
        rep.passed = false;
        if (rep.failures.size() < 16) rep.failures.push_back({std::move(prop), x, i, j, v});
    };

    // Interfaces: segments per unordered phase pair.
    std::vector<std::vector<std::vector<int>>> iface(P, std::vector<std::vector<int>>(P));
    for (int c : fd.segments) {
        auto ph = fd.segment_phases(net, c);
        iface[ph[0]][ph[1]].push_back(c);
        iface[ph[1]][ph[0]].push_back(c);
    }
    auto nearest_in = [&](const std::vector<int>& segs, Vec2 x, double& d) {
        int best = -1;
        d = std::numeric_limits<double>::infinity();
        for (int c : segs) {
            double dc = dist_point_segment(x, net.A(c), net.B(c));
            if (dc < d) { d = dc; best = c; }
        }
        return best;
    };

    // Sample set: grid over the disc plus uniform points.
    std::vector<Vec2> pts;
    std::vector<char> in_dumbbell;
    {
        const int N = static_cast<int>(std::ceil(2.0 * D.radius / rep.grid_h));
        for (int jy = 0; jy < N; ++jy)
            for (int ix = 0; ix < N; ++ix) {
                Vec2 x{D.center.x - D.radius + (ix + 0.5) * rep.grid_h, D.center.y - D.radius + (jy + 0.5) * rep.grid_h};
                if (!D.contains(x)) continue;
                bool in = dumbbell_contains(p, fd, DumbbellTarget::network(), r, delta, x);
                pts.push_back(x);
                in_dumbbell.push_back(in);
                if (in) rep.grid_points++;
            }
        SplitMix64 rng(cfg.seed);
        int added = 0, guard = 0;
        while (added < cfg.outside_samples && guard < 1000 * cfg.outside_samples) {
            ++guard;
            Vec2 x = uniform_in_disc(rng, D);
            if (dumbbell_contains(p, fd, DumbbellTarget::network(), r, delta, x)) continue;
            pts.push_back(x);
            in_dumbbell.push_back(0);
            ++added;
        }
        rep.outside_points = static_cast<std::size_t>(added);
    }

    // Per-pair bookkeeping.
    std::vector<double> d1(P * P, 0.0);
    std::vector<std::vector<double>> bad_ratio(cfg.kappas.size(), std::vector<double>(P * P, -1.0));

    // Halved interface dumbbells: features of each nonempty interface.
    std::vector<DumbbellFeatures> idb(P * P);
    for (int i = 0; i < P; ++i)
        for (int j = i + 1; j < P; ++j)
            if (!iface[i][j].empty()) idb[i * P + j] = dumbbell_features(p, fd, DumbbellTarget::interface(i, j));
    auto in_iface_dumbbell = [&](int i, int j, Vec2 x, double rr) {
        const auto& F = idb[i * P + j];
        for (int n : F.points)
            if (dist(x, net.vertices[fd.points[n].vertex]) < rr) return true;
        for (int c : F.segments)
            if (dist_point_segment(x, net.A(c), net.B(c)) < delta * rr) return true;
        return false;
    };

    std::vector<Vec2> xi(P);
    for (std::size_t s = 0; s < pts.size(); ++s) {
        Vec2 x = pts[s];
        f.eval_all(x, xi.data());
        if (!in_dumbbell[s]) {
            for (int i = 0; i < P; ++i) {
                double m = norm(xi[i]);
                rep.max_outside = std::max(rep.max_outside, m);
                if (m != 0.0) fail("i", x, i, -1, m);
            }
            continue;
        }
        for (int i = 0; i < P; ++i)
            for (int j = i + 1; j < P; ++j) {
                Vec2 dvec = xi[i] - xi[j];
                double ratio = norm(dvec) / net.tensions(i, j);
                rep.max_ratio = std::max(rep.max_ratio, ratio);
                if (ratio > 1.0 + cfg.ratio_tol) fail("ii", x, i, j, ratio);
                bool empty = iface[i][j].empty();
                if (empty || !in_iface_dumbbell(i, j, x, r / 2.0)) d1[i * P + j] = std::max(d1[i * P + j], ratio);
                if (empty) continue;
                double dn;
                int c = nearest_in(iface[i][j], x, dn);
                if (dn > 2.0 * r) continue;
                Vec2 nb = net.normal(c, i, j);
                double dev = norm(dvec / net.tensions(i, j) - nb);
                for (std::size_t k = 0; k < cfg.kappas.size(); ++k)
                    if (dev > cfg.kappas[k]) bad_ratio[k][i * P + j] = std::max(bad_ratio[k][i * P + j], ratio);
            }
    }

    // Interface identity on points along every segment.
    for (int c : fd.segments) {
        const Edge& E = net.edges[c];
        for (int k = 0; k < cfg.interface_samples; ++k) {
            double t = cfg.interface_samples == 1 ? 0.5 : static_cast<double>(k) / (cfg.interface_samples - 1);
            Vec2 x = net.A(c) + (net.B(c) - net.A(c)) * t;
            f.eval_all(x, xi.data());
            double res = norm(xi[E.right] - xi[E.left] - net.normal(c, E.right, E.left) * net.tensions(E.left, E.right));
            rep.interface_residual = std::max(rep.interface_residual, res);
            if (res > cfg.identity_tol) fail("ii", x, E.right, E.left, res);
            rep.interface_points++;
        }
    }

    rep.delta1 = 0.0;
    for (int i = 0; i < P; ++i)
        for (int j = i + 1; j < P; ++j) {
            rep.delta1_pairs.push_back({i, j, d1[i * P + j]});
            rep.delta1 = std::max(rep.delta1, d1[i * P + j]);
        }
    if (!(rep.delta1 < 1.0)) fail("ii", {}, -1, -1, rep.delta1);
    if (!(rep.delta1_aux < 1.0)) fail("ii", {}, -1, -1, rep.delta1_aux);

    for (std::size_t k = 0; k < cfg.kappas.size(); ++k) {
        double worst = -1.0;
        for (double v : bad_ratio[k]) worst = std::max(worst, v);
        double d2 = worst < 0 ? 1.0 : 1.0 - worst;
        rep.delta2.push_back({cfg.kappas[k], d2});
        if (!(d2 > 0.0)) fail("iii", {}, -1, -1, d2);
    }

    // iv: flux in the strip around each phase boundary, shrinking delta3 from delta'/4.
    {
        const int ns = 200;
        const double offs[] = {0.0, 0.25, 0.5, 0.75, 0.95};
        std::vector<double> div(P);
        double d3_global = std::numeric_limits<double>::infinity();
        for (int i = 0; i < P; ++i) {
            std::vector<int> segs;
            for (int j = 0; j < P; ++j)
                if (j != i) segs.insert(segs.end(), iface[i][j].begin(), iface[i][j].end());
            if (segs.empty()) continue;
            double d3 = f.delta_prime / 4.0;
            std::vector<double> pair_max(P, 0.0);
            bool ok = false;
            for (int it = 0; it < 40; ++it) {
                std::fill(pair_max.begin(), pair_max.end(), 0.0);
                double worst = 0.0;
                for (int c : segs) {
                    Vec2 a = net.A(c), b = net.B(c), nrm = perp(net.tangent(c));
                    for (int k = 0; k < ns; ++k) {
                        Vec2 base = a + (b - a) * ((k + 0.5) / ns);
                        for (double o : offs)
                            for (int sg : {-1, 1}) {
                                if (o == 0.0 && sg < 0) continue;
                                Vec2 x = base + nrm * (sg * o * d3 * r);
                                if (!D.contains(x)) continue;
                                double dn;
                                nearest_in(segs, x, dn);
                                if (!(dn < d3 * r)) continue;
                                int j = phase_at(net, x);
                                if (j == i) continue;
                                divergence_all(f, x, rep.fd_h, div.data());
                                double v = std::abs(div[i] - div[j]);
                                pair_max[j] = std::max(pair_max[j], v);
                                worst = std::max(worst, v);
                            }
                    }
                }
                if (worst <= rep.flux_tolerance) { ok = true; break; }
                d3 *= 0.8;
            }
            for (int j = 0; j < P; ++j)
                if (j != i) {
                    rep.delta3_pairs.push_back({i, j, d3});
                    rep.max_flux = std::max(rep.max_flux, pair_max[j]);
                }
            if (!ok) fail("iv", {}, i, -1, d3);
            d3_global = std::min(d3_global, d3);
        }
        rep.delta3 = std::isfinite(d3_global) ? d3_global : f.delta_prime / 4.0;
    }

    // Sampled Lipschitz quotient over close pairs.
    {
        SplitMix64 rng(cfg.seed ^ 0x5bd1e995ULL);
        std::vector<Vec2> a(P), b(P);
        double q = 0.0;
        double reach = f.delta_prime * r;
        for (int k = 0; k < cfg.lipschitz_pairs; ++k) {
            Vec2 x = uniform_in_disc(rng, D);
            // Bias half of the pairs onto the network where the field varies.
            if (k % 2 == 0 && !net.edges.empty()) {
                int c = static_cast<int>(rng.next() % net.edges.size());
                x = net.A(c) + (net.B(c) - net.A(c)) * rng.uniform() +
                    from_angle(2.0 * std::numbers::pi * rng.uniform()) * (reach * rng.uniform());
            }
            Vec2 y = x + from_angle(2.0 * std::numbers::pi * rng.uniform()) * (0.5 * reach * (rng.uniform() + 1e-3));
            f.eval_all(x, a.data());
            f.eval_all(y, b.data());
            double dxy = dist(x, y);
            for (int i = 0; i < P; ++i) q = std::max(q, norm(a[i] - b[i]) / dxy);
        }
        rep.lipschitz_sampled = q;
        rep.lipschitz_bound = f.lipschitz_bound();
        if (q > rep.lipschitz_bound * (1.0 + 1e-9)) fail("lipschitz", {}, -1, -1, q);
    }
    return rep;
}

}  // namespace calibnet
