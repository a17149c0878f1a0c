#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "calibnet/calibration.hpp"
#include "calibnet/energy.hpp"
#include "calibnet/fixtures.hpp"
#include "calibnet/network.hpp"
#include "calibnet/partition.hpp"

namespace calibnet {

enum class PerturbationMode { VertexJitter, InterfaceBump, PhaseNucleation, JunctionSlide };

inline std::string to_string(PerturbationMode m) {
    switch (m) {
        case PerturbationMode::VertexJitter: return "vertex-jitter";
        case PerturbationMode::InterfaceBump: return "interface-bump";
        case PerturbationMode::PhaseNucleation: return "phase-nucleation";
        case PerturbationMode::JunctionSlide: return "junction-slide";
    }
    return "?";
}

inline PerturbationMode parse_mode(const std::string& s) {
    if (s == "vertex-jitter") return PerturbationMode::VertexJitter;
    if (s == "interface-bump") return PerturbationMode::InterfaceBump;
    if (s == "phase-nucleation") return PerturbationMode::PhaseNucleation;
    if (s == "junction-slide") return PerturbationMode::JunctionSlide;
    throw InputError("unknown perturbation mode '" + s + "'");
}

struct PerturbationSpec {
    double amplitude = 0.0;
    PerturbationMode mode = PerturbationMode::VertexJitter;
    std::uint64_t seed = 0;
    int refinement = 4;       // pieces per segment for vertex-jitter
    std::uint64_t trial = 0;  // counter component of the random key
    int max_rejections = 100;
};

class PerturbationRejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Counter-based uniform variate keyed by (seed, trial, entity, draw).
inline double keyed_uniform(std::uint64_t seed, std::uint64_t trial, std::uint64_t entity, std::uint64_t draw) {
    SplitMix64 g(seed);
    std::uint64_t k = g.next();
    k ^= SplitMix64(trial + 0x632BE59BD9B4E019ULL).next();
    k = SplitMix64(k).next() ^ SplitMix64(entity * 0x9E3779B97F4A7C15ULL + 17).next();
    k = SplitMix64(k).next() ^ SplitMix64(draw + 0xD1B54A32D192ED03ULL).next();
    return static_cast<double>(SplitMix64(k).next() >> 11) * 0x1.0p-53;
}

struct KeyedRng {
    std::uint64_t seed, trial;
    double operator()(std::uint64_t entity, std::uint64_t draw) const {
        return keyed_uniform(seed, trial, entity, draw);
    }
    Vec2 in_disc(std::uint64_t entity, std::uint64_t draw, double radius) const {
        double r = radius * std::sqrt((*this)(entity, draw));
        double t = 2.0 * std::numbers::pi * (*this)(entity, draw + 1);
        return from_angle(t) * r;
    }
};

// Splits every edge into n equal pieces (labels preserved). Original vertices keep their ids.
inline Network refine(const Network& net, int n) {
    Network out = net;
    if (n <= 1) return out;
    out.edges.clear();
    for (const Edge& E : net.edges) {
        Vec2 a = net.vertices[E.a], b = net.vertices[E.b];
        int prev = E.a;
        for (int k = 1; k < n; ++k) {
            out.vertices.push_back(a + (b - a) * (static_cast<double>(k) / n));
            int id = static_cast<int>(out.vertices.size()) - 1;
            out.edges.push_back({prev, id, E.left, E.right});
            prev = id;
        }
        out.edges.push_back({prev, E.b, E.left, E.right});
    }
    return out;
}

// Same trace, planar, consistently labelled, interior vertices strictly inside.
inline bool admissible_competitor(const Network& q, const Network& ref) {
    auto inc = q.incidence();
    for (int v = 0; v < static_cast<int>(q.vertices.size()); ++v) {
        if (q.on_boundary(v)) continue;
        if (!(dist(q.vertices[v], q.domain.center) < q.domain.radius - q.boundary_tol())) return false;
    }
    if (!structural_issues(q).empty()) return false;
    if (!check_face_labels(q).empty()) return false;
    return same_trace(q, ref);
}

struct PerturbResult {
    PolygonalPartition competitor;
    int rejections = 0;
    std::string detail;
};

namespace detail {

inline std::optional<Network> jitter(const Network& base, const PerturbationSpec& s, const KeyedRng& rng,
                                     std::uint64_t attempt) {
    Network q = base;
    for (int v = 0; v < static_cast<int>(q.vertices.size()); ++v) {
        if (base.on_boundary(v)) continue;
        q.vertices[v] += rng.in_disc(static_cast<std::uint64_t>(v), attempt * 8, s.amplitude);
    }
    return q;
}

inline std::optional<Network> bump(const Network& base, const PerturbationSpec& s, const KeyedRng& rng,
                                   std::uint64_t attempt, std::string& info) {
    Network q = base;
    const int ne = static_cast<int>(base.edges.size());
    int c = std::min(ne - 1, static_cast<int>(rng(0, attempt * 8) * ne));
    Edge E = base.edges[c];
    Vec2 a = base.A(c), b = base.B(c);
    double L = base.length(c);
    double w = std::min(s.amplitude, 0.2 * L);
    double t0 = 0.25 + 0.5 * rng(1, attempt * 8);
    double height = s.amplitude * (0.5 + 0.5 * rng(2, attempt * 8)) * (rng(3, attempt * 8) < 0.5 ? -1.0 : 1.0);
    Vec2 u = (b - a) / L, n = perp(u);
    Vec2 mid = a + u * (t0 * L);
    q.vertices.push_back(mid - u * w);
    q.vertices.push_back(mid + n * height);
    q.vertices.push_back(mid + u * w);
    int p1 = static_cast<int>(q.vertices.size()) - 3;
    q.edges[c] = {E.a, p1, E.left, E.right};
    q.edges.push_back({p1, p1 + 1, E.left, E.right});
    q.edges.push_back({p1 + 1, p1 + 2, E.left, E.right});
    q.edges.push_back({p1 + 2, E.b, E.left, E.right});
    info = "segment " + std::to_string(c + 1) + " area " + std::to_string(w * std::abs(height));
    return q;
}

inline std::optional<Network> nucleate(const Network& base, const PerturbationSpec& s, const KeyedRng& rng,
                                       std::uint64_t attempt, std::string& info) {
    Network q = base;
    double side = s.amplitude;
    if (!(side > 0.0)) return q;
    Vec2 x = base.domain.center + rng.in_disc(0, attempt * 8, base.domain.radius);
    double half = 0.5 * side;
    double reach = std::sqrt(2.0) * half + side;
    if (dist(x, base.domain.center) + reach >= base.domain.radius) return std::nullopt;
    for (int e = 0; e < static_cast<int>(base.edges.size()); ++e)
        if (dist_point_segment(x, base.A(e), base.B(e)) < reach) return std::nullopt;
    int host = phase_at(base, x);
    const int P = base.P();
    int m = static_cast<int>(rng(1, attempt * 8) * (P - 1));
    m = std::min(m, P - 2);
    if (m >= host) ++m;
    int v0 = static_cast<int>(q.vertices.size());
    q.vertices.push_back(x + Vec2{-half, -half});
    q.vertices.push_back(x + Vec2{half, -half});
    q.vertices.push_back(x + Vec2{half, half});
    q.vertices.push_back(x + Vec2{-half, half});
    for (int k = 0; k < 4; ++k) q.edges.push_back({v0 + k, v0 + (k + 1) % 4, m, host});
    info = "square side " + std::to_string(side) + " of " + pname(m) + " in " + pname(host);
    return q;
}

inline std::vector<int> junction_vertices(const Network& net) {
    auto inc = net.incidence();
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v)
        if (!net.on_boundary(v) && inc[v].size() >= 3) out.push_back(v);
    return out;
}

inline std::optional<Network> slide(const Network& base, const PerturbationSpec& s, const KeyedRng& rng,
                                    std::uint64_t attempt, std::string& info) {
    auto js = junction_vertices(base);
    if (js.empty()) return std::nullopt;
    Network q = base;
    int k = std::min(static_cast<int>(js.size()) - 1, static_cast<int>(rng(0, attempt * 8) * js.size()));
    int v = js[k];
    q.vertices[v] += rng.in_disc(1, attempt * 8, s.amplitude);
    info = "junction " + vname(v);
    return q;
}

}  // namespace detail

inline bool mode_applicable(const FlatPartition& p, PerturbationMode m) {
    if (m == PerturbationMode::JunctionSlide) return !detail::junction_vertices(p.net).empty();
    return true;
}

inline PerturbResult perturb(const FlatPartition& p, const PerturbationSpec& spec) {
    if (!validate_flat_partition(p).valid) throw InputError("perturb: reference partition is invalid");
    if (!(spec.amplitude >= 0.0)) throw InputError("perturb: amplitude must be non-negative");
    if (!mode_applicable(p, spec.mode)) throw InputError("perturb: " + to_string(spec.mode) + " needs a junction");
    KeyedRng rng{spec.seed, spec.trial};
    Network base = spec.mode == PerturbationMode::VertexJitter ? refine(p.net, spec.refinement) : p.net;
    PerturbResult out;
    for (int attempt = 0; attempt <= spec.max_rejections; ++attempt) {
        std::optional<Network> q;
        std::string info;
        switch (spec.mode) {
            case PerturbationMode::VertexJitter: q = detail::jitter(base, spec, rng, attempt); break;
            case PerturbationMode::InterfaceBump: q = detail::bump(base, spec, rng, attempt, info); break;
            case PerturbationMode::PhaseNucleation: q = detail::nucleate(base, spec, rng, attempt, info); break;
            case PerturbationMode::JunctionSlide: q = detail::slide(base, spec, rng, attempt, info); break;
        }
        if (q && admissible_competitor(*q, p.net)) {
            out.competitor.net = std::move(*q);
            out.detail = info;
            return out;
        }
        out.rejections++;
    }
    throw PerturbationRejected("perturb: rejection budget exhausted (amplitude too large?)");
}

// Figure-style family: hexagon of circumradius rho with six spokes; physical length 6R for all rho.
inline FlatPartition hexagon_family(double rho, double R = 2.0) { return fixtures::hexagon(rho, R); }

// Moves the given vertices; straight edges follow.
inline PolygonalPartition move_vertices(const FlatPartition& p, const std::vector<std::pair<int, Vec2>>& moves) {
    PolygonalPartition q{p.net};
    for (const auto& [v, d] : moves) q.net.vertices.at(v) += d;
    return q;
}

// Slides all six hexagon junctions radially by t: the constant-length direction of the family.
inline PolygonalPartition hexagon_valley(const FlatPartition& hex, double t) {
    std::vector<std::pair<int, Vec2>> moves;
    for (int k = 0; k < 6; ++k) moves.push_back({k, normalized(hex.net.vertices[k] - hex.net.domain.center) * t});
    return move_vertices(hex, moves);
}

// ---------------------------------------------------------------------------------------------

struct ProbeTrial {
    std::uint64_t trial = 0;
    PerturbationMode mode{};
    double amplitude = 0.0;
    int rejections = 0;
    std::string detail;
    double delta_E = 0.0;        // ordered-pair convention
    double l1 = 0.0;             // max over phases
    double relative_energy = 0.0;
    double bulk_term = 0.0;
    double identity_residual = 0.0;
    bool same_trace = true;
};

struct ProbeReport {
    std::uint64_t seed = 0;
    std::vector<ProbeTrial> trials;
    double min_delta_E = 0.0;
    double max_identity_residual = 0.0;
    int total_rejections = 0;
    std::vector<std::uint64_t> violations;  // trial ids with delta_E < -threshold
    double threshold = 1e-7;
    double h = 0.0;
    // Violations at amplitudes above declared_bound may just exceed the unknown minimality radius
    // and do not fail the probe. verified_bound is the largest scheduled amplitude below which no
    // trial (at any smaller or equal amplitude) violated.
    double declared_bound = 0.0;
    double verified_bound = 0.0;
    std::vector<std::uint64_t> violations_within;
    std::vector<std::uint64_t> violations_above;

    bool passed() const { return violations_within.empty(); }
};

struct ProbeOptions {
    std::vector<PerturbationMode> modes{PerturbationMode::VertexJitter, PerturbationMode::InterfaceBump,
                                        PerturbationMode::PhaseNucleation, PerturbationMode::JunctionSlide};
    int refinement = 4;
    bool identity = true;        // also evaluate the energy identity per trial
    bool l1 = true;
    QuadratureConfig quad{};
    int threads = 1;
    double declared_bound = 0.0;  // 0: the largest scheduled amplitude
    double threshold = 1e-7;      // delta_E below -threshold is a violation
};

inline std::vector<double> default_amplitudes(double r_bar) {
    return {0.01 * r_bar, 0.02 * r_bar, 0.05 * r_bar, 0.1 * r_bar};
}

inline ProbeReport minimality_probe(const CalibrationField& field, int n_trials, const std::vector<double>& amplitudes,
                                    std::uint64_t seed, const ProbeOptions& opt = {}) {
    const FlatPartition& p = field.partition;
    if (amplitudes.empty()) throw InputError("probe: empty amplitude schedule");
    std::vector<PerturbationMode> modes;
    for (auto m : opt.modes)
        if (mode_applicable(p, m)) modes.push_back(m);
    if (modes.empty()) throw InputError("probe: no applicable perturbation mode");
    ProbeReport rep;
    rep.seed = seed;
    rep.threshold = opt.threshold;
    auto quad = resolve(opt.quad, field);
    rep.h = quad.h;
    const double E_ref = interface_energy(p);
    rep.min_delta_E = std::numeric_limits<double>::infinity();
    auto run_trial = [&](int t) {
        PerturbationSpec spec;
        spec.mode = modes[t % modes.size()];
        spec.amplitude = amplitudes[(t / modes.size()) % amplitudes.size()];
        spec.seed = seed;
        spec.trial = static_cast<std::uint64_t>(t);
        spec.refinement = opt.refinement;
        auto pr = perturb(p, spec);
        ProbeTrial tr;
        tr.trial = spec.trial;
        tr.mode = spec.mode;
        tr.amplitude = spec.amplitude;
        tr.rejections = pr.rejections;
        tr.detail = pr.detail;
        tr.delta_E = interface_energy(pr.competitor) - E_ref;
        tr.same_trace = same_trace(pr.competitor, p);
        if (opt.l1) {
            auto l1 = l1_distance(pr.competitor, p);
            tr.l1 = *std::max_element(l1.begin(), l1.end());
        }
        if (opt.identity) {
            auto er = verify_energy_identity(pr.competitor, field, quad);
            tr.relative_energy = er.relative_energy;
            tr.bulk_term = er.bulk_term;
            tr.identity_residual = er.identity_residual;
        }
        return tr;
    };
    // Trials are independent and keyed by index, so the merge below is order-independent.
    std::vector<ProbeTrial> trials(std::max(n_trials, 0));
    const int workers = std::clamp(opt.threads, 1, std::max(n_trials, 1));
    if (workers == 1) {
        for (int t = 0; t < n_trials; ++t) trials[t] = run_trial(t);
    } else {
        std::atomic<int> next{0};
        std::exception_ptr err;
        std::mutex err_mu;
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int t; (t = next.fetch_add(1)) < n_trials;) {
                    try {
                        trials[t] = run_trial(t);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(err_mu);
                        if (!err) err = std::current_exception();
                    }
                }
            });
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
    }
    for (auto& tr : trials) {
        rep.max_identity_residual = std::max(rep.max_identity_residual, tr.identity_residual);
        rep.total_rejections += tr.rejections;
        rep.min_delta_E = std::min(rep.min_delta_E, tr.delta_E);
        if (tr.delta_E < -rep.threshold) rep.violations.push_back(tr.trial);
        rep.trials.push_back(std::move(tr));
    }
    if (rep.trials.empty()) rep.min_delta_E = 0.0;

    rep.declared_bound = opt.declared_bound > 0.0 ? opt.declared_bound
                                                  : *std::max_element(amplitudes.begin(), amplitudes.end());
    double first_bad = std::numeric_limits<double>::infinity();
    for (const auto& tr : rep.trials)
        if (tr.delta_E < -rep.threshold) {
            first_bad = std::min(first_bad, tr.amplitude);
            (tr.amplitude <= rep.declared_bound ? rep.violations_within : rep.violations_above).push_back(tr.trial);
        }
    for (const auto& tr : rep.trials)
        if (tr.amplitude < first_bad) rep.verified_bound = std::max(rep.verified_bound, tr.amplitude);
    return rep;
}

}  // namespace calibnet
