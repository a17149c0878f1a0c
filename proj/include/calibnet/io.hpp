#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibnet/calibration.hpp"
#include "calibnet/competitors.hpp"
#include "calibnet/energy.hpp"
#include "calibnet/partition.hpp"
#include "calibnet/stationarity.hpp"
#include "calibnet/tensions.hpp"

namespace calibnet::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------------------------
// Deterministic text form: two-space indent, insertion-ordered keys, doubles at 17 significant
// digits, non-finite numbers as null.

inline void write_number(std::string& out, double v) {
    if (!std::isfinite(v)) { out += "null"; return; }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

inline void write_json(std::string& out, const json& j, int indent) {
    auto pad = [&](int n) { out.append(static_cast<size_t>(n) * 2, ' '); };
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) { out += "{}"; return; }
            out += "{\n";
            size_t k = 0;
            for (auto it = j.begin(); it != j.end(); ++it, ++k) {
                pad(indent + 1);
                out += json(it.key()).dump();
                out += ": ";
                write_json(out, it.value(), indent + 1);
                if (k + 1 < j.size()) out += ',';
                out += '\n';
            }
            pad(indent);
            out += '}';
            return;
        }
        case json::value_t::array: {
            if (j.empty()) { out += "[]"; return; }
            // Short numeric arrays (points, vectors) stay on one line.
            bool flat = j.size() <= 4;
            for (const auto& e : j) flat = flat && e.is_number();
            if (flat) {
                out += '[';
                for (size_t k = 0; k < j.size(); ++k) {
                    if (k) out += ", ";
                    write_json(out, j[k], indent);
                }
                out += ']';
                return;
            }
            out += "[\n";
            for (size_t k = 0; k < j.size(); ++k) {
                pad(indent + 1);
                write_json(out, j[k], indent + 1);
                if (k + 1 < j.size()) out += ',';
                out += '\n';
            }
            pad(indent);
            out += ']';
            return;
        }
        case json::value_t::number_float:
            write_number(out, j.get<double>());
            return;
        default:
            out += j.dump();
    }
}

inline std::string dump(const json& j) {
    std::string s;
    write_json(s, j, 0);
    s += '\n';
    return s;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw InputError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

// ---------------------------------------------------------------------------------------------
// Field access helpers with input errors that name the offending key.

inline const json& need(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing key '" + key + "'");
    return j.at(key);
}

inline double num(const json& j, const std::string& where) {
    if (!j.is_number()) throw InputError(where + ": expected a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw InputError(where + ": expected an integer");
    return j.get<int>();
}

inline Vec2 point(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) throw InputError(where + ": expected [x, y]");
    return {num(j[0], where), num(j[1], where)};
}

inline json to_json(Vec2 v) { return json::array({v.x, v.y}); }

// ---------------------------------------------------------------------------------------------
// Tensions.

inline SurfaceTensionMatrix tensions_from_json(const json& j) {
    SurfaceTensionMatrix m;
    m.P = integer(need(j, "P", "tensions"), "tensions.P");
    const json& s = need(j, "sigma", "tensions");
    if (!s.is_array()) throw InputError("tensions.sigma: expected a matrix");
    for (size_t i = 0; i < s.size(); ++i) {
        if (!s[i].is_array()) throw InputError("tensions.sigma: row " + std::to_string(i + 1) + " is not an array");
        std::vector<double> row;
        for (size_t k = 0; k < s[i].size(); ++k) row.push_back(num(s[i][k], "tensions.sigma"));
        m.sigma.push_back(std::move(row));
    }
    check_well_formed(m);
    return m;
}

inline json to_json(const SurfaceTensionMatrix& m) {
    json s = json::array();
    for (const auto& row : m.sigma) {
        json r = json::array();
        for (double v : row) r.push_back(v);
        s.push_back(r);
    }
    return {{"P", m.P}, {"sigma", s}};
}

inline json to_json(const EmbeddingResult& r, const SurfaceTensionMatrix& m) {
    json out;
    auto eig = [](const std::vector<double>& v) {
        json a = json::array();
        for (double x : v) a.push_back(x);
        return a;
    };
    if (const auto* e = std::get_if<SimplexEmbedding>(&r)) {
        out["admissible"] = true;
        out["dimension"] = e->dim;
        out["gram_eigenvalues"] = eig(e->gram_eigenvalues);
        json pts = json::array();
        for (const auto& q : e->points) {
            json row = json::array();
            for (int k = 0; k < q.size(); ++k) row.push_back(q(k));
            pts.push_back(row);
        }
        out["points"] = pts;
        out["max_distance_error"] = e->max_distance_error(m);
        out["rank_tolerance"] = kRankTolerance;
        out["embed_tolerance"] = kEmbedTolerance;
    } else {
        const auto& n = std::get<NotAdmissible>(r);
        out["admissible"] = false;
        out["reason"] = n.reason;
        out["eigenvalue"] = n.eigenvalue;
        out["threshold"] = n.threshold;
        out["gram_eigenvalues"] = eig(n.gram_eigenvalues);
        out["rank_tolerance"] = kRankTolerance;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Networks. Indices are one-based on disk.

inline Network network_from_json(const json& j) {
    Network n;
    const json& d = need(j, "domain", "partition");
    n.domain.center = point(need(d, "center", "domain"), "domain.center");
    n.domain.radius = num(need(d, "radius", "domain"), "domain.radius");
    if (!(n.domain.radius > 0.0)) throw InputError("domain.radius must be positive");
    n.tensions = tensions_from_json(need(j, "tensions", "partition"));
    const json& vs = need(j, "vertices", "partition");
    if (!vs.is_array()) throw InputError("vertices: expected an array");
    for (size_t k = 0; k < vs.size(); ++k) n.vertices.push_back(point(vs[k], "vertex " + std::to_string(k + 1)));
    const json& es = need(j, "segments", "partition");
    if (!es.is_array()) throw InputError("segments: expected an array");
    const int V = static_cast<int>(n.vertices.size());
    for (size_t k = 0; k < es.size(); ++k) {
        std::string w = "segment " + std::to_string(k + 1);
        Edge e;
        e.a = integer(need(es[k], "a", w), w + ".a") - 1;
        e.b = integer(need(es[k], "b", w), w + ".b") - 1;
        e.left = integer(need(es[k], "left", w), w + ".left") - 1;
        e.right = integer(need(es[k], "right", w), w + ".right") - 1;
        if (e.a < 0 || e.a >= V || e.b < 0 || e.b >= V) throw InputError(w + ": vertex index out of range");
        if (e.left < 0 || e.left >= n.P() || e.right < 0 || e.right >= n.P())
            throw InputError(w + ": phase label out of range");
        n.edges.push_back(e);
    }
    return n;
}

inline json to_json(const Network& n) {
    json vs = json::array();
    for (Vec2 v : n.vertices) vs.push_back(to_json(v));
    json es = json::array();
    for (const Edge& e : n.edges)
        es.push_back({{"a", e.a + 1}, {"b", e.b + 1}, {"left", e.left + 1}, {"right", e.right + 1}});
    return {{"domain", {{"center", to_json(n.domain.center)}, {"radius", n.domain.radius}}},
            {"tensions", to_json(n.tensions)},
            {"vertices", vs},
            {"segments", es}};
}

inline Network load_network(const std::string& path) { return network_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------------------------
// Reports.

inline json to_json(const Issue& i) {
    return {{"clause", i.clause}, {"entity", i.entity}, {"message", i.message}};
}

inline json issues_json(const std::vector<Issue>& v) {
    json a = json::array();
    for (const auto& i : v) a.push_back(to_json(i));
    return a;
}

inline json to_json(const ValidationReport& r) {
    json h = json::array();
    for (auto [v, res] : r.herring) h.push_back({{"vertex", v + 1}, {"residual", res}});
    return {{"valid", r.valid}, {"issues", issues_json(r.issues)}, {"herring", h}};
}

inline json to_json(const LocalizationScales& s) { return {{"r_bar", s.r_bar}, {"delta", s.delta}}; }

inline json phase_vectors(const std::vector<Vec2>& v) {
    json a = json::array();
    for (Vec2 x : v) a.push_back(to_json(x));
    return a;
}

inline json to_json(const CalibrationField& f) {
    const Network& net = f.partition.net;
    json segs = json::array();
    for (int c : f.features.segments)
        segs.push_back({{"segment", c + 1}, {"xi", phase_vectors(f.aux.segment[c])}});
    json pts = json::array();
    for (size_t n = 0; n < f.features.points.size(); ++n) {
        const auto& pf = f.features.points[n];
        pts.push_back({{"vertex", pf.vertex + 1},
                       {"kind", pf.kind == PointKind::Junction ? "junction" : "boundary"},
                       {"xi", phase_vectors(f.aux.point[n])}});
    }
    json wedges = json::array();
    for (const auto& jw : f.wedges) {
        json ws = json::array();
        for (const auto& w : jw.wedges)
            ws.push_back({{"segment", w.segment + 1},
                          {"direction", to_json(w.dir)},
                          {"half_cw", w.half_cw},
                          {"half_ccw", w.half_ccw}});
        wedges.push_back({{"vertex", f.features.points[jw.point].vertex + 1}, {"apex", to_json(jw.apex)}, {"wedges", ws}});
    }
    json frames = json::array();
    for (const auto& fr : f.aux.frames)
        frames.push_back({{"vertex", f.features.points[fr.point].vertex + 1},
                          {"reflection", fr.reflection},
                          {"procrustes_residual", fr.procrustes_residual}});
    return {{"partition", to_json(net)},
            {"scales", to_json(f.scales)},
            {"delta_prime", f.delta_prime},
            {"delta1", f.aux.delta1},
            {"calibration_residual", f.aux.calibration_residual},
            {"aux_vectors", {{"segments", segs}, {"points", pts}}},
            {"frames", frames},
            {"wedges", wedges}};
}

// Rebuilds the geometry from the stored partition and scales, then installs the stored auxiliary
// vectors and delta' so that edits to the file are what gets verified.
inline CalibrationField field_from_json(const json& j) {
    FlatPartition p{network_from_json(need(j, "partition", "field"))};
    auto rep = validate_flat_partition(p);
    if (!rep.valid) throw InputError("field: stored partition is not a valid flat partition");
    const json& s = need(j, "scales", "field");
    LocalizationScales sc{num(need(s, "r_bar", "scales"), "scales.r_bar"), num(need(s, "delta", "scales"), "scales.delta")};
    if (!(sc.r_bar > 0.0 && sc.delta > 0.0 && sc.delta < 1.0)) throw InputError("field: scales out of range");
    CalibrationField f = build_calibration(p, sc);
    double dp = num(need(j, "delta_prime", "field"), "field.delta_prime");
    if (!(dp > 0.0 && dp <= sc.delta)) throw InputError("field: delta_prime must lie in (0, delta]");
    f.delta_prime = dp;
    const int P = p.net.P();
    auto read_vectors = [&](const json& a, const std::string& w) {
        if (!a.is_array() || static_cast<int>(a.size()) != P) throw InputError(w + ": expected one vector per phase");
        std::vector<Vec2> v;
        for (const auto& x : a) v.push_back(point(x, w));
        return v;
    };
    const json& aux = need(j, "aux_vectors", "field");
    const json& segs = need(aux, "segments", "aux_vectors");
    if (!segs.is_array() || segs.size() != f.features.segments.size())
        throw InputError("aux_vectors.segments: one entry per segment expected");
    for (const auto& e : segs) {
        int c = integer(need(e, "segment", "aux_vectors.segments"), "segment") - 1;
        if (c < 0 || c >= static_cast<int>(p.net.edges.size())) throw InputError("aux_vectors: segment out of range");
        f.aux.segment[c] = read_vectors(need(e, "xi", "aux_vectors.segments"), "segment " + std::to_string(c + 1));
    }
    const json& pts = need(aux, "points", "aux_vectors");
    if (!pts.is_array() || pts.size() != f.features.points.size())
        throw InputError("aux_vectors.points: one entry per point feature expected");
    for (size_t n = 0; n < pts.size(); ++n) {
        int v = integer(need(pts[n], "vertex", "aux_vectors.points"), "vertex") - 1;
        if (v != f.features.points[n].vertex) throw InputError("aux_vectors.points: vertex order does not match");
        f.aux.point[n] = read_vectors(need(pts[n], "xi", "aux_vectors.points"), "vertex " + std::to_string(v + 1));
    }
    return f;
}

inline json to_json(const CalibrationReport& r) {
    json fails = json::array();
    for (const auto& w : r.failures) {
        json x = {{"property", w.property}, {"point", to_json(w.point)}, {"value", w.value}};
        if (w.i >= 0) x["i"] = w.i + 1;
        if (w.j >= 0) x["j"] = w.j + 1;
        fails.push_back(x);
    }
    auto pairs = [](const std::vector<PairValue>& v) {
        json a = json::array();
        for (const auto& p : v) a.push_back({{"i", p.i + 1}, {"j", p.j + 1}, {"value", p.value}});
        return a;
    };
    json d2 = json::array();
    for (auto [k, v] : r.delta2) d2.push_back({{"kappa", k}, {"delta2", v}});
    return {{"verdict", r.passed ? "PASSED" : "FAILED"},
            {"sampling",
             {{"grid_h", r.grid_h},
              {"fd_h", r.fd_h},
              {"grid_points", r.grid_points},
              {"outside_points", r.outside_points},
              {"interface_points", r.interface_points}}},
            {"i_support", {{"max_outside", r.max_outside}}},
            {"ii_shortness",
             {{"max_ratio", r.max_ratio},
              {"interface_residual", r.interface_residual},
              {"delta1_aux", r.delta1_aux},
              {"delta1", r.delta1},
              {"delta1_pairs", pairs(r.delta1_pairs)}}},
            {"iii_orientation", {{"delta2", d2}}},
            {"iv_flux",
             {{"delta3", r.delta3},
              {"max_flux", r.max_flux},
              {"flux_tolerance", r.flux_tolerance},
              {"delta3_pairs", pairs(r.delta3_pairs)}}},
            {"lipschitz", {{"sampled", r.lipschitz_sampled}, {"bound", r.lipschitz_bound}}},
            {"failures", fails}};
}

inline json to_json(const EnergyReport& r, bool breakdown) {
    json j = {{"E_competitor", r.E_competitor},
              {"E_reference", r.E_reference},
              {"physical_length_competitor", r.physical_competitor},
              {"physical_length_reference", r.physical_reference},
              {"delta_E", r.E_competitor - r.E_reference},
              {"relative_energy", r.relative_energy},
              {"same_trace", r.same_trace},
              {"h", r.h},
              {"fd_h", r.fd_h}};
    if (breakdown) {
        j["bulk_term"] = r.bulk_term;
        j["boundary_term"] = r.boundary_term;
        j["identity_rhs"] = r.E_reference + r.relative_energy + r.bulk_term + r.boundary_term;
        j["identity_residual"] = r.identity_residual;
    }
    return j;
}

inline json to_json(const Classification& c, Vec2 x, double r) {
    json gaps = json::array();
    for (double g : c.gaps) gaps.push_back(g);
    json j = {{"point", to_json(x)}, {"radius", r}, {"class", to_string(c.cls)}, {"hits", c.hits}, {"gaps", gaps}};
    if (c.witness) {
        const auto& w = *c.witness;
        json segs = json::array();
        for (const auto& [a, b] : w.segments) segs.push_back(json::array({to_json(a), to_json(b)}));
        j["witness"] = {{"kind", w.kind},
                        {"segments", segs},
                        {"length_before", w.length_before},
                        {"length_after", w.length_after},
                        {"gain", w.gain},
                        {"predicted_gain", w.predicted_gain},
                        {"angle", w.alpha}};
        if (w.kind == "chord") j["witness"]["gain_coefficient"] = w.gain_coefficient;
    }
    return j;
}

inline json to_json(const MonotonicityProfile& m, Vec2 x) {
    json s = json::array();
    for (auto [r, q] : m.samples) s.push_back({{"r", r}, {"ratio", q}});
    json v = json::array();
    for (auto [a, b] : m.violations) v.push_back(json::array({a, b}));
    return {{"center", to_json(x)}, {"nondecreasing", m.nondecreasing}, {"samples", s}, {"violations", v}};
}

inline json to_json(const ProbeReport& r) {
    json trials = json::array();
    for (const auto& t : r.trials)
        trials.push_back({{"trial", t.trial},
                          {"mode", to_string(t.mode)},
                          {"amplitude", t.amplitude},
                          {"rejections", t.rejections},
                          {"detail", t.detail},
                          {"delta_E", t.delta_E},
                          {"l1", t.l1},
                          {"relative_energy", t.relative_energy},
                          {"bulk_term", t.bulk_term},
                          {"identity_residual", t.identity_residual},
                          {"same_trace", t.same_trace}});
    auto ids = [](const std::vector<std::uint64_t>& v) {
        json a = json::array();
        for (auto t : v) a.push_back(t);
        return a;
    };
    return {{"verdict", r.passed() ? "PASSED" : "FAILED"},
            {"seed", r.seed},
            {"threshold", r.threshold},
            {"h", r.h},
            {"min_delta_E", r.min_delta_E},
            {"max_identity_residual", r.max_identity_residual},
            {"total_rejections", r.total_rejections},
            {"declared_bound", r.declared_bound},
            {"verified_bound", r.verified_bound},
            {"violations", ids(r.violations)},
            {"violations_within_declared_amplitude", ids(r.violations_within)},
            {"violations_above_declared_amplitude", ids(r.violations_above)},
            {"trials", trials}};
}

// Test fields on disk: one bump object or an array of them.
inline TestField test_field_from_json(const json& j) {
    TestField f;
    auto one = [&](const json& b) {
        RadialBump r;
        r.center = point(need(b, "center", "eta"), "eta.center");
        r.radius = num(need(b, "radius", "eta"), "eta.radius");
        r.direction = point(need(b, "direction", "eta"), "eta.direction");
        if (!(r.radius > 0.0)) throw InputError("eta.radius must be positive");
        f.bumps.push_back(r);
    };
    if (j.is_array()) for (const auto& b : j) one(b);
    else one(j);
    if (f.bumps.empty()) throw InputError("eta: no bumps given");
    return f;
}

}  // namespace calibnet::io
