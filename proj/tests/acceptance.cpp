// Acceptance suite: one PASS/FAIL line per criterion. Run with --criterion N for a single one.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calibnet/calibration.hpp"
#include "calibnet/competitors.hpp"
#include "calibnet/energy.hpp"
#include "calibnet/fixtures.hpp"
#include "calibnet/partition.hpp"
#include "calibnet/stationarity.hpp"
#include "calibnet/tensions.hpp"

using namespace calibnet;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::string detail;
    double budget_s = 0.0;  // 0: none
};

struct Named {
    std::string name;
    FlatPartition p;
};

std::vector<Named> standard_fixtures() {
    return {{"diameter", fixtures::diameter()},
            {"junction", fixtures::junction()},
            {"hexagon(0.6)", fixtures::hexagon(0.6)},
            {"four-phase", fixtures::four_phase()}};
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// 1 -------------------------------------------------------------------------------------------
Outcome criterion1() {
    Outcome o{true, "", 1.0};
    std::mt19937_64 rng(20260101);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    int embedded = 0;
    for (int k = 0; k < 100; ++k) {
        int P = 2 + k % 7;
        // Generic points in R^(P-1): their distance matrix is admissible.
        std::vector<std::vector<double>> x(P, std::vector<double>(P - 1));
        for (auto& row : x)
            for (double& c : row) c = g(rng);
        SurfaceTensionMatrix m{P, std::vector<std::vector<double>>(P, std::vector<double>(P, 0.0))};
        for (int i = 0; i < P; ++i)
            for (int j = 0; j < P; ++j) {
                double s = 0.0;
                for (int d = 0; d < P - 1; ++d) s += (x[i][d] - x[j][d]) * (x[i][d] - x[j][d]);
                m.sigma[i][j] = std::sqrt(s);
            }
        for (int i = 0; i < P; ++i)
            for (int j = 0; j < i; ++j) m.sigma[i][j] = m.sigma[j][i];
        auto r = embed_simplex(m);
        if (const auto* e = std::get_if<SimplexEmbedding>(&r)) {
            ++embedded;
            worst = std::max(worst, e->max_distance_error(m));
        }
    }
    SurfaceTensionMatrix flat = SurfaceTensionMatrix::equal(3);
    flat.sigma[1][2] = flat.sigma[2][1] = 2.0;
    bool rejected = std::holds_alternative<NotAdmissible>(embed_simplex(flat));
    o.pass = embedded == 100 && worst <= 1e-9 && rejected;
    o.detail = std::to_string(embedded) + "/100 embedded, max distance error " + fmt("%.2e", worst) +
               ", degenerate (1,1,2) " + (rejected ? "rejected" : "ACCEPTED");
    return o;
}

// 2 -------------------------------------------------------------------------------------------
Outcome criterion2() {
    Outcome o{true, "", 1.0};
    bool sym_ok = validate_flat_partition(fixtures::junction()).valid;
    auto bad = fixtures::junction_with_angles(90, 135, 135);
    double h = herring_residual(bad, 0);
    // Brute-force oracle: unit normals at the three interfaces, rotated copies of the rays.
    double cx = 0.0, cy = 0.0;
    for (double a : {90.0, 180.0, 315.0}) {
        cx += std::cos(a * kPi / 180.0 + kPi / 2.0);
        cy += std::sin(a * kPi / 180.0 + kPi / 2.0);
    }
    double oracle = std::hypot(cx, cy);
    const double target = 0.7654;
    bool literal = std::abs(h - target) <= 1e-6;
    o.pass = sym_ok && literal;
    o.detail = std::string("120 junction ") + (sym_ok ? "valid" : "INVALID") + "; 90/135/135 residual " +
               fmt("%.10f", h) + " (vector-sum oracle " + fmt("%.10f", oracle) + ", required " +
               fmt("%.4f", target) + " +- 1e-6)";
    return o;
}

// 3 -------------------------------------------------------------------------------------------
Outcome criterion3() {
    Outcome o{true, "", 0.0};
    std::string d;
    double slowest = 0.0;
    for (const auto& [name, p] : standard_fixtures()) {
        auto t0 = std::chrono::steady_clock::now();
        auto f = build_calibration(p);
        SamplingConfig cfg;
        cfg.outside_samples = 10000;
        cfg.kappas = {0.2, 0.1, 0.05};
        auto r = verify_calibration(f, cfg);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        slowest = std::max(slowest, secs);
        bool d2 = r.delta2.size() == 3;
        for (auto [k, v] : r.delta2) d2 = d2 && v > 0.0;
        bool ok = r.passed && r.max_outside == 0.0 && r.outside_points >= 10000 && r.max_ratio <= 1.0 + 1e-9 &&
                  r.delta1 < 1.0 && d2 && r.max_flux <= 10.0 * r.fd_h && secs < 60.0;
        o.pass = o.pass && ok;
        d += name + (ok ? " ok" : " FAILED") + " (delta1 " + fmt("%.3f", r.delta1) + ", flux " +
             fmt("%.1e", r.max_flux) + ", " + fmt("%.1fs", secs) + "); ";
    }
    o.detail = d + "slowest " + fmt("%.1fs", slowest);
    return o;
}

// 4 -------------------------------------------------------------------------------------------
Outcome criterion4() {
    Outcome o{true, "", 300.0};
    std::string d;
    const int n = 50;
    for (const auto& [name, p] : standard_fixtures()) {
        auto f = build_calibration(p);
        const double h0 = f.delta_prime * f.scales.r_bar / 20.0;
        auto amps = default_amplitudes(f.scales.r_bar);
        std::vector<PerturbationMode> modes;
        for (int m = 0; m < 4; ++m)
            if (mode_applicable(p, static_cast<PerturbationMode>(m))) modes.push_back(static_cast<PerturbationMode>(m));
        double sum[3] = {0, 0, 0}, worst[3] = {0, 0, 0};
        for (int t = 0; t < n; ++t) {
            PerturbationSpec s;
            s.mode = modes[t % modes.size()];
            s.amplitude = amps[(t / modes.size()) % amps.size()];
            s.seed = 4;
            s.trial = static_cast<std::uint64_t>(t);
            auto q = perturb(p, s).competitor;
            for (int k = 0; k < 3; ++k) {
                QuadratureConfig qc;
                qc.h = h0 / (1 << k);
                double r = verify_energy_identity(q, f, qc).identity_residual;
                sum[k] += r;
                worst[k] = std::max(worst[k], r);
            }
        }
        // Suite residual: sum over the competitors. C estimated at the coarsest spacing.
        double r1 = sum[1] / sum[0], r2 = sum[2] / sum[1];
        auto in_window = [](double r) { return r >= 0.4 - 0.2 && r <= 0.6 + 0.2; };
        double C = sum[0] / h0;
        bool bounded = sum[1] <= C * h0 / 2.0 * (1.0 + 1e-12) && sum[2] <= C * h0 / 4.0 * (1.0 + 1e-12);
        bool ok = in_window(r1) && in_window(r2);
        o.pass = o.pass && ok;
        d += name + (ok ? " ok" : " FAILED") + " ratios " + fmt("%.3f", r1) + "," + fmt("%.3f", r2) + " (max-residual " +
             fmt("%.2e", worst[0]) + "; <= C h " + (bounded ? "holds" : "violated") + "); ";
    }
    o.detail = d;
    return o;
}

// 5 -------------------------------------------------------------------------------------------
Outcome criterion5() {
    Outcome o{true, "", 0.0};
    std::string d;
    for (const auto& [name, p] : standard_fixtures()) {
        auto f = build_calibration(p);
        ProbeOptions opt;
        opt.l1 = false;
        auto rep = minimality_probe(f, 1000, {0.05 * f.scales.r_bar}, 2026, opt);
        bool trace = true;
        for (const auto& t : rep.trials) trace = trace && t.same_trace;
        bool ok = rep.min_delta_E >= -1e-7 && trace;
        o.pass = o.pass && ok;
        d += name + (ok ? " ok" : " FAILED") + " min dE " + fmt("%.2e", rep.min_delta_E) + "; ";
    }
    auto hex = hexagon_family(0.6);
    double worst = 0.0;
    for (double t : {-0.2, -0.1, 0.05, 0.1, 0.3}) {
        double dE = interface_energy(hexagon_valley(hex, t)) - interface_energy(hex);
        worst = std::max(worst, std::abs(dE));
    }
    bool valley = worst <= 1e-9;
    o.pass = o.pass && valley;
    o.detail = d + "valley |dE| " + fmt("%.1e", worst);
    return o;
}

// 6 -------------------------------------------------------------------------------------------
Outcome criterion6() {
    Outcome o{true, "", 0.0};
    std::string d;
    for (double rho : {1.0, 0.8, 0.6, 0.4}) {
        double L = physical_energy(fixtures::hexagon(rho, 2.0).net);
        bool ok = std::abs(L - 12.0) <= 1e-12;
        o.pass = o.pass && ok;
        d += "rho " + fmt("%.1f", rho) + ": " + fmt("%.15f", L) + (ok ? "" : " FAILED") + "; ";
    }
    o.detail = d;
    return o;
}

// 7 -------------------------------------------------------------------------------------------
Outcome criterion7() {
    Outcome o{true, "", 30.0};
    std::vector<Named> flat = standard_fixtures();
    flat.push_back({"weighted-junction", fixtures::weighted_junction()});
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_identity = 0.0;
    int identity_cases = 0, mono_fail = 0, mono_profiles = 0;
    std::string mono_where;
    for (const auto& [name, p] : flat) {
        int fixture_fail = 0;
        const Network& net = p.net;
        auto inc = net.incidence();
        std::vector<int> junctions;
        for (int v = 0; v < static_cast<int>(net.vertices.size()); ++v)
            if (!net.on_boundary(v) && inc[v].size() == 3) junctions.push_back(v);
        for (int k = 0; k < 100; ++k) {
            Vec2 x;
            if (!junctions.empty() && k % 4 == 0) {
                x = net.vertices[junctions[k / 4 % junctions.size()]];
            } else {
                int e = static_cast<int>(u(rng) * net.edges.size()) % static_cast<int>(net.edges.size());
                x = net.A(e) + (net.B(e) - net.A(e)) * (0.05 + 0.9 * u(rng));
            }
            double clear = net.domain.radius - dist(x, net.domain.center);
            for (Vec2 v : net.vertices) {
                double dv = dist(v, x);
                if (dv > 1e-12) clear = std::min(clear, dv);
            }
            double r = clear * (0.02 + 0.96 * u(rng));
            auto cut = circle_cut(net, x, r);
            if (!cut.identity_applies) { o.pass = false; continue; }
            ++identity_cases;
            worst_identity = std::max(worst_identity, cut.identity_residual);
            // (b) the same centre over the whole admissible range of radii
            std::vector<double> radii;
            double top = net.domain.radius - dist(x, net.domain.center);
            for (int m = 1; m <= 40; ++m) radii.push_back(top * (m - 0.5) / 40.0);
            ++mono_profiles;
            try {
                if (!monotonicity_profile(net, x, radii, 1e-9).nondecreasing) {
                    ++mono_fail;
                    ++fixture_fail;
                }
            } catch (const NonGenericRadius&) {
                ++mono_fail;
                ++fixture_fail;
            }
        }
        if (fixture_fail) mono_where += " " + name + ":" + std::to_string(fixture_fail);
    }
    bool a = identity_cases == 100 * static_cast<int>(flat.size()) && worst_identity <= 1e-9;
    bool b = mono_fail == 0;

    double worst_el = 0.0;
    for (const auto& [name, p] : flat)
        for (const auto& eta : builtin_field_names())
            worst_el = std::max(worst_el, euler_lagrange_residual(p.net, builtin_field(eta, p.net.domain)).residual);
    auto cross = fixtures::cross();
    double cross_el = 0.0;
    for (const auto& eta : builtin_field_names())
        cross_el = std::max(cross_el, euler_lagrange_residual(cross.net, builtin_field(eta, cross.net.domain)).residual);
    bool c = worst_el <= 1e-8 && cross_el <= 1e-12;

    const double r = 0.25;
    auto cc = classify_point(cross.net, {0, 0}, r);
    double expected = (2.0 - 2.0 * std::sin(75.0 * kPi / 180.0)) * r;
    bool d_cross = cc.cls == PointClass::NonStationary && cc.witness && cc.witness->kind == "fork" &&
                   std::abs(cc.witness->gain - expected) <= 1e-6;
    int probes = 0, probe_bad = 0;
    for (const auto& [name, p] : flat)
        for (Vec2 x : auto_probe_points(p.net)) {
            ++probes;
            auto k = classify_point(p.net, x, auto_probe_radius(p.net, x)).cls;
            if (k != PointClass::Triple120 && k != PointClass::InteriorSegment) ++probe_bad;
        }
    bool d = d_cross && probe_bad == 0;
    bool e = std::abs(fork_length(2.0 * kPi / 3.0) - 2.0) <= 1e-12 &&
             std::abs(fork_length(kPi / 2.0) - 2.0 * std::sin(75.0 * kPi / 180.0)) <= 1e-12;
    o.pass = o.pass && a && b && c && d && e;
    o.detail = std::string("(a) ") + (a ? "ok" : "FAILED") + " " + std::to_string(identity_cases) + " cuts, max " +
               fmt("%.1e", worst_identity) + "; (b) " + (b ? "ok" : "FAILED") + " " + std::to_string(mono_profiles) +
               " profiles" + (mono_where.empty() ? "" : ", failing" + mono_where) + "; (c) " + (c ? "ok" : "FAILED") + " max " + fmt("%.1e", worst_el) + ", cross " +
               fmt("%.1e", cross_el) + "; (d) " + (d ? "ok" : "FAILED") + " cross gain " +
               fmt("%.8f", cc.witness ? cc.witness->gain : 0.0) + " vs " + fmt("%.8f", expected) + ", " +
               std::to_string(probes - probe_bad) + "/" + std::to_string(probes) + " probes stationary; (e) " +
               (e ? "ok" : "FAILED");
    return o;
}

// 8 -------------------------------------------------------------------------------------------
int run_cli(const std::string& cli, const std::string& args) {
    std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion8(const std::string& cli, const fs::path& work) {
    Outcome o{true, "", 0.0};
    if (cli.empty()) return {false, "no CLI path given (--cli)", 0.0};
    fs::create_directories(work);
    auto at = [&](const std::string& n) { return (work / n).string(); };
    // Inputs first, then each invocation twice into different files.
    run_cli(cli, "fixtures junction -o " + at("j.json"));
    run_cli(cli, "fixtures hexagon --rho 0.6 -o " + at("hex.json"));
    run_cli(cli, "calibration build " + at("j.json") + " -o " + at("field.json"));
    struct Inv {
        std::string args;
        std::string ext;
    };
    std::vector<Inv> invocations = {
        {"fixtures hexagon --rho 0.6", "json"},
        {"partition validate " + at("hex.json"), "json"},
        {"partition scales " + at("hex.json"), "json"},
        {"calibration build " + at("hex.json"), "json"},
        {"calibration verify " + at("field.json") + " --seed 3", "json"},
        {"energy identity " + at("hex.json") + " --reference " + at("hex.json"), "json"},
        {"stationarity classify " + at("hex.json"), "json"},
        {"stationarity el-residual " + at("hex.json") + " --eta builtin:offset-skew", "json"},
        {"stationarity monotonicity " + at("j.json") + " --center 0.1,0.07 --radii 0.05..0.85:12", "json"},
        {"probe " + at("j.json") + " --field " + at("field.json") + " --trials 60 --seed 17", "json"},
        {"--threads 3 probe " + at("j.json") + " --field " + at("field.json") + " --trials 60 --seed 17", "json"},
        {"partition plot " + at("hex.json"), "svg"},
        {"calibration plot " + at("field.json"), "svg"},
    };
    int same = 0;
    std::string diffs;
    std::string first_probe;
    for (size_t k = 0; k < invocations.size(); ++k) {
        std::string a = at("run" + std::to_string(k) + "a." + invocations[k].ext);
        std::string b = at("run" + std::to_string(k) + "b." + invocations[k].ext);
        int ea = run_cli(cli, invocations[k].args + " -o " + a);
        int eb = run_cli(cli, invocations[k].args + " -o " + b);
        std::string ta = slurp(a), tb = slurp(b);
        if (ea == eb && ea >= 0 && ea <= 1 && !ta.empty() && ta == tb) ++same;
        else diffs += " [" + invocations[k].args + "]";
        if (invocations[k].args.rfind("probe", 0) == 0) first_probe = ta;
        if (invocations[k].args.rfind("--threads", 0) == 0 && ta != first_probe) diffs += " [thread count changed output]";
    }
    o.pass = same == static_cast<int>(invocations.size()) && diffs.empty();
    o.detail = std::to_string(same) + "/" + std::to_string(invocations.size()) + " invocations byte-identical" +
               (diffs.empty() ? "" : "; differing:" + diffs);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria", "acceptance"};
    int only = 0;
    std::string cli;
    std::string work = (fs::temp_directory_path() / "calibnet-acceptance").string();
    app.add_option("--criterion", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
    app.add_option("--cli", cli, "Path to the calibnet executable (criterion 8)");
    app.add_option("--work", work, "Scratch directory (criterion 8)");
    CLI11_PARSE(app, argc, argv);

    std::vector<std::function<Outcome()>> all = {criterion1, criterion2, criterion3, criterion4,
                                                 criterion5, criterion6, criterion7,
                                                 [&] { return criterion8(cli, work); }};
    bool ok = true;
    for (int k = 1; k <= 8; ++k) {
        if (only && k != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = all[k - 1]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what(), 0.0};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.budget_s > 0.0 && secs >= o.budget_s) {
            o.pass = false;
            o.detail += "; over the " + fmt("%.0f", o.budget_s) + "s budget";
        }
        std::printf("criterion %d: %s  %s  [%.2fs]\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
