#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calibnet/calibration.hpp"
#include "calibnet/competitors.hpp"
#include "calibnet/energy.hpp"
#include "calibnet/fixtures.hpp"
#include "calibnet/io.hpp"
#include "calibnet/partition.hpp"
#include "calibnet/stationarity.hpp"
#include "calibnet/svg.hpp"
#include "calibnet/tensions.hpp"

using namespace calibnet;
using io::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInputError = 2;

struct RunConfig {
    std::string input;
    std::string output;
    std::string reference;
    std::string field;
    double h = 0.0;
    double fd_h = 0.0;
    std::vector<double> kappas{0.2, 0.1, 0.05};
    std::uint64_t seed = 1;
    int trials = 100;
    int threads = 1;
    bool plot_dumbbell = true;
};

void emit(const RunConfig& cfg, const json& j) {
    std::string text = io::dump(j);
    if (cfg.output.empty()) std::cout << text;
    else io::write_text_file(cfg.output, text);
}

void emit_text(const RunConfig& cfg, const std::string& text) {
    if (cfg.output.empty()) throw InputError("an output path is required (-o)");
    io::write_text_file(cfg.output, text);
}

FlatPartition load_valid_partition(const std::string& path) {
    FlatPartition p{io::load_network(path)};
    auto rep = validate_flat_partition(p);
    if (!rep.valid) {
        std::string msg = "'" + path + "' is not a valid flat partition";
        for (const auto& i : rep.issues) msg += "\n  [" + i.clause + "] " + i.entity + ": " + i.message;
        throw InputError(msg);
    }
    return p;
}

CalibrationField load_field(const std::string& path) { return io::field_from_json(io::read_json_file(path)); }

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InputError(std::string("cannot parse ") + what + " '" + s + "'");
        }
    }
    if (out.empty()) throw InputError(std::string("empty ") + what);
    return out;
}

Vec2 parse_point(const std::string& s) {
    auto v = parse_list(s, "point");
    if (v.size() != 2) throw InputError("a point is given as x,y");
    return {v[0], v[1]};
}

// "r1..r2:n" -> n radii evenly spaced from r1 to r2.
std::vector<double> parse_radii(const std::string& s) {
    auto dots = s.find("..");
    auto colon = s.find(':');
    if (dots == std::string::npos || colon == std::string::npos || colon < dots)
        throw InputError("radii are given as r1..r2:n");
    double a = parse_list(s.substr(0, dots), "radius")[0];
    double b = parse_list(s.substr(dots + 2, colon - dots - 2), "radius")[0];
    double nd = parse_list(s.substr(colon + 1), "count")[0];
    int n = static_cast<int>(nd);
    if (n < 1 || nd != n || !(a > 0.0) || !(b >= a)) throw InputError("radii: need 0 < r1 <= r2 and n >= 1");
    std::vector<double> out;
    for (int k = 0; k < n; ++k) out.push_back(n == 1 ? a : a + (b - a) * k / (n - 1));
    return out;
}

int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("CALIBNET_THREADS")) {
        try {
            int t = std::stoi(env);
            if (t > 0) return t;
        } catch (const std::exception&) {
        }
        throw InputError("CALIBNET_THREADS must be a positive integer");
    }
    return 1;
}

json scales_json(const FlatPartition& p, const LocalizationScales& s) {
    auto fd = decompose_features(p);
    json j = io::to_json(s);
    j["separation_bound"] = separation_bound(p, fd);
    j["min_junction_angle"] = min_junction_angle(p, fd);
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local paired calibrations and stationarity tests for planar flat partitions", "calibnet"};
    app.require_subcommand(1);
    RunConfig cfg;
    int thread_flag = 0;
    app.add_option("--threads", thread_flag, "Worker threads (default 1, or CALIBNET_THREADS)")
        ->check(CLI::PositiveNumber);
    std::function<int()> action;

    auto out_opt = [&](CLI::App* s, const char* help = "Output file (default: standard output)") {
        s->add_option("-o,--output", cfg.output, help);
    };

    // tensions ---------------------------------------------------------------------------------
    auto* tensions = app.add_subcommand("tensions", "Surface tension matrices");
    tensions->require_subcommand(1);
    auto* tcheck = tensions->add_subcommand("check", "Check admissibility and print the simplex embedding");
    tcheck->add_option("file", cfg.input, "Tension matrix JSON")->required();
    out_opt(tcheck);
    tcheck->callback([&] {
        action = [&] {
            auto m = io::tensions_from_json(io::read_json_file(cfg.input));
            auto r = embed_simplex(m);
            json j = io::to_json(r, m);
            json tri = json::array();
            for (auto t : check_strict_triangle(m)) tri.push_back(json::array({t[0] + 1, t[1] + 1, t[2] + 1}));
            j["triangle_violations"] = tri;
            emit(cfg, j);
            return std::holds_alternative<SimplexEmbedding>(r) ? kOk : kFailed;
        };
    });

    // partition --------------------------------------------------------------------------------
    auto* partition = app.add_subcommand("partition", "Flat partitions");
    partition->require_subcommand(1);
    auto* pvalidate = partition->add_subcommand("validate", "Validate a flat partition");
    pvalidate->add_option("file", cfg.input, "Partition JSON")->required();
    out_opt(pvalidate);
    pvalidate->callback([&] {
        action = [&] {
            FlatPartition p{io::load_network(cfg.input)};
            auto rep = validate_flat_partition(p);
            emit(cfg, io::to_json(rep));
            return rep.valid ? kOk : kFailed;
        };
    });
    auto* pscales = partition->add_subcommand("scales", "Find admissible localization scales");
    pscales->add_option("file", cfg.input, "Partition JSON")->required();
    out_opt(pscales);
    pscales->callback([&] {
        action = [&] {
            auto p = load_valid_partition(cfg.input);
            try {
                emit(cfg, scales_json(p, find_localization_scales(p)));
            } catch (const NoAdmissibleScales& e) {
                emit(cfg, json{{"admissible", false}, {"reason", e.what()}});
                return kFailed;
            }
            return kOk;
        };
    });
    auto* pplot = partition->add_subcommand("plot", "Render the partition as SVG");
    pplot->add_option("file", cfg.input, "Partition JSON")->required();
    out_opt(pplot, "Output SVG file");
    pplot->get_options().back()->required();
    pplot->add_flag("!--no-dumbbell", cfg.plot_dumbbell, "Do not shade the dumbbell neighbourhood");
    pplot->callback([&] {
        action = [&] {
            FlatPartition p{io::load_network(cfg.input)};
            std::optional<LocalizationScales> s;
            if (cfg.plot_dumbbell && validate_flat_partition(p).valid) {
                try {
                    s = find_localization_scales(p);
                } catch (const NoAdmissibleScales&) {
                }
            }
            emit_text(cfg, svg::plot_partition(p, s ? &*s : nullptr));
            return kOk;
        };
    });

    // calibration ------------------------------------------------------------------------------
    auto* calibration = app.add_subcommand("calibration", "Local paired calibrations");
    calibration->require_subcommand(1);
    auto* cbuild = calibration->add_subcommand("build", "Construct the calibration field");
    cbuild->add_option("file", cfg.input, "Partition JSON")->required();
    out_opt(cbuild);
    double r_bar = 0.0, delta = 0.0;
    cbuild->add_option("--r-bar", r_bar, "Override the localization radius")->check(CLI::PositiveNumber);
    cbuild->add_option("--delta", delta, "Override the tube ratio (requires --r-bar)")->check(CLI::Range(0.0, 1.0));
    cbuild->callback([&] {
        action = [&] {
            auto p = load_valid_partition(cfg.input);
            std::optional<LocalizationScales> s;
            if (r_bar > 0.0 || delta > 0.0) {
                if (!(r_bar > 0.0 && delta > 0.0)) throw InputError("--r-bar and --delta go together");
                s = LocalizationScales{r_bar, delta};
            }
            CalibrationField f;
            try {
                f = build_calibration(p, s);
            } catch (const NoAdmissibleScales& e) {
                std::cerr << "calibnet: " << e.what() << '\n';
                return kFailed;
            }
            emit(cfg, io::to_json(f));
            return kOk;
        };
    });
    auto* cverify = calibration->add_subcommand("verify", "Verify the coercivity properties by sampling");
    cverify->add_option("file", cfg.input, "Field JSON")->required();
    out_opt(cverify);
    std::string kappa_list;
    int outside_samples = 10000;
    cverify->add_option("--grid-h", cfg.h, "Grid spacing inside the dumbbell (default delta' r / 10)")
        ->check(CLI::PositiveNumber);
    cverify->add_option("--fd-h", cfg.fd_h, "Finite-difference step (default 1e-5 r)")->check(CLI::PositiveNumber);
    cverify->add_option("--kappa", kappa_list, "Comma-separated kappa list (default 0.2,0.1,0.05)");
    cverify->add_option("--samples", outside_samples, "Uniform samples outside the dumbbell")
        ->check(CLI::PositiveNumber);
    cverify->add_option("--seed", cfg.seed, "Sampling seed");
    cverify->callback([&] {
        action = [&] {
            auto f = load_field(cfg.input);
            SamplingConfig sc;
            sc.grid_h = cfg.h;
            sc.fd_h = cfg.fd_h;
            if (!kappa_list.empty()) {
                sc.kappas = parse_list(kappa_list, "kappa list");
                for (double k : sc.kappas)
                    if (!(k > 0.0 && k < 1.0)) throw InputError("kappa values must lie in (0, 1)");
            }
            sc.outside_samples = outside_samples;
            sc.seed = cfg.seed;
            auto rep = verify_calibration(f, sc);
            emit(cfg, io::to_json(rep));
            return rep.passed ? kOk : kFailed;
        };
    });
    auto* cplot = calibration->add_subcommand("plot", "Render the phase fields as arrows");
    cplot->add_option("file", cfg.input, "Field JSON")->required();
    out_opt(cplot, "Output SVG file");
    cplot->get_options().back()->required();
    int grid = 48;
    cplot->add_option("--grid", grid, "Arrows per row")->check(CLI::Range(4, 400));
    cplot->callback([&] {
        action = [&] {
            emit_text(cfg, svg::plot_field(load_field(cfg.input), grid));
            return kOk;
        };
    });

    // energy -----------------------------------------------------------------------------------
    auto* energy = app.add_subcommand("energy", "Interface and relative energies of a competitor");
    energy->require_subcommand(1);
    auto energy_cmd = [&](const char* name, const char* help, bool breakdown) {
        auto* s = energy->add_subcommand(name, help);
        s->add_option("competitor", cfg.input, "Competitor JSON")->required();
        s->add_option("--reference", cfg.reference, "Reference partition JSON")->required();
        s->add_option("--field", cfg.field, "Field JSON (default: built from the reference)");
        s->set_help_flag("--help", "Print this help message and exit");  // --h is the quadrature spacing
        s->add_option("--h", cfg.h, "Area quadrature spacing (default delta' r / 20)")->check(CLI::PositiveNumber);
        s->add_option("--fd-h", cfg.fd_h, "Finite-difference step (default 1e-5 r)")->check(CLI::PositiveNumber);
        out_opt(s);
        s->callback([&, breakdown] {
            action = [&, breakdown] {
                PolygonalPartition q{io::load_network(cfg.input)};
                auto issues = validate_polygonal(q);
                if (!issues.empty()) {
                    std::string msg = "'" + cfg.input + "' is not a valid polygonal partition";
                    for (const auto& i : issues) msg += "\n  [" + i.clause + "] " + i.entity + ": " + i.message;
                    throw InputError(msg);
                }
                CalibrationField f;
                if (cfg.field.empty()) {
                    f = build_calibration(load_valid_partition(cfg.reference));
                } else {
                    f = load_field(cfg.field);
                    FlatPartition ref = load_valid_partition(cfg.reference);
                    if (io::dump(io::to_json(ref.net)) != io::dump(io::to_json(f.partition.net)))
                        throw InputError("the field was built for a different partition");
                }
                QuadratureConfig quad;
                quad.h = cfg.h;
                quad.fd_h = cfg.fd_h;
                auto rep = verify_energy_identity(q, f, quad);
                emit(cfg, io::to_json(rep, breakdown));
                return kOk;
            };
        });
    };
    energy_cmd("eval", "Energies and relative energy", false);
    energy_cmd("identity", "Energies with the full identity breakdown", true);

    // stationarity -----------------------------------------------------------------------------
    auto* stationarity = app.add_subcommand("stationarity", "Stationarity test battery");
    stationarity->require_subcommand(1);
    auto* sclass = stationarity->add_subcommand("classify", "Classify probe points");
    sclass->add_option("file", cfg.input, "Partition JSON")->required();
    std::string points = "auto";
    double probe_r = 0.0;
    sclass->add_option("--points", points, "'auto' or a JSON file with [[x, y], ...]");
    sclass->add_option("--r", probe_r, "Probe radius (default: a quarter of the local clearance)")
        ->check(CLI::PositiveNumber);
    out_opt(sclass);
    sclass->callback([&] {
        action = [&] {
            Network net = io::load_network(cfg.input);
            std::vector<Vec2> pts;
            if (points == "auto") {
                pts = auto_probe_points(net);
            } else {
                json j = io::read_json_file(points);
                if (!j.is_array()) throw InputError("points file: expected an array of [x, y]");
                for (const auto& e : j) pts.push_back(io::point(e, "points"));
            }
            json arr = json::array();
            bool stationary = true;
            for (Vec2 x : pts) {
                double r = probe_r > 0.0 ? probe_r : auto_probe_radius(net, x);
                auto c = classify_point(net, x, r);
                stationary = stationary && c.cls != PointClass::NonStationary;
                arr.push_back(io::to_json(c, x, r));
            }
            // A finite set of competitors cannot prove stationarity, only fail to refute it.
            emit(cfg, json{{"consistent_with_stationarity", stationary}, {"points", arr}});
            return stationary ? kOk : kFailed;
        };
    });
    auto* sel = stationarity->add_subcommand("el-residual", "Equilibrium-equation residual for a test field");
    sel->add_option("file", cfg.input, "Partition JSON")->required();
    std::string eta = "builtin:bump-x";
    double el_tol = 1e-8;
    sel->add_option("--eta", eta, "builtin:<name> or a JSON file of bumps")->required();
    sel->add_option("--tol", el_tol, "Pass threshold")->check(CLI::PositiveNumber);
    out_opt(sel);
    sel->callback([&] {
        action = [&] {
            Network net = io::load_network(cfg.input);
            TestField f = eta.rfind("builtin:", 0) == 0 ? builtin_field(eta.substr(8), net.domain)
                                                        : io::test_field_from_json(io::read_json_file(eta));
            auto r = euler_lagrange_residual(net, f);
            emit(cfg, json{{"eta", eta}, {"residual", r.residual}, {"telescoped", r.telescoped}, {"tolerance", el_tol}});
            return r.residual <= el_tol ? kOk : kFailed;
        };
    });
    auto* smono = stationarity->add_subcommand("monotonicity", "Length ratio over a range of radii");
    smono->add_option("file", cfg.input, "Partition JSON")->required();
    std::string center, radii;
    smono->add_option("--center", center, "Ball centre x,y")->required();
    smono->add_option("--radii", radii, "Radii as r1..r2:n")->required();
    out_opt(smono);
    smono->callback([&] {
        action = [&] {
            Network net = io::load_network(cfg.input);
            Vec2 x = parse_point(center);
            auto mp = monotonicity_profile(net, x, parse_radii(radii));
            emit(cfg, io::to_json(mp, x));
            return mp.nondecreasing ? kOk : kFailed;
        };
    });

    // probe ------------------------------------------------------------------------------------
    auto* probe = app.add_subcommand("probe", "Randomized local minimality probe");
    probe->add_option("file", cfg.input, "Partition JSON")->required();
    probe->add_option("--field", cfg.field, "Field JSON (default: built from the partition)");
    probe->add_option("--trials", cfg.trials, "Number of competitors")->check(CLI::NonNegativeNumber);
    std::string amplitude;
    probe->add_option("--amplitude", amplitude,
                      "Comma-separated amplitudes, absolute (default 0.01,0.02,0.05,0.1 times r)");
    probe->add_option("--seed", cfg.seed, "Seed");
    probe->set_help_flag("--help", "Print this help message and exit");
    probe->add_option("--h", cfg.h, "Area quadrature spacing (default delta' r / 20)")->check(CLI::PositiveNumber);
    double declared_bound = 0.0;
    probe->add_option("--declared-bound", declared_bound,
                      "Violations above this amplitude are reported but do not fail (default: largest amplitude)")
        ->check(CLI::PositiveNumber);
    bool no_identity = false;
    probe->add_flag("--no-identity", no_identity, "Skip the per-trial energy identity");
    out_opt(probe);
    probe->callback([&] {
        action = [&] {
            auto p = load_valid_partition(cfg.input);
            CalibrationField f = cfg.field.empty() ? build_calibration(p) : load_field(cfg.field);
            if (io::dump(io::to_json(p.net)) != io::dump(io::to_json(f.partition.net)))
                throw InputError("the field was built for a different partition");
            auto amps = amplitude.empty() ? default_amplitudes(f.scales.r_bar) : parse_list(amplitude, "amplitude");
            for (double a : amps)
                if (!(a > 0.0)) throw InputError("amplitudes must be positive");
            ProbeOptions opt;
            opt.identity = !no_identity;
            opt.quad.h = cfg.h;
            opt.threads = cfg.threads;
            opt.declared_bound = declared_bound;
            auto rep = minimality_probe(f, cfg.trials, amps, cfg.seed, opt);
            emit(cfg, io::to_json(rep));
            return rep.passed() ? kOk : kFailed;
        };
    });

    // fixtures ---------------------------------------------------------------------------------
    auto* fixtures_cmd = app.add_subcommand("fixtures", "Write standard partitions");
    fixtures_cmd->require_subcommand(1);
    double rho = 1.0, radius = 0.0;
    std::string angles;
    auto fixture = [&](const char* name, const char* help, std::function<Network()> make) {
        auto* s = fixtures_cmd->add_subcommand(name, help);
        out_opt(s);
        s->add_option("--radius", radius, "Domain radius")->check(CLI::PositiveNumber);
        s->callback([&, make] { action = [&, make] { emit(cfg, io::to_json(make())); return kOk; }; });
        return s;
    };
    auto R_or = [&](double d) { return radius > 0.0 ? radius : d; };
    fixture("hexagon", "Hexagon with six spokes (outer radius default 2)",
            [&] { return fixtures::hexagon(rho, R_or(2.0)).net; })
        ->add_option("--rho", rho, "Hexagon circumradius")
        ->required();
    fixture("diameter", "Two phases split by a diameter", [&] { return fixtures::diameter(R_or(1.0)).net; });
    fixture("junction", "Triple junction at the centre", [&] {
               if (angles.empty()) return fixtures::junction(R_or(1.0)).net;
               auto a = parse_list(angles, "angles");
               if (a.size() != 3) throw InputError("a junction needs three sector angles");
               return fixtures::junction_with_angles(a[0], a[1], a[2], R_or(1.0)).net;
           })
        ->add_option("--angles", angles, "Sector angles in degrees a,b,c (default 120,120,120)");
    fixture("cross", "Four phases meeting at right angles", [&] { return fixtures::cross(R_or(1.0)).net; });
    fixture("star", "Rays from the centre, one phase per sector (default 8 rays)", [&] {
               if (angles.empty()) return fixtures::star8(R_or(1.0)).net;
               auto a = parse_list(angles, "angles");
               if (a.size() < 2) throw InputError("a star needs at least two rays");
               std::vector<double> rad;
               std::vector<int> ph;
               for (size_t k = 0; k < a.size(); ++k) {
                   if (k && !(a[k] > a[k - 1])) throw InputError("ray angles must increase");
                   rad.push_back(fixtures::deg(a[k]));
                   ph.push_back(static_cast<int>(k));
               }
               if (!(a.back() - a.front() < 360.0)) throw InputError("ray angles must span less than 360 degrees");
               int m = static_cast<int>(a.size());
               return fixtures::star(rad, ph, SurfaceTensionMatrix::equal(m), R_or(1.0)).net;
           })
        ->add_option("--angles", angles, "Ray angles in degrees, increasing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }
    try {
        cfg.threads = resolve_threads(thread_flag);
        return action();
    } catch (const std::exception& e) {
        std::cerr << "calibnet: " << e.what() << '\n';
        return kInputError;
    }
}
