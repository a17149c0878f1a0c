#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = CALIBNET_CLI;

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::path(CALIBNET_WORK) / "cli";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string at(const std::string& name) { return (work_dir() / name).string(); }

int run(const std::string& args) {
    std::string cmd = kCli + " " + args + " > " + at("stdout.txt") + " 2> " + at("stderr.txt");
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("fixture then validate") {
    REQUIRE(run("fixtures hexagon --rho 0.6 -o " + at("hex.json")) == 0);
    CHECK(run("partition validate " + at("hex.json")) == 0);
    auto rep = nlohmann::json::parse(slurp(at("stdout.txt")));
    CHECK(rep["valid"] == true);
    REQUIRE(run("fixtures junction --angles 90,135,135 -o " + at("bad.json")) == 0);
    CHECK(run("partition validate " + at("bad.json")) == 1);
    CHECK(run("partition scales " + at("bad.json")) == 2);
}

TEST_CASE("pipeline on the symmetric junction") {
    REQUIRE(run("fixtures junction -o " + at("j.json")) == 0);
    CHECK(run("partition scales " + at("j.json")) == 0);
    REQUIRE(run("calibration build " + at("j.json") + " -o " + at("field.json")) == 0);
    CHECK(run("calibration verify " + at("field.json") + " --kappa 0.1,0.05") == 0);
    CHECK(nlohmann::json::parse(slurp(at("stdout.txt")))["verdict"] == "PASSED");
    CHECK(run("probe " + at("j.json") + " --field " + at("field.json") + " --trials 40 --seed 2 -o " + at("probe.json")) == 0);
    auto probe = nlohmann::json::parse(slurp(at("probe.json")));
    CHECK(probe["trials"].size() == 40);
    CHECK(probe["violations_within_declared_amplitude"].empty());
    CHECK(probe["declared_bound"] == probe["verified_bound"]);
    CHECK(run("calibration plot " + at("field.json") + " -o " + at("field.svg")) == 0);
    CHECK(slurp(at("field.svg")).rfind("<svg", 0) == 0);
    CHECK(run("partition plot " + at("j.json") + " -o " + at("j.svg")) == 0);
}

TEST_CASE("fault-injected field fails verification with a witness") {
    REQUIRE(run("fixtures diameter -o " + at("d.json")) == 0);
    REQUIRE(run("calibration build " + at("d.json") + " -o " + at("dfield.json")) == 0);
    auto f = nlohmann::ordered_json::parse(slurp(at("dfield.json")));
    f["aux_vectors"]["segments"][0]["xi"][1][1] = 0.9;
    std::ofstream(at("dfield_bad.json")) << f.dump(2);
    CHECK(run("calibration verify " + at("dfield_bad.json")) == 1);
    auto rep = nlohmann::json::parse(slurp(at("stdout.txt")));
    CHECK(rep["verdict"] == "FAILED");
    REQUIRE(!rep["failures"].empty());
    CHECK(rep["failures"][0].contains("point"));
}

TEST_CASE("energy and stationarity subcommands") {
    REQUIRE(run("fixtures junction -o " + at("j2.json")) == 0);
    CHECK(run("energy identity " + at("j2.json") + " --reference " + at("j2.json")) == 0);
    auto e = nlohmann::json::parse(slurp(at("stdout.txt")));
    CHECK(e["identity_residual"].get<double>() <= 1e-9);
    CHECK(e["physical_length_reference"].get<double>() == doctest::Approx(3.0));
    CHECK(run("stationarity classify " + at("j2.json")) == 0);
    CHECK(run("stationarity el-residual " + at("j2.json") + " --eta builtin:offset-skew") == 0);
    CHECK(run("stationarity monotonicity " + at("j2.json") + " --center 0.1,0.07 --radii 0.05..0.8:6") == 0);
    REQUIRE(run("fixtures cross -o " + at("cross.json")) == 0);
    CHECK(run("stationarity classify " + at("cross.json")) == 1);
    REQUIRE(run("fixtures star -o " + at("star.json")) == 0);
    CHECK(run("stationarity classify " + at("star.json")) == 1);
}

TEST_CASE("input errors and help") {
    CHECK(run("partition validate " + at("missing.json")) == 2);
    CHECK(run("partition validate --bogus " + at("hex.json")) == 2);
    CHECK(run("nosuch") == 2);
    std::ofstream(at("garbage.json")) << "{ not json";
    CHECK(run("tensions check " + at("garbage.json")) == 2);
    CHECK(!slurp(at("stderr.txt")).empty());
    for (const char* sub : {"tensions check", "partition validate", "partition scales", "partition plot",
                            "calibration build", "calibration verify", "calibration plot", "energy eval",
                            "energy identity", "stationarity classify", "stationarity el-residual",
                            "stationarity monotonicity", "probe", "fixtures hexagon", "fixtures diameter",
                            "fixtures junction", "fixtures cross", "fixtures star"}) {
        CHECK_MESSAGE(run(std::string(sub) + " --help") == 0, sub);
        CHECK(slurp(at("stdout.txt")).find("Usage") != std::string::npos);
    }
}

TEST_CASE("tensions check") {
    std::ofstream(at("t_ok.json")) << R"({"P": 3, "sigma": [[0,1,1],[1,0,1],[1,1,0]]})";
    std::ofstream(at("t_flat.json")) << R"({"P": 3, "sigma": [[0,1,1],[1,0,2],[1,2,0]]})";
    CHECK(run("tensions check " + at("t_ok.json")) == 0);
    CHECK(nlohmann::json::parse(slurp(at("stdout.txt")))["admissible"] == true);
    CHECK(run("tensions check " + at("t_flat.json")) == 1);
}

TEST_CASE("thread count does not change output") {
    REQUIRE(run("fixtures junction -o " + at("j3.json")) == 0);
    REQUIRE(run("probe " + at("j3.json") + " --trials 16 --seed 9 -o " + at("p1.json")) == 0);
    REQUIRE(run("--threads 4 probe " + at("j3.json") + " --trials 16 --seed 9 -o " + at("p4.json")) == 0);
    CHECK(slurp(at("p1.json")) == slurp(at("p4.json")));
    REQUIRE(run("probe " + at("j3.json") + " --trials 16 --seed 10 -o " + at("p5.json")) == 0);
    CHECK(slurp(at("p1.json")) != slurp(at("p5.json")));
}
