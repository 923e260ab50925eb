#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// End-to-end checks of the installed binary through a shell, driven by the
// COLLAPSIM_BIN environment variable that the build exports. Each case gets
// its own scratch directory so runs cannot see each other's files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string bin_path() {
    const char* p = std::getenv("COLLAPSIM_BIN");
    REQUIRE_MESSAGE(p != nullptr, "COLLAPSIM_BIN must point at the binary");
    return p;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path d = fs::temp_directory_path() / ("collapsim_cli_" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// runs `prefix BIN args` under sh, returns the exit code
int run_cli(const std::string& args, const fs::path& dir,
            const std::string& env_prefix = "") {
    std::string cmd = "cd " + dir.string() + " && " + env_prefix + " '" +
                      bin_path() + "' " + args + " >cli_out.txt 2>cli_err.txt";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kReduced =
    "scenario = dual_detector_reduced\n"
    "[run]\n"
    "trajectories = 120\n"
    "emit = audits\n";

}  // namespace

TEST_CASE("usage errors exit 2 and leave no output directory") {
    fs::path d = fresh_dir("usage");
    CHECK(run_cli("", d) == 2);
    CHECK(run_cli("--config nowhere.txt --out r", d) == 2);
    CHECK_FALSE(fs::exists(d / "r"));

    write(d / "bad.txt", "scenario = dual_detector_reduced\n[run]\nloudness = 11\n");
    CHECK(run_cli("--config bad.txt --out r", d) == 2);
    CHECK_FALSE(fs::exists(d / "r"));

    // invalid values are caught by validation before anything runs
    write(d / "bad2.txt", "scenario = dual_detector_reduced\n[run]\ntrajectories = 0\n");
    CHECK(run_cli("--config bad2.txt --out r", d) == 2);
    CHECK_FALSE(fs::exists(d / "r"));

    CHECK(run_cli("--help", d) == 0);
}

TEST_CASE("a clean run writes its files and exits 0") {
    fs::path d = fresh_dir("clean");
    write(d / "cfg.txt", kReduced);
    CHECK(run_cli("--config cfg.txt --out r", d) == 0);
    CHECK(fs::exists(d / "r/manifest.txt"));
    CHECK(fs::exists(d / "r/summary.txt"));
    CHECK(fs::exists(d / "r/trajectories.txt"));
    CHECK(fs::exists(d / "r/audits.txt"));

    std::string manifest = slurp(d / "r/manifest.txt");
    CHECK(manifest.find("config_hash = ") != std::string::npos);
    CHECK(manifest.find("scenario = dual_detector_reduced") != std::string::npos);

    std::string summary = slurp(d / "r/summary.txt");
    CHECK(summary.rfind("quantity value\n", 0) == 0);
    CHECK(summary.find("trajectories 120") != std::string::npos);
}

TEST_CASE("reruns and worker counts reproduce every file byte for byte") {
    fs::path d = fresh_dir("repro");
    write(d / "cfg.txt", kReduced);
    REQUIRE(run_cli("--config cfg.txt --out a --workers 1", d) == 0);
    REQUIRE(run_cli("--config cfg.txt --out b --workers 1", d) == 0);
    REQUIRE(run_cli("--config cfg.txt --out c --workers 4", d) == 0);
    for (const char* name :
         {"manifest.txt", "summary.txt", "trajectories.txt", "audits.txt"}) {
        CAPTURE(name);
        std::string a = slurp(d / "a" / name);
        CHECK(a == slurp(d / "b" / name));
        CHECK(a == slurp(d / "c" / name));
        CHECK_FALSE(a.empty());
    }
}

TEST_CASE("seed resolution: flag beats config beats environment") {
    fs::path d = fresh_dir("seed");
    write(d / "noseed.txt",
          "scenario = dual_detector_reduced\n[run]\ntrajectories = 40\n");
    write(d / "seeded.txt",
          "scenario = dual_detector_reduced\n[run]\ntrajectories = 40\nseed = 5\n");

    REQUIRE(run_cli("--config noseed.txt --out def", d) == 0);
    REQUIRE(run_cli("--config noseed.txt --out env", d, "COLLAPSIM_SEED=5") == 0);
    REQUIRE(run_cli("--config seeded.txt --out cfg", d, "COLLAPSIM_SEED=9") == 0);
    REQUIRE(run_cli("--config noseed.txt --seed 5 --out flag", d,
                    "COLLAPSIM_SEED=9") == 0);

    std::string def = slurp(d / "def/trajectories.txt");
    std::string env = slurp(d / "env/trajectories.txt");
    std::string cfg = slurp(d / "cfg/trajectories.txt");
    std::string flag = slurp(d / "flag/trajectories.txt");

    CHECK(def != env);    // default seed 1 vs environment seed 5
    CHECK(env == cfg);    // config seed 5 wins over environment 9
    CHECK(env == flag);   // flag seed 5 wins over environment 9

    // the manifest records the effective seed
    CHECK(slurp(d / "flag/manifest.txt").find("seed = 5") != std::string::npos);

    // a garbage environment seed is a usage error
    CHECK(run_cli("--config noseed.txt --out junk", d, "COLLAPSIM_SEED=soon") == 2);
    CHECK_FALSE(fs::exists(d / "junk"));
}

TEST_CASE("the emit flag turns on trace output") {
    fs::path d = fresh_dir("emit");
    write(d / "cfg.txt",
          "scenario = dual_detector_reduced\n[run]\ntrajectories = 6\n");
    REQUIRE(run_cli("--config cfg.txt --out quiet", d) == 0);
    CHECK_FALSE(fs::exists(d / "quiet/trace_00000.txt"));
    REQUIRE(run_cli("--config cfg.txt --emit traces --out loud", d) == 0);
    CHECK(fs::exists(d / "loud/trace_00000.txt"));
    CHECK(fs::exists(d / "loud/trace_00005.txt"));
    std::string t = slurp(d / "loud/trace_00000.txt");
    CHECK(t.rfind("sample mu2\n", 0) == 0);
}

TEST_CASE("single-run scenarios write their series files") {
    fs::path d = fresh_dir("probe");
    write(d / "cfg.txt",
          "scenario = scattering_gamma_probe\n[run]\nmax_steps = 40\n");
    REQUIRE(run_cli("--config cfg.txt --out p", d) == 0);
    std::string g = slurp(d / "p/gamma.txt");
    CHECK(g.rfind("step t gamma integral\n", 0) == 0);
    CHECK(slurp(d / "p/summary.txt").find("gamma_integral ") != std::string::npos);
}

TEST_CASE("a run that cannot produce its rate exits 1") {
    fs::path d = fresh_dir("fail");
    // raising the transfer floor above the pair energy breaks every step
    write(d / "cfg.txt",
          "scenario = single_detector_grid\n[collapse]\ne0 = 5.0\n");
    CHECK(run_cli("--config cfg.txt --out r", d) == 1);
}
