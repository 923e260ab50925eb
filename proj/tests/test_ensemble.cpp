#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "collapsim/ensemble.hpp"
#include "collapsim/io.hpp"
#include "collapsim/scenario.hpp"

using namespace collapsim;

namespace {

// deterministic stand-in trajectory: outcome from index parity
TrajectoryStats stub_trajectory(std::uint64_t i) {
    TrajectoryStats s;
    s.stream = 1000 + i;
    s.steps = 10 * (i + 1);
    s.outcome = (i % 2 == 0) ? "even" : "odd";
    return s;
}

bool tables_equal(const EnsembleSummary& a, const EnsembleSummary& b) {
    if (a.table.size() != b.table.size()) return false;
    for (std::size_t i = 0; i < a.table.size(); ++i) {
        const TrajectoryStats &x = a.table[i], &y = b.table[i];
        if (x.index != y.index || x.stream != y.stream || x.outcome != y.outcome ||
            x.steps != y.steps || x.failed != y.failed || x.error != y.error)
            return false;
    }
    return true;
}

// second FNV-1a implementation so the hash constant is pinned by a
// reference that does not share code with the library
std::uint64_t ref_fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

TEST_CASE("worker count does not change the trajectory table") {
    EnsembleSummary one = run_trajectories(stub_trajectory, 37, 1);
    EnsembleSummary four = run_trajectories(stub_trajectory, 37, 4);
    CHECK(tables_equal(one, four));
    CHECK(one.trajectories == 37);
    CHECK(one.table[5].index == 5);
    CHECK(one.table[5].stream == 1005);
    CHECK(one.mean_steps == doctest::Approx(10.0 * 19.0));
}

TEST_CASE("a throwing trajectory is recorded, not fatal") {
    auto fn = [](std::uint64_t i) {
        if (i == 3) throw std::runtime_error("boom at three");
        return stub_trajectory(i);
    };
    EnsembleSummary sum = run_trajectories(fn, 6, 2);
    CHECK(sum.failures == 1);
    CHECK(sum.table[3].failed);
    CHECK(sum.table[3].outcome == "failed");
    CHECK_FALSE(sum.table[3].audit_pass);
    CHECK(sum.table[3].error == "boom at three");
    CHECK_FALSE(sum.table[2].failed);
    CHECK(sum.audits_pass == false);
}

TEST_CASE("outcome bins are label sorted with binomial intervals") {
    EnsembleSummary sum = run_trajectories(stub_trajectory, 10, 1);
    REQUIRE(sum.outcomes.size() == 2);
    CHECK(sum.outcomes[0].label == "even");
    CHECK(sum.outcomes[1].label == "odd");
    CHECK(sum.outcomes[0].count == 5);
    CHECK(sum.outcomes[0].frequency == doctest::Approx(0.5));
    double p = 0.5;
    CHECK(sum.outcomes[0].ci_half_width ==
          doctest::Approx(3.0 * std::sqrt(p * (1 - p) / 10.0)));
}

TEST_CASE("run_trajectories rejects empty or unworkable requests") {
    CHECK_THROWS_AS(run_trajectories(stub_trajectory, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(run_trajectories(stub_trajectory, 4, 0), std::invalid_argument);
}

TEST_CASE("every preset validates and round-trips through its canonical text") {
    const char* names[] = {
        "single_detector_grid",   "dual_detector_grid",
        "single_detector_reduced", "dual_detector_reduced",
        "scattering_gamma_probe", "conservation_2d",
        "energy_deviation_sweep", "beam_splitter_entanglement",
    };
    for (const char* name : names) {
        CAPTURE(name);
        ScenarioConfig c = preset(name);
        CHECK_NOTHROW(c.validate());
        std::string text = canonical_text(c);
        ScenarioConfig back = parse_config(text);
        CHECK(canonical_text(back) == text);
        CHECK(config_hash(back) == config_hash(c));
        CHECK(scenario_name(back.kind) == name);
    }
    CHECK_THROWS_AS(preset("made_up"), std::invalid_argument);
}

TEST_CASE("config hash is the FNV-1a of the canonical text") {
    ScenarioConfig c = preset("dual_detector_reduced");
    CHECK(config_hash(c) == ref_fnv1a(canonical_text(c)));

    // execution resources stay out of the identity
    ScenarioConfig d = c;
    d.run.workers = 7;
    d.out_dir = "elsewhere";
    CHECK(config_hash(d) == config_hash(c));

    // any physical key changes it
    d.walk.dt *= 2;
    CHECK(config_hash(d) != config_hash(c));
}

TEST_CASE("the parser applies overrides on top of the preset") {
    std::string text =
        "scenario = dual_detector_reduced\n"
        "[walk]\n"
        "kappa_2 = 0.25\n"
        "[run]\n"
        "seed = 77\n";
    ScenarioConfig c = parse_config(text);
    ScenarioConfig base = preset("dual_detector_reduced");
    CHECK(c.walk.kappa2 == 0.25);
    CHECK(c.walk.kappa1 == base.walk.kappa1);
    CHECK(c.run.seed == 77);
    CHECK(c.seed_from_file);
    CHECK_FALSE(base.seed_from_file);
    CHECK_FALSE(parse_config("scenario = dual_detector_reduced\n").seed_from_file);
}

TEST_CASE("comments, blank lines, and whitespace are tolerated") {
    std::string text =
        "# walk study\n"
        "scenario = single_detector_reduced   # preset\n"
        "\n"
        "[ walk ]\n"
        "  mu2_0   =   0.4  # start closer to the middle\n";
    ScenarioConfig c = parse_config(text);
    CHECK(c.walk_mu2_0 == 0.4);
}

TEST_CASE("the parser rejects what it does not understand") {
    auto bad = [](const std::string& text) {
        CHECK_THROWS_AS(parse_config(text), std::invalid_argument);
    };
    bad("");                                              // no scenario
    bad("scenario = flying_toaster\n");                   // unknown scenario
    bad("scenario = conservation_2d\nscenario = conservation_2d\n");
    bad("[run]\nseed = 1\n");                             // section before scenario
    bad("dt = 0.1\n");                                    // top-level junk
    bad("scenario = conservation_2d\n[walk]\ndt = 1e-4\n");  // wrong-kind section
    bad("scenario = dual_detector_reduced\n[run]\nmax_steps = 50\n");  // wrong-kind key
    bad("scenario = conservation_2d\n[grid]\nshape = round\n");        // unknown key
    bad("scenario = conservation_2d\n[grid]\nextent = big\n");         // bad number
    bad("scenario = conservation_2d\n[grid]\nextent = 8 m\n");         // trailing junk
    bad("scenario = conservation_2d\n[run]\nmax_steps = -4\n");        // negative count
    bad("scenario = conservation_2d\n[run]\nemit = traces,loud\n");    // bad emit token
    bad("scenario = conservation_2d\n[potential]\nfamily = square\n"); // bad family
    bad("scenario = single_detector_grid\n[branch]\nsplit_below = yes\n");
    bad("scenario = conservation_2d\n[grid\nextent = 8\n");            // broken header
    bad("scenario = conservation_2d\n[run]\nseed\n");                  // no equals

    // the message carries the line number
    try {
        parse_config("scenario = conservation_2d\n\n[grid]\nextent = big\n");
        FAIL("expected a throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("validation catches out-of-range scenario settings") {
    auto broken = [](const char* name, auto&& mutate) {
        ScenarioConfig c = preset(name);
        mutate(c);
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    broken("dual_detector_reduced", [](ScenarioConfig& c) { c.run.trajectories = 0; });
    broken("dual_detector_reduced", [](ScenarioConfig& c) { c.run.workers = 0; });
    broken("single_detector_grid", [](ScenarioConfig& c) { c.run.absorb_eps = 0.3; });
    broken("single_detector_grid", [](ScenarioConfig& c) { c.branch.weight_a = 1.0; });
    broken("single_detector_grid", [](ScenarioConfig& c) { c.branch.split_axis = 2; });
    broken("single_detector_grid", [](ScenarioConfig& c) { c.branch.jA.width = 0.1; });
    broken("conservation_2d", [](ScenarioConfig& c) { c.grid.dims_per_particle = 1; });
    broken("scattering_gamma_probe", [](ScenarioConfig& c) {
        c.packet_j.wavevector[1] = 0.5;  // y motion on a line grid
    });
    broken("dual_detector_reduced", [](ScenarioConfig& c) {
        c.run.emit.audits = true;
        c.walk.trace_every = 0;
    });
    broken("dual_detector_reduced", [](ScenarioConfig& c) {
        c.run.emit.audits = true;
        c.run.trajectories = 50;  // martingale needs 100
    });
    broken("energy_deviation_sweep", [](ScenarioConfig& c) { c.sweep.points = 1; });
    broken("energy_deviation_sweep", [](ScenarioConfig& c) { c.sweep.lo = c.sweep.hi; });
    broken("beam_splitter_entanglement", [](ScenarioConfig& c) { c.sweep.hi = 1.0; });
}

TEST_CASE("emit flag lists parse strictly") {
    CHECK_FALSE(emit_flags_from_text("none").traces);
    EmitFlags e = emit_flags_from_text("traces,audits");
    CHECK(e.traces);
    CHECK_FALSE(e.gamma);
    CHECK(e.audits);
    CHECK(emit_flags_from_text("gamma").gamma);
    CHECK_THROWS_AS(emit_flags_from_text("everything"), std::invalid_argument);
}

TEST_CASE("scenario outputs are byte-identical across worker counts") {
    ScenarioConfig c = preset("dual_detector_reduced");
    c.run.trajectories = 120;
    c.run.emit.audits = true;
    c.run.emit.traces = true;

    c.run.workers = 1;
    ScenarioOutputs a = execute_scenario(c);
    c.run.workers = 3;
    ScenarioOutputs b = execute_scenario(c);

    REQUIRE(a.files.size() == b.files.size());
    for (const auto& [name, content] : a.files) {
        CAPTURE(name);
        auto it = b.files.find(name);
        REQUIRE(it != b.files.end());
        CHECK(content == it->second);
    }
    CHECK(a.files.count("summary.txt") == 1);
    CHECK(a.files.count("trajectories.txt") == 1);
    CHECK(a.files.count("audits.txt") == 1);
    CHECK(a.files.count("trace_00000.txt") == 1);
    CHECK(a.audits_pass);
}

TEST_CASE("run_ensemble runs detector scenarios and rejects single-run kinds") {
    ScenarioConfig c = preset("single_detector_reduced");
    EnsembleSummary one = run_ensemble(c, 200, 1);
    EnsembleSummary two = run_ensemble(c, 200, 4);
    CHECK(tables_equal(one, two));
    CHECK(one.trajectories == 200);

    CHECK_THROWS_AS(run_ensemble(preset("conservation_2d"), 10, 1),
                    std::invalid_argument);
}

TEST_CASE("the manifest config block alone rebuilds the run identity") {
    ScenarioConfig c = preset("scattering_gamma_probe");
    c.run.seed = 41;
    std::string m = manifest_text(c, {"coupling inflated"});
    CHECK(m.find("version = ") != std::string::npos);
    CHECK(m.find("scenario = scattering_gamma_probe") != std::string::npos);
    CHECK(m.find("config_hash = " + hex16(config_hash(c))) != std::string::npos);
    CHECK(m.find("seed = 41") != std::string::npos);
    CHECK(m.find("note = coupling inflated") != std::string::npos);

    std::size_t at = m.find("[config]\n");
    REQUIRE(at != std::string::npos);
    ScenarioConfig back = parse_config(m.substr(at + 9));
    CHECK(config_hash(back) == config_hash(c));
    CHECK(back.run.seed == 41);
}
