#pragma once

// Scenario configuration and execution. A config is flat key = value text
// with [section] headers: the top-level `scenario` key picks one of the
// built-in presets and every later key overrides one preset field. Keys
// that do not apply to the chosen scenario are rejected, as are unknown
// keys, so a config never silently ignores a typo.
//
// The canonical serialization (fixed key order, %.17g numbers) is the run
// identity: its FNV-1a hash goes into the manifest, and two runs with the
// same canonical text produce byte-identical data files regardless of
// worker count. The worker count and output directory are execution
// resources, not identity, and stay out of the canonical text.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "collapsim/branchwalk.hpp"
#include "collapsim/collapse.hpp"
#include "collapsim/ensemble.hpp"
#include "collapsim/grid.hpp"
#include "collapsim/potential.hpp"

namespace collapsim {

enum class ScenarioKind {
    single_detector_grid,
    dual_detector_grid,
    single_detector_reduced,
    dual_detector_reduced,
    scattering_gamma_probe,
    conservation_2d,
    energy_deviation_sweep,
    beam_splitter_entanglement,
};

std::string_view scenario_name(ScenarioKind k);
bool scenario_from_name(std::string_view name, ScenarioKind& out);

struct EmitFlags {
    bool traces = false;
    bool gamma = false;
    bool audits = false;
};

// Parses "traces,gamma,audits" subsets or "none"; throws on anything else.
EmitFlags emit_flags_from_text(std::string_view raw);

struct RunBlock {
    std::uint64_t seed = 1;
    std::uint64_t trajectories = 1;
    std::uint64_t max_steps = 1000;
    int workers = 1;                 // execution resource; never hashed
    double dt = 2e-3;                // grid integrator step
    double absorb_eps = 0.02;        // branch weight absorption margin
    std::uint64_t sample_every = 1;  // series decimation
    EmitFlags emit;
};

// Two-branch initial state for the detector runs (1-D grids).
struct BranchBlock {
    double weight_a = 0.3;
    int split_axis = 0;
    double split_boundary = 0.0;
    bool split_below = false;        // region A is boundary side given here
    PacketSpec jA, kA, jB, kB;
};

struct SweepBlock {
    double lo = 1e-4;
    double hi = 4e-4;
    int points = 3;
};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::single_detector_reduced;
    RunBlock run;
    GridSpec grid;
    PotentialSpec potential;
    CollapseParams collapse;
    BranchBlock branch;
    PacketSpec packet_j, packet_k;
    WalkParams walk;
    double walk_mu2_0 = 0.5;
    SweepBlock sweep;

    std::string out_dir;             // set by the front end; not serialized
    bool seed_from_file = false;     // whether the config text set the seed

    void validate() const;           // throws std::invalid_argument
};

// Built-in preset for a scenario name; throws on an unknown name.
ScenarioConfig preset(std::string_view name);

// Parses config text (preset + overrides). Throws std::invalid_argument
// with a line-numbered message on any syntax, key, or value problem.
ScenarioConfig parse_config(std::string_view text);

// Fixed-order serialization restricted to the keys that apply to the
// scenario; parse_config(canonical_text(c)) round-trips.
std::string canonical_text(const ScenarioConfig& c);
std::uint64_t config_hash(const ScenarioConfig& c);

// Scenario execution, pure in memory: file name -> file content, plus
// human-readable notes and the pooled audit verdict. The front end writes
// the files and turns a failed audit into exit code 1.
struct ScenarioOutputs {
    std::map<std::string, std::string> files;
    std::vector<std::string> notes;
    bool any_audit = false;
    bool audits_pass = true;
    EnsembleSummary ensemble;        // filled for ensemble scenarios
};

ScenarioOutputs execute_scenario(const ScenarioConfig& c);

// Ensemble entry: N trajectories of the configured scenario on `workers`
// threads. Only meaningful for the detector scenarios; the single-run
// probes go through execute_scenario.
EnsembleSummary run_ensemble(const ScenarioConfig& c, std::uint64_t n, int workers);

// Manifest text: version, scenario, config hash, seed, notes, and the full
// canonical config block, which alone reproduces every output file.
std::string manifest_text(const ScenarioConfig& c,
                          const std::vector<std::string>& notes);

inline constexpr std::string_view project_version = "0.1.0";

}  // namespace collapsim
