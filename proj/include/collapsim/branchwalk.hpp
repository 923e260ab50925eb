#pragma once

// Reduced model of branch competition: the interacting branch weight mu^2
// performs a one-dimensional random walk
//
//   d(mu^2) = mu^2 nu^2 (kappa1 sqrt(g1(t)) - kappa2 sqrt(g2(t))) (dxi* + dxi)
//
// absorbed at the boundaries. Two detectors firing identical schedules
// cancel exactly under the shared noise; jitter between them releases the
// transfer. Also home to the closed-form scale estimates quoted alongside
// the model.

#include <cstdint>
#include <vector>

#include "collapsim/noise.hpp"
#include "collapsim/rng.hpp"

namespace collapsim {

// Rectangular rate pulses of area one by default (height = 1 / width), one
// per period, with optional per-pulse onset and height jitter. Jitter draws
// are stateless hashes of (jitter_seed, tag, pulse index), so a schedule is
// a pure function of time and seed.
struct PulseSchedule {
    double period = 0.0;         // 0 means a constant rate equal to height
    double width = 0.0;
    double height = 1.0;
    double onset_jitter = 0.0;   // uniform [-J, J] shift, time units
    double height_jitter = 0.0;  // uniform relative [-f, f] scaling
    std::uint64_t tag = 0;

    double rate(double t, std::uint64_t jitter_seed) const;
    double peak() const;
    void validate() const;

    static PulseSchedule constant(double rate);
    static PulseSchedule pulses(double period, double width);
};

struct WalkParams {
    double kappa1 = 1.0;
    double kappa2 = 0.0;
    PulseSchedule schedule1 = PulseSchedule::constant(1.0);
    PulseSchedule schedule2 = PulseSchedule::constant(0.0);
    double dt = 1e-4;
    std::uint64_t max_steps = 1000000;
    double termination_eps = 1e-3;   // in (0, 0.01]
    std::size_t trace_every = 0;     // record mu2 every k steps when nonzero

    void validate() const;
};

struct BranchState {
    double mu2 = 0.5;
    double t = 0.0;
};

enum class Absorbed { none, zero, one };

struct WalkOutcome {
    Absorbed absorbed_at = Absorbed::none;
    std::uint64_t steps = 0;
    std::uint32_t clamps = 0;
    double final_mu2 = 0.0;
    std::vector<double> mu2_series;
};

// kappa1 sqrt(g1(t)) - kappa2 sqrt(g2(t))
double walk_drive(const WalkParams& p, double t, std::uint64_t jitter_seed);

BranchState walk_step(BranchState s, double drive, const NoiseIncrement& xi,
                      std::uint32_t* clamp_counter);

WalkOutcome run_walk(double mu2_0, const WalkParams& p, RandomStream& rng,
                     std::uint64_t jitter_seed);

struct BornEstimate {
    std::size_t n_walks = 0;
    std::size_t absorbed_one = 0;
    std::size_t absorbed_zero = 0;
    std::size_t unterminated = 0;
    double frequency = 0.0;          // absorbed-at-1 count over all walks
    double ci_low = 0.0, ci_high = 0.0;   // 3 sigma binomial band
    double band_fraction = 0.0;      // per-step fraction with mu2 in [0.45, 0.55]
    std::uint64_t total_steps = 0;
    std::uint64_t clamps = 0;
    double mean_steps = 0.0;
    double median_steps = 0.0;
    std::vector<double> checkpoint_mean;  // E[mu2] at fixed step checkpoints
    std::vector<double> checkpoint_se;
};

// N independent walks on streams derived from (master_seed, index). With
// checkpoint_every > 0, mu2 is sampled at the first n_checkpoints multiples
// of that step count; absorbed walks contribute their boundary value.
BornEstimate born_estimate(double p0, std::size_t n, const WalkParams& p,
                           std::uint64_t master_seed, std::uint64_t checkpoint_every = 0,
                           std::size_t n_checkpoints = 0);

// Closed-form estimates quoted with the reduced model.
double alpha_squared_reference();    // fine-structure constant squared
double max_coupling_ratio();         // one order of magnitude above it
double perturbation_ratio(double hbar, double rest_energy, double delta_t);
std::uint64_t walk_steps_estimate(double step_size);   // ceil(1 / s^2)
double entanglement_estimate(double delta);            // (d/2)(1 - ln(d/2))

}  // namespace collapsim
