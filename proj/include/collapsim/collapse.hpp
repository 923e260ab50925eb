#pragma once

// Interaction-driven stochastic term. Each kick multiplies the state by
// (1 + A dxi - A^2 dt / 2), where A = kappa * sqrt(rate) * (V - <V>) /
// rest_energy is the centered interaction field and dxi a complex Wiener
// increment. The rate is the weighted energy-exchange current divided by
// the energy available above a configurable floor, evaluated in the frame
// of the weighted center of mass so that a common drift contributes
// nothing. The rate is a ratio of quadratic forms, so it does not depend
// on the amplitude or global phase of the state.

#include <array>

#include "collapsim/grid.hpp"
#include "collapsim/noise.hpp"
#include "collapsim/operators.hpp"
#include "collapsim/potential.hpp"
#include "collapsim/rng.hpp"
#include "collapsim/spectral.hpp"

namespace collapsim {

struct CollapseParams {
    double kappa = 1.0;          // dimensionless coupling inflation
    double rest_energy = 1.0;    // pair rest energy in simulation units
    double e0 = 0.0;             // energy floor subtracted in the denominator
    double guard_eps = 1e-12;    // |<V>| threshold relative to max |V|
    void validate() const;
};

struct GammaRecord {
    double gamma = 0.0;
    double numerator = 0.0;      // weighted exchange rate, >= 0
    double denominator = 0.0;    // available energy above the floor
    std::array<double, 2> u{{0, 0}};  // weighted center-of-mass velocity
    bool guard_tripped = false;
    double weighting_norm = 0.0; // norm of the weighted, deboosted state
    double mean_V = 0.0;
};

// Throws std::domain_error if the energy floor sits at or above the
// available energy; that is a scenario configuration error, not a runtime
// condition to paper over.
GammaRecord gamma_jk(const WaveFunction& psi, const PotentialFields& fields,
                     const CollapseParams& params, SpectralWorkspace& ws);

struct KickResult {
    double norm_excess = 0.0;    // relative norm change before renormalizing
    double applied_scale = 0.0;  // kappa * sqrt(gamma) / rest_energy
    GammaRecord rate;
};

// One Euler-Maruyama kick followed by exact renormalization.
KickResult apply_stochastic(WaveFunction& psi, const PotentialFields& fields,
                            const CollapseParams& params, const NoiseIncrement& xi,
                            SpectralWorkspace& ws);

struct StepRecord {
    NoiseIncrement noise;
    KickResult kick;
    bool stochastic = false;
};

// Unitary propagation followed by the stochastic kick. With kappa == 0 the
// stream is never touched and the state matches plain propagation bit for
// bit.
class SdeStepper {
public:
    SdeStepper(const GridSpec& spec, const PotentialSpec& pot,
               const CollapseParams& params, double dt);

    StepRecord step(WaveFunction& psi, RandomStream& rng);
    PairPropagator& propagator() { return prop_; }
    const CollapseParams& params() const { return params_; }

private:
    PairPropagator prop_;
    CollapseParams params_;
};

}  // namespace collapsim
