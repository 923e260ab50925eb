#pragma once

// Observable readouts and the unitary pair propagator. The propagator uses
// symmetric (Strang) operator splitting, second order in dt, with baked
// half-step potential phases and a full-step kinetic phase that folds in
// the inverse-transform normalization.

#include <array>
#include <vector>

#include "collapsim/grid.hpp"
#include "collapsim/potential.hpp"
#include "collapsim/spectral.hpp"

namespace collapsim {

struct Observables {
    double mean_V = 0.0;
    double mean_T = 0.0;
    double mean_H = 0.0;
    std::array<double, 2> mean_P_total{{0, 0}};
    std::array<double, 2> mean_P_j{{0, 0}};
    std::array<double, 2> mean_P_k{{0, 0}};
    double mean_L = 0.0;                 // planar grids only
    bool has_L = false;
    double max_imag_residual = 0.0;      // largest imaginary part dropped
};

Observables observables(const WaveFunction& psi, const PotentialFields& fields,
                        SpectralWorkspace& ws);

class PairPropagator {
public:
    PairPropagator(const GridSpec& spec, const PotentialSpec& pot, double dt);

    void step(WaveFunction& psi);        // one Strang step, advances psi.time
    double dt() const { return dt_; }
    void set_dt(double dt);

    const PotentialFields& fields() const { return fields_; }
    SpectralWorkspace& workspace() { return ws_; }

private:
    GridSpec spec_;
    PotentialFields fields_;
    SpectralWorkspace ws_;
    double dt_ = 0.0;
    CVec vphase_;                        // exp(-i V dt / 2)
    CVec kphase_;                        // exp(-i kinfac dt) / n
    CVec scratch_;
    void rebuild_tables();
};

// dt <= min(0.1 * m_min * spacing^2, 0.05 / max|V|)
double stable_dt(const GridSpec& spec, const PotentialFields& fields);

struct RelaxResult {
    WaveFunction psi;
    double energy = 0.0;
    int sweeps = 0;
    bool converged = false;
};

// Imaginary-time projection onto the interacting ground state. A sweep is a
// fixed block of diffusion steps followed by renormalization and an energy
// readout; convergence means the energy moved less than tol over a sweep.
RelaxResult relax_ground_state(const GridSpec& spec, const PotentialSpec& pot,
                               const WaveFunction& guess, double dtau,
                               double tol = 1e-10, int max_sweeps = 500);

// Per-axis probability current J_a = Im(conj(psi) d_a psi) / m_a.
void probability_current(const WaveFunction& psi, SpectralWorkspace& ws,
                         std::vector<std::vector<double>>& out);

// div J, evaluated spectrally in one pass; continuity gives d|psi|^2/dt = -div J.
void current_divergence(const WaveFunction& psi, SpectralWorkspace& ws,
                        std::vector<double>& out);

}  // namespace collapsim
