#pragma once

// Radial pair potentials V(|x_j - x_k|) with analytic first and second
// derivatives, plus grid-baked field tables. Separations use the minimum
// image convention so the baked tables are periodic and translation
// invariant, which keeps total momentum exactly conserved by the stepping.

#include <array>
#include <cstddef>
#include <vector>

#include "collapsim/grid.hpp"

namespace collapsim {

enum class PotentialFamily { gaussian_well, soft_coulomb, harmonic };

struct PotentialSpec {
    PotentialFamily family = PotentialFamily::gaussian_well;
    double depth = -1.0;     // well amplitude V0, or stiffness for harmonic
    double range = 1.0;      // gaussian width; unused elsewhere
    double softening = 0.0;  // soft_coulomb core; <= 0 means 2*spacing at bake time

    double eval_r(double r, double soft) const;
    double slope_over_r(double r, double soft) const;  // V'(r) / r, finite at r = 0
    double curvature(double r, double soft) const;     // V''(r)
    void validate() const;
};

struct PotentialFields {
    GridSpec spec;
    PotentialSpec pot;
    double softening = 0.0;                       // resolved value
    std::vector<double> V;                        // per configuration point
    std::array<std::vector<double>, 2> gradj;     // dV/dx_j components; dV/dx_k = -dV/dx_j
    std::vector<double> lap_pair;                 // (lap_j + lap_k) V
    double max_abs_V = 0.0;
};

PotentialFields bake_potential(const GridSpec& spec, const PotentialSpec& pot);

// Wrap a displacement into [-extent, extent).
double min_image(double delta, double extent);

}  // namespace collapsim
