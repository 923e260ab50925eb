#pragma once

#include "collapsim/rng.hpp"

namespace collapsim {

struct NoiseIncrement {
    double re = 0.0;
    double im = 0.0;
    double dt = 0.0;
};

// dxi = (g1 + i g2) sqrt(dt / 2): E[|dxi|^2] = dt, E[dxi^2] = 0. The real
// transfer combination dxi* + dxi = 2 re has variance 2 dt.
NoiseIncrement sample_noise(RandomStream& rng, double dt);

}  // namespace collapsim
