#include "collapsim/potential.hpp"

#include <cmath>
#include <stdexcept>

namespace collapsim {

double min_image(double delta, double extent) {
    double period = 2.0 * extent;
    return delta - period * std::floor((delta + extent) / period);
}

void PotentialSpec::validate() const {
    if (family == PotentialFamily::gaussian_well && !(range > 0))
        throw std::invalid_argument("potential: gaussian range must be positive");
    if (family == PotentialFamily::harmonic && !(depth > 0))
        throw std::invalid_argument("potential: harmonic stiffness must be positive");
    if (!std::isfinite(depth) || !std::isfinite(range) || !std::isfinite(softening))
        throw std::invalid_argument("potential: parameters must be finite");
}

double PotentialSpec::eval_r(double r, double soft) const {
    switch (family) {
        case PotentialFamily::gaussian_well:
            return depth * std::exp(-r * r / (2.0 * range * range));
        case PotentialFamily::soft_coulomb:
            return depth / std::sqrt(r * r + soft * soft);
        case PotentialFamily::harmonic:
            return 0.5 * depth * r * r;
    }
    return 0.0;
}

double PotentialSpec::slope_over_r(double r, double soft) const {
    switch (family) {
        case PotentialFamily::gaussian_well: {
            double s2 = range * range;
            return -depth / s2 * std::exp(-r * r / (2.0 * s2));
        }
        case PotentialFamily::soft_coulomb: {
            double q = r * r + soft * soft;
            return -depth / (q * std::sqrt(q));
        }
        case PotentialFamily::harmonic:
            return depth;
    }
    return 0.0;
}

double PotentialSpec::curvature(double r, double soft) const {
    switch (family) {
        case PotentialFamily::gaussian_well: {
            double s2 = range * range;
            double g = std::exp(-r * r / (2.0 * s2));
            return depth * g * (r * r / (s2 * s2) - 1.0 / s2);
        }
        case PotentialFamily::soft_coulomb: {
            double q = r * r + soft * soft;
            return depth * (2.0 * r * r - soft * soft) / (q * q * std::sqrt(q));
        }
        case PotentialFamily::harmonic:
            return depth;
    }
    return 0.0;
}

PotentialFields bake_potential(const GridSpec& spec, const PotentialSpec& pot) {
    spec.validate();
    pot.validate();
    PotentialFields f;
    f.spec = spec;
    f.pot = pot;
    f.softening = pot.softening > 0 ? pot.softening : 2.0 * spec.spacing();

    const std::size_t n = spec.total_points();
    const int dpp = spec.dims_per_particle;
    f.V.resize(n);
    for (int d = 0; d < dpp; ++d) f.gradj[std::size_t(d)].resize(n);
    f.lap_pair.resize(n);

    int idx[4] = {0, 0, 0, 0};
    double delta[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        spec.unravel(i, idx);
        double r2 = 0;
        for (int d = 0; d < dpp; ++d) {
            delta[d] = min_image(spec.coord(idx[d]) - spec.coord(idx[dpp + d]), spec.extent);
            r2 += delta[d] * delta[d];
        }
        double r = std::sqrt(r2);
        double v = pot.eval_r(r, f.softening);
        double sor = pot.slope_over_r(r, f.softening);
        double curv = pot.curvature(r, f.softening);
        f.V[i] = v;
        for (int d = 0; d < dpp; ++d) f.gradj[std::size_t(d)][i] = sor * delta[d];
        // radial laplacian per particle is V'' + (D-1) V'/r; both particles add
        f.lap_pair[i] = 2.0 * (curv + double(dpp - 1) * sor);
        f.max_abs_V = std::max(f.max_abs_V, std::abs(v));
    }
    return f;
}

}  // namespace collapsim
