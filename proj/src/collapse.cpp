#include "collapsim/collapse.hpp"

#include <cmath>
#include <stdexcept>

#include "collapsim/kernels.hpp"

namespace collapsim {

NoiseIncrement sample_noise(RandomStream& rng, double dt) {
    if (!(dt > 0)) throw std::invalid_argument("noise: dt must be positive");
    double s = std::sqrt(0.5 * dt);
    NoiseIncrement xi;
    xi.re = rng.normal() * s;
    xi.im = rng.normal() * s;
    xi.dt = dt;
    return xi;
}

void CollapseParams::validate() const {
    if (!(kappa >= 0) || !std::isfinite(kappa))
        throw std::invalid_argument("collapse: kappa must be finite and non-negative");
    if (!(rest_energy > 0))
        throw std::invalid_argument("collapse: rest energy must be positive");
    if (!(guard_eps > 0))
        throw std::invalid_argument("collapse: guard threshold must be positive");
}

GammaRecord gamma_jk(const WaveFunction& psi, const PotentialFields& fields,
                     const CollapseParams& params, SpectralWorkspace& ws) {
    params.validate();
    const GridSpec& g = psi.spec;
    const std::size_t n = g.total_points();
    if (fields.V.size() != n || ws.n() != n)
        throw std::invalid_argument("gamma: grid mismatch");
    const auto& kt = kernels::active();
    const double cv = g.cell_volume();
    const int dpp = g.dims_per_particle;

    GammaRecord rec;
    const double nrm = kt.norm_sq(psi.amp.data(), n) * cv;
    rec.mean_V = kt.weighted_norm_sq(fields.V.data(), psi.amp.data(), n) * cv / nrm;
    if (std::abs(rec.mean_V) < params.guard_eps * fields.max_abs_V) {
        rec.guard_tripped = true;
        return rec;
    }
    const double inv_mean_V = 1.0 / rec.mean_V;

    // weighted per-axis phase-gradient readouts
    ws.load(psi.amp);
    CVec deriv;
    double usum[2] = {0, 0};
    double rsum = 0;
    for (int a = 0; a < g.config_dims(); ++a) {
        ws.derivative_from_khat(a, deriv);
        const int comp = a % dpp;
        const bool is_j = a < dpp;
        const double* gv = fields.gradj[std::size_t(comp)].data();
        double us = 0, rs = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double w = fields.V[i] * inv_mean_V;
            double im = std::imag(std::conj(psi.amp[i]) * deriv[i]);
            us += w * im;
            rs += w * gv[i] * im;
        }
        usum[comp] += us;
        rsum += is_j ? rs / g.mass_j : -rs / g.mass_k;
    }
    const double M = g.mass_j + g.mass_k;
    for (int d = 0; d < dpp; ++d) rec.u[std::size_t(d)] = usum[d] * cv / (M * nrm);
    rec.numerator = std::abs(rsum) * cv / nrm;

    // weighted state in the frame of its center of mass; the boost phase is
    // separable across axes, so build per-axis tables first
    std::array<CVec, 4> ph;
    for (int a = 0; a < g.config_dims(); ++a) {
        const double coef = g.axis_mass(a) * rec.u[std::size_t(a % dpp)];
        ph[std::size_t(a)].resize(std::size_t(g.points_per_axis));
        for (int i = 0; i < g.points_per_axis; ++i) {
            double arg = -coef * g.coord(i);
            ph[std::size_t(a)][std::size_t(i)] = cplx(std::cos(arg), std::sin(arg));
        }
    }
    CVec cm(n);
    int idx[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        g.unravel(i, idx);
        cplx p = ph[0][std::size_t(idx[0])];
        for (int a = 1; a < g.config_dims(); ++a) p *= ph[std::size_t(a)][std::size_t(idx[a])];
        cm[i] = fields.V[i] * inv_mean_V * psi.amp[i] * p;
    }

    rec.weighting_norm = kt.norm_sq(cm.data(), n) * cv;
    double vcm = kt.weighted_norm_sq(fields.V.data(), cm.data(), n) * cv;
    ws.load(cm);
    double tcm = ws.kinetic_from_khat();
    rec.denominator = (tcm + vcm) / rec.weighting_norm - params.e0;
    if (!(rec.denominator > 0))
        throw std::domain_error(
            "gamma: energy floor is at or above the available energy; "
            "lower e0 in the scenario");
    rec.gamma = rec.numerator / rec.denominator;
    return rec;
}

KickResult apply_stochastic(WaveFunction& psi, const PotentialFields& fields,
                            const CollapseParams& params, const NoiseIncrement& xi,
                            SpectralWorkspace& ws) {
    const std::size_t n = psi.amp.size();
    const auto& kt = kernels::active();

    KickResult kr;
    kr.rate = gamma_jk(psi, fields, params, ws);
    kr.applied_scale = params.kappa * std::sqrt(kr.rate.gamma) / params.rest_energy;
    if (kr.applied_scale == 0.0) return kr;

    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = kr.applied_scale * (fields.V[i] - kr.rate.mean_V);

    const double before = kt.norm_sq(psi.amp.data(), n);
    kt.collapse_apply(psi.amp.data(), v.data(), xi.re, xi.im, -0.5 * xi.dt, n);
    const double after = kt.norm_sq(psi.amp.data(), n);
    kr.norm_excess = after / before - 1.0;
    kt.scale(psi.amp.data(), std::sqrt(before / after), n);
    return kr;
}

SdeStepper::SdeStepper(const GridSpec& spec, const PotentialSpec& pot,
                       const CollapseParams& params, double dt)
    : prop_(spec, pot, dt), params_(params) {
    params_.validate();
    if (params_.kappa != 0.0 && !(dt > 0))
        throw std::invalid_argument("stepper: stochastic runs need a positive dt");
}

StepRecord SdeStepper::step(WaveFunction& psi, RandomStream& rng) {
    prop_.step(psi);
    StepRecord rec;
    if (params_.kappa != 0.0) {
        rec.noise = sample_noise(rng, prop_.dt());
        rec.kick = apply_stochastic(psi, prop_.fields(), params_, rec.noise, prop_.workspace());
        rec.stochastic = true;
    }
    return rec;
}

}  // namespace collapsim
