#include "collapsim/operators.hpp"

#include <cmath>
#include <stdexcept>

#include "collapsim/kernels.hpp"

namespace collapsim {

Observables observables(const WaveFunction& psi, const PotentialFields& fields,
                        SpectralWorkspace& ws) {
    const GridSpec& g = psi.spec;
    const std::size_t n = g.total_points();
    if (fields.V.size() != n || ws.n() != n)
        throw std::invalid_argument("observables: grid mismatch");
    const auto& kt = kernels::active();
    const double cv = g.cell_volume();

    Observables obs;
    obs.mean_V = kt.weighted_norm_sq(fields.V.data(), psi.amp.data(), n) * cv;

    ws.load(psi.amp);
    obs.mean_T = ws.kinetic_from_khat();
    obs.mean_H = obs.mean_T + obs.mean_V;

    // per-particle momenta from position-space inner products; the real
    // part of <psi|d psi> must vanish for a normalized state, so it doubles
    // as a self-adjointness residual
    const int dpp = g.dims_per_particle;
    CVec deriv;
    std::array<CVec, 4> saved;               // kept for the planar L readout
    for (int a = 0; a < g.config_dims(); ++a) {
        ws.derivative_from_khat(a, deriv);
        cplx ip = kt.dot(psi.amp.data(), deriv.data(), n) * cv;
        double p = ip.imag();                // <-i d/dx> = Im <psi|psi'>
        obs.max_imag_residual = std::max(obs.max_imag_residual, std::abs(ip.real()));
        int comp = a % dpp;
        if (a < dpp) {
            obs.mean_P_j[std::size_t(comp)] = p;
        } else {
            obs.mean_P_k[std::size_t(comp)] = p;
        }
        if (dpp == 2) saved[std::size_t(a)] = deriv;
    }
    for (int c = 0; c < dpp; ++c)
        obs.mean_P_total[std::size_t(c)] =
            obs.mean_P_j[std::size_t(c)] + obs.mean_P_k[std::size_t(c)];

    if (dpp == 2) {
        // L = sum over particles of (x p_y - y p_x)
        obs.has_L = true;
        cplx acc(0, 0);
        int idx[4];
        for (std::size_t f = 0; f < n; ++f) {
            g.unravel(f, idx);
            cplx s = g.coord(idx[0]) * saved[1][f] - g.coord(idx[1]) * saved[0][f] +
                     g.coord(idx[2]) * saved[3][f] - g.coord(idx[3]) * saved[2][f];
            acc += std::conj(psi.amp[f]) * s;
        }
        acc *= cv;
        obs.mean_L = acc.imag();             // expectation of -i (x d_y - y d_x)
        obs.max_imag_residual = std::max(obs.max_imag_residual, std::abs(acc.real()));
    }
    return obs;
}

PairPropagator::PairPropagator(const GridSpec& spec, const PotentialSpec& pot, double dt)
    : spec_(spec), fields_(bake_potential(spec, pot)), ws_(spec), dt_(dt) {
    scratch_.assign(spec_.total_points(), cplx(0, 0));
    rebuild_tables();
}

void PairPropagator::set_dt(double dt) {
    if (dt == dt_) return;
    dt_ = dt;
    rebuild_tables();
}

void PairPropagator::rebuild_tables() {
    const std::size_t n = spec_.total_points();
    vphase_.resize(n);
    kphase_.resize(n);
    const double half = 0.5 * dt_;
    for (std::size_t i = 0; i < n; ++i) {
        double a = -fields_.V[i] * half;
        vphase_[i] = cplx(std::cos(a), std::sin(a));
    }
    const double inv_n = 1.0 / double(n);
    const auto& kin = ws_.kinetic_factor();
    for (std::size_t i = 0; i < n; ++i) {
        double a = -kin[i] * dt_;
        kphase_[i] = cplx(std::cos(a) * inv_n, std::sin(a) * inv_n);
    }
}

void PairPropagator::step(WaveFunction& psi) {
    const std::size_t n = spec_.total_points();
    if (psi.amp.size() != n) throw std::invalid_argument("propagator: grid mismatch");
    const auto& kt = kernels::active();
    kt.cmul(psi.amp.data(), vphase_.data(), n);
    ws_.forward(psi.amp.data(), scratch_.data());
    kt.cmul(scratch_.data(), kphase_.data(), n);
    ws_.backward(scratch_.data(), psi.amp.data());
    kt.cmul(psi.amp.data(), vphase_.data(), n);
    psi.time += dt_;
}

double stable_dt(const GridSpec& spec, const PotentialFields& fields) {
    double m_min = std::min(spec.mass_j, spec.mass_k);
    double dt = 0.1 * m_min * spec.spacing() * spec.spacing();
    if (fields.max_abs_V > 0) dt = std::min(dt, 0.05 / fields.max_abs_V);
    return dt;
}

RelaxResult relax_ground_state(const GridSpec& spec, const PotentialSpec& pot,
                               const WaveFunction& guess, double dtau,
                               double tol, int max_sweeps) {
    if (!(dtau > 0)) throw std::invalid_argument("relax: dtau must be positive");
    PotentialFields fields = bake_potential(spec, pot);
    SpectralWorkspace ws(spec);
    const std::size_t n = spec.total_points();
    const auto& kt = kernels::active();

    // diffusion analogue of the split step: real decay factors
    CVec vdecay(n), kdecay(n), scratch(n);
    for (std::size_t i = 0; i < n; ++i)
        vdecay[i] = cplx(std::exp(-fields.V[i] * 0.5 * dtau), 0.0);
    const double inv_n = 1.0 / double(n);
    const auto& kin = ws.kinetic_factor();
    for (std::size_t i = 0; i < n; ++i)
        kdecay[i] = cplx(std::exp(-kin[i] * dtau) * inv_n, 0.0);

    RelaxResult res;
    res.psi = guess;
    res.psi.normalize();
    res.psi.time = 0.0;

    constexpr int steps_per_sweep = 25;
    double prev = 0.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (int s = 0; s < steps_per_sweep; ++s) {
            kt.cmul(res.psi.amp.data(), vdecay.data(), n);
            ws.forward(res.psi.amp.data(), scratch.data());
            kt.cmul(scratch.data(), kdecay.data(), n);
            ws.backward(scratch.data(), res.psi.amp.data());
            kt.cmul(res.psi.amp.data(), vdecay.data(), n);
            res.psi.normalize();
        }
        ws.load(res.psi.amp);
        double energy = ws.kinetic_from_khat() +
                        kt.weighted_norm_sq(fields.V.data(), res.psi.amp.data(), n) *
                            spec.cell_volume();
        res.sweeps = sweep + 1;
        if (sweep > 0 && std::abs(energy - prev) < tol) {
            res.energy = energy;
            res.converged = true;
            return res;
        }
        prev = energy;
        res.energy = energy;
    }
    return res;
}

void probability_current(const WaveFunction& psi, SpectralWorkspace& ws,
                         std::vector<std::vector<double>>& out) {
    const GridSpec& g = psi.spec;
    const std::size_t n = g.total_points();
    ws.load(psi.amp);
    out.assign(std::size_t(g.config_dims()), std::vector<double>(n));
    CVec deriv;
    for (int a = 0; a < g.config_dims(); ++a) {
        ws.derivative_from_khat(a, deriv);
        const double inv_m = 1.0 / g.axis_mass(a);
        auto& j = out[std::size_t(a)];
        for (std::size_t f = 0; f < n; ++f)
            j[f] = inv_m * std::imag(std::conj(psi.amp[f]) * deriv[f]);
    }
}

void current_divergence(const WaveFunction& psi, SpectralWorkspace& ws,
                        std::vector<double>& out) {
    const GridSpec& g = psi.spec;
    const std::size_t n = g.total_points();
    ws.load(psi.amp);
    // div J = sum_a Im(conj(psi) d_a^2 psi) / m_a; in the spectral picture
    // the factor sum_a (-k_a^2 / m_a) is -2 * kinetic_factor
    CVec hat(n), lap(n);
    const auto& kin = ws.kinetic_factor();
    const double inv_n = 1.0 / double(n);
    for (std::size_t f = 0; f < n; ++f)
        hat[f] = ws.khat()[f] * (-2.0 * kin[f] * inv_n);
    ws.backward(hat.data(), lap.data());
    out.resize(n);
    for (std::size_t f = 0; f < n; ++f)
        out[f] = std::imag(std::conj(psi.amp[f]) * lap[f]);
}

}  // namespace collapsim
