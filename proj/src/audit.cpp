#include "collapsim/audit.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace collapsim {

namespace {

AuditCheck make_check(std::string name, double residual, double tol) {
    AuditCheck c;
    c.name = std::move(name);
    c.max_residual = residual;
    c.tolerance = tol;
    c.pass = residual <= tol;
    return c;
}

void require_same_grid(const GridSpec& a, const GridSpec& b) {
    if (a.dims_per_particle != b.dims_per_particle ||
        a.points_per_axis != b.points_per_axis || a.extent != b.extent ||
        a.mass_j != b.mass_j || a.mass_k != b.mass_k)
        throw std::invalid_argument("audit: states live on different grids");
}

}  // namespace

bool AuditReport::all_pass() const {
    for (const AuditCheck& c : checks)
        if (!c.pass) return false;
    return true;
}

const AuditCheck* AuditReport::find(std::string_view name) const {
    for (const AuditCheck& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::string to_text(const AuditReport& rep) {
    std::string out;
    char line[160];
    for (const AuditCheck& c : rep.checks) {
        std::snprintf(line, sizeof line, "%-26s residual %.6e tolerance %.6e %s\n",
                      c.name.c_str(), c.max_residual, c.tolerance,
                      c.pass ? "PASS" : "FAIL");
        out += line;
    }
    return out;
}

AuditReport density_change_decomposition(const WaveFunction& before,
                                         const WaveFunction& after,
                                         const PotentialSpec& pot,
                                         const CollapseParams& params,
                                         const NoiseIncrement& noise,
                                         double pointwise_tol,
                                         const Region* branch_region,
                                         double branch_tol) {
    require_same_grid(before.spec, after.spec);
    const GridSpec& spec = before.spec;
    const std::size_t n = before.amp.size();
    const double cv = spec.cell_volume();
    const double dt = noise.dt;

    SpectralWorkspace ws(spec);
    std::vector<double> divj;
    current_divergence(before, ws, divj);

    std::vector<double> transfer(n, 0.0);
    if (params.kappa != 0.0) {
        // replay the unitary half to rebuild the kick field on the state
        // that was actually kicked
        PairPropagator prop(spec, pot, dt);
        WaveFunction mid = before;
        prop.step(mid);
        GammaRecord g = gamma_jk(mid, prop.fields(), params, ws);
        if (g.gamma > 0.0) {
            const double a = params.kappa * std::sqrt(g.gamma) / params.rest_energy;
            const double s = 2.0 * noise.re;
            const std::vector<double>& V = prop.fields().V;
            for (std::size_t i = 0; i < n; ++i)
                transfer[i] = std::norm(mid.amp[i]) * a * (V[i] - g.mean_V) * s;
        }
    }

    double integral = 0.0, max_resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double drho = std::norm(after.amp[i]) - std::norm(before.amp[i]);
        integral += drho;
        double r = std::abs(drho + divj[i] * dt - transfer[i]);
        max_resid = std::max(max_resid, r);
    }
    integral *= cv;

    AuditReport rep;
    rep.checks.push_back(make_check("probability integral", std::abs(integral), 1e-10));
    rep.checks.push_back(make_check("pointwise decomposition", max_resid, pointwise_tol));

    if (branch_region) {
        std::vector<std::uint8_t> mask = region_mask(spec, *branch_region);
        double fd = branch_weight(after, mask) - branch_weight(before, mask);
        double predicted = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i]) predicted += transfer[i] - divj[i] * dt;
        predicted *= cv;
        rep.checks.push_back(
            make_check("branch transfer", std::abs(fd - predicted), branch_tol));
    }
    return rep;
}

double operator_commutation_residual(const WaveFunction& psi,
                                     const PotentialFields& fields,
                                     ConservedQ which, SpectralWorkspace& ws) {
    const GridSpec& spec = psi.spec;
    const int d = spec.dims_per_particle;
    if (which == ConservedQ::L && d < 2)
        throw std::invalid_argument("angular momentum audit needs a planar grid");
    const std::size_t n = psi.amp.size();

    // centered interaction shape at unit peak; the coupling scales out
    double nsq = 0.0, vbar = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = std::norm(psi.amp[i]);
        nsq += r;
        vbar += r * fields.V[i];
    }
    if (nsq <= 0.0) return 0.0;
    vbar /= nsq;
    std::vector<double> w(n);
    double wmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = fields.V[i] - vbar;
        wmax = std::max(wmax, std::abs(w[i]));
    }
    if (wmax == 0.0) return 0.0;
    CVec wpsi(n);
    double wpsi_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] /= wmax;
        wpsi[i] = w[i] * psi.amp[i];
        wpsi_max = std::max(wpsi_max, std::abs(wpsi[i]));
    }

    double kmax = 0.0;
    for (int a = 0; a < spec.config_dims(); ++a)
        for (double kv : ws.axis_wavenumbers(a)) kmax = std::max(kmax, std::abs(kv));

    double max_resid = 0.0;
    if (which == ConservedQ::P) {
        CVec da(n), db(n), ea(n), eb(n);
        for (int dd = 0; dd < d; ++dd) {
            ws.load(psi.amp);
            ws.derivative_from_khat(dd, da);
            ws.derivative_from_khat(dd + d, db);
            ws.load(wpsi);
            ws.derivative_from_khat(dd, ea);
            ws.derivative_from_khat(dd + d, eb);
            for (std::size_t i = 0; i < n; ++i) {
                cplx r = (ea[i] + eb[i]) - w[i] * (da[i] + db[i]);
                max_resid = std::max(max_resid, std::abs(r));
            }
        }
        return max_resid / (kmax * wpsi_max + 1e-300);
    }

    // L: x cross gradient summed over both particles, z component
    auto apply_l = [&](const CVec& in, CVec& out) {
        ws.load(in);
        CVec dx(n), dy(n);
        std::fill(out.begin(), out.end(), cplx{0, 0});
        int idx[4];
        for (int p = 0; p < 2; ++p) {
            ws.derivative_from_khat(p * d + 0, dx);
            ws.derivative_from_khat(p * d + 1, dy);
            for (std::size_t i = 0; i < n; ++i) {
                spec.unravel(i, idx);
                double x = spec.coord(idx[p * d + 0]);
                double y = spec.coord(idx[p * d + 1]);
                out[i] += x * dy[i] - y * dx[i];
            }
        }
    };
    CVec lpsi(n), lwpsi(n);
    apply_l(psi.amp, lpsi);
    apply_l(wpsi, lwpsi);
    for (std::size_t i = 0; i < n; ++i) {
        cplx r = lwpsi[i] - w[i] * lpsi[i];
        max_resid = std::max(max_resid, std::abs(r));
    }
    return max_resid / (kmax * spec.extent * wpsi_max + 1e-300);
}

AuditReport conservation_report(const std::vector<Observables>& series,
                                const std::vector<double>& commutation_residuals,
                                ConservedQ which, double per_step_tol,
                                double total_rel_tol, double pointwise_tol) {
    if (series.size() < 2)
        throw std::invalid_argument("conservation audit needs at least two records");
    if (which == ConservedQ::L) {
        for (const Observables& o : series)
            if (!o.has_L)
                throw std::invalid_argument("angular momentum audit needs a planar grid");
    }

    auto diff = [which](const Observables& a, const Observables& b) {
        if (which == ConservedQ::L) return std::abs(a.mean_L - b.mean_L);
        double m = 0.0;
        for (int dd = 0; dd < 2; ++dd)
            m = std::max(m, std::abs(a.mean_P_total[dd] - b.mean_P_total[dd]));
        return m;
    };

    AuditReport rep;
    double per_step = 0.0;
    rep.series.reserve(series.size() - 1);
    for (std::size_t i = 1; i < series.size(); ++i) {
        double c = diff(series[i], series[i - 1]);
        rep.series.push_back(c);
        per_step = std::max(per_step, c);
    }
    double base;
    if (which == ConservedQ::L) {
        base = std::abs(series.front().mean_L);
    } else {
        base = std::hypot(series.front().mean_P_total[0],
                          series.front().mean_P_total[1]);
    }
    double total = diff(series.back(), series.front()) / std::max(base, 1e-12);

    rep.checks.push_back(make_check("per-step drift", per_step, per_step_tol));
    rep.checks.push_back(make_check("total drift", total, total_rel_tol));
    if (!commutation_residuals.empty()) {
        double m = *std::max_element(commutation_residuals.begin(),
                                     commutation_residuals.end());
        rep.checks.push_back(make_check("operator identity", m, pointwise_tol));
    }
    return rep;
}

EnergyDeviationTerms energy_deviation_terms(const WaveFunction& psi,
                                            const PotentialFields& fields,
                                            const CollapseParams& params,
                                            const GammaRecord& g,
                                            const NoiseIncrement& nz,
                                            SpectralWorkspace& ws) {
    const GridSpec& spec = psi.spec;
    const std::size_t n = psi.amp.size();
    const double cv = spec.cell_volume();
    const double dt = nz.dt;
    if (!(dt > 0)) throw std::invalid_argument("energy audit: dt must be positive");

    EnergyDeviationTerms out;

    double nsq = 0.0;
    for (const cplx& a : psi.amp) nsq += std::norm(a);
    nsq *= cv;

    ws.load(psi.amp);
    double tmean = ws.kinetic_from_khat() / nsq;
    out.ke_relativistic_correction = -tmean * tmean / (2.0 * params.rest_energy);

    if (!(g.gamma > 0.0)) return out;    // the kick field vanishes with the rate

    const double a = params.kappa * std::sqrt(g.gamma) / params.rest_energy;
    const double invmj = 1.0 / spec.mass_j;
    const double invmk = 1.0 / spec.mass_k;
    const int d = spec.dims_per_particle;

    // H psi from the cached transform
    CVec hpsi(n), tmp(n);
    {
        const CVec& kh = ws.khat();
        const std::vector<double>& kin = ws.kinetic_factor();
        const double inv = 1.0 / double(n);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = kh[i] * (kin[i] * inv);
        ws.backward(tmp.data(), hpsi.data());
        for (std::size_t i = 0; i < n; ++i) hpsi[i] += fields.V[i] * psi.amp[i];
    }

    // symmetric line, direct
    cplx t_hv{0, 0};
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = a * (fields.V[i] - g.mean_V);
        t_hv += std::conj(hpsi[i]) * (v[i] * psi.amp[i]);
    }
    t_hv *= cv / nsq;
    out.proportional_term = 2.0 * nz.re * std::real(t_hv) / dt;

    // commutator line from the analytic derivatives: [H, v] applied to psi
    // is -( sum_a (1/2 m_a) (lap_a v) + (1/m_a) grad_a v . grad_a ) psi
    cplx bracket{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        double scal = 0.25 * (invmj + invmk) * fields.lap_pair[i];
        bracket += std::conj(psi.amp[i]) * psi.amp[i] * scal;
    }
    {
        CVec dfield(n);
        for (int dd = 0; dd < d; ++dd) {
            ws.derivative_from_khat(dd, dfield);
            for (std::size_t i = 0; i < n; ++i)
                bracket += std::conj(psi.amp[i]) *
                           (invmj * fields.gradj[std::size_t(dd)][i] * dfield[i]);
            ws.derivative_from_khat(dd + d, dfield);
            for (std::size_t i = 0; i < n; ++i)
                bracket -= std::conj(psi.amp[i]) *
                           (invmk * fields.gradj[std::size_t(dd)][i] * dfield[i]);
        }
    }
    cplx comm = -a * bracket * cv / nsq;
    out.gradient_term = std::real(cplx{nz.re, nz.im} * comm) / dt;

    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double g2 = 0.0;
        for (int dd = 0; dd < d; ++dd) {
            double gv = fields.gradj[std::size_t(dd)][i];
            g2 += gv * gv;
        }
        q += std::norm(psi.amp[i]) * g2;
    }
    out.quadratic_term = a * a * 0.5 * (invmj + invmk) * q * cv / nsq;
    return out;
}

AuditReport martingale_check(const std::vector<std::vector<double>>& traces) {
    if (traces.size() < 100)
        throw std::invalid_argument("martingale audit needs at least 100 traces");
    const std::size_t m = traces.front().size();
    if (m < 2)
        throw std::invalid_argument("martingale audit needs checkpoints after the start");
    for (const std::vector<double>& t : traces)
        if (t.size() != m)
            throw std::invalid_argument("martingale audit needs equally long traces");

    const double nn = double(traces.size());
    double mean0 = 0.0;
    for (const std::vector<double>& t : traces) mean0 += t[0];
    mean0 /= nn;

    AuditReport rep;
    rep.series.reserve(m - 1);
    double worst = 0.0;
    for (std::size_t c = 1; c < m; ++c) {
        double s = 0.0, s2 = 0.0;
        for (const std::vector<double>& t : traces) {
            s += t[c];
            s2 += t[c] * t[c];
        }
        double mean = s / nn;
        double var = std::max(s2 / nn - mean * mean, 0.0) * nn / (nn - 1.0);
        double se = std::sqrt(var / nn);
        double dev = std::abs(mean - mean0);
        double z;
        if (dev == 0.0)
            z = 0.0;
        else if (se > 0.0)
            z = dev / se;
        else
            z = std::numeric_limits<double>::infinity();
        rep.series.push_back(z);
        worst = std::max(worst, z);
    }
    rep.checks.push_back(make_check("martingale checkpoints", worst, 3.0));
    return rep;
}

}  // namespace collapsim
