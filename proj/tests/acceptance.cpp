// Acceptance gate: ten end-to-end claims about the simulator, checked
// against the shipped presets and the closed-form scale estimates. Each
// criterion prints one [PASS]/[FAIL] line with the measured numbers and
// the pinned tolerance; the exit status is the number of failures. The
// statistical criteria run full ensembles, so expect a few minutes on a
// single core.

#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "collapsim/audit.hpp"
#include "collapsim/branchwalk.hpp"
#include "collapsim/collapse.hpp"
#include "collapsim/grid.hpp"
#include "collapsim/operators.hpp"
#include "collapsim/potential.hpp"
#include "collapsim/rng.hpp"
#include "collapsim/scenario.hpp"
#include "collapsim/spectral.hpp"

using namespace collapsim;

namespace {

std::string txt(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return buf;
}

double summary_row(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto sp = line.find(' ');
        if (sp != std::string::npos && line.compare(0, sp, name) == 0)
            return std::stod(line.substr(sp + 1));
    }
    throw std::runtime_error("summary row missing: " + name);
}

bool close_rel(double x, double target, double rel) {
    return std::abs(x - target) <= rel * std::abs(target);
}

// least-squares slope of y against x
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

// H applied through the same spectral tables the propagator uses
CVec apply_h(const PotentialFields& f, SpectralWorkspace& ws, const CVec& in) {
    const std::size_t n = in.size();
    CVec kh(n), out(n);
    ws.forward(in.data(), kh.data());
    const std::vector<double>& kin = ws.kinetic_factor();
    const double inv = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) kh[i] *= kin[i] * inv;
    ws.backward(kh.data(), out.data());
    for (std::size_t i = 0; i < n; ++i) out[i] += f.V[i] * in[i];
    return out;
}

cplx dot_cv(const CVec& a, const CVec& b, double cv) {
    cplx s{0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s * cv;
}

NoiseIncrement symmetric_noise(double dt) {
    double c = std::sqrt(dt / 2.0);
    return NoiseIncrement{c, c, dt};
}

int g_failures = 0;

void criterion(int id, const char* name,
               const std::function<std::pair<bool, std::string>()>& body) {
    bool ok = false;
    std::string detail;
    try {
        auto r = body();
        ok = r.first;
        detail = std::move(r.second);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %2d %-32s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

struct BornBatch {
    double p0 = 0.0;
    BornEstimate est;
};

}  // namespace

int main() {
    std::vector<BornBatch> born;  // shared between criteria 1 and 3

    // Reduced-walk ensembles reproduce the Born frequencies. Walk
    // parameters come from the shipped preset; only the starting weight
    // varies.
    criterion(1, "reduced walk Born frequencies", [&] {
        WalkParams p = preset("single_detector_reduced").walk;
        const double p0s[] = {0.1, 0.3, 0.5, 0.7, 0.9};
        double worst = 0.0;
        std::size_t stuck = 0;
        for (int i = 0; i < 5; ++i) {
            BornBatch b;
            b.p0 = p0s[i];
            b.est = born_estimate(p0s[i], 20000, p, 9000 + i, 2000, 10);
            stuck += b.est.unterminated;
            double sigma = std::sqrt(p0s[i] * (1.0 - p0s[i]) / 20000.0);
            worst = std::max(worst, std::abs(b.est.frequency - b.p0) / sigma);
            born.push_back(std::move(b));
        }
        bool ok = worst <= 3.0 && stuck == 0;
        return std::make_pair(ok, txt("worst |f-p0| %.2f sigma (limit 3), %zu unterminated",
                                      worst, stuck));
    });

    // A grid-detector ensemble fires branch A at its initial weight. The
    // preset pins the weight near 0.3 and its inflated coupling has to be
    // called out as unphysical.
    criterion(2, "grid detector branch statistics", [&] {
        ScenarioOutputs out = execute_scenario(preset("single_detector_grid"));
        const std::string& s = out.files.at("summary.txt");
        double w0 = summary_row(s, "initial_weight_a");
        double a = summary_row(s, "count_branch_a");
        double b = summary_row(s, "count_branch_b");
        double failed = summary_row(s, "failures");
        bool flagged = false;
        for (const auto& n : out.notes)
            if (n.find("coupling inflated") != std::string::npos) flagged = true;
        double freq = a / (a + b);
        double sigma = std::sqrt(w0 * (1.0 - w0) / (a + b));
        bool ok = std::abs(w0 - 0.3) <= 0.02 && failed == 0 && flagged &&
                  std::abs(freq - w0) <= 3.0 * sigma;
        return std::make_pair(
            ok, txt("w0 %.4f, decided %g/%g -> %.3f (3 sigma %.3f), flagged %s",
                    w0, a, a + b, freq, 3.0 * sigma, flagged ? "yes" : "no"));
    });

    // The branch weight is a martingale: at every fixed-step checkpoint
    // the ensemble mean stays within three standard errors of the start.
    criterion(3, "martingale checkpoint drift", [&] {
        if (born.empty()) return std::make_pair(false, std::string("no ensembles"));
        double worst = 0.0;
        std::size_t used = 0;
        for (const auto& b : born)
            for (std::size_t k = 0; k < b.est.checkpoint_mean.size(); ++k) {
                if (!(b.est.checkpoint_se[k] > 0)) continue;
                ++used;
                worst = std::max(worst, std::abs(b.est.checkpoint_mean[k] - b.p0) /
                                            b.est.checkpoint_se[k]);
            }
        bool ok = used >= 40 && worst <= 3.0;
        return std::make_pair(ok, txt("worst drift %.2f se over %zu checkpoints (limit 3)",
                                      worst, used));
    });

    // Mean absorption time scales like 1 / s^2 in the per-step transfer
    // scale s = kappa sqrt(2 dt).
    criterion(4, "absorption step scaling", [&] {
        const double svals[] = {1e-2, 5e-3, 2.5e-3};
        std::vector<double> lx, ly;
        std::size_t stuck = 0;
        for (int i = 0; i < 3; ++i) {
            WalkParams p;  // kappa1 = 1 on a constant unit rate
            p.dt = 0.5 * svals[i] * svals[i];
            p.termination_eps = 1e-2;
            p.max_steps = 30000000;
            BornEstimate e = born_estimate(0.5, 400, p, 7700 + i);
            stuck += e.unterminated;
            lx.push_back(std::log(svals[i]));
            ly.push_back(std::log(e.mean_steps));
        }
        double slope = fit_slope(lx, ly);
        std::uint64_t far = walk_steps_estimate(5e-4);
        bool ok = stuck == 0 && std::abs(slope + 2.0) <= 0.2 && far == 4000000 &&
                  far > 1000000;
        return std::make_pair(
            ok, txt("slope %.3f (want -2 +/- 0.2), steps(5e-4) = %llu", slope,
                    static_cast<unsigned long long>(far)));
    });

    // Identical pulse schedules cancel exactly: no walk decides within ten
    // times the 1/s^2 budget and the weight stays parked at one half.
    // Onset jitter of a tenth of the pulse width breaks the cancellation.
    criterion(5, "dual detector cancellation", [&] {
        WalkParams pd = preset("dual_detector_reduced").walk;  // max_steps is the budget
        BornEstimate z = born_estimate(0.5, 200, pd, 6100);
        bool frozen = (z.absorbed_one + z.absorbed_zero) == 0 && z.band_fraction >= 0.95;
        WalkParams pj = pd;
        pj.schedule1.onset_jitter = 0.1 * pj.schedule1.width;
        pj.schedule2.onset_jitter = 0.1 * pj.schedule2.width;
        pj.max_steps = 3000000;
        BornEstimate j = born_estimate(0.5, 200, pj, 6101);
        double decided = double(j.absorbed_one + j.absorbed_zero) / double(j.n_walks);
        bool ok = frozen && decided >= 0.99;
        return std::make_pair(
            ok, txt("synced: 0 of %zu decided, band %.3f; jittered: %.1f%% decided",
                    z.n_walks, z.band_fraction, 100.0 * decided));
    });

    // The rate integral over one grazing scattering pass lands at order
    // one, a relaxed stationary pair accumulates nothing, and packets ten
    // interaction ranges apart give no rate at all.
    criterion(6, "rate integral windows", [&] {
        ScenarioOutputs pr = execute_scenario(preset("scattering_gamma_probe"));
        double gi = summary_row(pr.files.at("summary.txt"), "gamma_integral");

        GridSpec g;
        g.dims_per_particle = 1;
        g.points_per_axis = 64;
        g.extent = 8.0;
        PotentialSpec trap;
        trap.family = PotentialFamily::harmonic;
        trap.depth = 1.0;
        // tight relaxation: residual eigenstate error feeds gamma
        // quadratically once the phases start rotating
        RelaxResult r = relax_ground_state(g, trap, pair_coherent(g, 0.0, 2.0, 0.0, 1.0),
                                           0.002, 1e-14, 20000);
        if (!r.converged) return std::make_pair(false, std::string("relaxation stalled"));
        CollapseParams cp;
        cp.kappa = 0.0;
        cp.e0 = r.energy - 1.0;  // keep the denominator positive
        PotentialFields f = bake_potential(g, trap);
        SpectralWorkspace ws(g);
        SdeStepper st(g, trap, cp, 1e-3);
        RandomStream rng(1, 0);
        WaveFunction psi = r.psi;
        double stationary = 0.0;
        for (int i = 0; i < 400; ++i) {
            st.step(psi, rng);
            stationary += gamma_jk(psi, f, cp, ws).gamma * 1e-3;
        }

        GridSpec gfar = g;
        gfar.extent = 16.0;
        PotentialSpec well = preset("scattering_gamma_probe").potential;
        double d = 5.0 * well.range;  // centers at +/- d: ten ranges apart
        WaveFunction far = gaussian_packet(gfar, PacketSpec{{-d, 0}, {0, 0}, 1.2},
                                           PacketSpec{{d, 0}, {0, 0}, 1.2});
        SpectralWorkspace wsf(gfar);
        PotentialFields ff = bake_potential(gfar, well);
        GammaRecord rec = gamma_jk(far, ff, CollapseParams{}, wsf);

        bool ok = gi >= 1.0 && gi <= 3.0 && stationary < 1e-6 && rec.gamma < 1e-8;
        return std::make_pair(ok,
                              txt("pass integral %.3f (want 1..3), stationary %.1e, "
                                  "separated %.1e",
                                  gi, stationary, rec.gamma));
    });

    // Stochastic kicks commute with the momentum and angular momentum
    // grids on every recorded step, and the unitary leg conserves <L> to
    // rounding.
    criterion(7, "conservation and commutation", [&] {
        ScenarioConfig c = preset("conservation_2d");
        c.run.sample_every = 1;  // residuals on every step
        ScenarioOutputs out = execute_scenario(c);
        double drift = summary_row(out.files.at("summary.txt"), "L_drift_unitary");
        bool ok = out.any_audit && out.audits_pass && drift < 1e-6;
        return std::make_pair(ok, txt("audits %s, unitary <L> drift %.1e (limit 1e-6)",
                                      out.audits_pass ? "pass" : "FAIL", drift));
    });

    // The energy deviation identity closes to O(dt^2): the residual beyond
    // the recorded terms quarters when dt halves, and the coupling sweep
    // reproduces the linear and quadratic slopes.
    criterion(8, "energy identity closure", [&] {
        ScenarioOutputs sw = execute_scenario(preset("energy_deviation_sweep"));
        double gs = summary_row(sw.files.at("summary.txt"), "slope_gradient_term");
        double qs = summary_row(sw.files.at("summary.txt"), "slope_quadratic_term");

        GridSpec g;
        g.dims_per_particle = 1;
        g.points_per_axis = 64;
        g.extent = 8.0;
        PotentialSpec pot;
        pot.family = PotentialFamily::gaussian_well;
        pot.depth = -1.2;
        pot.range = 1.5;
        WaveFunction psi = gaussian_packet(g, PacketSpec{{-1.2, 0}, {1.1, 0}, 0.9},
                                           PacketSpec{{1.2, 0}, {-0.8, 0}, 0.9});
        PotentialFields f = bake_potential(g, pot);
        SpectralWorkspace ws(g);
        CollapseParams cp;
        cp.kappa = 0.8;
        cp.rest_energy = 2.0;
        GammaRecord gr = gamma_jk(psi, f, cp, ws);
        const std::size_t n = psi.amp.size();
        const double cv = g.cell_volume();
        const double amp = cp.kappa * std::sqrt(gr.gamma) / cp.rest_energy;
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = amp * (f.V[i] - gr.mean_V);
        CVec hpsi = apply_h(f, ws, psi.amp);
        CVec vpsi(n);
        for (std::size_t i = 0; i < n; ++i) vpsi[i] = v[i] * psi.amp[i];
        const double e0 = std::real(dot_cv(psi.amp, hpsi, cv));
        const cplx t_hv = dot_cv(hpsi, vpsi, cv);
        // the +/- noise pair averages away the odd moments, leaving the
        // quarter-dt^2 closure defect
        auto gap = [&](double dt) {
            NoiseIncrement xi = symmetric_noise(dt);
            EnergyDeviationTerms t = energy_deviation_terms(psi, f, cp, gr, xi, ws);
            double sum = 0.0;
            for (double sgn : {1.0, -1.0}) {
                cplx z{sgn * xi.re, sgn * xi.im};
                CVec kicked(n);
                for (std::size_t i = 0; i < n; ++i)
                    kicked[i] = psi.amp[i] * (1.0 + v[i] * z - 0.5 * dt * v[i] * v[i]);
                double e = std::real(dot_cv(kicked, apply_h(f, ws, kicked), cv));
                sum += (e - e0) - 2.0 * std::real(z * t_hv) - dt * t.quadratic_term;
            }
            return 0.5 * sum;
        };
        double hi = gap(1e-3);
        double lo = gap(5e-4);
        double ratio = hi / lo;
        bool ok = std::abs(hi) > 1e-14 && ratio > 3.25 && ratio < 4.92 &&
                  std::abs(gs - 1.0) <= 0.2 && std::abs(qs - 2.0) <= 0.3;
        return std::make_pair(
            ok, txt("residual ratio %.2f (want ~4), sweep slopes %.3f / %.3f", ratio,
                    gs, qs));
    });

    // Closed-form scale estimates behind the default coupling bounds.
    criterion(9, "coupling scale arithmetic", [&] {
        double a2 = alpha_squared_reference();
        double mr = max_coupling_ratio();
        double pr = perturbation_ratio(1e-34, 1e-13, 1e-17);
        bool ok = close_rel(std::round(a2 * 1e7) / 1e7, 5.33e-5, 1e-12) &&
                  close_rel(mr, 10.0 * a2, 1e-12) &&
                  close_rel(std::round(mr * 1e4) / 1e4, 5e-4, 1e-12) &&
                  close_rel(pr, 1e-4, 1e-12);
        return std::make_pair(ok, txt("alpha^2 %.3e, max ratio %.3e, perturbation %.3e",
                                      a2, mr, pr));
    });

    // Identical configs give byte-identical outputs for 1 and 8 workers,
    // and the canonical block quoted in the manifest replays them.
    criterion(10, "deterministic replay", [&] {
        auto with_workers = [](ScenarioConfig c, int w) {
            c.run.workers = w;
            return execute_scenario(c);
        };
        ScenarioConfig cd = preset("dual_detector_reduced");
        cd.run.trajectories = 120;
        cd.run.emit.traces = true;
        cd.run.emit.audits = true;
        ScenarioOutputs d1 = with_workers(cd, 1);
        ScenarioOutputs d8 = with_workers(cd, 8);
        ScenarioConfig cg = preset("single_detector_grid");
        cg.run.trajectories = 120;
        ScenarioOutputs g1 = with_workers(cg, 1);
        ScenarioOutputs g8 = with_workers(cg, 8);
        std::string man = manifest_text(cd, d8.notes);
        auto pos = man.find("\n[config]\n");
        if (pos == std::string::npos)
            return std::make_pair(false, std::string("manifest has no config block"));
        ScenarioConfig replay = parse_config(man.substr(pos + 10));
        replay.run.workers = 8;
        ScenarioOutputs r = with_workers(replay, 8);
        bool ok = d1.files == d8.files && g1.files == g8.files && r.files == d1.files;
        return std::make_pair(
            ok, txt("reduced %zu files, grid %zu files, manifest replay %s",
                    d1.files.size(), g1.files.size(),
                    r.files == d1.files ? "identical" : "DIVERGED"));
    });

    std::printf("%d of 10 criteria passed\n", 10 - g_failures);
    return g_failures;
}
