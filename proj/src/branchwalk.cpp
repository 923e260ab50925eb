#include "collapsim/branchwalk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace collapsim {

namespace {

// uniform in [-1, 1), pure function of the inputs
double jitter_unit(std::uint64_t seed, std::uint64_t tag, std::uint64_t pulse,
                   std::uint64_t slot) {
    std::uint64_t x = seed;
    x ^= 0x9E3779B97F4A7C15ull * (tag + 1);
    x ^= 0xBF58476D1CE4E5B9ull * (pulse + 1);
    x ^= 0x94D049BB133111EBull * (slot + 1);
    std::uint64_t v = splitmix64_next(x);
    return double(v >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace

double PulseSchedule::rate(double t, std::uint64_t jitter_seed) const {
    if (period <= 0.0) return height;
    if (t < 0.0) return 0.0;
    double n = std::floor(t / period);
    std::uint64_t p = std::uint64_t(n);
    // nominal onset sits one jitter amplitude into the period so the
    // jittered window never crosses into a neighboring period
    double onset = n * period + onset_jitter +
                   onset_jitter * jitter_unit(jitter_seed, tag, p, 0);
    double h = height * (1.0 + height_jitter * jitter_unit(jitter_seed, tag, p, 1));
    double local = t - onset;
    return (local >= 0.0 && local < width) ? h : 0.0;
}

double PulseSchedule::peak() const {
    if (period <= 0.0) return height;
    return height * (1.0 + height_jitter);
}

void PulseSchedule::validate() const {
    if (!(height >= 0) || !std::isfinite(height))
        throw std::invalid_argument("schedule: height must be finite and non-negative");
    if (!(height_jitter >= 0) || height_jitter > 1)
        throw std::invalid_argument("schedule: height jitter must lie in [0, 1]");
    if (period > 0.0) {
        if (!(width > 0) || width > period)
            throw std::invalid_argument("schedule: pulse width must lie in (0, period]");
        if (!(onset_jitter >= 0) || width + 2.0 * onset_jitter > period)
            throw std::invalid_argument(
                "schedule: jittered pulse window must fit inside one period");
    }
}

PulseSchedule PulseSchedule::constant(double rate) {
    PulseSchedule s;
    s.period = 0.0;
    s.height = rate;
    return s;
}

PulseSchedule PulseSchedule::pulses(double period, double width) {
    PulseSchedule s;
    s.period = period;
    s.width = width;
    s.height = 1.0 / width;      // unit area per pulse
    return s;
}

void WalkParams::validate() const {
    if (!(kappa1 >= 0) || !(kappa2 >= 0))
        throw std::invalid_argument("walk: couplings must be non-negative");
    if (!(dt > 0)) throw std::invalid_argument("walk: dt must be positive");
    if (!(termination_eps > 0.0) || termination_eps > 0.01)
        throw std::invalid_argument("walk: termination threshold must lie in (0, 0.01]");
    schedule1.validate();
    schedule2.validate();
    // per-step kick scale is kappa sqrt(2 g dt); keep its square well below 1
    if (kappa1 * kappa1 * schedule1.peak() * dt > 0.1)
        throw std::invalid_argument("walk: per-step kick variance exceeds 0.1");
    if (kappa2 * kappa2 * schedule2.peak() * dt > 0.1)
        throw std::invalid_argument("walk: per-step kick variance exceeds 0.1");
}

double walk_drive(const WalkParams& p, double t, std::uint64_t jitter_seed) {
    double d = 0.0;
    if (p.kappa1 > 0) d += p.kappa1 * std::sqrt(p.schedule1.rate(t, jitter_seed));
    if (p.kappa2 > 0) d -= p.kappa2 * std::sqrt(p.schedule2.rate(t, jitter_seed));
    return d;
}

BranchState walk_step(BranchState s, double drive, const NoiseIncrement& xi,
                      std::uint32_t* clamp_counter) {
    if (s.mu2 > 0.0 && s.mu2 < 1.0) {
        double next = s.mu2 + s.mu2 * (1.0 - s.mu2) * drive * (2.0 * xi.re);
        if (next < 0.0) {
            next = 0.0;
            if (clamp_counter) ++*clamp_counter;
        } else if (next > 1.0) {
            next = 1.0;
            if (clamp_counter) ++*clamp_counter;
        }
        s.mu2 = next;
    }
    s.t += xi.dt;
    return s;
}

WalkOutcome run_walk(double mu2_0, const WalkParams& p, RandomStream& rng,
                     std::uint64_t jitter_seed) {
    p.validate();
    if (!(mu2_0 >= 0.0) || !(mu2_0 <= 1.0))
        throw std::invalid_argument("walk: initial weight must lie in [0, 1]");
    const double eps = p.termination_eps;
    auto state_of = [eps](double v) {
        if (v >= 1.0 - eps) return Absorbed::one;
        if (v <= eps) return Absorbed::zero;
        return Absorbed::none;
    };

    WalkOutcome o;
    BranchState s{mu2_0, 0.0};
    o.absorbed_at = state_of(s.mu2);
    o.final_mu2 = s.mu2;
    if (o.absorbed_at != Absorbed::none) return o;

    for (std::uint64_t step = 1; step <= p.max_steps; ++step) {
        NoiseIncrement xi = sample_noise(rng, p.dt);
        double drive = walk_drive(p, s.t, jitter_seed);
        s = walk_step(s, drive, xi, &o.clamps);
        o.steps = step;
        if (p.trace_every && step % p.trace_every == 0) o.mu2_series.push_back(s.mu2);
        o.absorbed_at = state_of(s.mu2);
        if (o.absorbed_at != Absorbed::none) break;
    }
    o.final_mu2 = s.mu2;
    return o;
}

BornEstimate born_estimate(double p0, std::size_t n, const WalkParams& p,
                           std::uint64_t master_seed, std::uint64_t checkpoint_every,
                           std::size_t n_checkpoints) {
    p.validate();
    BornEstimate be;
    be.n_walks = n;
    std::vector<double> csum(n_checkpoints, 0.0), csum2(n_checkpoints, 0.0);
    std::vector<double> steps_list;
    steps_list.reserve(n);
    std::uint64_t band_steps = 0;
    const double eps = p.termination_eps;

    for (std::size_t i = 0; i < n; ++i) {
        RandomStream rng(master_seed, std::uint64_t(i));
        std::uint64_t jseed = stream_seed(master_seed ^ 0xC2B2AE3D27D4EB4Full,
                                          std::uint64_t(i));
        BranchState s{p0, 0.0};
        std::uint64_t steps = 0;
        Absorbed result = Absorbed::none;
        if (s.mu2 >= 1.0 - eps) result = Absorbed::one;
        if (s.mu2 <= eps) result = Absorbed::zero;
        std::size_t next_ck = 0;
        while (result == Absorbed::none && steps < p.max_steps) {
            NoiseIncrement xi = sample_noise(rng, p.dt);
            double drive = walk_drive(p, s.t, jseed);
            std::uint32_t clamps32 = 0;
            s = walk_step(s, drive, xi, &clamps32);
            be.clamps += clamps32;
            ++steps;
            if (s.mu2 >= 0.45 && s.mu2 <= 0.55) ++band_steps;
            if (checkpoint_every && next_ck < n_checkpoints &&
                steps == checkpoint_every * (next_ck + 1)) {
                csum[next_ck] += s.mu2;
                csum2[next_ck] += s.mu2 * s.mu2;
                ++next_ck;
            }
            if (s.mu2 >= 1.0 - eps) result = Absorbed::one;
            else if (s.mu2 <= eps) result = Absorbed::zero;
        }
        // boundary-frozen contributions to the remaining checkpoints
        for (; next_ck < n_checkpoints; ++next_ck) {
            csum[next_ck] += s.mu2;
            csum2[next_ck] += s.mu2 * s.mu2;
        }
        switch (result) {
            case Absorbed::one: ++be.absorbed_one; break;
            case Absorbed::zero: ++be.absorbed_zero; break;
            case Absorbed::none: ++be.unterminated; break;
        }
        be.total_steps += steps;
        steps_list.push_back(double(steps));
    }

    be.frequency = n ? double(be.absorbed_one) / double(n) : 0.0;
    double half = n ? 3.0 * std::sqrt(std::max(be.frequency * (1.0 - be.frequency), 0.0) /
                                      double(n))
                    : 0.0;
    be.ci_low = std::max(0.0, be.frequency - half);
    be.ci_high = std::min(1.0, be.frequency + half);
    be.band_fraction = be.total_steps ? double(band_steps) / double(be.total_steps) : 0.0;
    be.mean_steps = n ? double(be.total_steps) / double(n) : 0.0;
    if (!steps_list.empty()) {
        auto mid = steps_list.begin() + std::ptrdiff_t(steps_list.size() / 2);
        std::nth_element(steps_list.begin(), mid, steps_list.end());
        be.median_steps = *mid;
    }
    be.checkpoint_mean.resize(n_checkpoints);
    be.checkpoint_se.resize(n_checkpoints);
    for (std::size_t c = 0; c < n_checkpoints; ++c) {
        double mean = n ? csum[c] / double(n) : 0.0;
        double var = n ? std::max(csum2[c] / double(n) - mean * mean, 0.0) : 0.0;
        be.checkpoint_mean[c] = mean;
        be.checkpoint_se[c] = n ? std::sqrt(var / double(n)) : 0.0;
    }
    return be;
}

double alpha_squared_reference() {
    const double alpha = 7.2973525693e-3;
    return alpha * alpha;
}

double max_coupling_ratio() { return 10.0 * alpha_squared_reference(); }

double perturbation_ratio(double hbar, double rest_energy, double delta_t) {
    if (!(hbar > 0) || !(rest_energy > 0) || !(delta_t > 0))
        throw std::invalid_argument("perturbation ratio: inputs must be positive");
    return hbar / (rest_energy * delta_t);
}

std::uint64_t walk_steps_estimate(double step_size) {
    if (!(step_size > 0))
        throw std::invalid_argument("steps estimate: step size must be positive");
    double inv = 1.0 / (step_size * step_size);
    double nearest = std::round(inv);
    if (std::abs(inv - nearest) <= 1e-9 * nearest) inv = nearest;   // FP dust
    return std::uint64_t(std::ceil(inv));
}

double entanglement_estimate(double delta) {
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::domain_error("entanglement estimate: delta must lie in (0, 1)");
    double h = 0.5 * delta;
    return h * std::abs(1.0 - std::log(h));
}

}  // namespace collapsim
