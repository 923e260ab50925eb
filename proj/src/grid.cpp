#include "collapsim/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "collapsim/kernels.hpp"

namespace collapsim {

std::size_t GridSpec::total_points() const {
    std::size_t n = 1;
    for (int d = 0; d < config_dims(); ++d) n *= std::size_t(points_per_axis);
    return n;
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < config_dims(); ++d) v *= spacing();
    return v;
}

double GridSpec::wavenumber(std::int64_t idx) const {
    // standard FFT ordering: non-negative frequencies first, then negative
    std::int64_t n = points_per_axis;
    std::int64_t f = idx < n / 2 ? idx : idx - n;
    return double(f) * (M_PI / extent);
}

void GridSpec::unravel(std::size_t flat, int* idx) const {
    for (int d = config_dims() - 1; d >= 0; --d) {
        idx[d] = int(flat % std::size_t(points_per_axis));
        flat /= std::size_t(points_per_axis);
    }
}

std::size_t GridSpec::ravel(const int* idx) const {
    std::size_t flat = 0;
    for (int d = 0; d < config_dims(); ++d)
        flat = flat * std::size_t(points_per_axis) + std::size_t(idx[d]);
    return flat;
}

void GridSpec::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("grid: " + msg); };
    if (dims_per_particle != 1 && dims_per_particle != 2)
        fail("dims_per_particle must be 1 or 2");
    if (points_per_axis < 8 || (points_per_axis & (points_per_axis - 1)) != 0)
        fail("points_per_axis must be a power of two, at least 8");
    if (dims_per_particle == 2 && points_per_axis > 64)
        fail("planar grids are capped at 64 points per axis");
    if (!(extent > 0)) fail("extent must be positive");
    if (!(mass_j > 0) || !(mass_k > 0)) fail("masses must be positive");
    // wave function plus transform scratch plus field tables
    std::size_t bytes = total_points() * (4 * sizeof(cplx) + 5 * sizeof(double));
    if (bytes > memory_budget)
        fail("grid needs " + std::to_string(bytes) + " bytes, over the budget of " +
             std::to_string(memory_budget));
}

double WaveFunction::norm_sq() const {
    return kernels::active().norm_sq(amp.data(), amp.size()) * spec.cell_volume();
}

void WaveFunction::normalize() {
    double n2 = norm_sq();
    if (!(n2 > 0)) throw std::runtime_error("cannot normalize a zero state");
    kernels::active().scale(amp.data(), 1.0 / std::sqrt(n2), amp.size());
}

WaveFunction make_wavefunction(const GridSpec& spec) {
    spec.validate();
    WaveFunction psi;
    psi.spec = spec;
    psi.amp.assign(spec.total_points(), cplx(0.0, 0.0));
    return psi;
}

Region Region::complement() const {
    Region r = *this;
    if (kind == Kind::half) {
        r.below = !below;
    } else {
        r.negate = !negate;
    }
    return r;
}

bool Region::contains(const GridSpec& spec, const int* idx) const {
    bool in = true;
    switch (kind) {
        case Kind::all:
            in = true;
            break;
        case Kind::half: {
            double x = spec.coord(idx[axis]);
            in = below ? (x < boundary) : (x >= boundary);
            break;
        }
        case Kind::box: {
            for (int d = 0; d < spec.config_dims(); ++d) {
                double x = spec.coord(idx[d]);
                if (x < lo[std::size_t(d)] || x >= hi[std::size_t(d)]) {
                    in = false;
                    break;
                }
            }
            break;
        }
    }
    return negate ? !in : in;
}

std::vector<std::uint8_t> region_mask(const GridSpec& spec, const Region& r) {
    std::vector<std::uint8_t> mask(spec.total_points());
    int idx[4] = {0, 0, 0, 0};
    for (std::size_t f = 0; f < mask.size(); ++f) {
        spec.unravel(f, idx);
        mask[f] = r.contains(spec, idx) ? 1 : 0;
    }
    return mask;
}

double branch_weight(const WaveFunction& psi, const std::vector<std::uint8_t>& mask) {
    return kernels::active().masked_norm_sq(mask.data(), psi.amp.data(), psi.amp.size()) *
           psi.spec.cell_volume();
}

namespace {

void check_width(const GridSpec& spec, double width) {
    if (!(width >= 2.0 * spec.spacing()))
        throw std::invalid_argument("packet width " + std::to_string(width) +
                                    " is under two grid spacings; the grid cannot resolve it");
}

// unnormalized single-axis gaussian factor
cplx axis_factor(double x, double center, double k, double width) {
    double u = x - center;
    double env = std::exp(-u * u / (4.0 * width * width));
    return cplx(env * std::cos(k * x), env * std::sin(k * x));
}

void fill_product(WaveFunction& psi, const PacketSpec& pj, const PacketSpec& pk) {
    const GridSpec& g = psi.spec;
    const int dpp = g.dims_per_particle;
    int idx[4] = {0, 0, 0, 0};
    for (std::size_t f = 0; f < psi.amp.size(); ++f) {
        g.unravel(f, idx);
        cplx a(1.0, 0.0);
        for (int d = 0; d < dpp; ++d)
            a *= axis_factor(g.coord(idx[d]), pj.center[std::size_t(d)],
                             pj.wavevector[std::size_t(d)], pj.width);
        for (int d = 0; d < dpp; ++d)
            a *= axis_factor(g.coord(idx[dpp + d]), pk.center[std::size_t(d)],
                             pk.wavevector[std::size_t(d)], pk.width);
        psi.amp[f] = a;
    }
}

}  // namespace

WaveFunction gaussian_packet(const GridSpec& spec, const PacketSpec& pj, const PacketSpec& pk) {
    check_width(spec, pj.width);
    check_width(spec, pk.width);
    WaveFunction psi = make_wavefunction(spec);
    fill_product(psi, pj, pk);
    psi.normalize();
    return psi;
}

WaveFunction two_branch(const GridSpec& spec, double weight_a, const Region& split,
                        const PacketSpec& jA, const PacketSpec& kA,
                        const PacketSpec& jB, const PacketSpec& kB) {
    if (!(weight_a > 0.0) || !(weight_a < 1.0))
        throw std::invalid_argument("branch weight must lie strictly inside (0, 1)");
    for (const PacketSpec* p : {&jA, &kA, &jB, &kB}) check_width(spec, p->width);

    WaveFunction a = make_wavefunction(spec);
    fill_product(a, jA, kA);
    WaveFunction b = make_wavefunction(spec);
    fill_product(b, jB, kB);

    auto mask = region_mask(spec, split);
    for (std::size_t f = 0; f < mask.size(); ++f) {
        if (mask[f]) {
            b.amp[f] = cplx(0.0, 0.0);
        } else {
            a.amp[f] = cplx(0.0, 0.0);
        }
    }
    a.normalize();
    b.normalize();

    WaveFunction psi = make_wavefunction(spec);
    const double ca = std::sqrt(weight_a), cb = std::sqrt(1.0 - weight_a);
    for (std::size_t f = 0; f < psi.amp.size(); ++f)
        psi.amp[f] = ca * a.amp[f] + cb * b.amp[f];
    return psi;
}

WaveFunction pair_coherent(const GridSpec& spec, double com_center, double com_width,
                           double rel_offset, double rel_width, double com_wavevector) {
    if (spec.dims_per_particle != 1)
        throw std::invalid_argument("pair states are only built on 1-D grids");
    check_width(spec, com_width);
    check_width(spec, rel_width);
    WaveFunction psi = make_wavefunction(spec);
    const double M = spec.mass_j + spec.mass_k;
    int idx[4] = {0, 0, 0, 0};
    for (std::size_t f = 0; f < psi.amp.size(); ++f) {
        spec.unravel(f, idx);
        double xj = spec.coord(idx[0]), xk = spec.coord(idx[1]);
        double xc = (spec.mass_j * xj + spec.mass_k * xk) / M;
        double r = xj - xk - rel_offset;
        double uc = xc - com_center;
        double env = std::exp(-uc * uc / (4.0 * com_width * com_width) -
                              r * r / (4.0 * rel_width * rel_width));
        double phase = com_wavevector * xc;
        psi.amp[f] = cplx(env * std::cos(phase), env * std::sin(phase));
    }
    psi.normalize();
    return psi;
}

}  // namespace collapsim
