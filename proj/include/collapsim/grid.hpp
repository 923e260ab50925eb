#pragma once

// Periodic configuration-space grid for a two-particle wave function.
// Axes are ordered (j_x[, j_y], k_x[, k_y]) with row-major layout, the
// last axis fastest. Coordinates run over [-extent, extent) with 2^p
// points per axis so the spectral transforms stay power-of-two.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "collapsim/aligned.hpp"

namespace collapsim {

using cplx = std::complex<double>;
using CVec = std::vector<cplx, AlignedAllocator<cplx>>;

struct GridSpec {
    int dims_per_particle = 1;           // 1 or 2
    int points_per_axis = 128;
    double extent = 16.0;                // box is [-extent, extent) per axis
    double mass_j = 1.0;
    double mass_k = 1.0;
    std::size_t memory_budget = std::size_t(3) << 30;

    int config_dims() const { return 2 * dims_per_particle; }
    std::size_t total_points() const;
    double spacing() const { return 2.0 * extent / points_per_axis; }
    double cell_volume() const;
    double coord(std::int64_t idx) const { return -extent + double(idx) * spacing(); }
    double wavenumber(std::int64_t idx) const;
    double axis_mass(int axis) const { return axis < dims_per_particle ? mass_j : mass_k; }

    void unravel(std::size_t flat, int* idx) const;
    std::size_t ravel(const int* idx) const;

    void validate() const;               // throws std::invalid_argument
};

struct WaveFunction {
    GridSpec spec;
    CVec amp;
    double time = 0.0;

    double norm_sq() const;              // sum |amp|^2 * cell_volume
    void normalize();
};

WaveFunction make_wavefunction(const GridSpec& spec);    // zero-filled

// Spatial region of configuration space, used for branch bookkeeping.
// half: coordinate on `axis` below (or at/above) `boundary`.
// box: product of [lo, hi) intervals over all config axes.
struct Region {
    enum class Kind { all, half, box };
    Kind kind = Kind::all;
    int axis = 0;
    double boundary = 0.0;
    bool below = true;
    std::array<double, 4> lo{{0, 0, 0, 0}};
    std::array<double, 4> hi{{0, 0, 0, 0}};
    bool negate = false;

    Region complement() const;
    bool contains(const GridSpec& spec, const int* idx) const;
};

std::vector<std::uint8_t> region_mask(const GridSpec& spec, const Region& r);
double branch_weight(const WaveFunction& psi, const std::vector<std::uint8_t>& mask);

// Single-particle gaussian factor: width is the position standard
// deviation, envelope exp(-(x-c)^2 / (4 width^2)) * exp(i k.x).
struct PacketSpec {
    std::array<double, 2> center{{0, 0}};
    std::array<double, 2> wavevector{{0, 0}};
    double width = 1.0;
};

WaveFunction gaussian_packet(const GridSpec& spec, const PacketSpec& pj, const PacketSpec& pk);

// Superposition with an exact weight split across `split`: branch A is the
// (jA, kA) product restricted to the region, branch B the (jB, kB) product
// restricted to its complement. Each branch is normalized inside its own
// region before the weights are applied, so branch_weight reproduces
// weight_a to rounding even when the packets have small tails crossing the
// boundary.
WaveFunction two_branch(const GridSpec& spec, double weight_a, const Region& split,
                        const PacketSpec& jA, const PacketSpec& kA,
                        const PacketSpec& jB, const PacketSpec& kB);

// 1-D pair state: gaussian in the center of mass times a gaussian in the
// relative coordinate offset by rel_offset, optionally boosted as a whole.
WaveFunction pair_coherent(const GridSpec& spec, double com_center, double com_width,
                           double rel_offset, double rel_width, double com_wavevector = 0.0);

}  // namespace collapsim
