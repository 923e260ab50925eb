#pragma once

// FFT workspace for one grid shape. Owns the two FFTW plans (built with
// FFTW_ESTIMATE so planning is deterministic and cheap) plus the per-axis
// wavenumber tables and the combined kinetic factor sum_a k_a^2 / (2 m_a).
// Plan creation and destruction go through a global mutex because the FFTW
// planner is not thread safe; execution on distinct buffers is.

#include <cstddef>
#include <vector>

#include "collapsim/grid.hpp"

namespace collapsim {

class SpectralWorkspace {
public:
    explicit SpectralWorkspace(const GridSpec& spec);
    ~SpectralWorkspace();
    SpectralWorkspace(const SpectralWorkspace&) = delete;
    SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

    const GridSpec& spec() const { return spec_; }
    std::size_t n() const { return n_; }

    // Unnormalized transforms; in and out must be distinct buffers of n().
    void forward(const cplx* in, cplx* out);
    void backward(const cplx* in, cplx* out);

    // khat = forward(amp), cached for the expectation helpers below.
    void load(const CVec& amp);
    const CVec& khat() const { return khat_; }

    // out = d(amp)/d(axis) from the cached khat, including the 1/n factor.
    void derivative_from_khat(int axis, CVec& out);

    // sum_a <k_a^2 / 2 m_a> over the cached khat, for a normalized state.
    double kinetic_from_khat() const;

    const std::vector<double>& kinetic_factor() const { return kinfac_; }
    const std::vector<double>& axis_wavenumbers(int axis) const { return ktab_[axis]; }

private:
    GridSpec spec_;
    std::size_t n_ = 0;
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
    CVec khat_;
    CVec work_;
    std::array<std::vector<double>, 4> ktab_;   // per config axis, length points_per_axis
    std::vector<double> kinfac_;                // length n
};

}  // namespace collapsim
