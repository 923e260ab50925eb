#include "collapsim/spectral.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace collapsim {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

SpectralWorkspace::SpectralWorkspace(const GridSpec& spec) : spec_(spec) {
    spec_.validate();
    n_ = spec_.total_points();
    khat_.assign(n_, cplx(0, 0));
    work_.assign(n_, cplx(0, 0));

    const int rank = spec_.config_dims();
    int dims[4] = {spec_.points_per_axis, spec_.points_per_axis,
                   spec_.points_per_axis, spec_.points_per_axis};
    {
        // the FFTW planner mutates global state; plans built with
        // FFTW_ESTIMATE never touch the transform buffers
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan_fwd_ = fftw_plan_dft(rank, dims,
                                  reinterpret_cast<fftw_complex*>(work_.data()),
                                  reinterpret_cast<fftw_complex*>(khat_.data()),
                                  FFTW_FORWARD, FFTW_ESTIMATE);
        plan_bwd_ = fftw_plan_dft(rank, dims,
                                  reinterpret_cast<fftw_complex*>(khat_.data()),
                                  reinterpret_cast<fftw_complex*>(work_.data()),
                                  FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    if (!plan_fwd_ || !plan_bwd_) throw std::runtime_error("fftw plan creation failed");

    for (int a = 0; a < rank; ++a) {
        auto& t = ktab_[std::size_t(a)];
        t.resize(std::size_t(spec_.points_per_axis));
        for (int i = 0; i < spec_.points_per_axis; ++i)
            t[std::size_t(i)] = spec_.wavenumber(i);
    }
    kinfac_.assign(n_, 0.0);
    int idx[4] = {0, 0, 0, 0};
    for (std::size_t f = 0; f < n_; ++f) {
        spec_.unravel(f, idx);
        double acc = 0;
        for (int a = 0; a < rank; ++a) {
            double k = ktab_[std::size_t(a)][std::size_t(idx[a])];
            acc += k * k / (2.0 * spec_.axis_mass(a));
        }
        kinfac_[f] = acc;
    }
}

SpectralWorkspace::~SpectralWorkspace() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

void SpectralWorkspace::forward(const cplx* in, cplx* out) {
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_),
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

void SpectralWorkspace::backward(const cplx* in, cplx* out) {
    fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_),
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

void SpectralWorkspace::load(const CVec& amp) {
    if (amp.size() != n_) throw std::invalid_argument("spectral: size mismatch");
    forward(amp.data(), khat_.data());
}

void SpectralWorkspace::derivative_from_khat(int axis, CVec& out) {
    if (axis < 0 || axis >= spec_.config_dims())
        throw std::invalid_argument("spectral: bad axis");
    out.resize(n_);
    const double inv_n = 1.0 / double(n_);
    const auto& kt = ktab_[std::size_t(axis)];
    const int npts = spec_.points_per_axis;
    // stride of `axis` in the row-major layout
    std::size_t stride = 1;
    for (int a = spec_.config_dims() - 1; a > axis; --a) stride *= std::size_t(npts);
    const std::size_t block = stride * std::size_t(npts);
    for (std::size_t base = 0; base < n_; base += block) {
        for (int i = 0; i < npts; ++i) {
            // multiply by i*k and fold in the inverse-transform scale
            double k = kt[std::size_t(i)] * inv_n;
            const std::size_t off = base + std::size_t(i) * stride;
            for (std::size_t t = 0; t < stride; ++t) {
                cplx z = khat_[off + t];
                work_[off + t] = cplx(-k * z.imag(), k * z.real());
            }
        }
    }
    backward(work_.data(), out.data());
}

double SpectralWorkspace::kinetic_from_khat() const {
    // Parseval: sum |khat|^2 = n * sum |psi|^2, so the density weight is
    // cell_volume / n for a state normalized on the grid
    double acc = 0;
    for (std::size_t f = 0; f < n_; ++f) acc += kinfac_[f] * std::norm(khat_[f]);
    return acc * spec_.cell_volume() / double(n_);
}

}  // namespace collapsim
