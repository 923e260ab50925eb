// Hot-loop kernels: pointwise complex updates and reductions over field
// buffers. A scalar reference backend and an AVX2 backend live behind a
// runtime-selected dispatch table; both are deterministic on their own, and
// equivalence between them is covered by tests. Selection can be forced with
// COLLAPSIM_KERNELS=scalar|avx2.
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>

namespace collapsim::kernels {

using cplx = std::complex<double>;

struct KernelTable {
    const char* name;

    // a[i] *= t[i]
    void (*cmul)(cplx* a, const cplx* t, std::size_t n);
    // out[i] = a[i] * t[i]
    void (*cmul_to)(cplx* out, const cplx* a, const cplx* t, std::size_t n);
    // a[i] *= s
    void (*scale)(cplx* a, double s, std::size_t n);
    // sum |a[i]|^2
    double (*norm_sq)(const cplx* a, std::size_t n);
    // sum w[i] |a[i]|^2
    double (*weighted_norm_sq)(const double* w, const cplx* a, std::size_t n);
    // sum over m[i] != 0 of |a[i]|^2
    double (*masked_norm_sq)(const std::uint8_t* m, const cplx* a, std::size_t n);
    // sum conj(a[i]) b[i]
    cplx (*dot)(const cplx* a, const cplx* b, std::size_t n);
    // sum w[i] conj(a[i]) b[i]
    cplx (*weighted_dot)(const double* w, const cplx* a, const cplx* b, std::size_t n);
    // a[i] *= (1 + v[i]*(nr + i*ni) + c*v[i]^2); the collapse-step factor
    void (*collapse_apply)(cplx* a, const double* v, double nr, double ni, double c,
                           std::size_t n);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();     // nullptr when unavailable
const KernelTable& active();
void select(const char* name);       // test hook; throws on unknown name

} // namespace collapsim::kernels
