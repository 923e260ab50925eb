// Reference backend. Arithmetic is written out component-wise so the AVX2
// backend can reproduce the exact same per-element operation order.
#include "collapsim/kernels.hpp"

namespace collapsim::kernels {
namespace {

void s_cmul(cplx* a, const cplx* t, std::size_t n) {
    double* pa = reinterpret_cast<double*>(a);
    const double* pt = reinterpret_cast<const double*>(t);
    for (std::size_t i = 0; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double tr = pt[2 * i], ti = pt[2 * i + 1];
        pa[2 * i] = ar * tr - ai * ti;
        pa[2 * i + 1] = ar * ti + ai * tr;
    }
}

void s_cmul_to(cplx* out, const cplx* a, const cplx* t, std::size_t n) {
    double* po = reinterpret_cast<double*>(out);
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pt = reinterpret_cast<const double*>(t);
    for (std::size_t i = 0; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double tr = pt[2 * i], ti = pt[2 * i + 1];
        po[2 * i] = ar * tr - ai * ti;
        po[2 * i + 1] = ar * ti + ai * tr;
    }
}

void s_scale(cplx* a, double s, std::size_t n) {
    double* pa = reinterpret_cast<double*>(a);
    for (std::size_t i = 0; i < 2 * n; ++i) pa[i] *= s;
}

double s_norm_sq(const cplx* a, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i)
        acc += pa[2 * i] * pa[2 * i] + pa[2 * i + 1] * pa[2 * i + 1];
    return acc;
}

double s_weighted_norm_sq(const double* w, const cplx* a, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i)
        acc += w[i] * (pa[2 * i] * pa[2 * i] + pa[2 * i + 1] * pa[2 * i + 1]);
    return acc;
}

double s_masked_norm_sq(const std::uint8_t* m, const cplx* a, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (m[i])
            acc += pa[2 * i] * pa[2 * i] + pa[2 * i + 1] * pa[2 * i + 1];
    return acc;
}

cplx s_dot(const cplx* a, const cplx* b, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pb = reinterpret_cast<const double*>(b);
    double re = 0, im = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double br = pb[2 * i], bi = pb[2 * i + 1];
        re += ar * br + ai * bi;
        im += ar * bi - ai * br;
    }
    return {re, im};
}

cplx s_weighted_dot(const double* w, const cplx* a, const cplx* b, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pb = reinterpret_cast<const double*>(b);
    double re = 0, im = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double br = pb[2 * i], bi = pb[2 * i + 1];
        re += w[i] * (ar * br + ai * bi);
        im += w[i] * (ar * bi - ai * br);
    }
    return {re, im};
}

void s_collapse_apply(cplx* a, const double* v, double nr, double ni, double c,
                      std::size_t n) {
    double* pa = reinterpret_cast<double*>(a);
    for (std::size_t i = 0; i < n; ++i) {
        double vi = v[i];
        double fr = 1.0 + vi * nr + c * (vi * vi);
        double fi = vi * ni;
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        pa[2 * i] = ar * fr - ai * fi;
        pa[2 * i + 1] = ar * fi + ai * fr;
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable t = {
        "scalar",   s_cmul, s_cmul_to,       s_scale,
        s_norm_sq,  s_weighted_norm_sq,      s_masked_norm_sq,
        s_dot,      s_weighted_dot,          s_collapse_apply,
    };
    return t;
}

} // namespace collapsim::kernels
