// AVX2 backend. Two complex doubles per 256-bit vector. Pointwise kernels
// replicate the scalar backend's per-element operation order (no FMA), so
// they produce identical bits; reductions use four-wide accumulators and are
// compared against the reference with a tolerance instead.
#include "collapsim/kernels.hpp"

#ifdef __AVX2__
#include <immintrin.h>

namespace collapsim::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sw = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

// [v0, v1] -> [v0, v0, v1, v1]
inline __m256d dup_pair(const double* v) {
    __m128d p = _mm_loadu_pd(v);
    return _mm256_permute4x64_pd(_mm256_castpd128_pd256(p), 0x50);
}

void v_cmul(cplx* a, const cplx* t, std::size_t n) {
    double* pa = reinterpret_cast<double*>(a);
    const double* pt = reinterpret_cast<const double*>(t);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d av = _mm256_loadu_pd(pa + 2 * i);
        __m256d tv = _mm256_loadu_pd(pt + 2 * i);
        __m256d tre = _mm256_movedup_pd(tv);
        __m256d tim = _mm256_permute_pd(tv, 0xF);
        __m256d asw = _mm256_permute_pd(av, 0x5);
        __m256d res = _mm256_addsub_pd(_mm256_mul_pd(av, tre), _mm256_mul_pd(asw, tim));
        _mm256_storeu_pd(pa + 2 * i, res);
    }
    for (; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double tr = pt[2 * i], ti = pt[2 * i + 1];
        pa[2 * i] = ar * tr - ai * ti;
        pa[2 * i + 1] = ar * ti + ai * tr;
    }
}

void v_cmul_to(cplx* out, const cplx* a, const cplx* t, std::size_t n) {
    double* po = reinterpret_cast<double*>(out);
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pt = reinterpret_cast<const double*>(t);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d av = _mm256_loadu_pd(pa + 2 * i);
        __m256d tv = _mm256_loadu_pd(pt + 2 * i);
        __m256d tre = _mm256_movedup_pd(tv);
        __m256d tim = _mm256_permute_pd(tv, 0xF);
        __m256d asw = _mm256_permute_pd(av, 0x5);
        __m256d res = _mm256_addsub_pd(_mm256_mul_pd(av, tre), _mm256_mul_pd(asw, tim));
        _mm256_storeu_pd(po + 2 * i, res);
    }
    for (; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double tr = pt[2 * i], ti = pt[2 * i + 1];
        po[2 * i] = ar * tr - ai * ti;
        po[2 * i + 1] = ar * ti + ai * tr;
    }
}

void v_scale(cplx* a, double s, std::size_t n) {
    double* pa = reinterpret_cast<double*>(a);
    __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        _mm256_storeu_pd(pa + 2 * i, _mm256_mul_pd(_mm256_loadu_pd(pa + 2 * i), sv));
    for (; i < n; ++i) {
        pa[2 * i] *= s;
        pa[2 * i + 1] *= s;
    }
}

double v_norm_sq(const cplx* a, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d av = _mm256_loadu_pd(pa + 2 * i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(av, av));
    }
    double s = hsum(acc);
    for (; i < n; ++i)
        s += pa[2 * i] * pa[2 * i] + pa[2 * i + 1] * pa[2 * i + 1];
    return s;
}

double v_weighted_norm_sq(const double* w, const cplx* a, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d av = _mm256_loadu_pd(pa + 2 * i);
        __m256d wv = dup_pair(w + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, _mm256_mul_pd(av, av)));
    }
    double s = hsum(acc);
    for (; i < n; ++i)
        s += w[i] * (pa[2 * i] * pa[2 * i] + pa[2 * i + 1] * pa[2 * i + 1]);
    return s;
}

double v_masked_norm_sq(const std::uint8_t* m, const cplx* a, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d av = _mm256_loadu_pd(pa + 2 * i);
        __m256d mv = _mm256_setr_pd(m[i] ? 1.0 : 0.0, m[i] ? 1.0 : 0.0,
                                    m[i + 1] ? 1.0 : 0.0, m[i + 1] ? 1.0 : 0.0);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(mv, _mm256_mul_pd(av, av)));
    }
    double s = hsum(acc);
    for (; i < n; ++i)
        if (m[i])
            s += pa[2 * i] * pa[2 * i] + pa[2 * i + 1] * pa[2 * i + 1];
    return s;
}

cplx v_dot(const cplx* a, const cplx* b, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pb = reinterpret_cast<const double*>(b);
    __m256d acc_re = _mm256_setzero_pd();
    __m256d acc_im = _mm256_setzero_pd();
    __m256d sign = _mm256_setr_pd(-1.0, 1.0, -1.0, 1.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d av = _mm256_loadu_pd(pa + 2 * i);
        __m256d bv = _mm256_loadu_pd(pb + 2 * i);
        __m256d asw = _mm256_permute_pd(av, 0x5);
        acc_re = _mm256_add_pd(acc_re, _mm256_mul_pd(av, bv));
        acc_im = _mm256_add_pd(acc_im, _mm256_mul_pd(sign, _mm256_mul_pd(asw, bv)));
    }
    double re = hsum(acc_re), im = hsum(acc_im);
    for (; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double br = pb[2 * i], bi = pb[2 * i + 1];
        re += ar * br + ai * bi;
        im += ar * bi - ai * br;
    }
    return {re, im};
}

cplx v_weighted_dot(const double* w, const cplx* a, const cplx* b, std::size_t n) {
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pb = reinterpret_cast<const double*>(b);
    __m256d acc_re = _mm256_setzero_pd();
    __m256d acc_im = _mm256_setzero_pd();
    __m256d sign = _mm256_setr_pd(-1.0, 1.0, -1.0, 1.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d av = _mm256_loadu_pd(pa + 2 * i);
        __m256d bv = _mm256_loadu_pd(pb + 2 * i);
        __m256d wv = dup_pair(w + i);
        __m256d bw = _mm256_mul_pd(wv, bv);
        __m256d asw = _mm256_permute_pd(av, 0x5);
        acc_re = _mm256_add_pd(acc_re, _mm256_mul_pd(av, bw));
        acc_im = _mm256_add_pd(acc_im, _mm256_mul_pd(sign, _mm256_mul_pd(asw, bw)));
    }
    double re = hsum(acc_re), im = hsum(acc_im);
    for (; i < n; ++i) {
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        double br = w[i] * pb[2 * i], bi = w[i] * pb[2 * i + 1];
        re += ar * br + ai * bi;
        im += ar * bi - ai * br;
    }
    return {re, im};
}

void v_collapse_apply(cplx* a, const double* v, double nr, double ni, double c,
                      std::size_t n) {
    double* pa = reinterpret_cast<double*>(a);
    __m256d one = _mm256_set1_pd(1.0);
    __m256d nrv = _mm256_set1_pd(nr);
    __m256d niv = _mm256_set1_pd(ni);
    __m256d cv = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d vv = dup_pair(v + i);
        __m256d fr = _mm256_add_pd(_mm256_add_pd(one, _mm256_mul_pd(vv, nrv)),
                                   _mm256_mul_pd(cv, _mm256_mul_pd(vv, vv)));
        __m256d fi = _mm256_mul_pd(vv, niv);
        __m256d av = _mm256_loadu_pd(pa + 2 * i);
        __m256d asw = _mm256_permute_pd(av, 0x5);
        __m256d res = _mm256_addsub_pd(_mm256_mul_pd(av, fr), _mm256_mul_pd(asw, fi));
        _mm256_storeu_pd(pa + 2 * i, res);
    }
    for (; i < n; ++i) {
        double vi = v[i];
        double fr = 1.0 + vi * nr + c * (vi * vi);
        double fi = vi * ni;
        double ar = pa[2 * i], ai = pa[2 * i + 1];
        pa[2 * i] = ar * fr - ai * fi;
        pa[2 * i + 1] = ar * fi + ai * fr;
    }
}

} // namespace

const KernelTable* avx2_table() {
    static const KernelTable t = {
        "avx2",     v_cmul, v_cmul_to,       v_scale,
        v_norm_sq,  v_weighted_norm_sq,      v_masked_norm_sq,
        v_dot,      v_weighted_dot,          v_collapse_apply,
    };
    return &t;
}

} // namespace collapsim::kernels
#endif // __AVX2__
