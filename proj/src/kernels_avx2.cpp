// AVX2 + FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers must check avx2_supported() before dispatching here.

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "lumisplat/kernels.hpp"

namespace lumisplat::kernels {
namespace {

// Cephes-style exp for 4 doubles, ~1 ulp over the clamped range [-708, 708].
inline __m256d exp_pd(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

    x = _mm256_max_pd(_mm256_set1_pd(-708.0), _mm256_min_pd(_mm256_set1_pd(708.0), x));

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, c1, x);
    r = _mm256_fnmadd_pd(n, c2, r);
    const __m256d rr = _mm256_mul_pd(r, r);

    __m256d px = _mm256_fmadd_pd(p0, rr, p1);
    px = _mm256_fmadd_pd(px, rr, p2);
    px = _mm256_mul_pd(px, r);

    __m256d qx = _mm256_fmadd_pd(q0, rr, q1);
    qx = _mm256_fmadd_pd(qx, rr, q2);
    qx = _mm256_fmadd_pd(qx, rr, q3);

    const __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
    const __m256d res = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

    // Scale by 2^n through the exponent bits.
    const __m128i n32 = _mm256_cvtpd_epi32(n);
    const __m256i n64 = _mm256_cvtepi32_epi64(n32);
    const __m256i biased = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(res, _mm256_castsi256_pd(biased));
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// Same mul/add sequence as the scalar reference; only exp() differs.
void splat_alpha_row_avx2(double mean_x, double mean_y, double qa, double qb, double qc, double opacity,
                          double alpha_clamp, double x0, double y, int n, double* alpha) {
    const double dy = y - mean_y;
    const double cross = 2.0 * qb * dy;
    const double const_term = qc * dy * dy;

    const __m256d vmean = _mm256_set1_pd(mean_x);
    const __m256d vqa = _mm256_set1_pd(qa);
    const __m256d vcross = _mm256_set1_pd(cross);
    const __m256d vconst = _mm256_set1_pd(const_term);
    const __m256d vop = _mm256_set1_pd(opacity);
    const __m256d vclamp = _mm256_set1_pd(alpha_clamp);
    const __m256d vhalf = _mm256_set1_pd(-0.5);

    // Full-width stores into the caller's padded buffer keep every pixel on
    // the vector path regardless of segment boundaries.
    for (int j = 0; j < n; j += 4) {
        const __m256d xj = _mm256_add_pd(_mm256_set1_pd(x0),
                                         _mm256_setr_pd(j, j + 1, j + 2, j + 3));
        const __m256d dx = _mm256_sub_pd(xj, vmean);
        const __m256d q = _mm256_add_pd(
            _mm256_add_pd(_mm256_mul_pd(_mm256_mul_pd(vqa, dx), dx), _mm256_mul_pd(vcross, dx)), vconst);
        __m256d a = _mm256_mul_pd(vop, exp_pd(_mm256_mul_pd(vhalf, q)));
        a = _mm256_min_pd(a, vclamp);
        _mm256_storeu_pd(alpha + j, a);
    }
}

void gemv_avx2(const double* w, const double* b, const double* x, int rows, int cols, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<size_t>(r) * cols;
        __m256d acc = _mm256_setzero_pd();
        int c = 0;
        for (; c + 4 <= cols; c += 4)
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(wr + c), _mm256_loadu_pd(x + c), acc);
        double s = hsum(acc);
        for (; c < cols; ++c) s += wr[c] * x[c];
        y[r] = b ? s + b[r] : s;
    }
}

void gemv_t_acc_avx2(const double* w, const double* g, int rows, int cols, double* xg) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<size_t>(r) * cols;
        const __m256d gr = _mm256_set1_pd(g[r]);
        int c = 0;
        for (; c + 4 <= cols; c += 4) {
            const __m256d v = _mm256_fmadd_pd(_mm256_loadu_pd(wr + c), gr, _mm256_loadu_pd(xg + c));
            _mm256_storeu_pd(xg + c, v);
        }
        for (; c < cols; ++c) xg[c] += wr[c] * g[r];
    }
}

void ger_acc_avx2(double* wg, const double* g, const double* x, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double* wr = wg + static_cast<size_t>(r) * cols;
        const __m256d gr = _mm256_set1_pd(g[r]);
        int c = 0;
        for (; c + 4 <= cols; c += 4) {
            const __m256d v = _mm256_fmadd_pd(gr, _mm256_loadu_pd(x + c), _mm256_loadu_pd(wr + c));
            _mm256_storeu_pd(wr + c, v);
        }
        for (; c < cols; ++c) wr[c] += g[r] * x[c];
    }
}

double sum_avx2(const double* x, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i];
    return s;
}

double sum_sq_diff_avx2(const double* a, const double* b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// No FMA here: keeps the update bit-identical to the scalar reference.
void adam_update_avx2(double* p, const double* g, double* m, double* v, size_t n, double lr, double beta1,
                      double beta2, double eps, double bias_corr1, double bias_corr2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vbc1 = _mm256_set1_pd(bias_corr1);
    const __m256d vbc2 = _mm256_set1_pd(bias_corr2);

    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(v1mb1, gi));
        const __m256d vi =
            _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(v1mb2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d mhat = _mm256_div_pd(mi, vbc1);
        const __m256d vhat = _mm256_div_pd(vi, vbc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), veps));
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    // The tail goes through the scalar reference; a local loop would get
    // FMA-contracted in this translation unit and lose bit-identity.
    if (i < n)
        detail::scalar_table().adam_update(p + i, g + i, m + i, v + i, n - i, lr, beta1, beta2, eps, bias_corr1,
                                           bias_corr2);
}

}  // namespace

namespace detail {
const KernelTable& avx2_table() {
    static const KernelTable t{splat_alpha_row_avx2, gemv_avx2,        gemv_t_acc_avx2, ger_acc_avx2,
                               sum_avx2,             sum_sq_diff_avx2, adam_update_avx2};
    return t;
}
}  // namespace detail

}  // namespace lumisplat::kernels
