// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; callers reach it through the runtime dispatch table, so
// no AVX2 instruction executes on hardware without the feature bits.
#include "prefdyn/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace prefdyn::kernels::detail {
namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d vy = _mm256_loadu_pd(y + i);
        acc = _mm256_fmadd_pd(vx, vy, acc);
    }
    double total = hsum(acc);
    for (; i < n; ++i) total += x[i] * y[i];
    return total;
}

double sqdist_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        total += d * d;
    }
    return total;
}

// Unfused on purpose: the scalar reference rounds the product and the sum
// separately, and the elementwise update ops promise bitwise agreement
// between backends.
void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_loadu_pd(y + i);
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scal_avx2(double a, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void matvec_avx2(const double* w, const double* x, double* y,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = dot_avx2(w + r * cols, x, cols);
}

void matvec_t_avx2(const double* w, const double* u, double* y,
                   std::size_t rows, std::size_t cols) {
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) _mm256_storeu_pd(y + j, _mm256_setzero_pd());
    for (; j < cols; ++j) y[j] = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        axpy_avx2(u[r], w + r * cols, y, cols);
}

void rank1_acc_avx2(double* w, const double* u, const double* v,
                    std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        axpy_avx2(u[r], v, w + r * cols, cols);
}

}  // namespace

const Ops* avx2_ops() {
    static const Ops ops = {dot_avx2,    sqdist_avx2,   axpy_avx2,
                            scal_avx2,   matvec_avx2,   matvec_t_avx2,
                            rank1_acc_avx2};
    return &ops;
}

}  // namespace prefdyn::kernels::detail

#else

namespace prefdyn::kernels::detail {

const Ops* avx2_ops() { return nullptr; }

}  // namespace prefdyn::kernels::detail

#endif
