#include "lightning/kernels.hpp"

#include <immintrin.h>

namespace lightning::kernels::avx2 {

float dot(const float* a, const float* b, std::size_t n)
{
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    }
    if (i + 8 <= n) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        i += 8;
    }
    acc0 = _mm256_add_ps(acc0, acc1);
    // horizontal sum: 8 -> 4 -> 2 -> 1
    __m128 lo = _mm256_castps256_ps128(acc0);
    __m128 hi = _mm256_extractf128_ps(acc0, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 0x55));
    float sum = _mm_cvtss_f32(lo);
    for (; i < n; ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

void relu(float* x, std::size_t n)
{
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        // ordered compare: NaN lanes keep their value, like the scalar kernel
        const __m256 negative = _mm256_cmp_ps(v, zero, _CMP_LT_OQ);
        _mm256_storeu_ps(x + i, _mm256_andnot_ps(negative, v));
    }
    for (; i < n; ++i) {
        x[i] = x[i] < 0.0f ? 0.0f : x[i];
    }
}

} // namespace lightning::kernels::avx2
