#include "lima/simd.hpp"

#include <immintrin.h>

namespace lima::simd::detail {

namespace {

// Multiplies and adds are kept separate (no FMA) so every lane matches the
// scalar reference bit for bit.

void kernel_weights(Kernel kernel, double d, const double* r, std::size_t count, double h, double* out) {
    if (kernel == Kernel::gaussian) {
        scalar_ops().kernel_weights(kernel, d, r, count, h, out);
        return;
    }
    const double inv_h = 1.0 / h;
    const __m256d vinv = _mm256_set1_pd(inv_h);
    const __m256d vd = _mm256_set1_pd(d);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d c = _mm256_set1_pd(kernel == Kernel::epanechnikov ? 0.75 * inv_h : 0.5 * inv_h);
    std::size_t k = 0;
    for (; k + 4 <= count; k += 4) {
        const __m256d t = _mm256_mul_pd(_mm256_sub_pd(vd, _mm256_loadu_pd(r + k)), vinv);
        const __m256d inside = _mm256_cmp_pd(_mm256_andnot_pd(sign_mask, t), one, _CMP_LT_OQ);
        __m256d w = c;
        if (kernel == Kernel::epanechnikov) w = _mm256_mul_pd(c, _mm256_sub_pd(one, _mm256_mul_pd(t, t)));
        _mm256_storeu_pd(out + k, _mm256_and_pd(inside, w));
    }
    if (k < count) scalar_ops().kernel_weights(kernel, d, r + k, count - k, h, out + k);
}

void accumulate_band(double* acc, std::size_t lanes, const double* w, std::size_t count, const double* v) {
    for (std::size_t k = 0; k < count; ++k) {
        const __m256d wk = _mm256_set1_pd(w[k]);
        double* row = acc + k * lanes;
        std::size_t p = 0;
        for (; p + 8 <= lanes; p += 8) {
            const __m256d a0 = _mm256_add_pd(_mm256_loadu_pd(row + p), _mm256_mul_pd(wk, _mm256_loadu_pd(v + p)));
            const __m256d a1 =
                _mm256_add_pd(_mm256_loadu_pd(row + p + 4), _mm256_mul_pd(wk, _mm256_loadu_pd(v + p + 4)));
            _mm256_storeu_pd(row + p, a0);
            _mm256_storeu_pd(row + p + 4, a1);
        }
        for (; p + 4 <= lanes; p += 4)
            _mm256_storeu_pd(row + p,
                             _mm256_add_pd(_mm256_loadu_pd(row + p), _mm256_mul_pd(wk, _mm256_loadu_pd(v + p))));
        for (; p < lanes; ++p) row[p] += w[k] * v[p];
    }
}

void add(double* dst, const double* src, std::size_t count) {
    std::size_t k = 0;
    for (; k + 4 <= count; k += 4)
        _mm256_storeu_pd(dst + k, _mm256_add_pd(_mm256_loadu_pd(dst + k), _mm256_loadu_pd(src + k)));
    for (; k < count; ++k) dst[k] += src[k];
}

} // namespace

const Ops& avx2_ops() noexcept {
    static const Ops table{Level::avx2, &kernel_weights, &accumulate_band, &add};
    return table;
}

} // namespace lima::simd::detail
