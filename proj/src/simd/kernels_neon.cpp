#include "lima/simd.hpp"

#include <arm_neon.h>

namespace lima::simd::detail {

namespace {

// vmulq/vaddq only; vfmaq would break bitwise agreement with the scalar path.

void kernel_weights(Kernel kernel, double d, const double* r, std::size_t count, double h, double* out) {
    if (kernel == Kernel::gaussian) {
        scalar_ops().kernel_weights(kernel, d, r, count, h, out);
        return;
    }
    const double inv_h = 1.0 / h;
    const float64x2_t vinv = vdupq_n_f64(inv_h);
    const float64x2_t vd = vdupq_n_f64(d);
    const float64x2_t one = vdupq_n_f64(1.0);
    const float64x2_t c = vdupq_n_f64(kernel == Kernel::epanechnikov ? 0.75 * inv_h : 0.5 * inv_h);
    std::size_t k = 0;
    for (; k + 2 <= count; k += 2) {
        const float64x2_t t = vmulq_f64(vsubq_f64(vd, vld1q_f64(r + k)), vinv);
        const uint64x2_t inside = vcltq_f64(vabsq_f64(t), one);
        float64x2_t w = c;
        if (kernel == Kernel::epanechnikov) w = vmulq_f64(c, vsubq_f64(one, vmulq_f64(t, t)));
        vst1q_f64(out + k, vreinterpretq_f64_u64(vandq_u64(inside, vreinterpretq_u64_f64(w))));
    }
    if (k < count) scalar_ops().kernel_weights(kernel, d, r + k, count - k, h, out + k);
}

void accumulate_band(double* acc, std::size_t lanes, const double* w, std::size_t count, const double* v) {
    for (std::size_t k = 0; k < count; ++k) {
        const float64x2_t wk = vdupq_n_f64(w[k]);
        double* row = acc + k * lanes;
        std::size_t p = 0;
        for (; p + 2 <= lanes; p += 2)
            vst1q_f64(row + p, vaddq_f64(vld1q_f64(row + p), vmulq_f64(wk, vld1q_f64(v + p))));
        for (; p < lanes; ++p) row[p] += w[k] * v[p];
    }
}

void add(double* dst, const double* src, std::size_t count) {
    std::size_t k = 0;
    for (; k + 2 <= count; k += 2) vst1q_f64(dst + k, vaddq_f64(vld1q_f64(dst + k), vld1q_f64(src + k)));
    for (; k < count; ++k) dst[k] += src[k];
}

} // namespace

const Ops& neon_ops() noexcept {
    static const Ops table{Level::neon, &kernel_weights, &accumulate_band, &add};
    return table;
}

} // namespace lima::simd::detail
