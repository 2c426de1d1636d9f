#include "lima/simd.hpp"

#include <cmath>
#include <numbers>

namespace lima::simd::detail {

namespace {

void kernel_weights(Kernel kernel, double d, const double* r, std::size_t count, double h, double* out) {
    const double inv_h = 1.0 / h;
    switch (kernel) {
    case Kernel::epanechnikov: {
        const double c = 0.75 * inv_h;
        for (std::size_t k = 0; k < count; ++k) {
            const double t = (d - r[k]) * inv_h;
            out[k] = std::abs(t) < 1.0 ? c * (1.0 - t * t) : 0.0;
        }
        break;
    }
    case Kernel::box: {
        const double c = 0.5 * inv_h;
        for (std::size_t k = 0; k < count; ++k) {
            const double t = (d - r[k]) * inv_h;
            out[k] = std::abs(t) < 1.0 ? c : 0.0;
        }
        break;
    }
    case Kernel::gaussian: {
        const double c = inv_h / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t k = 0; k < count; ++k) {
            const double t = (d - r[k]) * inv_h;
            out[k] = c * std::exp(-0.5 * (t * t));
        }
        break;
    }
    }
}

void accumulate_band(double* acc, std::size_t lanes, const double* w, std::size_t count, const double* v) {
    for (std::size_t k = 0; k < count; ++k) {
        const double wk = w[k];
        double* row = acc + k * lanes;
        for (std::size_t p = 0; p < lanes; ++p) row[p] += wk * v[p];
    }
}

void add(double* dst, const double* src, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) dst[k] += src[k];
}

} // namespace

const Ops& scalar_ops() noexcept {
    static const Ops table{Level::scalar, &kernel_weights, &accumulate_band, &add};
    return table;
}

} // namespace lima::simd::detail
