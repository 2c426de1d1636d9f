#include "lima/kernel.hpp"

#include "lima/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace lima {

std::string_view name(Kernel k) noexcept {
    switch (k) {
    case Kernel::epanechnikov: return "epanechnikov";
    case Kernel::gaussian: return "gaussian";
    case Kernel::box: return "box";
    }
    return "?";
}

Kernel parse_kernel(std::string_view text) {
    for (auto k : {Kernel::epanechnikov, Kernel::gaussian, Kernel::box})
        if (name(k) == text) return k;
    throw InputError("unknown kernel '" + std::string(text) + "' (valid: epanechnikov|gaussian|box)");
}

// The SIMD kernels reproduce these expressions operation by operation; keep
// them in sync with src/simd/.
double kernel_weight(Kernel k, double u, double h) noexcept {
    const double inv_h = 1.0 / h;
    const double t = u * inv_h;
    switch (k) {
    case Kernel::epanechnikov: return std::abs(t) < 1.0 ? (0.75 * inv_h) * (1.0 - t * t) : 0.0;
    case Kernel::box: return std::abs(t) < 1.0 ? 0.5 * inv_h : 0.0;
    case Kernel::gaussian: return (inv_h / std::sqrt(2.0 * std::numbers::pi)) * std::exp(-0.5 * (t * t));
    }
    return 0.0;
}

double kernel_support(Kernel k, double h) noexcept {
    return k == Kernel::gaussian ? std::numeric_limits<double>::infinity() : h;
}

} // namespace lima
