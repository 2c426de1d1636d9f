#pragma once

#include <string_view>

namespace lima {

/// Smoothing kernel K(u) with bandwidth h; all integrate to one over u.
enum class Kernel { epanechnikov, gaussian, box };

[[nodiscard]] std::string_view name(Kernel k) noexcept;
[[nodiscard]] Kernel parse_kernel(std::string_view text);

/// Reference scalar evaluation. Epanechnikov: 3/(4h) (1 - (u/h)^2) on |u| < h.
/// Box: 1/(2h) on |u| < h. Gaussian: normal density with standard deviation h.
[[nodiscard]] double kernel_weight(Kernel k, double u, double h) noexcept;

/// Half-width of the kernel's support (+inf for the Gaussian).
[[nodiscard]] double kernel_support(Kernel k, double h) noexcept;

} // namespace lima
