#pragma once

#include "lima/kernel.hpp"

#include <cstddef>
#include <string_view>

// Data-parallel inner loops of the estimators. Each instruction set provides
// the same table of functions; the scalar table is the reference and every
// variant performs the same per-element operations, so results agree bitwise.

namespace lima::simd {

enum class Level { scalar, avx2, neon };

struct Ops {
    Level level;
    // out[k] = K(d - r[k]) for k < count.
    void (*kernel_weights)(Kernel kernel, double d, const double* r, std::size_t count, double h, double* out);
    // acc[k * lanes + p] += w[k] * v[p] for k < count, p < lanes.
    void (*accumulate_band)(double* acc, std::size_t lanes, const double* w, std::size_t count, const double* v);
    // dst[k] += src[k].
    void (*add)(double* dst, const double* src, std::size_t count);
};

[[nodiscard]] std::string_view name(Level level) noexcept;
[[nodiscard]] Level parse_level(std::string_view text);

/// Whether this binary carries kernels for `level` and the CPU supports them.
[[nodiscard]] bool supported(Level level) noexcept;

/// Best supported level, unless LIMA_SIMD=scalar|avx2|neon says otherwise.
[[nodiscard]] Level detected_level();

[[nodiscard]] const Ops& ops_for(Level level);
/// Table used by the estimators.
[[nodiscard]] const Ops& ops();
/// Overrides the active level (process-wide). Throws InputError if unsupported.
void set_level(Level level);

namespace detail {
const Ops& scalar_ops() noexcept;
#if defined(LIMA_HAVE_AVX2_KERNELS)
const Ops& avx2_ops() noexcept;
#endif
#if defined(LIMA_HAVE_NEON_KERNELS)
const Ops& neon_ops() noexcept;
#endif
} // namespace detail

} // namespace lima::simd
