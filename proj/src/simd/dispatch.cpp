#include "lima/simd.hpp"

#include "lima/error.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace lima::simd {

std::string_view name(Level level) noexcept {
    switch (level) {
    case Level::scalar: return "scalar";
    case Level::avx2: return "avx2";
    case Level::neon: return "neon";
    }
    return "?";
}

Level parse_level(std::string_view text) {
    for (auto l : {Level::scalar, Level::avx2, Level::neon})
        if (name(l) == text) return l;
    throw InputError("unknown SIMD level '" + std::string(text) + "' (valid: scalar|avx2|neon)");
}

bool supported(Level level) noexcept {
    switch (level) {
    case Level::scalar: return true;
    case Level::avx2:
#if defined(LIMA_HAVE_AVX2_KERNELS)
        return __builtin_cpu_supports("avx2") != 0;
#else
        return false;
#endif
    case Level::neon:
#if defined(LIMA_HAVE_NEON_KERNELS)
        return true;
#else
        return false;
#endif
    }
    return false;
}

Level detected_level() {
    if (const char* env = std::getenv("LIMA_SIMD"); env && *env) {
        const Level requested = parse_level(env);
        if (!supported(requested)) throw InputError("LIMA_SIMD=" + std::string(env) + " is not supported here");
        return requested;
    }
    if (supported(Level::avx2)) return Level::avx2;
    if (supported(Level::neon)) return Level::neon;
    return Level::scalar;
}

const Ops& ops_for(Level level) {
    if (!supported(level)) throw InputError("SIMD level " + std::string(name(level)) + " is not supported here");
    switch (level) {
#if defined(LIMA_HAVE_AVX2_KERNELS)
    case Level::avx2: return detail::avx2_ops();
#endif
#if defined(LIMA_HAVE_NEON_KERNELS)
    case Level::neon: return detail::neon_ops();
#endif
    default: return detail::scalar_ops();
    }
}

namespace {

std::atomic<const Ops*>& active() {
    static std::atomic<const Ops*> table{&ops_for(detected_level())};
    return table;
}

} // namespace

const Ops& ops() { return *active().load(std::memory_order_acquire); }

void set_level(Level level) { active().store(&ops_for(level), std::memory_order_release); }

} // namespace lima::simd
