#include "lima/error.hpp"
#include "lima/estimate.hpp"
#include "lima/simd.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <random>
#include <vector>

using namespace lima;

namespace {

std::vector<simd::Level> levels() {
    std::vector<simd::Level> out;
    for (auto l : {simd::Level::avx2, simd::Level::neon})
        if (simd::supported(l)) out.push_back(l);
    return out;
}

// Restores the active table when a test ends.
struct LevelGuard {
    simd::Level saved = simd::ops().level;
    ~LevelGuard() { simd::set_level(saved); }
};

} // namespace

TEST(Simd, ScalarAlwaysSupported) {
    EXPECT_TRUE(simd::supported(simd::Level::scalar));
    EXPECT_EQ(simd::ops_for(simd::Level::scalar).level, simd::Level::scalar);
    EXPECT_EQ(simd::parse_level("avx2"), simd::Level::avx2);
    EXPECT_THROW((void)simd::parse_level("sse9"), InputError);
}

TEST(Simd, KernelWeightsAgreeBitwise) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& ref = simd::ops_for(simd::Level::scalar);
    for (auto level : levels()) {
        const auto& ops = simd::ops_for(level);
        for (auto k : {Kernel::epanechnikov, Kernel::box, Kernel::gaussian})
            for (std::size_t count : {1u, 3u, 4u, 7u, 64u, 129u}) {
                std::vector<double> r(count);
                for (auto& v : r) v = u(rng) * 0.3;
                const double d = u(rng) * 0.3, h = 0.01 + 0.1 * u(rng);
                std::vector<double> a(count), b(count);
                ref.kernel_weights(k, d, r.data(), count, h, a.data());
                ops.kernel_weights(k, d, r.data(), count, h, b.data());
                for (std::size_t q = 0; q < count; ++q) {
                    ASSERT_EQ(a[q], b[q]) << simd::name(level) << ' ' << name(k) << " q=" << q;
                    ASSERT_EQ(a[q], kernel_weight(k, d - r[q], h));
                }
            }
    }
}

TEST(Simd, AccumulateAndAddAgreeBitwise) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    const auto& ref = simd::ops_for(simd::Level::scalar);
    for (auto level : levels()) {
        const auto& ops = simd::ops_for(level);
        for (std::size_t lanes : {1u, 2u, 3u, 4u, 5u, 8u, 17u, 100u})
            for (std::size_t count : {1u, 2u, 5u, 33u}) {
                std::vector<double> w(count), v(lanes), a(count * lanes), b;
                for (auto& x : w) x = g(rng);
                for (auto& x : v) x = g(rng);
                for (auto& x : a) x = g(rng);
                b = a;
                ref.accumulate_band(a.data(), lanes, w.data(), count, v.data());
                ops.accumulate_band(b.data(), lanes, w.data(), count, v.data());
                ASSERT_EQ(a, b) << simd::name(level) << " lanes=" << lanes;
                ref.add(a.data(), w.data(), std::min(count, a.size()));
                ops.add(b.data(), w.data(), std::min(count, b.size()));
                ASSERT_EQ(a, b);
            }
    }
}

// Whole estimator runs agree bitwise across instruction sets.
TEST(Simd, EstimatorsAgreeBitwise) {
    LevelGuard guard;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 60;
    std::vector<Point2> pts(n);
    std::vector<double> marks(n);
    for (std::size_t i = 0; i < n; ++i) {
        pts[i] = {u(rng), u(rng)};
        marks[i] = 1.0 + u(rng);
    }
    EstimationConfig cfg;
    cfg.r_grid = uniform_r_grid(0.25, 97);
    cfg.bandwidth = 0.03;
    const MarkCorrelationEstimator est(euclidean_distance_matrix(pts), cfg);
    std::vector<std::vector<std::size_t>> perms(7, std::vector<std::size_t>(n));
    for (auto& p : perms) {
        for (std::size_t j = 0; j < n; ++j) p[j] = j;
        std::shuffle(p.begin(), p.end(), rng);
    }
    for (auto level : levels()) {
        for (auto f : kAllTestFunctions) {
            simd::set_level(simd::Level::scalar);
            const auto g0 = est.global_kappa_lanes(marks, perms, make_spec(f));
            const auto l0 = est.local_kappa_lanes(marks, perms, 5, make_spec(f));
            simd::set_level(level);
            const auto g1 = est.global_kappa_lanes(marks, perms, make_spec(f));
            const auto l1 = est.local_kappa_lanes(marks, perms, 5, make_spec(f));
            EXPECT_EQ(g0.valid, g1.valid);
            for (std::size_t k = 0; k < g0.r.size(); ++k)
                for (std::size_t p = 0; p < perms.size(); ++p) {
                    if (g0.valid[k]) ASSERT_EQ(g0.values(k, p), g1.values(k, p)) << name(f);
                    if (l0.valid[k]) ASSERT_EQ(l0.values(k, p), l1.values(k, p)) << name(f);
                }
        }
    }
}

TEST(Simd, EnvironmentOverride) {
    ::setenv("LIMA_SIMD", "scalar", 1);
    EXPECT_EQ(simd::detected_level(), simd::Level::scalar);
    ::setenv("LIMA_SIMD", "bogus", 1);
    EXPECT_THROW((void)simd::detected_level(), InputError);
    ::unsetenv("LIMA_SIMD");
    const auto best = simd::detected_level();
    EXPECT_TRUE(simd::supported(best));
    if (simd::supported(simd::Level::avx2)) EXPECT_EQ(best, simd::Level::avx2);
}

TEST(Simd, UnsupportedLevelIsRejected) {
    LevelGuard guard;
    for (auto l : {simd::Level::avx2, simd::Level::neon})
        if (!simd::supported(l)) EXPECT_THROW(simd::set_level(l), InputError);
}
