#include "oracle.hpp"

#include "lima/envelope.hpp"
#include "lima/error.hpp"
#include "lima/estimate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

using namespace lima;

namespace {

struct Case {
    DistanceMatrix lib;     // distances from the library
    DistanceMatrix oracle;  // distances from the oracle
    std::vector<double> marks;
    EstimationConfig cfg;
};

EstimationConfig random_config(std::mt19937_64& rng, double scale) {
    EstimationConfig cfg;
    cfg.r_grid = uniform_r_grid(0.6 * scale, 30);
    cfg.bandwidth = std::uniform_real_distribution<double>(0.08, 0.2)(rng) * scale;
    cfg.kernel = std::array{Kernel::epanechnikov, Kernel::box, Kernel::gaussian}[rng() % 3];
    return cfg;
}

std::vector<double> random_marks(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.5, 3.0);
    std::vector<double> m(n);
    for (auto& v : m) v = u(rng);
    return m;
}

Case planar_case(std::mt19937_64& rng) {
    const std::size_t n = 3 + rng() % 10;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng)};
    Case c;
    c.lib = euclidean_distance_matrix(pts);
    c.oracle = DistanceMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c.oracle(i, j) = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
    c.marks = random_marks(rng, n);
    c.cfg = random_config(rng, 1.0);
    return c;
}

Case network_case(std::mt19937_64& rng) {
    const std::size_t n = 3 + rng() % 10;
    const auto net = oracle::random_network(rng, 6, 0.5);
    const auto locs = oracle::random_locations(rng, net, n);
    const auto fw = oracle::floyd_warshall_locations(net, locs);
    Case c;
    c.lib = network_distance_matrix(net, locs);
    c.oracle = DistanceMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c.oracle(i, j) = fw[i][j];
    c.marks = random_marks(rng, n);
    c.cfg = random_config(rng, 1.0);
    return c;
}

void expect_curve(const SummaryCurve& got, const oracle::Curve& want, double tol, const std::string& what) {
    ASSERT_EQ(got.values.size(), want.v.size());
    for (std::size_t k = 0; k < want.v.size(); ++k) {
        ASSERT_EQ(static_cast<bool>(got.valid[k]), want.ok[k]) << what << " k=" << k;
        if (want.ok[k]) ASSERT_NEAR(got.values[k], want.v[k], tol * std::max(1.0, std::abs(want.v[k]))) << what << " k=" << k;
    }
}

bool has_zero_local_normalizer(TestFunction f, const std::vector<double>& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (oracle::local_norm(f, m, i) == 0.0) return true;
    return false;
}

} // namespace

class OracleSweep : public ::testing::TestWithParam<bool> {};

TEST_P(OracleSweep, RealMarksMatchBruteForce) {
    const bool network = GetParam();
    std::mt19937_64 rng(network ? 99 : 11);
    for (int rep = 0; rep < 50; ++rep) {
        const Case c = network ? network_case(rng) : planar_case(rng);
        const MarkCorrelationEstimator est(c.lib, c.cfg);
        for (auto f : kAllTestFunctions) {
            const auto spec = make_spec(f);
            const std::string tag = std::string(name(f)) + " rep " + std::to_string(rep);
            for (std::size_t i = 0; i < c.marks.size(); ++i) {
                expect_curve(est.local_c(c.marks, i, spec), oracle::local_curve(c.oracle, c.marks, i, f, c.cfg, false),
                             1e-12, "local_c " + tag);
                expect_curve(est.local_kappa(c.marks, i, spec),
                             oracle::local_curve(c.oracle, c.marks, i, f, c.cfg, true), 1e-12, "local_kappa " + tag);
            }
            expect_curve(est.global_c(c.marks, spec), oracle::global_curve(c.oracle, c.marks, f, c.cfg, false), 1e-12,
                         "global_c " + tag);
            expect_curve(est.global_kappa(c.marks, spec), oracle::global_curve(c.oracle, c.marks, f, c.cfg, true),
                         1e-12, "global_kappa " + tag);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(PlanarAndNetwork, OracleSweep, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "network" : "planar"; });

// Every lane equals the oracle run on the correspondingly permuted marks.
TEST(Lanes, PermutationLanesMatchPermutedMarks) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        const Case c = planar_case(rng);
        const MarkCorrelationEstimator est(c.lib, c.cfg);
        const auto ps = make_permutations(c.marks.size(), 6, 17, rep);
        for (auto f : kAllTestFunctions) {
            const auto spec = make_spec(f);
            const auto g = est.global_kappa_lanes(c.marks, ps.perms, spec);
            for (std::size_t p = 0; p < ps.perms.size(); ++p) {
                std::vector<double> m(c.marks.size());
                for (std::size_t j = 0; j < m.size(); ++j) m[j] = c.marks[ps.perms[p][j]];
                const auto want = oracle::global_curve(c.oracle, m, f, c.cfg, true);
                for (std::size_t k = 0; k < want.v.size(); ++k)
                    if (want.ok[k]) ASSERT_NEAR(g.values(k, p), want.v[k], 1e-12 * std::max(1.0, std::abs(want.v[k])));
                if (has_zero_local_normalizer(f, m)) continue;
                for (std::size_t i = 0; i < m.size(); ++i) {
                    const auto l = est.local_kappa_lanes(c.marks, ps.perms, i, spec);
                    const auto lw = oracle::local_curve(c.oracle, m, i, f, c.cfg, true);
                    for (std::size_t k = 0; k < lw.v.size(); ++k) {
                        ASSERT_EQ(static_cast<bool>(l.valid[k]), lw.ok[k]);
                        if (lw.ok[k]) ASSERT_NEAR(l.values(k, p), lw.v[k], 1e-12 * std::max(1.0, std::abs(lw.v[k])));
                    }
                }
            }
        }
    }
}

TEST(Lanes, LocalKappaAllMatchesSinglePoint) {
    std::mt19937_64 rng(3);
    const Case c = planar_case(rng);
    const MarkCorrelationEstimator est(c.lib, c.cfg);
    for (auto f : kAllTestFunctions) {
        const auto all = est.local_kappa_all(c.marks, make_spec(f));
        for (std::size_t i = 0; i < c.marks.size(); ++i) {
            const auto one = est.local_kappa(c.marks, i, make_spec(f));
            ASSERT_EQ(all[i].valid, one.valid);
            for (std::size_t k = 0; k < one.values.size(); ++k)
                if (one.valid[k]) ASSERT_EQ(all[i].values[k], one.values[k]);
        }
    }
}

// Global sums over pairs equal the sums of the per-point local sums.
TEST(Sums, GlobalIsSumOfLocal) {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        const Case c = planar_case(rng);
        const MarkCorrelationEstimator est(c.lib, c.cfg);
        Matrix<double> m(c.marks.size(), 1);
        for (std::size_t j = 0; j < c.marks.size(); ++j) m(j, 0) = c.marks[j];
        for (auto f : {TestFunction::stoyan, TestFunction::beisbart, TestFunction::variogram,
                       TestFunction::differentiation}) {
            const auto g = est.global_sums(m, f, {});
            std::vector<double> num(c.cfg.r_grid.size(), 0.0), den(c.cfg.r_grid.size(), 0.0);
            for (std::size_t i = 0; i < c.marks.size(); ++i) {
                const auto l = est.local_sums(m, i, f, {});
                for (std::size_t k = 0; k < num.size(); ++k) {
                    num[k] += l.num(k, 0);
                    den[k] += l.den[k];
                }
            }
            for (std::size_t k = 0; k < num.size(); ++k) {
                EXPECT_NEAR(g.num(k, 0), num[k], 1e-12 * std::max(1.0, std::abs(num[k])));
                EXPECT_NEAR(g.den[k], den[k], 1e-12 * std::max(1.0, den[k]));
            }
        }
    }
}

TEST(Invariants, ConstantMarksGiveExactlyOne) {
    std::mt19937_64 rng(21);
    for (double value : {0.5, 2.0, 4.0}) {
        for (int rep = 0; rep < 5; ++rep) {
            Case c = planar_case(rng);
            c.marks.assign(c.marks.size(), value);
            const MarkCorrelationEstimator est(c.lib, c.cfg);
            const auto spec = make_spec(TestFunction::stoyan);
            const auto g = est.global_kappa(c.marks, spec);
            const auto gc = est.global_c(c.marks, spec);
            for (std::size_t k = 0; k < g.values.size(); ++k)
                if (g.valid[k]) {
                    EXPECT_EQ(g.values[k], 1.0);
                    EXPECT_EQ(gc.values[k], value * value);
                }
            for (std::size_t i = 0; i < c.marks.size(); ++i) {
                const auto l = est.local_kappa(c.marks, i, spec);
                for (std::size_t k = 0; k < l.values.size(); ++k)
                    if (l.valid[k]) EXPECT_EQ(l.values[k], 1.0);
            }
        }
    }
}

TEST(Invariants, ConstantMarksVariogram) {
    std::mt19937_64 rng(22);
    Case c = planar_case(rng);
    c.marks.assign(c.marks.size(), 1.7);
    const MarkCorrelationEstimator est(c.lib, c.cfg);
    const auto spec = make_spec(TestFunction::variogram);
    const auto g = est.global_c(c.marks, spec);
    for (std::size_t k = 0; k < g.values.size(); ++k)
        if (g.valid[k]) EXPECT_EQ(g.values[k], 0.0);
    const auto l = est.local_c(c.marks, 0, spec);
    for (std::size_t k = 0; k < l.values.size(); ++k)
        if (l.valid[k]) EXPECT_EQ(l.values[k], 0.0);
    try {
        (void)est.local_kappa(c.marks, 0, spec);
        FAIL() << "expected a degenerate normalizer";
    } catch (const DegenerateError& e) {
        EXPECT_NE(std::string(e.what()).find("variogram"), std::string::npos);
    }
    EXPECT_THROW((void)est.global_kappa(c.marks, spec), DegenerateError);
}

TEST(Invariants, ScalingMarksLeavesKappaUnchanged) {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        const Case c = planar_case(rng);
        const MarkCorrelationEstimator est(c.lib, c.cfg);
        const double a = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
        std::vector<double> scaled = c.marks;
        for (auto& v : scaled) v *= a;
        for (auto f : {TestFunction::stoyan, TestFunction::variogram, TestFunction::differentiation}) {
            const auto g0 = est.global_kappa(c.marks, make_spec(f));
            const auto g1 = est.global_kappa(scaled, make_spec(f));
            for (std::size_t k = 0; k < g0.values.size(); ++k)
                if (g0.valid[k]) EXPECT_NEAR(g0.values[k], g1.values[k], 1e-10 * std::max(1.0, std::abs(g0.values[k])));
            for (std::size_t i = 0; i < c.marks.size(); ++i) {
                const auto l0 = est.local_kappa(c.marks, i, make_spec(f));
                const auto l1 = est.local_kappa(scaled, i, make_spec(f));
                for (std::size_t k = 0; k < l0.values.size(); ++k)
                    if (l0.valid[k])
                        EXPECT_NEAR(l0.values[k], l1.values[k], 1e-10 * std::max(1.0, std::abs(l0.values[k])));
            }
        }
    }
}

// With a box kernel the local c is the plain mean of tf over the neighbours in the band.
TEST(Invariants, BoxKernelIsAPlainNeighbourAverage) {
    DistanceMatrix d(3, 3, 0.0);
    d(0, 1) = d(1, 0) = 0.10;
    d(0, 2) = d(2, 0) = 0.12;
    d(1, 2) = d(2, 1) = 0.5;
    EstimationConfig cfg;
    cfg.r_grid = {0.11};
    cfg.kernel = Kernel::box;
    cfg.bandwidth = 0.05;
    const MarkCorrelationEstimator est(d, cfg);
    const std::vector<double> m{2.0, 3.0, 5.0};
    EXPECT_DOUBLE_EQ(est.local_c(m, 0, make_spec(TestFunction::stoyan)).values[0], (6.0 + 10.0) / 2.0);
}

TEST(Global, TwoPointHandComputation) {
    const auto pattern = validate(PlanarSupport{unit_square(), {{0.25, 0.5}, {0.75, 0.5}}}, RealMarks{{2.0, 3.0}});
    EstimationConfig cfg;
    cfg.r_grid = {0.5};
    cfg.bandwidth = 0.1;
    const auto c = global_kappa(pattern, make_spec(TestFunction::stoyan), cfg);
    ASSERT_TRUE(c.valid[0]);
    EXPECT_DOUBLE_EQ(c.values[0], 6.0 / 6.25);
}

TEST(Local, EmptyNeighbourhoodIsInvalid) {
    const auto pattern =
        validate(PlanarSupport{unit_square(), {{0.1, 0.1}, {0.9, 0.9}, {0.8, 0.9}}}, RealMarks{{1.0, 2.0, 3.0}});
    EstimationConfig cfg;
    cfg.r_grid = uniform_r_grid(0.25, 25);
    cfg.bandwidth = 0.02;
    const auto c = local_kappa(pattern, 0, make_spec(TestFunction::stoyan), cfg);
    for (auto v : c.valid) EXPECT_FALSE(v);
    const auto c2 = local_kappa(pattern, 1, make_spec(TestFunction::stoyan), cfg);
    EXPECT_TRUE(c2.valid[10]);  // r = 0.1
    EXPECT_FALSE(c2.valid[0]);
}

TEST(Network, IsolatedComponentHasNoValidR) {
    auto net = std::make_shared<const LinearNetwork>(
        build_network({{0, 0}, {1, 0}, {5, 5}, {5, 6}}, {{0, 1}, {2, 3}}));
    const auto p = validate(NetworkSupport{net, {{0, 0.1}, {0, 0.3}, {0, 0.6}, {1, 0.5}}},
                            RealMarks{{1.0, 2.0, 3.0, 4.0}});
    EstimationConfig cfg;
    cfg.r_grid = uniform_r_grid(1.0, 20);
    cfg.bandwidth = 0.1;
    const auto c = local_kappa_network(p, 3, make_spec(TestFunction::stoyan), cfg);
    for (auto v : c.valid) EXPECT_FALSE(v);
    EXPECT_THROW((void)local_kappa_network(validate(PlanarSupport{unit_square(), {{0.1, 0.1}, {0.2, 0.2}, {0.3, 0.1}}},
                                                    RealMarks{{1, 2, 3}}),
                                           0, make_spec(TestFunction::stoyan), cfg),
                 InputError);
}

// Points on a straight single-segment network have network distances equal
// to their planar distances, so both paths must agree bitwise.
TEST(Network, CollinearNetworkReproducesPlanarCurvesBitwise) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto net = std::make_shared<const LinearNetwork>(build_network({{0, 0.5}, {1, 0.5}}, {{0, 1}}));
    std::vector<Point2> pts;
    std::vector<NetworkLocation> locs;
    for (int k = 0; k < 12; ++k) {
        const double x = u(rng);
        pts.push_back({x, 0.5});
        locs.push_back({0, x});
    }
    const auto marks = random_marks(rng, 12);
    const auto planar = validate(PlanarSupport{unit_square(), pts}, RealMarks{marks});
    const auto onnet = validate(NetworkSupport{net, locs}, RealMarks{marks});
    EXPECT_EQ(pairwise_distances(planar), pairwise_distances(onnet));
    EstimationConfig cfg;
    cfg.r_grid = uniform_r_grid(0.4, 40);
    cfg.bandwidth = 0.08;
    for (auto f : kAllTestFunctions)
        for (std::size_t i = 0; i < 12; ++i) {
            const auto a = local_kappa(planar, i, make_spec(f), cfg);
            const auto b = local_kappa_network(onnet, i, make_spec(f), cfg);
            ASSERT_EQ(a.valid, b.valid);
            for (std::size_t k = 0; k < a.values.size(); ++k)
                if (a.valid[k]) ASSERT_EQ(a.values[k], b.values[k]);
        }
}

// An estimator fed a copied distance matrix reproduces the pattern-level curves bitwise.
TEST(Network, InjectedDistanceMatrixReproducesCurves) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> pts(12);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const auto marks = random_marks(rng, 12);
    const auto planar = validate(PlanarSupport{unit_square(), pts}, RealMarks{marks});
    EstimationConfig cfg;
    cfg.r_grid = uniform_r_grid(0.4, 40);
    cfg.bandwidth = 0.1;
    DistanceMatrix injected(12, 12);
    const auto d = pairwise_distances(planar);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j) injected(i, j) = d(i, j);
    const MarkCorrelationEstimator est(injected, cfg);
    for (auto f : kAllTestFunctions)
        for (std::size_t i = 0; i < 12; ++i) {
            const auto a = local_kappa(planar, i, make_spec(f), cfg);
            const auto b = est.local_kappa(marks, i, make_spec(f));
            ASSERT_EQ(a.valid, b.valid);
            for (std::size_t k = 0; k < a.values.size(); ++k)
                if (a.valid[k]) ASSERT_EQ(a.values[k], b.values[k]);
        }
}

// Under random labelling the local Stoyan and global variogram kappas are
// unbiased for 1; their permutation means stay within 3 standard errors.
TEST(Permutation, MeanKappaIsOne) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(5.0, 0.5);
    const std::size_t n = 150;
    std::vector<Point2> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng)};
    std::vector<double> marks(n);
    for (auto& m : marks) m = g(rng);
    EstimationConfig cfg;
    cfg.r_grid = uniform_r_grid(0.25, 25);
    cfg.bandwidth = 0.03;
    const MarkCorrelationEstimator est(euclidean_distance_matrix(pts), cfg);
    const auto ps = make_permutations(n, 400, 3);
    auto check = [&](const LaneCurves& lc) {
        for (std::size_t k = 0; k < lc.r.size(); ++k) {
            if (!lc.valid[k]) continue;
            double s = 0.0, ss = 0.0;
            const std::size_t L = lc.lanes();
            for (std::size_t p = 0; p < L; ++p) s += lc.values(k, p);
            const double mean = s / static_cast<double>(L);
            for (std::size_t p = 0; p < L; ++p) ss += (lc.values(k, p) - mean) * (lc.values(k, p) - mean);
            const double se = std::sqrt(ss / static_cast<double>(L - 1) / static_cast<double>(L));
            EXPECT_LE(std::abs(mean - 1.0), 3.0 * se + 1e-12) << "r=" << lc.r[k];
        }
    };
    check(est.global_kappa_lanes(marks, ps.perms, make_spec(TestFunction::variogram)));
    check(est.local_kappa_lanes(marks, ps.perms, 7, make_spec(TestFunction::stoyan)));
}

TEST(Config, Validation) {
    EstimationConfig cfg;
    cfg.r_grid = {0.0, 0.1};
    cfg.bandwidth = 0.0;
    EXPECT_THROW(check_config(cfg), InputError);
    cfg.bandwidth = 0.1;
    cfg.r_grid = {0.1, 0.1};
    EXPECT_THROW(check_config(cfg), InputError);
    cfg.r_grid = {-0.1, 0.1};
    EXPECT_THROW(check_config(cfg), InputError);
    cfg.r_grid = {0.0, 0.1};
    EXPECT_NO_THROW(check_config(cfg));
    EXPECT_EQ(uniform_r_grid(0.25, 4).size(), 5u);
    EXPECT_EQ(uniform_r_grid(0.25, 4).back(), 0.25);
    EXPECT_DOUBLE_EQ(default_bandwidth(100.0), 0.015);
}

TEST(Marks, DifferentiationRejectsNonPositiveMarks) {
    DistanceMatrix d(3, 3, 0.1);
    for (std::size_t i = 0; i < 3; ++i) d(i, i) = 0.0;
    EstimationConfig cfg;
    cfg.r_grid = {0.1};
    cfg.bandwidth = 0.05;
    const MarkCorrelationEstimator est(d, cfg);
    const std::vector<double> m{1.0, 0.0, 2.0};
    EXPECT_THROW((void)est.global_kappa(m, make_spec(TestFunction::differentiation)), InputError);
    EXPECT_NO_THROW((void)est.global_kappa(m, make_spec(TestFunction::stoyan)));
}
