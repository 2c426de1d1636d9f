#include "lima/envelope.hpp"
#include "lima/error.hpp"
#include "lima/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lima;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    for (double v : x) m.mean += v;
    m.mean /= static_cast<double>(x.size());
    for (double v : x) m.var += (v - m.mean) * (v - m.mean);
    m.var /= static_cast<double>(x.size() - 1);
    return m;
}

} // namespace

TEST(Scenario, NamesRoundTrip) {
    for (auto s : {Scenario::I, Scenario::II, Scenario::III, Scenario::IV}) EXPECT_EQ(parse_scenario(name(s)), s);
    EXPECT_EQ(parse_scenario("3"), Scenario::III);
    try {
        (void)parse_scenario("V");
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("IV"), std::string::npos);
    }
}

// Count mean and variance both equal lambda |W| within 3 standard errors.
TEST(Poisson, CountMomentsMatchIntensity) {
    auto rng = make_rng(1, 0, 0);
    const Window w = build_window({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}});
    const double lambda = 20.0, mu = lambda * w.area();
    std::vector<double> counts;
    for (int k = 0; k < 1000; ++k) {
        const auto pts = rpoispp(lambda, w, rng);
        for (const auto& p : pts) ASSERT_TRUE(w.contains(p));
        counts.push_back(static_cast<double>(pts.size()));
    }
    const auto m = moments(counts);
    EXPECT_NEAR(m.mean, mu, 3.0 * std::sqrt(mu / 1000.0));
    // variance of the sample variance for a Poisson law is about 2 mu^2 / N
    EXPECT_NEAR(m.var, mu, 3.0 * std::sqrt((2.0 * mu * mu + mu) / 1000.0));
}

TEST(Poisson, UnitSquareMean500) {
    auto rng = make_rng(2, 0, 0);
    double sum = 0.0;
    for (int k = 0; k < 200; ++k) sum += static_cast<double>(rpoispp(500.0, unit_square(), rng).size());
    EXPECT_NEAR(sum / 200.0, 500.0, 3.0 * std::sqrt(500.0 / 200.0));
}

TEST(Poisson, TinyIntensityIsMostlyEmpty) {
    auto rng = make_rng(3, 0, 0);
    int empty = 0;
    for (int k = 0; k < 1000; ++k) empty += rpoispp(0.01, unit_square(), rng).empty();
    EXPECT_GT(empty, 970);
    EXPECT_THROW((void)rpoispp(0.0, unit_square(), rng), InputError);
}

TEST(Poisson, NetworkSplitsByLength) {
    auto rng = make_rng(4, 0, 0);
    const auto single = build_network({{0, 0}, {0, 3}}, {{0, 1}});
    double sum = 0.0;
    for (int k = 0; k < 500; ++k) sum += static_cast<double>(rpoisnet(10.0, single, rng).size());
    EXPECT_NEAR(sum / 500.0, 30.0, 3.0 * std::sqrt(30.0 / 500.0));

    const auto two = build_network({{0, 0}, {1, 0}, {1, 3}}, {{0, 1}, {1, 2}});
    double longer = 0.0, total = 0.0;
    for (int k = 0; k < 500; ++k)
        for (const auto& loc : rpoisnet(10.0, two, rng)) {
            ASSERT_TRUE(two.is_valid(loc));
            longer += loc.segment == 1;
            total += 1.0;
        }
    EXPECT_NEAR(longer / total, 0.75, 3.0 * std::sqrt(0.75 * 0.25 / total));
}

TEST(Discs, DisjointAndInside) {
    auto rng = make_rng(5, 0, 0);
    for (int k = 0; k < 500; ++k) {
        const auto c = place_discs(unit_square(), 0.075, rng);
        EXPECT_GT(euclidean_distance(c[0], c[1]), 0.15);
        for (const auto& p : c) {
            EXPECT_GE(p.x, 0.075);
            EXPECT_LE(p.x, 0.925);
            EXPECT_GE(p.y, 0.075);
            EXPECT_LE(p.y, 0.925);
        }
    }
    EXPECT_THROW((void)place_discs(unit_square(), 0.6, rng), InputError);
}

TEST(Scenario, RegionLaws) {
    for (auto s : {Scenario::I, Scenario::II, Scenario::III, Scenario::IV}) {
        auto cfg = default_scenario(s);
        cfg.intensity = 4000.0;
        const auto sp = simulate_scenario(cfg, 0);
        const auto& m = sp.pattern.real_marks().values;
        std::vector<double> by[4];
        for (std::size_t i = 0; i < m.size(); ++i) by[static_cast<int>(sp.regions[i])].push_back(m[i]);
        const auto out = moments(by[0]);
        EXPECT_NEAR(out.mean, 5.0, 0.05) << name(s);
        EXPECT_NEAR(std::sqrt(out.var), 0.5, 0.05) << name(s);
        if (s == Scenario::I) {
            EXPECT_EQ(by[0].size(), m.size());
        } else if (s == Scenario::IV) {
            ASSERT_GT(by[3].size(), 30u);
            EXPECT_NEAR(moments(by[3]).mean, 7.0, 0.2);
        } else {
            ASSERT_GT(by[1].size(), 20u);
            ASSERT_GT(by[2].size(), 20u);
            EXPECT_NEAR(moments(by[1]).mean, 7.0, 0.25);
            EXPECT_NEAR(moments(by[2]).mean, s == Scenario::II ? 3.0 : 7.0, 0.25);
        }
    }
}

TEST(Scenario, RegionGeometry) {
    auto cfg = default_scenario(Scenario::II);
    const std::array<Point2, 2> c{Point2{0.3, 0.3}, Point2{0.7, 0.7}};
    EXPECT_EQ(region_of({0.3, 0.35}, cfg, c), Region::disc_a);
    EXPECT_EQ(region_of({0.7, 0.64}, cfg, c), Region::disc_b);
    EXPECT_EQ(region_of({0.5, 0.5}, cfg, c), Region::outside);
    EXPECT_DOUBLE_EQ(distance_to_structure({0.3, 0.5}, cfg, c), 0.2);
    cfg.scenario = Scenario::IV;
    cfg.band_halfwidth = 0.05;
    EXPECT_EQ(region_of({0.5, 0.53}, cfg, c), Region::band);
    EXPECT_EQ(region_of({0.5, 0.6}, cfg, c), Region::outside);
    EXPECT_NEAR(distance_to_structure({0.0, 1.0}, cfg, c), std::sqrt(0.5), 1e-15);
    cfg.scenario = Scenario::I;
    EXPECT_TRUE(std::isinf(distance_to_structure({0.5, 0.5}, cfg, c)));
}

TEST(Scenario, VarianceReading) {
    auto cfg = default_scenario(Scenario::I);
    cfg.intensity = 4000.0;
    cfg.outside = {5.0, 0.25};
    cfg.second_is_variance = true;
    const auto m = moments(simulate_scenario(cfg, 0).pattern.real_marks().values);
    EXPECT_NEAR(m.var, 0.25, 0.03);
}

// The unmarked points and disc centers depend on (seed, replicate) only.
TEST(Scenario, StreamsAreSharedAcrossScenarios) {
    auto two = default_scenario(Scenario::II);
    auto three = default_scenario(Scenario::III);
    auto one = default_scenario(Scenario::I);
    const auto a = simulate_scenario(two, 3);
    const auto b = simulate_scenario(three, 3);
    const auto c = simulate_scenario(one, 3);
    EXPECT_EQ(a.pattern.support(), b.pattern.support());
    EXPECT_EQ(a.pattern.support(), c.pattern.support());
    EXPECT_EQ(a.centers, b.centers);
    EXPECT_EQ(simulate_scenario(two, 3).pattern, a.pattern);
    EXPECT_NE(simulate_scenario(two, 4).pattern.support(), a.pattern.support());
}

TEST(Scenario, Validation) {
    auto cfg = default_scenario(Scenario::II);
    cfg.disc_radius = -1.0;
    EXPECT_THROW(check_scenario(cfg), InputError);
    cfg = default_scenario(Scenario::IV);
    cfg.band_halfwidth = 0.0;
    EXPECT_THROW(check_scenario(cfg), InputError);
}

TEST(Study, SmallStudyIsDeterministic) {
    StudyConfig cfg;
    cfg.scenario = default_scenario(Scenario::II);
    cfg.scenario.intensity = 150.0;
    cfg.replicates = 2;
    cfg.permutations = 19;
    cfg.r_steps = 50;
    std::size_t seen = 0;
    const auto a = replicate_study(cfg, [&](const ReplicateRecord& r) { EXPECT_EQ(r.replicate, seen++); });
    const auto b = replicate_study(cfg);
    ASSERT_EQ(a.records.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(a.records[k].global_p, b.records[k].global_p);
        EXPECT_EQ(a.records[k].local_significant, b.records[k].local_significant);
        EXPECT_EQ(a.records[k].far, b.records[k].far);
        EXPECT_GT(a.records[k].structured, 0u);
    }
    EXPECT_GE(a.global_rejection_rate(), 0.0);
    EXPECT_LE(a.mean_structured_detection(), 1.0);
    cfg.replicates = 0;
    EXPECT_THROW((void)replicate_study(cfg), InputError);
}

TEST(Study, SummaryArithmetic) {
    StudySummary s;
    ReplicateRecord r;
    r.points = 10;
    r.global_reject = true;
    r.local_significant = 2;
    r.structured = 4;
    r.structured_flagged = 4;
    r.far = 5;
    r.far_flagged = 1;
    s.records.push_back(r);
    r.global_reject = false;
    r.local_significant = 0;
    r.structured_flagged = 2;
    r.far_flagged = 0;
    s.records.push_back(r);
    EXPECT_DOUBLE_EQ(s.global_rejection_rate(), 0.5);
    EXPECT_DOUBLE_EQ(s.mean_local_significant_fraction(), 0.1);
    EXPECT_DOUBLE_EQ(s.mean_structured_detection(), 0.75);
    EXPECT_DOUBLE_EQ(s.replicates_detecting(0.9), 0.5);
    const auto [mean, se] = s.far_flag_rate();
    EXPECT_DOUBLE_EQ(mean, 0.1);
    EXPECT_NEAR(se, 0.1, 1e-15);
}

TEST(Study, SmokePreset) {
    const auto s = smoke_study(Scenario::I);
    EXPECT_EQ(s.replicates, 25u);
    EXPECT_EQ(s.permutations, 49u);
    EXPECT_EQ(s.scenario.intensity, 200.0);
}
