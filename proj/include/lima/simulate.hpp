#pragma once

#include "lima/envelope.hpp"
#include "lima/geometry.hpp"
#include "lima/pattern.hpp"
#include "lima/testfn.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace lima {

enum class Scenario { I, II, III, IV };

[[nodiscard]] std::string_view name(Scenario s) noexcept;
/// Accepts I..IV (or 1..4); throws InputError listing the valid scenarios.
[[nodiscard]] Scenario parse_scenario(std::string_view text);

struct NormalLaw {
    double mean = 5.0;
    double sd = 0.5;
};

/// Default band half-width around the diagonal in scenario IV.
inline constexpr double kDefaultBandHalfwidth = 0.04;

struct ScenarioConfig {
    Scenario scenario = Scenario::I;
    double intensity = 500.0;
    Window window = unit_square();
    double disc_radius = 0.075;
    double band_halfwidth = kDefaultBandHalfwidth;
    NormalLaw law_a{7.0, 0.5};    // disc A (II, III) or band (IV)
    NormalLaw law_b{3.0, 0.5};    // disc B
    NormalLaw outside{5.0, 0.5};
    bool second_is_variance = false;  // read the second law parameter as a variance
    std::uint64_t seed = 1;
};

/// Laws of the given scenario: II N(7)/N(3), III N(7)/N(7), IV band N(7),
/// all with N(5, 0.5) outside.
[[nodiscard]] ScenarioConfig default_scenario(Scenario s);

/// Throws InputError for non-positive intensity, radius or band width.
void check_scenario(const ScenarioConfig& cfg);

enum class Region : std::uint8_t { outside = 0, disc_a = 1, disc_b = 2, band = 3 };

[[nodiscard]] std::string_view name(Region r) noexcept;

/// Homogeneous Poisson pattern; polygon windows use rejection from the bounding box.
[[nodiscard]] std::vector<Point2> rpoispp(double intensity, const Window& window, std::mt19937_64& rng);
/// Poisson pattern on a network, uniform by arc length.
[[nodiscard]] std::vector<NetworkLocation> rpoisnet(double intensity, const LinearNetwork& net,
                                                    std::mt19937_64& rng);

/// Two disjoint discs of the given radius, uniformly placed inside the window.
[[nodiscard]] std::array<Point2, 2> place_discs(const Window& window, double radius, std::mt19937_64& rng);

struct ScenarioMarks {
    RealMarks marks;
    std::vector<Region> regions;
    std::array<Point2, 2> centers{};  // meaningful for II and III
};

/// Draws disc centers (II, III) and marks by region membership.
[[nodiscard]] ScenarioMarks apply_scenario(std::span<const Point2> points, const ScenarioConfig& cfg,
                                           std::mt19937_64& rng);

/// Region membership without drawing marks.
[[nodiscard]] Region region_of(const Point2& p, const ScenarioConfig& cfg, const std::array<Point2, 2>& centers);
/// Distance from p to the nearest disc center or to the band's diagonal (+inf for scenario I).
[[nodiscard]] double distance_to_structure(const Point2& p, const ScenarioConfig& cfg,
                                           const std::array<Point2, 2>& centers);

struct ScenarioPattern {
    MarkedPointPattern pattern;
    std::vector<Region> regions;
    std::array<Point2, 2> centers{};
};

/// Replicate `replicate` of the scenario. The unmarked points and disc centers
/// depend only on (seed, replicate), so all scenarios share them.
[[nodiscard]] ScenarioPattern simulate_scenario(const ScenarioConfig& cfg, std::size_t replicate);

struct StudyConfig {
    ScenarioConfig scenario;
    std::size_t replicates = 100;
    std::size_t permutations = 99;
    double alpha = 0.05;
    double bandwidth = 0.0;  // 0: 0.15 / sqrt(estimated intensity) per replicate
    double r_max = 0.25;
    std::size_t r_steps = 512;
    TestFunction testfn = TestFunction::stoyan;
    bool local = true;
    bool shared_permutations = true;
};

/// The reduced-size preset: 25 replicates, 49 permutations, intensity 200.
[[nodiscard]] StudyConfig smoke_study(Scenario s);

struct ReplicateRecord {
    std::size_t replicate = 0;
    std::size_t points = 0;
    double bandwidth = 0.0;
    double global_p = 1.0;
    bool global_reject = false;
    std::size_t local_significant = 0;
    std::size_t structured = 0;
    std::size_t structured_flagged = 0;
    std::size_t far = 0;  // farther than r_max from every disc center / the band diagonal
    std::size_t far_flagged = 0;
};

struct StudySummary {
    StudyConfig config;
    std::vector<ReplicateRecord> records;

    [[nodiscard]] double global_rejection_rate() const;
    /// Mean over replicates of the fraction of points flagged.
    [[nodiscard]] double mean_local_significant_fraction() const;
    /// Mean over replicates (with structured points) of the flagged share of them.
    [[nodiscard]] double mean_structured_detection() const;
    /// Share of replicates flagging at least `share` of their structured points.
    [[nodiscard]] double replicates_detecting(double share) const;
    /// Mean and standard error over replicates (with far points) of the flagged share of far points.
    [[nodiscard]] std::pair<double, double> far_flag_rate() const;
};

using StudyProgress = std::function<void(const ReplicateRecord&)>;

[[nodiscard]] ReplicateRecord run_replicate(const StudyConfig& cfg, std::size_t replicate);
[[nodiscard]] StudySummary replicate_study(const StudyConfig& cfg, const StudyProgress& progress = {});

} // namespace lima
