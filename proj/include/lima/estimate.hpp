#pragma once

#include "lima/kernel.hpp"
#include "lima/matrix.hpp"
#include "lima/pattern.hpp"
#include "lima/testfn.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lima {

struct EstimationConfig {
    std::vector<double> r_grid;
    Kernel kernel = Kernel::epanechnikov;
    double bandwidth = 0.0;
    double min_weight = 1e-10;
};

/// `steps` equal steps on [0, r_max], i.e. steps + 1 grid values.
[[nodiscard]] std::vector<double> uniform_r_grid(double r_max, std::size_t steps);

/// Stoyan's rule of thumb 0.15 / sqrt(intensity).
[[nodiscard]] double default_bandwidth(double intensity);

/// Throws InputError unless the grid is non-empty, non-negative and strictly
/// increasing, the bandwidth positive and min_weight non-negative.
void check_config(const EstimationConfig& cfg);

struct CurveMeta {
    TestFunction kind = TestFunction::stoyan;
    std::optional<std::size_t> point;  // nullopt for global curves
    bool normalized = false;           // kappa (true) or c (false)
    bool functional = false;
    double normalizer = 1.0;           // NaN for functional curves (see surface normalizers)
    NormalizerRule rule = NormalizerRule::expectation;
    Kernel kernel = Kernel::epanechnikov;
    double bandwidth = 0.0;
    std::vector<std::string> warnings;
};

/// c(r) or kappa(r) on an r grid; values are meaningful only where valid.
struct SummaryCurve {
    std::vector<double> r;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;
    CurveMeta meta;
};

/// Pointwise c(r, t) or kappa(r, t); rows follow r, columns follow t.
struct PointwiseSurface {
    std::vector<double> r;
    std::vector<double> t;
    Matrix<double> values;
    Matrix<std::uint8_t> valid;
    std::vector<double> normalizers;  // per t for kappa surfaces, empty otherwise
    CurveMeta meta;
};

/// Curves for several mark vectors ("lanes") evaluated at once: lane p uses
/// the marks permuted by the p-th permutation. values is |r| x lanes.
struct LaneCurves {
    std::vector<double> r;
    Matrix<double> values;
    std::vector<std::uint8_t> valid;  // shared by all lanes
    std::vector<double> normalizers;  // per lane
    NormalizerRule rule = NormalizerRule::expectation;

    [[nodiscard]] std::size_t lanes() const noexcept { return values.cols(); }
    [[nodiscard]] std::vector<double> lane(std::size_t p) const;
};

/// Kernel ratio estimators on a fixed distance matrix. The 1/(2 pi r |W|)
/// factors of the product-density estimators cancel in every ratio and are
/// omitted, as is edge correction. Planar and network patterns differ only in
/// the distance matrix handed in.
class MarkCorrelationEstimator {
public:
    MarkCorrelationEstimator(DistanceMatrix distances, EstimationConfig cfg);

    [[nodiscard]] std::size_t size() const noexcept { return distances_.rows(); }
    [[nodiscard]] const DistanceMatrix& distances() const noexcept { return distances_; }
    [[nodiscard]] const EstimationConfig& config() const noexcept { return cfg_; }

    // Real-valued marks.
    [[nodiscard]] SummaryCurve local_c(std::span<const double> marks, std::size_t i, TestFunctionSpec spec) const;
    [[nodiscard]] SummaryCurve local_kappa(std::span<const double> marks, std::size_t i,
                                           TestFunctionSpec spec) const;
    [[nodiscard]] std::vector<SummaryCurve> local_kappa_all(std::span<const double> marks,
                                                            TestFunctionSpec spec) const;
    [[nodiscard]] SummaryCurve global_c(std::span<const double> marks, TestFunctionSpec spec) const;
    [[nodiscard]] SummaryCurve global_kappa(std::span<const double> marks, TestFunctionSpec spec) const;

    // Permutation lanes; perms[p][j] is the index of the mark placed at point j.
    [[nodiscard]] LaneCurves local_kappa_lanes(std::span<const double> marks,
                                               std::span<const std::vector<std::size_t>> perms, std::size_t i,
                                               TestFunctionSpec spec) const;
    [[nodiscard]] LaneCurves global_kappa_lanes(std::span<const double> marks,
                                                std::span<const std::vector<std::size_t>> perms,
                                                TestFunctionSpec spec) const;
    /// Runs local_kappa_lanes for every point with shared permutations and
    /// hands each result to `visit`, possibly from several threads at once.
    using LaneVisitor = std::function<void(std::size_t i, const LaneCurves& curves)>;
    void visit_local_kappa_lanes(std::span<const double> marks, std::span<const std::vector<std::size_t>> perms,
                                 TestFunctionSpec spec, const LaneVisitor& visit) const;

    // Function-valued marks.
    [[nodiscard]] PointwiseSurface pointwise_local_c(const FunctionalMarks& marks, std::size_t i,
                                                     TestFunctionSpec spec) const;
    [[nodiscard]] PointwiseSurface pointwise_local_kappa(const FunctionalMarks& marks, std::size_t i,
                                                         TestFunctionSpec spec) const;
    [[nodiscard]] SummaryCurve local_c_functional(const FunctionalMarks& marks, std::size_t i,
                                                  TestFunctionSpec spec) const;
    [[nodiscard]] SummaryCurve local_kappa_functional(const FunctionalMarks& marks, std::size_t i,
                                                      TestFunctionSpec spec) const;
    [[nodiscard]] PointwiseSurface pointwise_global_c(const FunctionalMarks& marks, TestFunctionSpec spec) const;
    [[nodiscard]] PointwiseSurface pointwise_global_kappa(const FunctionalMarks& marks,
                                                          TestFunctionSpec spec) const;
    [[nodiscard]] SummaryCurve global_kappa_functional(const FunctionalMarks& marks, TestFunctionSpec spec) const;

    /// Kernel-weighted numerator (|r| x lanes) and denominator (|r|) sums for
    /// point i over j != i; `lane_marks` is n x lanes.
    struct Sums {
        Matrix<double> num;
        std::vector<double> den;
    };
    [[nodiscard]] Sums local_sums(const Matrix<double>& lane_marks, std::size_t i, TestFunction kind,
                                  std::span<const double> mu_per_lane) const;
    /// Same over ordered pairs i != j (each unordered pair visited once).
    [[nodiscard]] Sums global_sums(const Matrix<double>& lane_marks, TestFunction kind,
                                   std::span<const double> mu_per_lane) const;

private:
    DistanceMatrix distances_;
    EstimationConfig cfg_;
};

/// Trapezoidal integral over t of every valid row; a row with any invalid
/// cell is invalid. Needs at least 2 t samples.
[[nodiscard]] SummaryCurve integrate_over_t(const PointwiseSurface& surface);

// Pattern-level entry points: distances come from pairwise_distances().
[[nodiscard]] SummaryCurve local_c(const MarkedPointPattern& pattern, std::size_t i, TestFunctionSpec spec,
                                   const EstimationConfig& cfg);
[[nodiscard]] SummaryCurve local_kappa(const MarkedPointPattern& pattern, std::size_t i, TestFunctionSpec spec,
                                       const EstimationConfig& cfg);
[[nodiscard]] SummaryCurve global_kappa(const MarkedPointPattern& pattern, TestFunctionSpec spec,
                                        const EstimationConfig& cfg);
/// local_kappa for a pattern on a linear network (InputError for planar input).
[[nodiscard]] SummaryCurve local_kappa_network(const MarkedPointPattern& pattern, std::size_t i,
                                               TestFunctionSpec spec, const EstimationConfig& cfg);
[[nodiscard]] PointwiseSurface pointwise_local_c_functional(const MarkedPointPattern& pattern, std::size_t i,
                                                            TestFunctionSpec spec, const EstimationConfig& cfg);
[[nodiscard]] SummaryCurve local_kappa_functional(const MarkedPointPattern& pattern, std::size_t i,
                                                  TestFunctionSpec spec, const EstimationConfig& cfg);

} // namespace lima
