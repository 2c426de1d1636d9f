#pragma once

#include "lima/geometry.hpp"
#include "lima/matrix.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace lima {

struct RealMarks {
    std::vector<double> values;

    friend bool operator==(const RealMarks&, const RealMarks&) = default;
};

/// Curves sampled on a shared, strictly increasing t grid (one row per point).
struct FunctionalMarks {
    std::vector<double> t_grid;
    Matrix<double> curves;

    [[nodiscard]] std::size_t size() const noexcept { return curves.rows(); }
    friend bool operator==(const FunctionalMarks&, const FunctionalMarks&) = default;
};

struct PlanarSupport {
    Window window;
    std::vector<Point2> points;

    friend bool operator==(const PlanarSupport&, const PlanarSupport&) = default;
};

struct NetworkSupport {
    std::shared_ptr<const LinearNetwork> network;
    std::vector<NetworkLocation> locations;

    friend bool operator==(const NetworkSupport& a, const NetworkSupport& b) {
        return a.network == b.network && a.locations == b.locations;
    }
};

using Support = std::variant<PlanarSupport, NetworkSupport>;
using Marks = std::variant<RealMarks, FunctionalMarks>;

/// Validated marked point pattern. Construct through validate().
class MarkedPointPattern {
public:
    [[nodiscard]] const Support& support() const noexcept { return support_; }
    [[nodiscard]] const Marks& marks() const noexcept { return marks_; }
    [[nodiscard]] std::size_t size() const noexcept;

    [[nodiscard]] bool is_planar() const noexcept { return std::holds_alternative<PlanarSupport>(support_); }
    [[nodiscard]] bool has_functional_marks() const noexcept {
        return std::holds_alternative<FunctionalMarks>(marks_);
    }
    [[nodiscard]] const RealMarks& real_marks() const;
    [[nodiscard]] const FunctionalMarks& functional_marks() const;

    /// Area of the window or total network length.
    [[nodiscard]] double domain_measure() const noexcept;
    /// n / domain_measure().
    [[nodiscard]] double intensity() const noexcept;

    /// Same locations, new marks. The new marks are validated against the size.
    [[nodiscard]] MarkedPointPattern with_marks(Marks marks) const;

    friend bool operator==(const MarkedPointPattern&, const MarkedPointPattern&) = default;

private:
    friend MarkedPointPattern validate(Support support, Marks marks);
    Support support_;
    Marks marks_;
};

/// Checks counts, finiteness, containment and simplicity (no two points at
/// one location). Throws InputError on violation.
[[nodiscard]] MarkedPointPattern validate(Support support, Marks marks);

struct MarkSummary {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean and sample variance (n-1 divisor) of the marks, optionally leaving
/// one index out. Throws InputError with fewer than 2 marks remaining.
[[nodiscard]] MarkSummary mark_summary(std::span<const double> marks,
                                       std::optional<std::size_t> excluding = std::nullopt);

/// d_S(x_i, x_j): Euclidean in the plane, shortest path on a network.
[[nodiscard]] DistanceMatrix pairwise_distances(const MarkedPointPattern& pattern);

} // namespace lima
