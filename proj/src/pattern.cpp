#include "lima/pattern.hpp"

#include "lima/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>

namespace lima {

namespace {

std::size_t support_size(const Support& s) {
    return std::visit(
        [](const auto& sup) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(sup)>, PlanarSupport>)
                return sup.points.size();
            else
                return sup.locations.size();
        },
        s);
}

std::size_t marks_size(const Marks& m) {
    return std::visit(
        [](const auto& mk) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(mk)>, RealMarks>)
                return mk.values.size();
            else
                return mk.curves.rows();
        },
        m);
}

void check_marks(const Marks& marks) {
    if (const auto* real = std::get_if<RealMarks>(&marks)) {
        for (std::size_t k = 0; k < real->values.size(); ++k)
            if (!std::isfinite(real->values[k])) throw InputError("mark " + std::to_string(k) + " is not finite");
        return;
    }
    const auto& fm = std::get<FunctionalMarks>(marks);
    if (fm.t_grid.size() < 2) throw InputError("functional marks need at least 2 t samples");
    if (fm.curves.cols() != fm.t_grid.size()) throw InputError("curve width does not match the t grid");
    for (std::size_t k = 0; k < fm.t_grid.size(); ++k) {
        if (!std::isfinite(fm.t_grid[k])) throw InputError("t grid value is not finite");
        if (k > 0 && !(fm.t_grid[k] > fm.t_grid[k - 1])) throw InputError("t grid must be strictly increasing");
    }
    for (std::size_t r = 0; r < fm.curves.rows(); ++r)
        for (double v : fm.curves.row(r))
            if (!std::isfinite(v)) throw InputError("curve of point " + std::to_string(r) + " is not finite");
}

void check_planar(const PlanarSupport& sup) {
    std::set<std::pair<double, double>> seen;
    for (std::size_t k = 0; k < sup.points.size(); ++k) {
        const auto p = sup.points[k];
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw InputError("point " + std::to_string(k) + " is not finite");
        if (!sup.window.contains(p)) throw InputError("point " + std::to_string(k) + " lies outside the window");
        if (!seen.insert({p.x, p.y}).second)
            throw InputError("duplicate location at point " + std::to_string(k) + " (pattern must be simple)");
    }
}

void check_network(const NetworkSupport& sup) {
    if (!sup.network) throw InputError("network pattern without a network");
    const auto& net = *sup.network;
    // Locations at segment ends are keyed by node so that the same node reached
    // through different segments is detected as a duplicate.
    std::set<std::tuple<int, std::size_t, double>> seen;
    for (std::size_t k = 0; k < sup.locations.size(); ++k) {
        const auto& loc = sup.locations[k];
        if (!net.is_valid(loc)) throw InputError("point " + std::to_string(k) + " is not on the network");
        const auto& seg = net.segments()[loc.segment];
        std::tuple<int, std::size_t, double> key{1, loc.segment, loc.offset};
        if (loc.offset == 0.0) key = {0, seg.u, 0.0};
        else if (loc.offset == seg.length) key = {0, seg.v, 0.0};
        if (!seen.insert(key).second)
            throw InputError("duplicate location at point " + std::to_string(k) + " (pattern must be simple)");
    }
}

} // namespace

MarkedPointPattern validate(Support support, Marks marks) {
    const std::size_t n = support_size(support);
    const std::size_t m = marks_size(marks);
    if (n != m)
        throw InputError("point count (" + std::to_string(n) + ") does not match mark count (" + std::to_string(m) +
                         ")");
    check_marks(marks);
    if (const auto* planar = std::get_if<PlanarSupport>(&support))
        check_planar(*planar);
    else
        check_network(std::get<NetworkSupport>(support));

    MarkedPointPattern p;
    p.support_ = std::move(support);
    p.marks_ = std::move(marks);
    return p;
}

std::size_t MarkedPointPattern::size() const noexcept { return support_size(support_); }

const RealMarks& MarkedPointPattern::real_marks() const {
    if (const auto* r = std::get_if<RealMarks>(&marks_)) return *r;
    throw InputError("pattern carries functional marks, real-valued marks were requested");
}

const FunctionalMarks& MarkedPointPattern::functional_marks() const {
    if (const auto* f = std::get_if<FunctionalMarks>(&marks_)) return *f;
    throw InputError("pattern carries real-valued marks, functional marks were requested");
}

double MarkedPointPattern::domain_measure() const noexcept {
    if (const auto* planar = std::get_if<PlanarSupport>(&support_)) return planar->window.area();
    return std::get<NetworkSupport>(support_).network->total_length();
}

double MarkedPointPattern::intensity() const noexcept {
    return static_cast<double>(size()) / domain_measure();
}

MarkedPointPattern MarkedPointPattern::with_marks(Marks marks) const {
    if (marks_size(marks) != size()) throw InputError("replacement marks have the wrong count");
    check_marks(marks);
    MarkedPointPattern p = *this;
    p.marks_ = std::move(marks);
    return p;
}

MarkSummary mark_summary(std::span<const double> marks, std::optional<std::size_t> excluding) {
    const std::size_t n = marks.size();
    if (excluding && *excluding >= n) throw InputError("excluded mark index out of range");
    const std::size_t used = n - (excluding ? 1 : 0);
    if (used < 2) throw InputError("mark summary needs at least 2 marks");
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (k != excluding) sum += marks[k];
    const double mean = sum / static_cast<double>(used);
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (k != excluding) ss += (marks[k] - mean) * (marks[k] - mean);
    return {mean, ss / static_cast<double>(used - 1)};
}

DistanceMatrix pairwise_distances(const MarkedPointPattern& pattern) {
    if (const auto* planar = std::get_if<PlanarSupport>(&pattern.support()))
        return euclidean_distance_matrix(planar->points);
    const auto& net = std::get<NetworkSupport>(pattern.support());
    return network_distance_matrix(*net.network, net.locations);
}

} // namespace lima
