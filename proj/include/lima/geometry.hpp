#pragma once

#include "lima/matrix.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace lima {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

[[nodiscard]] double euclidean_distance(Point2 p, Point2 q) noexcept;

struct BoundingBox {
    Point2 lo;
    Point2 hi;
};

/// Simple polygon observation window. Construct through build_window().
class Window {
public:
    [[nodiscard]] const std::vector<Point2>& vertices() const noexcept { return vertices_; }
    [[nodiscard]] double area() const noexcept { return area_; }
    [[nodiscard]] BoundingBox bbox() const noexcept { return bbox_; }

    /// Closed containment: boundary points count as inside.
    [[nodiscard]] bool contains(Point2 p) const noexcept;

    /// Shorter side of the bounding box.
    [[nodiscard]] double shorter_side() const noexcept;

    friend bool operator==(const Window& a, const Window& b) { return a.vertices_ == b.vertices_; }

private:
    friend Window build_window(std::vector<Point2> vertices);
    std::vector<Point2> vertices_;
    double area_ = 0.0;
    BoundingBox bbox_;
};

/// Validates a simple polygon and caches its shoelace area.
/// Throws InputError for fewer than 3 vertices, zero area or self-intersection.
[[nodiscard]] Window build_window(std::vector<Point2> vertices);

[[nodiscard]] Window unit_square();

struct Segment {
    std::size_t u = 0;
    std::size_t v = 0;
    double length = 0.0;
};

/// Position on a network: arc length `offset` measured from the segment's u end.
struct NetworkLocation {
    std::size_t segment = 0;
    double offset = 0.0;

    friend bool operator==(const NetworkLocation&, const NetworkLocation&) = default;
};

/// Union of straight segments meeting only at shared end nodes.
class LinearNetwork {
public:
    struct Incidence {
        std::size_t segment;
        std::size_t other;
    };

    [[nodiscard]] const std::vector<Point2>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segments_; }
    [[nodiscard]] std::span<const Incidence> incident(std::size_t node) const noexcept {
        return incidence_[node];
    }
    [[nodiscard]] double total_length() const noexcept { return total_length_; }
    [[nodiscard]] std::size_t component_count() const noexcept { return n_components_; }
    [[nodiscard]] std::size_t component_of_node(std::size_t node) const noexcept { return component_[node]; }

    [[nodiscard]] bool is_valid(const NetworkLocation& loc) const noexcept;
    [[nodiscard]] Point2 to_point(const NetworkLocation& loc) const;

private:
    friend LinearNetwork build_network(std::vector<Point2> nodes,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& segments);
    std::vector<Point2> nodes_;
    std::vector<Segment> segments_;
    std::vector<std::vector<Incidence>> incidence_;
    std::vector<std::size_t> component_;
    std::size_t n_components_ = 0;
    double total_length_ = 0.0;
};

/// Segment lengths are the Euclidean lengths of the endpoint pairs.
/// Throws InputError for dangling indices, u == v, zero length or duplicates.
[[nodiscard]] LinearNetwork build_network(std::vector<Point2> nodes,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& segments);

/// Shortest-path distance along the network; +inf between components.
[[nodiscard]] double network_distance(const LinearNetwork& net, const NetworkLocation& a,
                                      const NetworkLocation& b);

/// All pairwise shortest-path distances. One Dijkstra per location, seeded from
/// both ends of its segment; rows may be computed in parallel.
[[nodiscard]] DistanceMatrix network_distance_matrix(const LinearNetwork& net,
                                                     std::span<const NetworkLocation> locs);

[[nodiscard]] DistanceMatrix euclidean_distance_matrix(std::span<const Point2> points);

} // namespace lima
