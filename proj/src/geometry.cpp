#include "lima/geometry.hpp"

#include "lima/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <string>

namespace lima {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(Point2 o, Point2 a, Point2 b) noexcept {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sign(double v) noexcept { return (v > 0.0) - (v < 0.0); }

bool on_segment(Point2 p, Point2 a, Point2 b) noexcept {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

// Closed segment intersection, including touching and collinear overlap.
bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) noexcept {
    const int d1 = sign(cross(c, d, a));
    const int d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c));
    const int d4 = sign(cross(a, b, d));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    if (d1 == 0 && on_segment(a, c, d)) return true;
    if (d2 == 0 && on_segment(b, c, d)) return true;
    if (d3 == 0 && on_segment(c, a, b)) return true;
    if (d4 == 0 && on_segment(d, a, b)) return true;
    return false;
}

bool is_finite(Point2 p) noexcept { return std::isfinite(p.x) && std::isfinite(p.y); }

} // namespace

double euclidean_distance(Point2 p, Point2 q) noexcept { return std::hypot(p.x - q.x, p.y - q.y); }

Window build_window(std::vector<Point2> vertices) {
    const std::size_t n = vertices.size();
    if (n < 3) throw InputError("window needs at least 3 vertices, got " + std::to_string(n));
    for (const auto& v : vertices)
        if (!is_finite(v)) throw InputError("window vertex is not finite");

    double twice_area = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const Point2 a = vertices[k];
        const Point2 b = vertices[(k + 1) % n];
        twice_area += a.x * b.y - b.x * a.y;
    }
    const double area = 0.5 * std::abs(twice_area);
    if (!(area > 0.0)) throw InputError("window polygon is degenerate (zero area)");

    for (std::size_t e = 0; e < n; ++e) {
        const Point2 a = vertices[e];
        const Point2 b = vertices[(e + 1) % n];
        if (a == b) throw InputError("window has repeated consecutive vertex " + std::to_string(e));
        for (std::size_t f = e + 1; f < n; ++f) {
            const Point2 c = vertices[f];
            const Point2 d = vertices[(f + 1) % n];
            const bool adjacent = (f == e + 1) || (e == 0 && f == n - 1);
            if (adjacent) {
                // Adjacent edges share one vertex; they may not fold back onto each other.
                const Point2 shared = (f == e + 1) ? b : a;
                const Point2 p = (f == e + 1) ? a : b;
                const Point2 q = (f == e + 1) ? d : c;
                if (cross(shared, p, q) == 0.0) {
                    const double dot = (p.x - shared.x) * (q.x - shared.x) + (p.y - shared.y) * (q.y - shared.y);
                    if (dot > 0.0) throw InputError("window polygon folds back on itself at a vertex");
                }
                continue;
            }
            if (segments_intersect(a, b, c, d))
                throw InputError("window polygon is self-intersecting (edges " + std::to_string(e) + " and " +
                                 std::to_string(f) + ")");
        }
    }

    Window w;
    w.area_ = area;
    w.bbox_ = {vertices.front(), vertices.front()};
    for (const auto& v : vertices) {
        w.bbox_.lo.x = std::min(w.bbox_.lo.x, v.x);
        w.bbox_.lo.y = std::min(w.bbox_.lo.y, v.y);
        w.bbox_.hi.x = std::max(w.bbox_.hi.x, v.x);
        w.bbox_.hi.y = std::max(w.bbox_.hi.y, v.y);
    }
    w.vertices_ = std::move(vertices);
    return w;
}

Window unit_square() { return build_window({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

bool Window::contains(Point2 p) const noexcept {
    const std::size_t n = vertices_.size();
    if (p.x < bbox_.lo.x || p.x > bbox_.hi.x || p.y < bbox_.lo.y || p.y > bbox_.hi.y) return false;
    bool inside = false;
    for (std::size_t k = 0, j = n - 1; k < n; j = k++) {
        const Point2 a = vertices_[k];
        const Point2 b = vertices_[j];
        if (cross(a, b, p) == 0.0 && on_segment(p, a, b)) return true;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_at = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_at) inside = !inside;
        }
    }
    return inside;
}

double Window::shorter_side() const noexcept {
    return std::min(bbox_.hi.x - bbox_.lo.x, bbox_.hi.y - bbox_.lo.y);
}

LinearNetwork build_network(std::vector<Point2> nodes,
                            const std::vector<std::pair<std::size_t, std::size_t>>& segments) {
    LinearNetwork net;
    const std::size_t n = nodes.size();
    for (std::size_t k = 0; k < n; ++k)
        if (!is_finite(nodes[k])) throw InputError("network node " + std::to_string(k) + " is not finite");

    std::set<std::pair<std::size_t, std::size_t>> seen;
    net.incidence_.assign(n, {});
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto [u, v] = segments[s];
        if (u >= n || v >= n)
            throw InputError("segment " + std::to_string(s) + " references a missing node");
        if (u == v) throw InputError("segment " + std::to_string(s) + " has identical endpoints");
        if (!seen.insert({std::min(u, v), std::max(u, v)}).second)
            throw InputError("segment " + std::to_string(s) + " duplicates an earlier segment");
        const double len = euclidean_distance(nodes[u], nodes[v]);
        if (!(len > 0.0)) throw InputError("segment " + std::to_string(s) + " has zero length");
        net.segments_.push_back({u, v, len});
        net.incidence_[u].push_back({s, v});
        net.incidence_[v].push_back({s, u});
        net.total_length_ += len;
    }

    net.component_.assign(n, n);
    std::size_t comp = 0;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (net.component_[start] != n) continue;
        net.component_[start] = comp;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t a = stack.back();
            stack.pop_back();
            for (const auto& inc : net.incidence_[a]) {
                if (net.component_[inc.other] == n) {
                    net.component_[inc.other] = comp;
                    stack.push_back(inc.other);
                }
            }
        }
        ++comp;
    }
    net.n_components_ = comp;
    net.nodes_ = std::move(nodes);
    return net;
}

bool LinearNetwork::is_valid(const NetworkLocation& loc) const noexcept {
    return loc.segment < segments_.size() && std::isfinite(loc.offset) && loc.offset >= 0.0 &&
           loc.offset <= segments_[loc.segment].length;
}

Point2 LinearNetwork::to_point(const NetworkLocation& loc) const {
    const Segment& s = segments_.at(loc.segment);
    const double t = loc.offset / s.length;
    const Point2 a = nodes_[s.u];
    const Point2 b = nodes_[s.v];
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

namespace {

void require_valid(const LinearNetwork& net, const NetworkLocation& loc) {
    if (!net.is_valid(loc))
        throw InputError("invalid network location (segment " + std::to_string(loc.segment) + ", offset " +
                         std::to_string(loc.offset) + ")");
}

// Node distances from a query point, i.e. Dijkstra from the temporary node that
// splits the query's segment.
std::vector<double> node_distances_from(const LinearNetwork& net, const NetworkLocation& src) {
    const auto& seg = net.segments()[src.segment];
    std::vector<double> dist(net.nodes().size(), kInf);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[seg.u] = src.offset;
    dist[seg.v] = seg.length - src.offset;
    heap.push({dist[seg.u], seg.u});
    heap.push({dist[seg.v], seg.v});
    while (!heap.empty()) {
        const auto [d, a] = heap.top();
        heap.pop();
        if (d > dist[a]) continue;
        for (const auto& inc : net.incident(a)) {
            const double nd = d + net.segments()[inc.segment].length;
            if (nd < dist[inc.other]) {
                dist[inc.other] = nd;
                heap.push({nd, inc.other});
            }
        }
    }
    return dist;
}

double distance_to(const LinearNetwork& net, const std::vector<double>& node_dist, const NetworkLocation& src,
                   const NetworkLocation& dst) {
    const auto& seg = net.segments()[dst.segment];
    double d = std::min(node_dist[seg.u] + dst.offset, node_dist[seg.v] + (seg.length - dst.offset));
    if (src.segment == dst.segment) d = std::min(d, std::abs(src.offset - dst.offset));
    return d;
}

} // namespace

double network_distance(const LinearNetwork& net, const NetworkLocation& a, const NetworkLocation& b) {
    require_valid(net, a);
    require_valid(net, b);
    if (a == b) return 0.0;
    return distance_to(net, node_distances_from(net, a), a, b);
}

DistanceMatrix network_distance_matrix(const LinearNetwork& net, std::span<const NetworkLocation> locs) {
    for (const auto& l : locs) require_valid(net, l);
    const std::size_t n = locs.size();
    DistanceMatrix d(n, n, 0.0);
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto node_dist = node_distances_from(net, locs[i]);
        for (std::size_t j = i + 1; j < n; ++j) d(i, j) = locs[i] == locs[j] ? 0.0 : distance_to(net, node_dist, locs[i], locs[j]);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) d(i, j) = d(j, i);
    return d;
}

DistanceMatrix euclidean_distance_matrix(std::span<const Point2> points) {
    const std::size_t n = points.size();
    DistanceMatrix d(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = euclidean_distance(points[i], points[j]);
    return d;
}

} // namespace lima
