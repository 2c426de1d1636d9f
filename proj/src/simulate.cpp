#include "lima/simulate.hpp"

#include "lima/error.hpp"
#include "lima/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lima {

namespace {

// Substream tags under (seed, replicate).
constexpr std::uint64_t kPointStream = 0x504f494e54ULL;
constexpr std::uint64_t kDiscStream = 0x44495343ULL;
constexpr std::uint64_t kMarkStream = 0x4d41524bULL;

constexpr int kMaxDiscRejections = 10000;

double segment_distance(Point2 p, Point2 a, Point2 b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return euclidean_distance(p, {a.x + t * dx, a.y + t * dy});
}

bool disc_inside(const Window& w, Point2 c, double radius) {
    if (!w.contains(c)) return false;
    const auto& v = w.vertices();
    for (std::size_t k = 0; k < v.size(); ++k)
        if (segment_distance(c, v[k], v[(k + 1) % v.size()]) < radius) return false;
    return true;
}

// Perpendicular distance to the window's main diagonal (bounding box corner lo to hi).
double diagonal_distance(Point2 p, const Window& w) {
    const auto b = w.bbox();
    const double dx = b.hi.x - b.lo.x;
    const double dy = b.hi.y - b.lo.y;
    return std::abs(dy * (p.x - b.lo.x) - dx * (p.y - b.lo.y)) / std::hypot(dx, dy);
}

double draw(const NormalLaw& law, bool second_is_variance, std::mt19937_64& rng) {
    const double sd = second_is_variance ? std::sqrt(law.sd) : law.sd;
    return std::normal_distribution<double>(law.mean, sd)(rng);
}

bool has_discs(Scenario s) { return s == Scenario::II || s == Scenario::III; }

} // namespace

std::string_view name(Scenario s) noexcept {
    switch (s) {
    case Scenario::I: return "I";
    case Scenario::II: return "II";
    case Scenario::III: return "III";
    case Scenario::IV: return "IV";
    }
    return "?";
}

Scenario parse_scenario(std::string_view text) {
    if (text == "I" || text == "1") return Scenario::I;
    if (text == "II" || text == "2") return Scenario::II;
    if (text == "III" || text == "3") return Scenario::III;
    if (text == "IV" || text == "4") return Scenario::IV;
    throw InputError("unknown scenario '" + std::string(text) + "'; valid scenarios: I, II, III, IV");
}

std::string_view name(Region r) noexcept {
    switch (r) {
    case Region::outside: return "outside";
    case Region::disc_a: return "disc_a";
    case Region::disc_b: return "disc_b";
    case Region::band: return "band";
    }
    return "?";
}

ScenarioConfig default_scenario(Scenario s) {
    ScenarioConfig cfg;
    cfg.scenario = s;
    if (s == Scenario::III) cfg.law_b = {7.0, 0.5};
    return cfg;
}

void check_scenario(const ScenarioConfig& cfg) {
    if (!(cfg.intensity > 0.0) || !std::isfinite(cfg.intensity)) throw InputError("intensity must be positive");
    if (has_discs(cfg.scenario) && !(cfg.disc_radius > 0.0)) throw InputError("disc_radius must be positive");
    if (cfg.scenario == Scenario::IV && !(cfg.band_halfwidth > 0.0))
        throw InputError("band_halfwidth must be positive");
    for (const auto* law : {&cfg.law_a, &cfg.law_b, &cfg.outside})
        if (!std::isfinite(law->mean) || !(law->sd > 0.0)) throw InputError("mark laws need a finite mean and sd > 0");
}

std::vector<Point2> rpoispp(double intensity, const Window& window, std::mt19937_64& rng) {
    if (!(intensity > 0.0)) throw InputError("intensity must be positive");
    const auto count = std::poisson_distribution<long long>(intensity * window.area())(rng);
    const auto b = window.bbox();
    std::uniform_real_distribution<double> ux(b.lo.x, b.hi.x);
    std::uniform_real_distribution<double> uy(b.lo.y, b.hi.y);
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(count));
    while (static_cast<long long>(pts.size()) < count) {
        const Point2 p{ux(rng), uy(rng)};
        if (window.contains(p)) pts.push_back(p);
    }
    return pts;
}

std::vector<NetworkLocation> rpoisnet(double intensity, const LinearNetwork& net, std::mt19937_64& rng) {
    if (!(intensity > 0.0)) throw InputError("intensity must be positive");
    if (net.segments().empty()) throw InputError("cannot simulate on an empty network");
    const auto count = std::poisson_distribution<long long>(intensity * net.total_length())(rng);
    std::vector<double> lengths;
    for (const auto& s : net.segments()) lengths.push_back(s.length);
    std::discrete_distribution<std::size_t> pick(lengths.begin(), lengths.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<NetworkLocation> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long k = 0; k < count; ++k) {
        const std::size_t s = pick(rng);
        out.push_back({s, unit(rng) * net.segments()[s].length});
    }
    return out;
}

std::array<Point2, 2> place_discs(const Window& window, double radius, std::mt19937_64& rng) {
    const auto b = window.bbox();
    std::uniform_real_distribution<double> ux(b.lo.x + radius, b.hi.x - radius);
    std::uniform_real_distribution<double> uy(b.lo.y + radius, b.hi.y - radius);
    if (!(b.hi.x - b.lo.x > 2 * radius) || !(b.hi.y - b.lo.y > 2 * radius))
        throw InputError("window too small to place discs of radius " + std::to_string(radius));
    for (int attempt = 0; attempt < kMaxDiscRejections; ++attempt) {
        const Point2 a{ux(rng), uy(rng)};
        const Point2 c{ux(rng), uy(rng)};
        if (disc_inside(window, a, radius) && disc_inside(window, c, radius) &&
            euclidean_distance(a, c) > 2 * radius)
            return {a, c};
    }
    throw InputError("could not place two disjoint discs of radius " + std::to_string(radius) +
                     " inside the window after " + std::to_string(kMaxDiscRejections) + " attempts");
}

Region region_of(const Point2& p, const ScenarioConfig& cfg, const std::array<Point2, 2>& centers) {
    switch (cfg.scenario) {
    case Scenario::I: return Region::outside;
    case Scenario::II:
    case Scenario::III:
        if (euclidean_distance(p, centers[0]) <= cfg.disc_radius) return Region::disc_a;
        if (euclidean_distance(p, centers[1]) <= cfg.disc_radius) return Region::disc_b;
        return Region::outside;
    case Scenario::IV: return diagonal_distance(p, cfg.window) <= cfg.band_halfwidth ? Region::band : Region::outside;
    }
    return Region::outside;
}

double distance_to_structure(const Point2& p, const ScenarioConfig& cfg, const std::array<Point2, 2>& centers) {
    switch (cfg.scenario) {
    case Scenario::I: return std::numeric_limits<double>::infinity();
    case Scenario::II:
    case Scenario::III: return std::min(euclidean_distance(p, centers[0]), euclidean_distance(p, centers[1]));
    case Scenario::IV: return diagonal_distance(p, cfg.window);
    }
    return 0.0;
}

ScenarioMarks apply_scenario(std::span<const Point2> points, const ScenarioConfig& cfg, std::mt19937_64& rng) {
    check_scenario(cfg);
    ScenarioMarks out;
    if (has_discs(cfg.scenario)) out.centers = place_discs(cfg.window, cfg.disc_radius, rng);
    out.marks.values.reserve(points.size());
    out.regions.reserve(points.size());
    for (const auto& p : points) {
        const Region r = region_of(p, cfg, out.centers);
        out.regions.push_back(r);
        const NormalLaw& law = r == Region::disc_a || r == Region::band ? cfg.law_a
                               : r == Region::disc_b                    ? cfg.law_b
                                                                        : cfg.outside;
        out.marks.values.push_back(draw(law, cfg.second_is_variance, rng));
    }
    return out;
}

ScenarioPattern simulate_scenario(const ScenarioConfig& cfg, std::size_t replicate) {
    check_scenario(cfg);
    auto point_rng = make_rng(cfg.seed, replicate, kPointStream);
    auto pts = rpoispp(cfg.intensity, cfg.window, point_rng);

    ScenarioPattern out;
    if (has_discs(cfg.scenario)) {
        auto disc_rng = make_rng(cfg.seed, replicate, kDiscStream);
        out.centers = place_discs(cfg.window, cfg.disc_radius, disc_rng);
    }
    auto mark_rng = make_rng(cfg.seed, replicate, kMarkStream);
    RealMarks marks;
    marks.values.reserve(pts.size());
    out.regions.reserve(pts.size());
    for (const auto& p : pts) {
        const Region r = region_of(p, cfg, out.centers);
        out.regions.push_back(r);
        const NormalLaw& law = r == Region::disc_a || r == Region::band ? cfg.law_a
                               : r == Region::disc_b                    ? cfg.law_b
                                                                        : cfg.outside;
        marks.values.push_back(draw(law, cfg.second_is_variance, mark_rng));
    }
    out.pattern = validate(PlanarSupport{cfg.window, std::move(pts)}, std::move(marks));
    return out;
}

StudyConfig smoke_study(Scenario s) {
    StudyConfig cfg;
    cfg.scenario = default_scenario(s);
    cfg.scenario.intensity = 200.0;
    cfg.replicates = 25;
    cfg.permutations = 49;
    return cfg;
}

ReplicateRecord run_replicate(const StudyConfig& cfg, std::size_t replicate) {
    const ScenarioPattern sp = simulate_scenario(cfg.scenario, replicate);
    const auto& pattern = sp.pattern;
    ReplicateRecord rec;
    rec.replicate = replicate;
    rec.points = pattern.size();
    if (pattern.size() < 3) throw DegenerateError("replicate " + std::to_string(replicate) + " has fewer than 3 points");

    EstimationConfig ecfg;
    ecfg.r_grid = uniform_r_grid(cfg.r_max, cfg.r_steps);
    ecfg.bandwidth = cfg.bandwidth > 0.0 ? cfg.bandwidth : default_bandwidth(pattern.intensity());
    rec.bandwidth = ecfg.bandwidth;
    const MarkCorrelationEstimator est(pairwise_distances(pattern), ecfg);
    const auto& marks = pattern.real_marks().values;
    const TestFunctionSpec spec = make_spec(cfg.testfn);

    TestOptions opts;
    opts.permutations = cfg.permutations;
    opts.alpha = cfg.alpha;
    opts.seed = cfg.scenario.seed;
    opts.replicate = replicate;
    opts.shared_permutations = cfg.shared_permutations;

    const auto global = global_envelope_test(est, marks, spec, opts);
    rec.global_p = global.p_value;
    rec.global_reject = global.p_value <= cfg.alpha;

    if (cfg.local) {
        const auto report = local_lima_test(est, marks, spec, opts);
        const auto& pts = std::get<PlanarSupport>(pattern.support()).points;
        for (std::size_t i = 0; i < pattern.size(); ++i) {
            const bool flagged = report.points[i].significant;
            if (flagged) ++rec.local_significant;
            if (sp.regions[i] != Region::outside) {
                ++rec.structured;
                if (flagged) ++rec.structured_flagged;
            } else if (distance_to_structure(pts[i], cfg.scenario, sp.centers) > cfg.r_max) {
                ++rec.far;
                if (flagged) ++rec.far_flagged;
            }
        }
    }
    return rec;
}

StudySummary replicate_study(const StudyConfig& cfg, const StudyProgress& progress) {
    if (cfg.replicates < 1) throw InputError("a study needs at least one replicate");
    check_scenario(cfg.scenario);
    StudySummary summary;
    summary.config = cfg;
    summary.records.reserve(cfg.replicates);
    // Parallelism lives inside each replicate, so records arrive in order.
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
        summary.records.push_back(run_replicate(cfg, r));
        if (progress) progress(summary.records.back());
    }
    return summary;
}

double StudySummary::global_rejection_rate() const {
    if (records.empty()) return 0.0;
    std::size_t k = 0;
    for (const auto& r : records) k += r.global_reject ? 1 : 0;
    return static_cast<double>(k) / static_cast<double>(records.size());
}

double StudySummary::mean_local_significant_fraction() const {
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& r : records) {
        if (r.points == 0) continue;
        sum += static_cast<double>(r.local_significant) / static_cast<double>(r.points);
        ++used;
    }
    return used ? sum / static_cast<double>(used) : 0.0;
}

double StudySummary::mean_structured_detection() const {
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& r : records) {
        if (r.structured == 0) continue;
        sum += static_cast<double>(r.structured_flagged) / static_cast<double>(r.structured);
        ++used;
    }
    return used ? sum / static_cast<double>(used) : 0.0;
}

double StudySummary::replicates_detecting(double share) const {
    std::size_t hit = 0;
    std::size_t used = 0;
    for (const auto& r : records) {
        if (r.structured == 0) continue;
        ++used;
        if (static_cast<double>(r.structured_flagged) >= share * static_cast<double>(r.structured)) ++hit;
    }
    return used ? static_cast<double>(hit) / static_cast<double>(used) : 0.0;
}

std::pair<double, double> StudySummary::far_flag_rate() const {
    std::vector<double> f;
    for (const auto& r : records)
        if (r.far > 0) f.push_back(static_cast<double>(r.far_flagged) / static_cast<double>(r.far));
    if (f.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    if (f.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : f) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(f.size() - 1));
    return {mean, sd / std::sqrt(static_cast<double>(f.size()))};
}

} // namespace lima
