#include "lima/io.hpp"

#include "lima/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace lima::io {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void fail(const CsvTable& t, std::size_t row, const std::string& msg) {
    throw InputError(t.source + ":" + std::to_string(t.lines[row]) + ": " + msg);
}

[[noreturn]] void fail_header(const CsvTable& t, const std::string& msg) {
    throw InputError(t.source + ":1: " + msg);
}

std::size_t require_column(const CsvTable& t, const std::string& name) {
    if (auto c = t.column(name)) return *c;
    fail_header(t, "missing column '" + name + "'");
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

// Mark columns after the location columns: a single `mark` or `t_<v>` samples.
struct MarkColumns {
    std::optional<std::size_t> mark;
    std::vector<std::size_t> t_cols;
    std::vector<double> t_grid;
};

MarkColumns mark_columns(const CsvTable& t) {
    MarkColumns mc;
    mc.mark = t.column("mark");
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        const auto& h = t.header[c];
        if (h.rfind("t_", 0) != 0) continue;
        const std::string v = h.substr(2);
        double value = 0.0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), value);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(value))
            fail_header(t, "column '" + h + "' does not name a t value");
        mc.t_cols.push_back(c);
        mc.t_grid.push_back(value);
    }
    if (mc.mark && !mc.t_cols.empty()) fail_header(t, "both 'mark' and t_ columns present");
    if (!mc.mark && mc.t_cols.empty()) fail_header(t, "no mark column: expected 'mark' or t_<value> columns");
    return mc;
}

Marks read_marks(const CsvTable& t, const MarkColumns& mc) {
    if (mc.mark) {
        RealMarks m;
        m.values.reserve(t.rows.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r) m.values.push_back(parse_double(t.rows[r][*mc.mark], t, r));
        return m;
    }
    if (mc.t_grid.size() < 2)
        fail_header(t, "functional marks need at least 2 t columns; use a 'mark' column for a single value");
    for (std::size_t k = 1; k < mc.t_grid.size(); ++k)
        if (!(mc.t_grid[k] > mc.t_grid[k - 1])) fail_header(t, "t columns must be strictly increasing");
    FunctionalMarks fm{mc.t_grid, Matrix<double>(t.rows.size(), mc.t_grid.size())};
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t k = 0; k < mc.t_cols.size(); ++k) fm.curves(r, k) = parse_double(t.rows[r][mc.t_cols[k]], t, r);
    return fm;
}

void write_mark_header(std::ostream& out, const Marks& marks) {
    if (const auto* fm = std::get_if<FunctionalMarks>(&marks)) {
        for (double t : fm->t_grid) out << ",t_" << format_double(t);
    } else {
        out << ",mark";
    }
}

void write_mark_row(std::ostream& out, const Marks& marks, std::size_t i) {
    if (const auto* fm = std::get_if<FunctionalMarks>(&marks)) {
        for (double v : fm->curves.row(i)) out << ',' << format_double(v);
    } else {
        out << ',' << format_double(std::get<RealMarks>(marks).values[i]);
    }
}

nlohmann::ordered_json nullable(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

nlohmann::ordered_json vector_json(const std::vector<double>& v) {
    auto a = nlohmann::ordered_json::array();
    for (double x : v) a.push_back(nullable(x));
    return a;
}

nlohmann::ordered_json ranges_json(const std::vector<SignificantRange>& ranges) {
    auto a = nlohmann::ordered_json::array();
    for (const auto& r : ranges) a.push_back({{"r_lo", r.r_lo}, {"r_hi", r.r_hi}, {"side", name(r.side)}});
    return a;
}

} // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            if (lineno != 1) throw InputError(source + ":" + std::to_string(lineno) + ": header must be the first line");
            t.header = std::move(fields);
            std::set<std::string> seen;
            for (const auto& h : t.header)
                if (h.empty() || !seen.insert(h).second)
                    throw InputError(source + ":1: empty or repeated column name '" + h + "'");
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw InputError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.lines.push_back(lineno);
    }
    if (!have_header) throw InputError(source + ": empty file");
    return t;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path), path.string()); }

double parse_double(const std::string& text, const CsvTable& table, std::size_t row) {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    if (b != e && *b == '+') ++b;
    const auto res = std::from_chars(b, e, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != e) fail(table, row, "'" + text + "' is not a number");
    if (!std::isfinite(v)) fail(table, row, "'" + text + "' is not finite");
    return v;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
}

Window read_window(const fs::path& path) {
    const auto t = read_csv(path);
    const auto cx = require_column(t, "x");
    const auto cy = require_column(t, "y");
    std::vector<Point2> v;
    for (std::size_t r = 0; r < t.rows.size(); ++r) v.push_back({parse_double(t.rows[r][cx], t, r), parse_double(t.rows[r][cy], t, r)});
    try {
        return build_window(std::move(v));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_window(const fs::path& path, const Window& window) {
    auto out = open_out(path);
    out << "x,y\n";
    for (const auto& p : window.vertices()) out << format_double(p.x) << ',' << format_double(p.y) << '\n';
}

NetworkFiles read_network(const fs::path& nodes_path, const fs::path& edges_path) {
    const auto nt = read_csv(nodes_path);
    const auto nid = require_column(nt, "id");
    const auto nx = require_column(nt, "x");
    const auto ny = require_column(nt, "y");
    NetworkFiles nf;
    std::map<std::string, std::size_t> node_index;
    std::vector<Point2> nodes;
    for (std::size_t r = 0; r < nt.rows.size(); ++r) {
        const auto& id = nt.rows[r][nid];
        if (!node_index.emplace(id, nodes.size()).second) fail(nt, r, "duplicate node id '" + id + "'");
        nodes.push_back({parse_double(nt.rows[r][nx], nt, r), parse_double(nt.rows[r][ny], nt, r)});
        nf.node_ids.push_back(id);
    }
    const auto et = read_csv(edges_path);
    const auto eid = require_column(et, "id");
    const auto eu = require_column(et, "u");
    const auto ev = require_column(et, "v");
    std::vector<std::pair<std::size_t, std::size_t>> segs;
    for (std::size_t r = 0; r < et.rows.size(); ++r) {
        const auto& id = et.rows[r][eid];
        auto lookup = [&](const std::string& n) {
            const auto it = node_index.find(n);
            if (it == node_index.end()) fail(et, r, "edge refers to unknown node '" + n + "'");
            return it->second;
        };
        const auto u = lookup(et.rows[r][eu]);
        const auto v = lookup(et.rows[r][ev]);
        if (!nf.edge_index.emplace(id, segs.size()).second) fail(et, r, "duplicate edge id '" + id + "'");
        segs.emplace_back(u, v);
        nf.edge_ids.push_back(id);
    }
    try {
        nf.network = std::make_shared<const LinearNetwork>(build_network(std::move(nodes), segs));
    } catch (const InputError& e) {
        throw InputError(edges_path.string() + ": " + e.what());
    }
    return nf;
}

void write_network(const fs::path& nodes, const fs::path& edges, const NetworkFiles& net) {
    auto out = open_out(nodes);
    out << "id,x,y\n";
    const auto& nds = net.network->nodes();
    for (std::size_t k = 0; k < nds.size(); ++k)
        out << net.node_ids[k] << ',' << format_double(nds[k].x) << ',' << format_double(nds[k].y) << '\n';
    auto eo = open_out(edges);
    eo << "id,u,v\n";
    const auto& segs = net.network->segments();
    for (std::size_t k = 0; k < segs.size(); ++k)
        eo << net.edge_ids[k] << ',' << net.node_ids[segs[k].u] << ',' << net.node_ids[segs[k].v] << '\n';
}

Window bounding_window(const std::vector<Point2>& points) {
    if (points.empty()) throw InputError("cannot derive a window from an empty pattern");
    Point2 lo = points.front();
    Point2 hi = points.front();
    for (const auto& p : points) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const double pad = 1e-9 * std::max({1.0, std::abs(lo.x), std::abs(lo.y), std::abs(hi.x), std::abs(hi.y)});
    if (hi.x - lo.x <= 0.0) { lo.x -= pad; hi.x += pad; }
    if (hi.y - lo.y <= 0.0) { lo.y -= pad; hi.y += pad; }
    return build_window({{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {lo.x, hi.y}});
}

MarkedPointPattern read_planar_pattern(const fs::path& path, const std::optional<Window>& window) {
    const auto t = read_csv(path);
    const auto cx = require_column(t, "x");
    const auto cy = require_column(t, "y");
    const auto mc = mark_columns(t);
    std::vector<Point2> pts;
    pts.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Point2 p{parse_double(t.rows[r][cx], t, r), parse_double(t.rows[r][cy], t, r)};
        if (window && !window->contains(p)) fail(t, r, "point lies outside the window");
        pts.push_back(p);
    }
    auto marks = read_marks(t, mc);
    Window w = window ? *window : bounding_window(pts);
    try {
        return validate(PlanarSupport{std::move(w), std::move(pts)}, std::move(marks));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

MarkedPointPattern read_network_pattern(const fs::path& path, const NetworkFiles& net) {
    const auto t = read_csv(path);
    const auto cs = require_column(t, "segment");
    const auto co = require_column(t, "offset");
    const auto mc = mark_columns(t);
    std::vector<NetworkLocation> locs;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto it = net.edge_index.find(t.rows[r][cs]);
        if (it == net.edge_index.end()) fail(t, r, "unknown segment '" + t.rows[r][cs] + "'");
        const NetworkLocation loc{it->second, parse_double(t.rows[r][co], t, r)};
        if (!net.network->is_valid(loc)) fail(t, r, "offset outside [0, segment length]");
        locs.push_back(loc);
    }
    auto marks = read_marks(t, mc);
    try {
        return validate(NetworkSupport{net.network, std::move(locs)}, std::move(marks));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_pattern(const fs::path& path, const MarkedPointPattern& pattern, const std::vector<Region>* regions,
                   const std::vector<std::string>* edge_ids) {
    auto out = open_out(path);
    const bool planar = pattern.is_planar();
    out << (planar ? "x,y" : "segment,offset");
    write_mark_header(out, pattern.marks());
    if (regions) out << ",region";
    out << '\n';
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (planar) {
            const auto& p = std::get<PlanarSupport>(pattern.support()).points[i];
            out << format_double(p.x) << ',' << format_double(p.y);
        } else {
            const auto& l = std::get<NetworkSupport>(pattern.support()).locations[i];
            out << (edge_ids ? (*edge_ids)[l.segment] : std::to_string(l.segment)) << ',' << format_double(l.offset);
        }
        write_mark_row(out, pattern.marks(), i);
        if (regions) out << ',' << name((*regions)[i]);
        out << '\n';
    }
}

void write_curve_csv(const fs::path& path, const SummaryCurve& curve) {
    auto out = open_out(path);
    out << "r,value,valid\n";
    for (std::size_t k = 0; k < curve.r.size(); ++k)
        out << format_double(curve.r[k]) << ',' << (curve.valid[k] ? format_double(curve.values[k]) : "") << ','
            << int(curve.valid[k]) << '\n';
}

void write_surface_csv(const fs::path& path, const PointwiseSurface& s) {
    auto out = open_out(path);
    out << "r,t,value\n";
    for (std::size_t k = 0; k < s.r.size(); ++k)
        for (std::size_t c = 0; c < s.t.size(); ++c)
            out << format_double(s.r[k]) << ',' << format_double(s.t[c]) << ','
                << (s.valid(k, c) ? format_double(s.values(k, c)) : "") << '\n';
}

void write_envelope_csv(const fs::path& path, const EnvelopeResult& env) {
    auto out = open_out(path);
    out << "r,observed,lower,upper,central,valid\n";
    auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
    for (std::size_t k = 0; k < env.r.size(); ++k)
        out << format_double(env.r[k]) << ',' << cell(env.observed[k]) << ',' << cell(env.lower[k]) << ','
            << cell(env.upper[k]) << ',' << cell(env.central[k]) << ',' << int(env.valid[k]) << '\n';
}

void write_report_csv(const fs::path& path, const LocalTestReport& report) {
    auto out = open_out(path);
    out << "point_id,p_value,significant,range_lo,range_hi,side\n";
    for (const auto& p : report.points) {
        const std::string head = std::to_string(p.point) + ',' + format_double(p.p_value) + ',' +
                                 (p.significant ? "1" : "0") + ',';
        if (p.ranges.empty()) {
            out << head << ",,\n";
            continue;
        }
        for (const auto& r : p.ranges)
            out << head << format_double(r.r_lo) << ',' << format_double(r.r_hi) << ',' << name(r.side) << '\n';
    }
}

void write_records_csv(const fs::path& path, const std::vector<ReplicateRecord>& records) {
    auto out = open_out(path);
    out << "replicate,points,bandwidth,global_p,global_reject,local_significant,structured,structured_flagged,far,"
           "far_flagged\n";
    for (const auto& r : records)
        out << r.replicate << ',' << r.points << ',' << format_double(r.bandwidth) << ',' << format_double(r.global_p)
            << ',' << int(r.global_reject) << ',' << r.local_significant << ',' << r.structured << ','
            << r.structured_flagged << ',' << r.far << ',' << r.far_flagged << '\n';
}

nlohmann::ordered_json to_json(const CurveMeta& m) {
    nlohmann::ordered_json j;
    j["test_function"] = std::string(name(m.kind));
    j["point"] = m.point ? nlohmann::ordered_json(*m.point) : nlohmann::ordered_json(nullptr);
    j["normalized"] = m.normalized;
    j["functional"] = m.functional;
    j["normalizer"] = nullable(m.normalizer);
    j["normalizer_rule"] = std::string(name(m.rule));
    j["kernel"] = std::string(name(m.kernel));
    j["bandwidth"] = m.bandwidth;
    j["warnings"] = m.warnings;
    return j;
}

nlohmann::ordered_json to_json(const SummaryCurve& c) {
    nlohmann::ordered_json j;
    j["meta"] = to_json(c.meta);
    j["r"] = c.r;
    auto vals = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < c.values.size(); ++k) vals.push_back(c.valid[k] ? nullable(c.values[k]) : nullptr);
    j["value"] = vals;
    j["valid"] = c.valid;
    return j;
}

nlohmann::ordered_json to_json(const EnvelopeResult& env) {
    nlohmann::ordered_json j;
    j["p_value"] = env.p_value;
    j["alpha"] = env.alpha;
    j["permutations"] = env.permutations;
    j["significant"] = env.p_value <= env.alpha;
    j["ranges"] = ranges_json(significant_ranges(env));
    j["r"] = env.r;
    j["observed"] = vector_json(env.observed);
    j["lower"] = vector_json(env.lower);
    j["upper"] = vector_json(env.upper);
    j["central"] = vector_json(env.central);
    j["valid"] = env.valid;
    return j;
}

nlohmann::ordered_json to_json(const LocalTestReport& report) {
    nlohmann::ordered_json j;
    j["alpha"] = report.alpha;
    j["permutations"] = report.permutations;
    j["seed"] = report.seed;
    j["shared_permutations"] = report.shared_permutations;
    j["significant_count"] = report.significant_count();
    j["point_count"] = report.points.size();
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : report.points) {
        nlohmann::ordered_json e;
        e["point_id"] = p.point;
        e["p_value"] = p.p_value;
        e["significant"] = p.significant;
        e["ranges"] = ranges_json(p.ranges);
        if (p.envelope) e["envelope"] = to_json(*p.envelope);
        pts.push_back(std::move(e));
    }
    j["points"] = std::move(pts);
    return j;
}

nlohmann::ordered_json to_json(const StudySummary& s) {
    const auto& c = s.config;
    nlohmann::ordered_json j;
    j["scenario"] = std::string(name(c.scenario.scenario));
    j["replicates"] = s.records.size();
    j["intensity"] = c.scenario.intensity;
    j["disc_radius"] = c.scenario.disc_radius;
    j["band_halfwidth"] = c.scenario.band_halfwidth;
    j["permutations"] = c.permutations;
    j["alpha"] = c.alpha;
    j["bandwidth"] = c.bandwidth;
    j["r_max"] = c.r_max;
    j["r_steps"] = c.r_steps;
    j["test_function"] = std::string(name(c.testfn));
    j["seed"] = c.scenario.seed;
    j["global_rejection_rate"] = s.global_rejection_rate();
    j["mean_local_significant_fraction"] = s.mean_local_significant_fraction();
    j["mean_structured_detection"] = s.mean_structured_detection();
    const auto [far_mean, far_se] = s.far_flag_rate();
    j["far_flag_rate"] = far_mean;
    j["far_flag_rate_se"] = far_se;
    auto ps = nlohmann::ordered_json::array();
    for (const auto& r : s.records) ps.push_back(r.global_p);
    j["global_p_values"] = ps;
    return j;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

} // namespace lima::io
