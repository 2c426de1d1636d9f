#include "lima/error.hpp"
#include "lima/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>

#include <unistd.h>

using namespace lima;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("lima_io_" + std::to_string(::getpid())) / name;
    fs::create_directories(dir);
    return dir;
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const InputError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Csv, ParsesHeaderRowsAndLines) {
    const auto t = io::parse_csv("x, y ,mark\n\n0.1,0.2,3\n0.3,0.4,5\n", "mem");
    EXPECT_EQ(t.header, (std::vector<std::string>{"x", "y", "mark"}));
    EXPECT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.lines, (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(*t.column("mark"), 2u);
    EXPECT_FALSE(t.column("z"));
}

TEST(Csv, ErrorsNameTheLine) {
    EXPECT_NE(error_of([] { (void)io::parse_csv("x,y\n1,2\n3\n", "f.csv"); }).find("f.csv:3:"), std::string::npos);
    EXPECT_NE(error_of([] { (void)io::parse_csv("x,x\n", "f.csv"); }).find("f.csv:1:"), std::string::npos);
    EXPECT_FALSE(error_of([] { (void)io::parse_csv("", "f.csv"); }).empty());
    const auto t = io::parse_csv("x\n1\nabc\n", "g.csv");
    EXPECT_EQ(io::parse_double(t.rows[0][0], t, 0), 1.0);
    EXPECT_NE(error_of([&] { (void)io::parse_double(t.rows[1][0], t, 1); }).find("g.csv:3:"), std::string::npos);
    EXPECT_FALSE(error_of([&] { (void)io::parse_double("inf", t, 0); }).empty());
    EXPECT_FALSE(error_of([&] { (void)io::parse_double("1.5x", t, 0); }).empty());
}

TEST(Csv, FormatRoundTrips) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    const auto t = io::parse_csv("x\n0\n", "m");
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng);
        EXPECT_EQ(io::parse_double(io::format_double(v), t, 0), v);
    }
    EXPECT_EQ(io::format_double(0.05), "0.05");
    EXPECT_EQ(io::format_double(2.0), "2");
}

TEST(Files, PlanarPatternRoundTrip) {
    const auto dir = scratch("planar");
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> pts(20);
    std::vector<double> marks(20);
    for (std::size_t i = 0; i < 20; ++i) {
        pts[i] = {u(rng), u(rng)};
        marks[i] = u(rng) * 10.0;
    }
    const auto p = validate(PlanarSupport{unit_square(), pts}, RealMarks{marks});
    std::vector<Region> regions(20, Region::disc_a);
    io::write_pattern(dir / "p.csv", p, &regions);
    io::write_window(dir / "w.csv", unit_square());
    const auto w = io::read_window(dir / "w.csv");
    EXPECT_EQ(w, unit_square());
    EXPECT_EQ(io::read_planar_pattern(dir / "p.csv", w), p);
    // without a window the bounding box of the points is used
    const auto q = io::read_planar_pattern(dir / "p.csv", std::nullopt);
    EXPECT_EQ(q.real_marks(), p.real_marks());
    EXPECT_LE(std::get<PlanarSupport>(q.support()).window.area(), 1.0);
}

TEST(Files, FunctionalPatternRoundTrip) {
    const auto dir = scratch("functional");
    FunctionalMarks fm{{0.0, 0.25, 1.0}, Matrix<double>(3, 3)};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t t = 0; t < 3; ++t) fm.curves(i, t) = 1.0 + i + 0.1 * t;
    const auto p = validate(PlanarSupport{unit_square(), {{0.1, 0.1}, {0.5, 0.5}, {0.9, 0.2}}}, fm);
    io::write_pattern(dir / "f.csv", p);
    EXPECT_NE(io::read_text(dir / "f.csv").find("t_0.25"), std::string::npos);
    EXPECT_EQ(io::read_planar_pattern(dir / "f.csv", unit_square()), p);
}

TEST(Files, NetworkRoundTrip) {
    const auto dir = scratch("network");
    io::write_text(dir / "nodes.csv", "id,x,y\na,0,0\nb,1,0\nc,1,1\n");
    io::write_text(dir / "edges.csv", "id,u,v\ne1,a,b\ne2,b,c\n");
    io::write_text(dir / "pts.csv", "segment,offset,mark\ne1,0.5,2\ne2,0.25,3\ne2,0.75,4\n");
    const auto net = io::read_network(dir / "nodes.csv", dir / "edges.csv");
    EXPECT_EQ(net.edge_index.at("e2"), 1u);
    const auto p = io::read_network_pattern(dir / "pts.csv", net);
    EXPECT_DOUBLE_EQ(pairwise_distances(p)(0, 2), 1.25);
    io::write_pattern(dir / "out.csv", p, nullptr, &net.edge_ids);
    EXPECT_EQ(io::read_network_pattern(dir / "out.csv", net), p);
    io::write_network(dir / "n2.csv", dir / "e2.csv", net);
    const auto again = io::read_network(dir / "n2.csv", dir / "e2.csv");
    EXPECT_EQ(again.network->nodes(), net.network->nodes());
    EXPECT_EQ(again.edge_ids, net.edge_ids);
}

TEST(Files, NetworkErrorsNameTheLine) {
    const auto dir = scratch("network_bad");
    io::write_text(dir / "nodes.csv", "id,x,y\na,0,0\nb,1,0\n");
    io::write_text(dir / "edges.csv", "id,u,v\ne1,a,b\ne2,b,z\n");
    const auto msg = error_of([&] { (void)io::read_network(dir / "nodes.csv", dir / "edges.csv"); });
    EXPECT_NE(msg.find("edges.csv:3:"), std::string::npos) << msg;
    io::write_text(dir / "edges.csv", "id,u,v\ne1,a,b\n");
    io::write_text(dir / "pts.csv", "segment,offset,mark\ne1,0.5,2\ne9,0.1,1\n");
    const auto net = io::read_network(dir / "nodes.csv", dir / "edges.csv");
    EXPECT_NE(error_of([&] { (void)io::read_network_pattern(dir / "pts.csv", net); }).find("pts.csv:3:"),
              std::string::npos);
}

TEST(Files, SchemaErrors) {
    const auto dir = scratch("schema");
    io::write_text(dir / "nomark.csv", "x,y\n0.1,0.1\n");
    EXPECT_FALSE(error_of([&] { (void)io::read_planar_pattern(dir / "nomark.csv", std::nullopt); }).empty());
    io::write_text(dir / "both.csv", "x,y,mark,t_0,t_1\n0.1,0.1,1,1,1\n");
    EXPECT_FALSE(error_of([&] { (void)io::read_planar_pattern(dir / "both.csv", std::nullopt); }).empty());
    io::write_text(dir / "badt.csv", "x,y,t_0,t_zz\n0.1,0.1,1,1\n");
    EXPECT_NE(error_of([&] { (void)io::read_planar_pattern(dir / "badt.csv", std::nullopt); }).find(":1:"),
              std::string::npos);
    EXPECT_FALSE(error_of([&] { (void)io::read_text(dir / "missing.csv"); }).empty());
}

TEST(Json, EnvelopeUsesNullForInvalidCells) {
    EnvelopeResult env;
    env.r = {0.0, 0.1};
    env.observed = {std::numeric_limits<double>::quiet_NaN(), 1.0};
    env.lower = env.upper = env.central = env.observed;
    env.valid = {0, 1};
    env.observed_rank = {0, 1};
    env.observed_low = {0, 0};
    env.p_value = 0.5;
    const auto j = io::to_json(env);
    EXPECT_TRUE(j["observed"][0].is_null());
    EXPECT_EQ(j["observed"][1], 1.0);
    EXPECT_EQ(j["p_value"], 0.5);
}
