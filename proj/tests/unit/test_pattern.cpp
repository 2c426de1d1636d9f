#include "lima/error.hpp"
#include "lima/pattern.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>

using namespace lima;

namespace {

MarkedPointPattern planar(std::vector<Point2> pts, std::vector<double> marks) {
    return validate(PlanarSupport{unit_square(), std::move(pts)}, RealMarks{std::move(marks)});
}

} // namespace

TEST(MarkSummary, MeanAndSampleVariance) {
    const std::vector<double> m{1, 2, 3, 4};
    const auto s = mark_summary(m);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
    const auto loo = mark_summary(m, 3);
    EXPECT_DOUBLE_EQ(loo.mean, 2.0);
    EXPECT_DOUBLE_EQ(loo.variance, 1.0);
}

TEST(MarkSummary, NeedsTwoMarks) {
    const std::vector<double> m{1, 2};
    EXPECT_THROW((void)mark_summary(m, 0), InputError);
    EXPECT_THROW((void)mark_summary(m, 5), InputError);
}

TEST(MarkSummary, ConstantMarksHaveZeroVariance) {
    const std::vector<double> m(9, 3.25);
    EXPECT_EQ(mark_summary(m).variance, 0.0);
    EXPECT_EQ(mark_summary(m, 4).mean, 3.25);
}

TEST(Validate, PlanarChecks) {
    EXPECT_NO_THROW((void)planar({{0.1, 0.1}, {0.2, 0.2}}, {1, 2}));
    EXPECT_THROW((void)planar({{0.1, 0.1}, {1.2, 0.2}}, {1, 2}), InputError);
    EXPECT_THROW((void)planar({{0.1, 0.1}, {0.1, 0.1}}, {1, 2}), InputError);
    EXPECT_THROW((void)planar({{0.1, 0.1}, {0.2, 0.2}}, {1}), InputError);
    EXPECT_THROW((void)planar({{0.1, 0.1}, {0.2, 0.2}}, {1, std::nan("")}), InputError);
}

TEST(Validate, FunctionalChecks) {
    FunctionalMarks fm{{0.0, 1.0}, Matrix<double>(2, 2, 1.0)};
    EXPECT_NO_THROW((void)validate(PlanarSupport{unit_square(), {{0.1, 0.1}, {0.2, 0.2}}}, fm));
    fm.t_grid = {1.0, 0.0};
    EXPECT_THROW((void)validate(PlanarSupport{unit_square(), {{0.1, 0.1}, {0.2, 0.2}}}, fm), InputError);
    FunctionalMarks narrow{{0.0, 0.5, 1.0}, Matrix<double>(2, 2, 1.0)};
    EXPECT_THROW((void)validate(PlanarSupport{unit_square(), {{0.1, 0.1}, {0.2, 0.2}}}, narrow), InputError);
}

TEST(Validate, NetworkChecks) {
    auto net = std::make_shared<const LinearNetwork>(build_network({{0, 0}, {2, 0}}, {{0, 1}}));
    EXPECT_NO_THROW((void)validate(NetworkSupport{net, {{0, 0.5}, {0, 1.5}}}, RealMarks{{1, 2}}));
    EXPECT_THROW((void)validate(NetworkSupport{net, {{0, 2.5}, {0, 1.5}}}, RealMarks{{1, 2}}), InputError);
    EXPECT_THROW((void)validate(NetworkSupport{net, {{1, 0.5}, {0, 1.5}}}, RealMarks{{1, 2}}), InputError);
    EXPECT_THROW((void)validate(NetworkSupport{net, {{0, 0.5}, {0, 0.5}}}, RealMarks{{1, 2}}), InputError);
    const auto p = validate(NetworkSupport{net, {{0, 0.5}, {0, 1.5}}}, RealMarks{{1, 2}});
    EXPECT_DOUBLE_EQ(p.domain_measure(), 2.0);
    EXPECT_DOUBLE_EQ(p.intensity(), 1.0);
    EXPECT_DOUBLE_EQ(pairwise_distances(p)(0, 1), 1.0);
}

TEST(Pattern, AccessorsAndWithMarks) {
    const auto p = planar({{0.1, 0.1}, {0.4, 0.5}}, {1, 2});
    EXPECT_EQ(p.size(), 2u);
    EXPECT_TRUE(p.is_planar());
    EXPECT_FALSE(p.has_functional_marks());
    EXPECT_THROW((void)p.functional_marks(), InputError);
    EXPECT_DOUBLE_EQ(p.intensity(), 2.0);
    EXPECT_DOUBLE_EQ(pairwise_distances(p)(0, 1), 0.5);
    const auto q = p.with_marks(RealMarks{{5, 6}});
    EXPECT_EQ(q.real_marks().values[1], 6.0);
    EXPECT_THROW((void)p.with_marks(RealMarks{{5}}), InputError);
}
