#include "lima/estimate.hpp"

#include "lima/error.hpp"
#include "lima/simd.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <string>
#include <type_traits>

namespace lima {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <TestFunction F>
using KindTag = std::integral_constant<TestFunction, F>;

// Calls fn with the test function as a compile-time constant so the per-lane
// loops below are specialised per kind.
template <class Fn>
void visit_kind(TestFunction f, Fn&& fn) {
    switch (f) {
    case TestFunction::stoyan: fn(KindTag<TestFunction::stoyan>{}); break;
    case TestFunction::beisbart: fn(KindTag<TestFunction::beisbart>{}); break;
    case TestFunction::isham: fn(KindTag<TestFunction::isham>{}); break;
    case TestFunction::shimatani: fn(KindTag<TestFunction::shimatani>{}); break;
    case TestFunction::schlather: fn(KindTag<TestFunction::schlather>{}); break;
    case TestFunction::r_mark_bullet: fn(KindTag<TestFunction::r_mark_bullet>{}); break;
    case TestFunction::r_mark_dot: fn(KindTag<TestFunction::r_mark_dot>{}); break;
    case TestFunction::variogram: fn(KindTag<TestFunction::variogram>{}); break;
    case TestFunction::differentiation: fn(KindTag<TestFunction::differentiation>{}); break;
    }
}

struct Band {
    std::size_t k0 = 0;
    std::size_t k1 = 0;
    [[nodiscard]] std::size_t size() const noexcept { return k1 - k0; }
};

Band band_for(std::span<const double> r, double d, double support) {
    if (std::isinf(support)) return {0, r.size()};
    const auto lo = std::lower_bound(r.begin(), r.end(), d - support);
    const auto hi = std::upper_bound(lo, r.end(), d + support);
    return {static_cast<std::size_t>(lo - r.begin()), static_cast<std::size_t>(hi - r.begin())};
}

Matrix<double> lane_matrix(std::span<const double> marks, std::span<const std::vector<std::size_t>> perms) {
    const std::size_t n = marks.size();
    const std::size_t lanes = perms.size();
    Matrix<double> m(n, lanes);
    for (std::size_t p = 0; p < lanes; ++p) {
        if (perms[p].size() != n) throw InputError("permutation length does not match the pattern size");
        for (std::size_t j = 0; j < n; ++j) {
            if (perms[p][j] >= n) throw InputError("permutation entry out of range");
            m(j, p) = marks[perms[p][j]];
        }
    }
    return m;
}

std::vector<std::vector<std::size_t>> identity_perm(std::size_t n) {
    std::vector<std::size_t> id(n);
    for (std::size_t j = 0; j < n; ++j) id[j] = j;
    return {std::move(id)};
}

void check_marks_for(TestFunctionSpec spec, std::span<const double> marks) {
    if (!spec.requires_positive_marks) return;
    for (double m : marks)
        if (!(m > 0.0)) throw InputError(std::string(name(spec.kind)) + " requires strictly positive marks");
}

void check_marks_for(TestFunctionSpec spec, const Matrix<double>& marks) {
    check_marks_for(spec, marks.data());
}

std::string point_label(std::size_t i) { return "point " + std::to_string(i); }

[[noreturn]] void zero_normalizer(TestFunction kind, const std::string& where) {
    throw DegenerateError("kappa is undefined: the " + std::string(name(kind)) + " normalizer is zero for " +
                          where);
}

std::vector<double> column(const Matrix<double>& m, std::size_t c) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
    return out;
}

std::vector<double> trapezoid_weights(std::span<const double> t) {
    const std::size_t n = t.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double half = 0.5 * (t[k + 1] - t[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    return w;
}

// Integrates each row over the kept columns; weights of dropped columns are
// redistributed proportionally so the total weight stays |T|.
SummaryCurve integrate_rows(const PointwiseSurface& s, const std::vector<std::uint8_t>& keep) {
    if (s.t.size() < 2) throw InputError("integration over t needs at least 2 samples");
    const auto w = trapezoid_weights(s.t);
    double total = 0.0;
    double kept = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) {
        total += w[c];
        if (keep[c]) kept += w[c];
    }
    if (!(kept > 0.0)) throw DegenerateError("no t sample left to integrate over");
    const double scale = total / kept;

    SummaryCurve out;
    out.r = s.r;
    out.values.assign(s.r.size(), kNaN);
    out.valid.assign(s.r.size(), 0);
    out.meta = s.meta;
    for (std::size_t k = 0; k < s.r.size(); ++k) {
        bool ok = true;
        double acc = 0.0;
        for (std::size_t c = 0; c < s.t.size(); ++c) {
            if (!keep[c]) continue;
            if (!s.valid(k, c)) {
                ok = false;
                break;
            }
            acc += w[c] * s.values(k, c);
        }
        if (ok) {
            out.values[k] = scale == 1.0 ? acc : acc * scale;
            out.valid[k] = 1;
        }
    }
    return out;
}

} // namespace

std::vector<double> uniform_r_grid(double r_max, std::size_t steps) {
    if (!(r_max > 0.0) || !std::isfinite(r_max)) throw InputError("r_max must be positive and finite");
    if (steps < 1) throw InputError("the r grid needs at least one step");
    std::vector<double> r(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) r[k] = r_max * static_cast<double>(k) / static_cast<double>(steps);
    return r;
}

double default_bandwidth(double intensity) {
    if (!(intensity > 0.0)) throw InputError("intensity must be positive to choose a bandwidth");
    return 0.15 / std::sqrt(intensity);
}

void check_config(const EstimationConfig& cfg) {
    if (cfg.r_grid.empty()) throw InputError("empty r grid");
    for (std::size_t k = 0; k < cfg.r_grid.size(); ++k) {
        if (!std::isfinite(cfg.r_grid[k]) || cfg.r_grid[k] < 0.0) throw InputError("r grid values must be >= 0");
        if (k > 0 && !(cfg.r_grid[k] > cfg.r_grid[k - 1])) throw InputError("r grid must be strictly increasing");
    }
    if (!(cfg.bandwidth > 0.0) || !std::isfinite(cfg.bandwidth)) throw InputError("bandwidth must be positive");
    if (!(cfg.min_weight >= 0.0)) throw InputError("min_weight must be non-negative");
}

std::vector<double> LaneCurves::lane(std::size_t p) const { return column(values, p); }

MarkCorrelationEstimator::MarkCorrelationEstimator(DistanceMatrix distances, EstimationConfig cfg)
    : distances_(std::move(distances)), cfg_(std::move(cfg)) {
    if (distances_.rows() != distances_.cols()) throw InputError("distance matrix must be square");
    check_config(cfg_);
}

MarkCorrelationEstimator::Sums MarkCorrelationEstimator::local_sums(const Matrix<double>& lane_marks, std::size_t i,
                                                                    TestFunction kind,
                                                                    std::span<const double> mu_per_lane) const {
    const std::size_t n = size();
    if (lane_marks.rows() != n) throw InputError("mark count does not match the distance matrix");
    if (i >= n) throw InputError("point index " + std::to_string(i) + " out of range");
    const std::size_t lanes = lane_marks.cols();
    const std::size_t nr = cfg_.r_grid.size();
    const double support = kernel_support(cfg_.kernel, cfg_.bandwidth);
    const auto& ops = simd::ops();

    Sums s{Matrix<double>(nr, lanes, 0.0), std::vector<double>(nr, 0.0)};
    std::vector<double> w(nr);
    std::vector<double> vals(lanes);
    const double* mi = lane_marks.row(i).data();
    const double* mu = mu_per_lane.data();

    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = distances_(i, j);
        if (!std::isfinite(d)) continue;
        const Band b = band_for(cfg_.r_grid, d, support);
        if (b.size() == 0) continue;
        ops.kernel_weights(cfg_.kernel, d, cfg_.r_grid.data() + b.k0, b.size(), cfg_.bandwidth, w.data());
        const double* mj = lane_marks.row(j).data();
        visit_kind(kind, [&](auto tag) {
            for (std::size_t p = 0; p < lanes; ++p)
                vals[p] = detail::local_pair_term(tag.value, mi[p], mj[p], mu ? mu[p] : 0.0);
        });
        ops.accumulate_band(&s.num(b.k0, 0), lanes, w.data(), b.size(), vals.data());
        ops.add(s.den.data() + b.k0, w.data(), b.size());
    }
    return s;
}

MarkCorrelationEstimator::Sums MarkCorrelationEstimator::global_sums(const Matrix<double>& lane_marks,
                                                                     TestFunction kind,
                                                                     std::span<const double> mu_per_lane) const {
    const std::size_t n = size();
    if (lane_marks.rows() != n) throw InputError("mark count does not match the distance matrix");
    const std::size_t lanes = lane_marks.cols();
    // Schlather carries a second channel with m_i + m_j for the pair mean mu(r).
    const std::size_t width = kind == TestFunction::schlather ? 2 * lanes : lanes;
    const std::size_t nr = cfg_.r_grid.size();
    const double support = kernel_support(cfg_.kernel, cfg_.bandwidth);
    const auto& ops = simd::ops();

    Sums s{Matrix<double>(nr, width, 0.0), std::vector<double>(nr, 0.0)};
    std::vector<double> w(nr);
    std::vector<double> vals(width);
    const double* mu = mu_per_lane.data();

    for (std::size_t i = 0; i < n; ++i) {
        const double* mi = lane_marks.row(i).data();
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distances_(i, j);
            if (!std::isfinite(d)) continue;
            const Band b = band_for(cfg_.r_grid, d, support);
            if (b.size() == 0) continue;
            ops.kernel_weights(cfg_.kernel, d, cfg_.r_grid.data() + b.k0, b.size(), cfg_.bandwidth, w.data());
            const double* mj = lane_marks.row(j).data();
            visit_kind(kind, [&](auto tag) {
                constexpr TestFunction f = decltype(tag)::value;
                for (std::size_t p = 0; p < lanes; ++p) {
                    const double a = mi[p];
                    const double c = mj[p];
                    if constexpr (f == TestFunction::isham) {
                        const double m2 = mu[p] * mu[p];
                        vals[p] = (a * c - m2) + (c * a - m2);
                    } else if constexpr (f == TestFunction::shimatani) {
                        vals[p] = (a - mu[p]) * (c - mu[p]) + (c - mu[p]) * (a - mu[p]);
                    } else if constexpr (f == TestFunction::schlather) {
                        vals[p] = a * c + c * a;
                        vals[lanes + p] = a + c;
                    } else {
                        vals[p] = detail::local_pair_term(f, a, c, 0.0) + detail::local_pair_term(f, c, a, 0.0);
                    }
                }
            });
            ops.accumulate_band(&s.num(b.k0, 0), width, w.data(), b.size(), vals.data());
            ops.add(s.den.data() + b.k0, w.data(), b.size());
        }
    }
    for (double& v : s.den) v *= 2.0;
    return s;
}

namespace {

// c(r) per lane from local or global sums; `subtract` receives (k, p) and
// returns the term removed after smoothing (Schlather), or nothing.
template <class Subtract>
Matrix<double> ratio(const MarkCorrelationEstimator::Sums& s, std::size_t lanes, double min_weight,
                     std::vector<std::uint8_t>& valid, Subtract&& subtract) {
    const std::size_t nr = s.den.size();
    Matrix<double> c(nr, lanes, kNaN);
    valid.assign(nr, 0);
    for (std::size_t k = 0; k < nr; ++k) {
        if (!(s.den[k] >= min_weight) || s.den[k] <= 0.0) continue;
        valid[k] = 1;
        for (std::size_t p = 0; p < lanes; ++p) c(k, p) = s.num(k, p) / s.den[k] - subtract(k, p);
    }
    return c;
}

// Pattern-wide pair mark mean mu(r) per lane, used by the Schlather forms.
Matrix<double> pair_mark_mean(const MarkCorrelationEstimator::Sums& g, std::size_t lanes) {
    const std::size_t nr = g.den.size();
    Matrix<double> mu(nr, lanes, kNaN);
    for (std::size_t k = 0; k < nr; ++k) {
        if (!(g.den[k] > 0.0)) continue;
        for (std::size_t p = 0; p < lanes; ++p) mu(k, p) = g.num(k, lanes + p) / g.den[k];
    }
    return mu;
}

struct LocalLaneC {
    Matrix<double> c;
    std::vector<std::uint8_t> valid;
};

} // namespace

// --- real-valued marks --------------------------------------------------------

namespace {

struct LooCache {
    std::span<const double> marks;
    TestFunctionSpec spec;
    std::map<std::size_t, std::pair<MarkSummary, Normalizer>> by_index;

    const std::pair<MarkSummary, Normalizer>& get(std::size_t e) {
        auto it = by_index.find(e);
        if (it != by_index.end()) return it->second;
        std::vector<double> others;
        MarkContext ctx = make_context(marks, e, others);
        const Normalizer nz = local_normalizer(spec, marks[e], ctx);
        return by_index.emplace(e, std::pair{MarkSummary{ctx.mu_j, ctx.sigma2_j}, nz}).first->second;
    }
};

LocalLaneC local_c_lanes(const MarkCorrelationEstimator& est, const Matrix<double>& lanes_m,
                         std::span<const std::vector<std::size_t>> perms, std::size_t i, TestFunctionSpec spec,
                         LooCache& cache, const Matrix<double>* mu_r, std::vector<double>& normalizers,
                         NormalizerRule& rule) {
    const std::size_t lanes = perms.size();
    std::vector<double> mu(lanes);
    normalizers.assign(lanes, 0.0);
    for (std::size_t p = 0; p < lanes; ++p) {
        const auto& [summary, nz] = cache.get(perms[p][i]);
        mu[p] = summary.mean;
        normalizers[p] = nz.value;
        rule = nz.rule;
    }
    const auto sums = est.local_sums(lanes_m, i, spec.kind, mu);
    LocalLaneC out;
    if (spec.kind == TestFunction::schlather) {
        out.c = ratio(sums, lanes, est.config().min_weight, out.valid,
                      [&](std::size_t k, std::size_t p) { return lanes_m(i, p) * (*mu_r)(k, p); });
    } else {
        out.c = ratio(sums, lanes, est.config().min_weight, out.valid, [](std::size_t, std::size_t) { return 0.0; });
    }
    return out;
}

Matrix<double> schlather_mu_r(const MarkCorrelationEstimator& est, const Matrix<double>& lanes_m) {
    const auto g = est.global_sums(lanes_m, TestFunction::schlather, {});
    return pair_mark_mean(g, lanes_m.cols());
}

SummaryCurve curve_from_lane(const EstimationConfig& cfg, const Matrix<double>& values,
                             const std::vector<std::uint8_t>& valid, std::size_t lane) {
    SummaryCurve c;
    c.r = cfg.r_grid;
    c.values = column(values, lane);
    c.valid = valid;
    c.meta.kernel = cfg.kernel;
    c.meta.bandwidth = cfg.bandwidth;
    return c;
}

LaneCurves local_kappa_lanes_impl(const MarkCorrelationEstimator& est, std::span<const double> marks,
                                  std::span<const std::vector<std::size_t>> perms, const Matrix<double>& lanes_m,
                                  std::size_t i, TestFunctionSpec spec, LooCache& cache, const Matrix<double>* mu_r) {
    LaneCurves out;
    out.r = est.config().r_grid;
    auto lc = local_c_lanes(est, lanes_m, perms, i, spec, cache, mu_r, out.normalizers, out.rule);
    for (std::size_t p = 0; p < perms.size(); ++p)
        if (out.normalizers[p] == 0.0 || !std::isfinite(out.normalizers[p]))
            zero_normalizer(spec.kind, point_label(i) + (p == 0 ? std::string() : " (permutation lane)"));
    for (std::size_t k = 0; k < lc.c.rows(); ++k) {
        if (!lc.valid[k]) continue;
        for (std::size_t p = 0; p < lc.c.cols(); ++p) lc.c(k, p) /= out.normalizers[p];
    }
    (void)marks;
    out.values = std::move(lc.c);
    out.valid = std::move(lc.valid);
    return out;
}

} // namespace

SummaryCurve MarkCorrelationEstimator::local_c(std::span<const double> marks, std::size_t i,
                                               TestFunctionSpec spec) const {
    if (marks.size() != size()) throw InputError("mark count does not match the distance matrix");
    if (i >= size()) throw InputError("point index " + std::to_string(i) + " out of range");
    check_marks_for(spec, marks);
    const auto perms = identity_perm(size());
    const auto m = lane_matrix(marks, perms);
    LooCache cache{marks, spec, {}};
    Matrix<double> mu_r;
    if (spec.kind == TestFunction::schlather) mu_r = schlather_mu_r(*this, m);
    std::vector<double> normalizers;
    NormalizerRule rule{};
    auto lc = local_c_lanes(*this, m, perms, i, spec, cache, &mu_r, normalizers, rule);
    SummaryCurve c = curve_from_lane(cfg_, lc.c, lc.valid, 0);
    c.meta.kind = spec.kind;
    c.meta.point = i;
    c.meta.normalizer = normalizers[0];
    c.meta.rule = rule;
    return c;
}

SummaryCurve MarkCorrelationEstimator::local_kappa(std::span<const double> marks, std::size_t i,
                                                   TestFunctionSpec spec) const {
    const auto perms = identity_perm(size());
    const auto lc = local_kappa_lanes(marks, perms, i, spec);
    SummaryCurve c = curve_from_lane(cfg_, lc.values, lc.valid, 0);
    c.meta.kind = spec.kind;
    c.meta.point = i;
    c.meta.normalized = true;
    c.meta.normalizer = lc.normalizers[0];
    c.meta.rule = lc.rule;
    return c;
}

std::vector<SummaryCurve> MarkCorrelationEstimator::local_kappa_all(std::span<const double> marks,
                                                                    TestFunctionSpec spec) const {
    if (marks.size() != size()) throw InputError("mark count does not match the distance matrix");
    const auto perms = identity_perm(size());
    std::vector<SummaryCurve> out(size());
    visit_local_kappa_lanes(marks, perms, spec, [&](std::size_t i, const LaneCurves& lc) {
        SummaryCurve c = curve_from_lane(cfg_, lc.values, lc.valid, 0);
        c.meta.kind = spec.kind;
        c.meta.point = i;
        c.meta.normalized = true;
        c.meta.normalizer = lc.normalizers[0];
        c.meta.rule = lc.rule;
        out[i] = std::move(c);
    });
    return out;
}

LaneCurves MarkCorrelationEstimator::local_kappa_lanes(std::span<const double> marks,
                                                       std::span<const std::vector<std::size_t>> perms,
                                                       std::size_t i, TestFunctionSpec spec) const {
    if (marks.size() != size()) throw InputError("mark count does not match the distance matrix");
    if (i >= size()) throw InputError("point index " + std::to_string(i) + " out of range");
    if (perms.empty()) throw InputError("at least one lane is required");
    check_marks_for(spec, marks);
    const auto m = lane_matrix(marks, perms);
    Matrix<double> mu_r;
    if (spec.kind == TestFunction::schlather) mu_r = schlather_mu_r(*this, m);
    LooCache cache{marks, spec, {}};
    return local_kappa_lanes_impl(*this, marks, perms, m, i, spec, cache, &mu_r);
}

void MarkCorrelationEstimator::visit_local_kappa_lanes(std::span<const double> marks,
                                                       std::span<const std::vector<std::size_t>> perms,
                                                       TestFunctionSpec spec, const LaneVisitor& visit) const {
    if (marks.size() != size()) throw InputError("mark count does not match the distance matrix");
    if (perms.empty()) throw InputError("at least one lane is required");
    check_marks_for(spec, marks);
    const auto m = lane_matrix(marks, perms);
    Matrix<double> mu_r;
    if (spec.kind == TestFunction::schlather) mu_r = schlather_mu_r(*this, m);
    const auto n = static_cast<std::ptrdiff_t>(size());
    std::exception_ptr failure;
#pragma omp parallel
    {
        LooCache cache{marks, spec, {}};
#pragma omp for schedule(dynamic, 4)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            try {
                if (cache.by_index.size() > 4 * perms.size()) cache.by_index.clear();
                const auto lc = local_kappa_lanes_impl(*this, marks, perms, m, static_cast<std::size_t>(i), spec,
                                                       cache, &mu_r);
                visit(static_cast<std::size_t>(i), lc);
            } catch (...) {
#pragma omp critical(lima_visit_failure)
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
}

SummaryCurve MarkCorrelationEstimator::global_c(std::span<const double> marks, TestFunctionSpec spec) const {
    if (marks.size() != size()) throw InputError("mark count does not match the distance matrix");
    if (size() < 2) throw InputError("global estimation needs at least 2 points");
    check_marks_for(spec, marks);
    const auto perms = identity_perm(size());
    const auto m = lane_matrix(marks, perms);
    const auto s = mark_summary(marks);
    const std::vector<double> mu{s.mean};
    const auto sums = global_sums(m, spec.kind, mu);
    std::vector<std::uint8_t> valid;
    Matrix<double> c;
    if (spec.kind == TestFunction::schlather) {
        const auto mu_r = pair_mark_mean(sums, 1);
        c = ratio(sums, 1, cfg_.min_weight, valid,
                  [&](std::size_t k, std::size_t p) { return mu_r(k, p) * mu_r(k, p); });
    } else {
        c = ratio(sums, 1, cfg_.min_weight, valid, [](std::size_t, std::size_t) { return 0.0; });
    }
    SummaryCurve out = curve_from_lane(cfg_, c, valid, 0);
    out.meta.kind = spec.kind;
    const auto nz = global_normalizer(spec, marks);
    out.meta.normalizer = nz.value;
    out.meta.rule = nz.rule;
    return out;
}

SummaryCurve MarkCorrelationEstimator::global_kappa(std::span<const double> marks, TestFunctionSpec spec) const {
    const auto perms = identity_perm(size());
    const auto lc = global_kappa_lanes(marks, perms, spec);
    SummaryCurve c = curve_from_lane(cfg_, lc.values, lc.valid, 0);
    c.meta.kind = spec.kind;
    c.meta.normalized = true;
    c.meta.normalizer = lc.normalizers[0];
    c.meta.rule = lc.rule;
    return c;
}

LaneCurves MarkCorrelationEstimator::global_kappa_lanes(std::span<const double> marks,
                                                        std::span<const std::vector<std::size_t>> perms,
                                                        TestFunctionSpec spec) const {
    if (marks.size() != size()) throw InputError("mark count does not match the distance matrix");
    if (size() < 2) throw InputError("global estimation needs at least 2 points");
    if (perms.empty()) throw InputError("at least one lane is required");
    check_marks_for(spec, marks);
    const std::size_t lanes = perms.size();
    const auto m = lane_matrix(marks, perms);
    // Permuting marks leaves the mark summary and the global normalizer unchanged.
    const auto s = mark_summary(marks);
    const auto nz = global_normalizer(spec, marks);
    if (nz.value == 0.0 || !std::isfinite(nz.value)) zero_normalizer(spec.kind, "the global function");
    const std::vector<double> mu(lanes, s.mean);
    const auto sums = global_sums(m, spec.kind, mu);

    LaneCurves out;
    out.r = cfg_.r_grid;
    out.normalizers.assign(lanes, nz.value);
    out.rule = nz.rule;
    if (spec.kind == TestFunction::schlather) {
        const auto mu_r = pair_mark_mean(sums, lanes);
        out.values = ratio(sums, lanes, cfg_.min_weight, out.valid,
                           [&](std::size_t k, std::size_t p) { return mu_r(k, p) * mu_r(k, p); });
    } else {
        out.values = ratio(sums, lanes, cfg_.min_weight, out.valid, [](std::size_t, std::size_t) { return 0.0; });
    }
    for (std::size_t k = 0; k < out.values.rows(); ++k) {
        if (!out.valid[k]) continue;
        for (std::size_t p = 0; p < lanes; ++p) out.values(k, p) /= nz.value;
    }
    return out;
}

// --- function-valued marks ----------------------------------------------------

namespace {

void check_functional(const MarkCorrelationEstimator& est, const FunctionalMarks& fm, TestFunctionSpec spec) {
    if (fm.curves.rows() != est.size()) throw InputError("curve count does not match the distance matrix");
    if (fm.t_grid.size() < 2)
        throw InputError("functional marks need at least 2 t samples; use the real-valued path for a single sample");
    if (fm.curves.cols() != fm.t_grid.size()) throw InputError("curve width does not match the t grid");
    check_marks_for(spec, fm.curves);
}

PointwiseSurface surface_shell(const EstimationConfig& cfg, const FunctionalMarks& fm, TestFunctionSpec spec,
                               std::optional<std::size_t> point, bool normalized) {
    PointwiseSurface s;
    s.r = cfg.r_grid;
    s.t = fm.t_grid;
    s.meta.kind = spec.kind;
    s.meta.point = point;
    s.meta.functional = true;
    s.meta.normalized = normalized;
    s.meta.normalizer = kNaN;
    s.meta.kernel = cfg.kernel;
    s.meta.bandwidth = cfg.bandwidth;
    return s;
}

// Column t of the curves with point i left out: mean, variance, normalizer.
Normalizer column_local_normalizer(const FunctionalMarks& fm, std::size_t i, std::size_t t, TestFunctionSpec spec,
                                   double& mu_out) {
    const auto col = column(fm.curves, t);
    std::vector<double> others;
    const MarkContext ctx = make_context(col, i, others);
    mu_out = ctx.mu_j;
    return local_normalizer(spec, col[i], ctx);
}

void apply_column_normalizers(PointwiseSurface& s, std::vector<std::uint8_t>& keep) {
    keep.assign(s.t.size(), 1);
    for (std::size_t t = 0; t < s.t.size(); ++t) {
        const double nz = s.normalizers[t];
        if (nz == 0.0 || !std::isfinite(nz)) {
            keep[t] = 0;
            for (std::size_t k = 0; k < s.r.size(); ++k) {
                s.values(k, t) = kNaN;
                s.valid(k, t) = 0;
            }
            s.meta.warnings.push_back("normalizer is zero at t=" + std::to_string(s.t[t]) +
                                      "; sample excluded from the t integral");
            continue;
        }
        for (std::size_t k = 0; k < s.r.size(); ++k)
            if (s.valid(k, t)) s.values(k, t) /= nz;
    }
}

} // namespace

PointwiseSurface MarkCorrelationEstimator::pointwise_local_c(const FunctionalMarks& fm, std::size_t i,
                                                             TestFunctionSpec spec) const {
    check_functional(*this, fm, spec);
    if (i >= size()) throw InputError("point index " + std::to_string(i) + " out of range");
    const std::size_t nt = fm.t_grid.size();
    std::vector<double> mu(nt);
    std::vector<double> normalizers(nt);
    for (std::size_t t = 0; t < nt; ++t) normalizers[t] = column_local_normalizer(fm, i, t, spec, mu[t]).value;
    const auto sums = local_sums(fm.curves, i, spec.kind, mu);
    std::vector<std::uint8_t> row_valid;
    Matrix<double> c;
    if (spec.kind == TestFunction::schlather) {
        const auto g = global_sums(fm.curves, TestFunction::schlather, {});
        const auto mu_r = pair_mark_mean(g, nt);
        c = ratio(sums, nt, cfg_.min_weight, row_valid,
                  [&](std::size_t k, std::size_t t) { return fm.curves(i, t) * mu_r(k, t); });
    } else {
        c = ratio(sums, nt, cfg_.min_weight, row_valid, [](std::size_t, std::size_t) { return 0.0; });
    }
    PointwiseSurface s = surface_shell(cfg_, fm, spec, i, false);
    s.values = std::move(c);
    s.valid = Matrix<std::uint8_t>(s.r.size(), nt, 0);
    for (std::size_t k = 0; k < s.r.size(); ++k)
        for (std::size_t t = 0; t < nt; ++t) s.valid(k, t) = row_valid[k];
    s.normalizers = std::move(normalizers);
    return s;
}

PointwiseSurface MarkCorrelationEstimator::pointwise_local_kappa(const FunctionalMarks& fm, std::size_t i,
                                                                 TestFunctionSpec spec) const {
    PointwiseSurface s = pointwise_local_c(fm, i, spec);
    s.meta.normalized = true;
    std::vector<std::uint8_t> keep;
    apply_column_normalizers(s, keep);
    return s;
}

SummaryCurve MarkCorrelationEstimator::local_c_functional(const FunctionalMarks& fm, std::size_t i,
                                                          TestFunctionSpec spec) const {
    PointwiseSurface s = pointwise_local_c(fm, i, spec);
    s.normalizers.clear();
    return integrate_over_t(s);
}

SummaryCurve MarkCorrelationEstimator::local_kappa_functional(const FunctionalMarks& fm, std::size_t i,
                                                              TestFunctionSpec spec) const {
    PointwiseSurface s = pointwise_local_c(fm, i, spec);
    s.meta.normalized = true;
    std::vector<std::uint8_t> keep;
    apply_column_normalizers(s, keep);
    SummaryCurve c = integrate_rows(s, keep);
    c.meta.rule = NormalizerRule::expectation;
    if (spec.kind == TestFunction::differentiation) c.meta.rule = NormalizerRule::empirical;
    if (spec.kind == TestFunction::isham || spec.kind == TestFunction::shimatani ||
        spec.kind == TestFunction::schlather)
        c.meta.rule = NormalizerRule::sigma2_fallback;
    return c;
}

PointwiseSurface MarkCorrelationEstimator::pointwise_global_c(const FunctionalMarks& fm,
                                                              TestFunctionSpec spec) const {
    check_functional(*this, fm, spec);
    if (size() < 2) throw InputError("global estimation needs at least 2 points");
    const std::size_t nt = fm.t_grid.size();
    std::vector<double> mu(nt);
    std::vector<double> normalizers(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const auto col = column(fm.curves, t);
        mu[t] = mark_summary(col).mean;
        normalizers[t] = global_normalizer(spec, col).value;
    }
    const auto sums = global_sums(fm.curves, spec.kind, mu);
    std::vector<std::uint8_t> row_valid;
    Matrix<double> c;
    if (spec.kind == TestFunction::schlather) {
        const auto mu_r = pair_mark_mean(sums, nt);
        c = ratio(sums, nt, cfg_.min_weight, row_valid,
                  [&](std::size_t k, std::size_t t) { return mu_r(k, t) * mu_r(k, t); });
    } else {
        c = ratio(sums, nt, cfg_.min_weight, row_valid, [](std::size_t, std::size_t) { return 0.0; });
    }
    PointwiseSurface s = surface_shell(cfg_, fm, spec, std::nullopt, false);
    s.values = std::move(c);
    s.valid = Matrix<std::uint8_t>(s.r.size(), nt, 0);
    for (std::size_t k = 0; k < s.r.size(); ++k)
        for (std::size_t t = 0; t < nt; ++t) s.valid(k, t) = row_valid[k];
    s.normalizers = std::move(normalizers);
    return s;
}

PointwiseSurface MarkCorrelationEstimator::pointwise_global_kappa(const FunctionalMarks& fm,
                                                                  TestFunctionSpec spec) const {
    PointwiseSurface s = pointwise_global_c(fm, spec);
    s.meta.normalized = true;
    std::vector<std::uint8_t> keep;
    apply_column_normalizers(s, keep);
    return s;
}

SummaryCurve MarkCorrelationEstimator::global_kappa_functional(const FunctionalMarks& fm,
                                                               TestFunctionSpec spec) const {
    PointwiseSurface s = pointwise_global_c(fm, spec);
    s.meta.normalized = true;
    std::vector<std::uint8_t> keep;
    apply_column_normalizers(s, keep);
    return integrate_rows(s, keep);
}

SummaryCurve integrate_over_t(const PointwiseSurface& surface) {
    if (surface.values.rows() != surface.r.size() || surface.values.cols() != surface.t.size())
        throw InputError("surface shape does not match its grids");
    return integrate_rows(surface, std::vector<std::uint8_t>(surface.t.size(), 1));
}

// --- pattern-level wrappers ---------------------------------------------------

SummaryCurve local_c(const MarkedPointPattern& pattern, std::size_t i, TestFunctionSpec spec,
                     const EstimationConfig& cfg) {
    const MarkCorrelationEstimator est(pairwise_distances(pattern), cfg);
    return est.local_c(pattern.real_marks().values, i, spec);
}

SummaryCurve local_kappa(const MarkedPointPattern& pattern, std::size_t i, TestFunctionSpec spec,
                         const EstimationConfig& cfg) {
    const MarkCorrelationEstimator est(pairwise_distances(pattern), cfg);
    return est.local_kappa(pattern.real_marks().values, i, spec);
}

SummaryCurve global_kappa(const MarkedPointPattern& pattern, TestFunctionSpec spec, const EstimationConfig& cfg) {
    const MarkCorrelationEstimator est(pairwise_distances(pattern), cfg);
    return est.global_kappa(pattern.real_marks().values, spec);
}

SummaryCurve local_kappa_network(const MarkedPointPattern& pattern, std::size_t i, TestFunctionSpec spec,
                                 const EstimationConfig& cfg) {
    if (pattern.is_planar()) throw InputError("local_kappa_network needs a pattern on a linear network");
    return local_kappa(pattern, i, spec, cfg);
}

PointwiseSurface pointwise_local_c_functional(const MarkedPointPattern& pattern, std::size_t i,
                                              TestFunctionSpec spec, const EstimationConfig& cfg) {
    const MarkCorrelationEstimator est(pairwise_distances(pattern), cfg);
    return est.pointwise_local_c(pattern.functional_marks(), i, spec);
}

SummaryCurve local_kappa_functional(const MarkedPointPattern& pattern, std::size_t i, TestFunctionSpec spec,
                                    const EstimationConfig& cfg) {
    const MarkCorrelationEstimator est(pairwise_distances(pattern), cfg);
    return est.local_kappa_functional(pattern.functional_marks(), i, spec);
}

} // namespace lima
