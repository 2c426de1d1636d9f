#include "lima/envelope.hpp"

#include "lima/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <string>

namespace lima {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t stream_key(std::uint64_t replicate, std::uint64_t tag) { return (replicate << 32) ^ tag; }

FunctionalMarks permuted_rows(const FunctionalMarks& fm, std::span<const std::size_t> perm) {
    FunctionalMarks out{fm.t_grid, Matrix<double>(fm.curves.rows(), fm.curves.cols())};
    for (std::size_t j = 0; j < perm.size(); ++j) {
        const auto src = fm.curves.row(perm[j]);
        std::copy(src.begin(), src.end(), out.curves.row(j).begin());
    }
    return out;
}

struct Ranked {
    ErlMeasure measure;
    Matrix<std::uint32_t> ranks;  // curves x cells
};

bool lex_less(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

Ranked rank_curves(const Matrix<double>& curves, std::span<const std::uint8_t> valid) {
    if (valid.size() != curves.rows()) throw InputError("validity mask does not match the curves");
    if (curves.cols() < 2) throw InputError("ranking needs at least 2 curves");
    Ranked out;
    for (std::size_t c = 0; c < valid.size(); ++c)
        if (valid[c]) out.measure.cells.push_back(c);
    if (out.measure.cells.size() < 2)
        throw InputError("fewer than 2 jointly valid r values; widen the r range or the bandwidth");
    out.ranks = pointwise_ranks(curves, out.measure.cells);

    const std::size_t n = curves.cols();
    auto& m = out.measure;
    m.sorted_ranks.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto row = out.ranks.row(k);
        m.sorted_ranks[k].assign(row.begin(), row.end());
        std::sort(m.sorted_ranks[k].begin(), m.sorted_ranks[k].end());
    }
    m.order.resize(n);
    std::iota(m.order.begin(), m.order.end(), std::size_t{0});
    std::stable_sort(m.order.begin(), m.order.end(),
                     [&](std::size_t a, std::size_t b) { return lex_less(m.sorted_ranks[a], m.sorted_ranks[b]); });
    m.at_least_as_extreme.assign(n, 0);
    for (std::size_t a = 0; a < n;) {
        std::size_t b = a + 1;
        while (b < n && m.sorted_ranks[m.order[b]] == m.sorted_ranks[m.order[a]]) ++b;
        for (std::size_t q = a; q < b; ++q) m.at_least_as_extreme[m.order[q]] = b;
        a = b;
    }
    return out;
}

void collect_runs(std::span<const double> r, std::span<const std::int8_t> flag, std::vector<SignificantRange>& out) {
    // flag: 0 none, -1 lower, +1 upper
    std::size_t k = 0;
    while (k < flag.size()) {
        if (flag[k] == 0) {
            ++k;
            continue;
        }
        std::size_t e = k;
        while (e + 1 < flag.size() && flag[e + 1] == flag[k]) ++e;
        out.push_back({r[k], r[e], flag[k] < 0 ? Side::lower : Side::upper});
        k = e + 1;
    }
}

void check_options(const TestOptions& opts) {
    if (opts.permutations < 1) throw InputError("at least one permutation is required");
    const std::size_t need = required_permutations(opts.alpha);
    if (opts.permutations < need)
        throw InputError("alpha=" + std::to_string(opts.alpha) + " needs at least " + std::to_string(need) +
                         " permutations, got " + std::to_string(opts.permutations));
}

PointResult point_result(std::size_t i, EnvelopeResult env, bool keep) {
    PointResult pr;
    pr.point = i;
    pr.p_value = env.p_value;
    pr.significant = env.p_value <= env.alpha;
    pr.ranges = significant_ranges(env);
    if (keep) pr.envelope = std::move(env);
    return pr;
}

template <class Body>
void parallel_points(std::size_t n, Body&& body) {
    std::exception_ptr failure;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(lima_envelope_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

// Stacks one curve per lane into a cells x lanes matrix with the joint mask.
void stack(const SummaryCurve& c, std::size_t lane, Matrix<double>& values, std::vector<std::uint8_t>& valid) {
    for (std::size_t k = 0; k < c.values.size(); ++k) {
        values(k, lane) = c.values[k];
        valid[k] = static_cast<std::uint8_t>(valid[k] && c.valid[k]);
    }
}

} // namespace

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(replicate), hi(replicate), lo(stream), hi(stream)};
    return std::mt19937_64(seq);
}

std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

MarkedPointPattern permute_marks(const MarkedPointPattern& pattern, std::mt19937_64& rng) {
    if (pattern.size() < 2) throw InputError("permuting marks needs at least 2 points");
    const auto perm = random_permutation(pattern.size(), rng);
    if (pattern.has_functional_marks()) return pattern.with_marks(permuted_rows(pattern.functional_marks(), perm));
    const auto& values = pattern.real_marks().values;
    RealMarks out;
    out.values.resize(values.size());
    for (std::size_t j = 0; j < perm.size(); ++j) out.values[j] = values[perm[j]];
    return pattern.with_marks(std::move(out));
}

PermutationSet make_permutations(std::size_t n, std::size_t s, std::uint64_t seed, std::uint64_t stream) {
    PermutationSet set;
    set.seed = seed;
    set.perms.reserve(s + 1);
    std::vector<std::size_t> id(n);
    std::iota(id.begin(), id.end(), std::size_t{0});
    set.perms.push_back(std::move(id));
    for (std::size_t p = 1; p <= s; ++p) {
        auto rng = make_rng(seed, stream, p);
        set.perms.push_back(random_permutation(n, rng));
    }
    return set;
}

Matrix<std::uint32_t> pointwise_ranks(const Matrix<double>& curves, std::span<const std::size_t> cells) {
    const std::size_t n = curves.cols();
    Matrix<std::uint32_t> ranks(n, cells.size(), 0);
    std::vector<std::size_t> idx(n);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto row = curves.row(cells[c]);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
        for (std::size_t a = 0; a < n;) {
            std::size_t b = a + 1;
            while (b < n && row[idx[b]] == row[idx[a]]) ++b;
            const auto rank = static_cast<std::uint32_t>(std::min(1 + a, 1 + (n - b)));
            for (std::size_t q = a; q < b; ++q) ranks(idx[q], c) = rank;
            a = b;
        }
    }
    return ranks;
}

ErlMeasure erl_order(const Matrix<double>& curves, std::span<const std::uint8_t> valid) {
    return rank_curves(curves, valid).measure;
}

ErlMeasure erl_order(std::span<const SummaryCurve> curves) {
    if (curves.size() < 2) throw InputError("ranking needs at least 2 curves");
    const std::size_t nr = curves.front().r.size();
    Matrix<double> values(nr, curves.size(), kNaN);
    std::vector<std::uint8_t> valid(nr, 1);
    for (std::size_t k = 0; k < curves.size(); ++k) {
        if (curves[k].r != curves.front().r) throw InputError("curves do not share an r grid");
        stack(curves[k], k, values, valid);
    }
    return erl_order(values, valid);
}

const char* name(Side side) noexcept { return side == Side::lower ? "lower" : "upper"; }

std::size_t required_permutations(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    return static_cast<std::size_t>(std::ceil(1.0 / alpha - 1.0 - 1e-9));
}

EnvelopeResult envelope_test(const Matrix<double>& curves, std::span<const std::uint8_t> valid,
                             std::span<const double> r, double alpha) {
    const std::size_t need = required_permutations(alpha);
    if (curves.cols() < 2) throw InputError("an envelope test needs at least one permuted curve");
    const std::size_t s = curves.cols() - 1;
    if (s < need)
        throw InputError("alpha=" + std::to_string(alpha) + " needs at least " + std::to_string(need) +
                         " permutations, got " + std::to_string(s));
    if (r.size() != curves.rows()) throw InputError("r grid does not match the curves");

    Ranked ranked = rank_curves(curves, valid);
    const double total = static_cast<double>(s + 1);
    auto p_of = [&](std::size_t k) { return static_cast<double>(ranked.measure.at_least_as_extreme[k]) / total; };

    EnvelopeResult env;
    env.r.assign(r.begin(), r.end());
    env.valid.assign(valid.begin(), valid.end());
    env.alpha = alpha;
    env.permutations = s;
    env.p_value = p_of(0);
    const std::size_t nr = curves.rows();
    env.observed.resize(nr);
    for (std::size_t k = 0; k < nr; ++k) env.observed[k] = valid[k] ? curves(k, 0) : kNaN;
    env.lower.assign(nr, kNaN);
    env.upper.assign(nr, kNaN);
    env.central.assign(nr, kNaN);
    env.observed_rank.assign(nr, 0);
    env.observed_low.assign(nr, 0);

    std::vector<std::size_t> accepted;
    for (std::size_t k = 0; k <= s; ++k)
        if (p_of(k) > alpha) accepted.push_back(k);

    const auto& cells = ranked.measure.cells;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const std::size_t cell = cells[c];
        const auto row = curves.row(cell);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t k : accepted) {
            lo = std::min(lo, row[k]);
            hi = std::max(hi, row[k]);
        }
        env.lower[cell] = lo;
        env.upper[cell] = hi;
        double sum = 0.0;
        std::size_t below = 0;
        for (std::size_t k = 1; k <= s; ++k) {
            sum += row[k];
            if (row[k] < row[0]) ++below;
        }
        env.central[cell] = sum / static_cast<double>(s);
        env.observed_rank[cell] = ranked.ranks(0, c);
        env.observed_low[cell] = static_cast<std::uint8_t>(below + 1 == ranked.ranks(0, c));
    }
    env.measure = std::move(ranked.measure);
    return env;
}

EnvelopeResult envelope_test(std::span<const SummaryCurve> curves, double alpha) {
    if (curves.empty()) throw InputError("no curves to test");
    const std::size_t nr = curves.front().r.size();
    Matrix<double> values(nr, curves.size(), kNaN);
    std::vector<std::uint8_t> valid(nr, 1);
    for (std::size_t k = 0; k < curves.size(); ++k) {
        if (curves[k].r != curves.front().r) throw InputError("curves do not share an r grid");
        stack(curves[k], k, values, valid);
    }
    return envelope_test(values, valid, curves.front().r, alpha);
}

EnvelopeResult envelope_test(const LaneCurves& lanes, double alpha) {
    return envelope_test(lanes.values, lanes.valid, lanes.r, alpha);
}

std::vector<SignificantRange> significant_ranges(std::span<const double> r, std::span<const double> observed,
                                                 std::span<const double> lower, std::span<const double> upper,
                                                 std::span<const std::uint8_t> valid) {
    const std::size_t nr = r.size();
    if (observed.size() != nr || lower.size() != nr || upper.size() != nr || valid.size() != nr)
        throw InputError("significant_ranges: inputs do not share the r grid");
    std::vector<std::int8_t> flag(nr, 0);
    for (std::size_t k = 0; k < nr; ++k) {
        if (!valid[k]) continue;
        if (observed[k] < lower[k]) flag[k] = -1;
        else if (observed[k] > upper[k]) flag[k] = 1;
    }
    std::vector<SignificantRange> out;
    collect_runs(r, flag, out);
    return out;
}

std::vector<SignificantRange> significant_ranges(const EnvelopeResult& env) {
    auto out = significant_ranges(env.r, env.observed, env.lower, env.upper, env.valid);
    if (!out.empty() || env.p_value > env.alpha) return out;
    // Significant through ties only: report where the observed curve is most extreme.
    std::uint32_t rho = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t k = 0; k < env.r.size(); ++k)
        if (env.valid[k]) rho = std::min(rho, env.observed_rank[k]);
    std::vector<std::int8_t> flag(env.r.size(), 0);
    for (std::size_t k = 0; k < env.r.size(); ++k)
        if (env.valid[k] && env.observed_rank[k] == rho) flag[k] = env.observed_low[k] ? -1 : 1;
    collect_runs(env.r, flag, out);
    return out;
}

std::size_t LocalTestReport::significant_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const PointResult& p) { return p.significant; }));
}

LocalTestReport local_lima_test(const MarkCorrelationEstimator& est, std::span<const double> marks,
                                TestFunctionSpec spec, const TestOptions& opts) {
    check_options(opts);
    const std::size_t n = marks.size();
    LocalTestReport report;
    report.alpha = opts.alpha;
    report.permutations = opts.permutations;
    report.seed = opts.seed;
    report.shared_permutations = opts.shared_permutations;
    report.points.resize(n);

    if (opts.shared_permutations) {
        const auto set = make_permutations(n, opts.permutations, opts.seed, stream_key(opts.replicate, 0));
        est.visit_local_kappa_lanes(marks, set.perms, spec, [&](std::size_t i, const LaneCurves& lc) {
            report.points[i] = point_result(i, envelope_test(lc, opts.alpha), opts.keep_envelopes);
        });
    } else {
        parallel_points(n, [&](std::size_t i) {
            const auto set = make_permutations(n, opts.permutations, opts.seed, stream_key(opts.replicate, i + 1));
            const auto lc = est.local_kappa_lanes(marks, set.perms, i, spec);
            report.points[i] = point_result(i, envelope_test(lc, opts.alpha), opts.keep_envelopes);
        });
    }
    return report;
}

LocalTestReport local_lima_test(const MarkedPointPattern& pattern, TestFunctionSpec spec,
                                const EstimationConfig& cfg, const TestOptions& opts) {
    const MarkCorrelationEstimator est(pairwise_distances(pattern), cfg);
    if (!pattern.has_functional_marks()) return local_lima_test(est, pattern.real_marks().values, spec, opts);

    check_options(opts);
    const auto& fm = pattern.functional_marks();
    const std::size_t n = pattern.size();
    LocalTestReport report;
    report.alpha = opts.alpha;
    report.permutations = opts.permutations;
    report.seed = opts.seed;
    report.shared_permutations = opts.shared_permutations;
    report.points.resize(n);
    std::optional<PermutationSet> shared;
    if (opts.shared_permutations)
        shared = make_permutations(n, opts.permutations, opts.seed, stream_key(opts.replicate, 0));

    parallel_points(n, [&](std::size_t i) {
        const PermutationSet set = shared ? *shared
                                          : make_permutations(n, opts.permutations, opts.seed,
                                                              stream_key(opts.replicate, i + 1));
        const std::size_t nr = cfg.r_grid.size();
        Matrix<double> values(nr, set.perms.size(), kNaN);
        std::vector<std::uint8_t> valid(nr, 1);
        for (std::size_t p = 0; p < set.perms.size(); ++p) {
            const auto c = est.local_kappa_functional(permuted_rows(fm, set.perms[p]), i, spec);
            stack(c, p, values, valid);
        }
        report.points[i] = point_result(i, envelope_test(values, valid, cfg.r_grid, opts.alpha), opts.keep_envelopes);
    });
    return report;
}

EnvelopeResult global_envelope_test(const MarkCorrelationEstimator& est, std::span<const double> marks,
                                    TestFunctionSpec spec, const TestOptions& opts) {
    check_options(opts);
    const auto set = make_permutations(marks.size(), opts.permutations, opts.seed, stream_key(opts.replicate, 0));
    return envelope_test(est.global_kappa_lanes(marks, set.perms, spec), opts.alpha);
}

EnvelopeResult global_envelope_test(const MarkedPointPattern& pattern, TestFunctionSpec spec,
                                    const EstimationConfig& cfg, const TestOptions& opts) {
    const MarkCorrelationEstimator est(pairwise_distances(pattern), cfg);
    if (!pattern.has_functional_marks()) return global_envelope_test(est, pattern.real_marks().values, spec, opts);

    check_options(opts);
    const auto& fm = pattern.functional_marks();
    const auto set = make_permutations(pattern.size(), opts.permutations, opts.seed, stream_key(opts.replicate, 0));
    const std::size_t nr = cfg.r_grid.size();
    Matrix<double> values(nr, set.perms.size(), kNaN);
    std::vector<std::uint8_t> valid(nr, 1);
    std::vector<SummaryCurve> curves(set.perms.size());
    parallel_points(set.perms.size(), [&](std::size_t p) {
        curves[p] = est.global_kappa_functional(permuted_rows(fm, set.perms[p]), spec);
    });
    for (std::size_t p = 0; p < curves.size(); ++p) stack(curves[p], p, values, valid);
    return envelope_test(values, valid, cfg.r_grid, opts.alpha);
}

} // namespace lima
