#pragma once

#include "lima/estimate.hpp"
#include "lima/matrix.hpp"
#include "lima/pattern.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace lima {

/// Random engine for stream `stream` of replicate `replicate` under `seed`.
[[nodiscard]] std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream);

/// Uniformly random permutation of 0..n-1.
[[nodiscard]] std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng);

/// Random relabelling: locations kept, mark rows (whole curves for functional
/// marks) permuted uniformly.
[[nodiscard]] MarkedPointPattern permute_marks(const MarkedPointPattern& pattern, std::mt19937_64& rng);

/// perms[0] is the identity (the observed labelling), perms[1..s] random.
struct PermutationSet {
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> perms;

    [[nodiscard]] std::size_t count() const noexcept { return perms.empty() ? 0 : perms.size() - 1; }
};

/// s permutations of n labels drawn from stream `stream` of `seed`; each
/// permutation has its own substream so the set is independent of scheduling.
[[nodiscard]] PermutationSet make_permutations(std::size_t n, std::size_t s, std::uint64_t seed,
                                               std::uint64_t stream = 0);

/// Extreme-rank-length ordering of the columns of a cells x curves matrix,
/// restricted to the cells flagged in `valid`.
struct ErlMeasure {
    std::vector<std::vector<std::uint32_t>> sorted_ranks;  // per curve, ascending
    std::vector<std::size_t> order;                        // most extreme first, stable
    std::vector<std::size_t> at_least_as_extreme;          // per curve, #{l : vec_l <=lex vec_k}
    std::vector<std::size_t> cells;                        // cells used for ranking
};

/// Pointwise two-sided ranks min(1 + #below, 1 + #above); rows follow the
/// curves (columns of `curves`), columns follow `cells`.
[[nodiscard]] Matrix<std::uint32_t> pointwise_ranks(const Matrix<double>& curves,
                                                    std::span<const std::size_t> cells);

[[nodiscard]] ErlMeasure erl_order(const Matrix<double>& curves, std::span<const std::uint8_t> valid);
/// Curves given separately; the joint mask is the AND of their masks.
[[nodiscard]] ErlMeasure erl_order(std::span<const SummaryCurve> curves);

enum class Side { lower, upper };

[[nodiscard]] const char* name(Side side) noexcept;

struct SignificantRange {
    double r_lo = 0.0;
    double r_hi = 0.0;
    Side side = Side::lower;
};

struct EnvelopeResult {
    std::vector<double> r;
    std::vector<double> observed;
    std::vector<double> lower;   // NaN outside the joint mask
    std::vector<double> upper;
    std::vector<double> central; // pointwise mean of the s permuted curves
    std::vector<std::uint8_t> valid;
    std::vector<std::uint32_t> observed_rank;  // 0 outside the joint mask
    std::vector<std::uint8_t> observed_low;    // 1 where that rank is attained from below
    double p_value = 1.0;
    double alpha = 0.05;
    std::size_t permutations = 0;
    ErlMeasure measure;
};

/// Smallest s resolving level alpha, ceil(1/alpha - 1).
[[nodiscard]] std::size_t required_permutations(double alpha);

/// Column 0 is the observed curve. p = (1 + #{k >= 1 : curve k at least as
/// extreme as the observed}) / (s + 1); the envelope spans the curves whose
/// own p exceeds alpha.
[[nodiscard]] EnvelopeResult envelope_test(const Matrix<double>& curves, std::span<const std::uint8_t> valid,
                                           std::span<const double> r, double alpha);
[[nodiscard]] EnvelopeResult envelope_test(std::span<const SummaryCurve> curves, double alpha);
[[nodiscard]] EnvelopeResult envelope_test(const LaneCurves& lanes, double alpha);

/// Maximal runs of valid r with the observed curve strictly below the lower
/// or above the upper bound. When the test is significant only through ties,
/// the cells where the observed curve attains its most extreme rank are
/// reported instead so that ranges are nonempty exactly when p <= alpha.
[[nodiscard]] std::vector<SignificantRange> significant_ranges(const EnvelopeResult& env);
/// Strict escapes only.
[[nodiscard]] std::vector<SignificantRange> significant_ranges(std::span<const double> r,
                                                               std::span<const double> observed,
                                                               std::span<const double> lower,
                                                               std::span<const double> upper,
                                                               std::span<const std::uint8_t> valid);

struct TestOptions {
    std::size_t permutations = 499;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    std::uint64_t replicate = 0;     // selects an independent substream family
    bool shared_permutations = true; // one relabelling set for all points
    bool keep_envelopes = false;     // store per-point envelopes in the report
};

struct PointResult {
    std::size_t point = 0;
    double p_value = 1.0;
    bool significant = false;
    std::vector<SignificantRange> ranges;
    std::optional<EnvelopeResult> envelope;
};

struct LocalTestReport {
    std::vector<PointResult> points;
    double alpha = 0.05;
    std::size_t permutations = 0;
    std::uint64_t seed = 0;
    bool shared_permutations = true;

    [[nodiscard]] std::size_t significant_count() const noexcept;
};

/// Per-point LIMA envelope tests under random labelling.
[[nodiscard]] LocalTestReport local_lima_test(const MarkedPointPattern& pattern, TestFunctionSpec spec,
                                              const EstimationConfig& cfg, const TestOptions& opts);
[[nodiscard]] LocalTestReport local_lima_test(const MarkCorrelationEstimator& est, std::span<const double> marks,
                                              TestFunctionSpec spec, const TestOptions& opts);

/// Global envelope test of the global kappa under random labelling.
[[nodiscard]] EnvelopeResult global_envelope_test(const MarkedPointPattern& pattern, TestFunctionSpec spec,
                                                  const EstimationConfig& cfg, const TestOptions& opts);
[[nodiscard]] EnvelopeResult global_envelope_test(const MarkCorrelationEstimator& est,
                                                  std::span<const double> marks, TestFunctionSpec spec,
                                                  const TestOptions& opts);

} // namespace lima
