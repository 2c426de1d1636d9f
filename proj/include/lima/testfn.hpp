#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lima {

/// The closed set of mark test functions. Isham and Shimatani differ globally
/// but share one local form.
enum class TestFunction {
    stoyan,          // m1 m2
    beisbart,        // m1 + m2
    isham,           // m1 m2 - mu^2            (local: m_i (m_j - mu_j))
    shimatani,       // (m1 - mu)(m2 - mu)      (local: m_i (m_j - mu_j))
    schlather,       // (m1 - mu(r))(m2 - mu(r)) (local: m_i (m_j - mu(r)))
    r_mark_bullet,   // m2
    r_mark_dot,      // m1
    variogram,       // 0.5 (m1 - m2)^2
    differentiation, // 1 - min/max, positive marks only
};

inline constexpr std::array<TestFunction, 9> kAllTestFunctions{
    TestFunction::stoyan,        TestFunction::beisbart,   TestFunction::isham,
    TestFunction::shimatani,     TestFunction::schlather,  TestFunction::r_mark_bullet,
    TestFunction::r_mark_dot,    TestFunction::variogram,  TestFunction::differentiation,
};

struct TestFunctionSpec {
    TestFunction kind = TestFunction::stoyan;
    bool requires_positive_marks = false;
};

[[nodiscard]] TestFunctionSpec make_spec(TestFunction kind) noexcept;

/// CLI spelling, e.g. "rmark-dot".
[[nodiscard]] std::string_view name(TestFunction kind) noexcept;
/// Inverse of name(); throws InputError listing the valid names.
[[nodiscard]] TestFunction parse_test_function(std::string_view text);

/// How the normalizer c_tf was obtained.
enum class NormalizerRule {
    expectation,     // closed-form expectation under mark independence
    empirical,       // average of the test function over the other marks
    sigma2_fallback, // expectation is zero; divide by the mark variance instead
};

[[nodiscard]] std::string_view name(NormalizerRule rule) noexcept;

/// Leave-one-out mark context for point i.
struct MarkContext {
    double mu_j = 0.0;                      // mean of the marks m_j, j != i
    double sigma2_j = 0.0;                  // their sample variance
    std::span<const double> others;         // the marks m_j themselves (empirical normalizers)
    std::function<double(double)> mu_at_r;  // pattern-wide pair mark mean at distance r (Schlather)
};

/// Builds the leave-one-out context for point i from the full mark vector.
[[nodiscard]] MarkContext make_context(std::span<const double> marks, std::size_t i,
                                       std::vector<double>& others_storage);

struct Normalizer {
    double value = 0.0;
    NormalizerRule rule = NormalizerRule::expectation;
};

/// tf_{f,i}(m_i, m_j). Throws InputError for non-positive marks with differentiation.
[[nodiscard]] double evaluate_local(TestFunctionSpec spec, double m_i, double m_j, const MarkContext& ctx,
                                    double r = 0.0);

/// c_{tf,i}: expectation of the local test function under mark independence.
/// Isham, Shimatani and Schlather have zero expectation and use sigma2_j.
[[nodiscard]] Normalizer local_normalizer(TestFunctionSpec spec, double m_i, const MarkContext& ctx);

/// Local test function applied to two sampled curves at sample t_index.
[[nodiscard]] double evaluate_local_functional(TestFunctionSpec spec, std::span<const double> f_i,
                                               std::span<const double> f_j, const MarkContext& ctx_at_t,
                                               std::size_t t_index, double r = 0.0);

/// Global c_tf over all marks (mu^2 for Stoyan, sigma^2 for the variogram, ...).
[[nodiscard]] Normalizer global_normalizer(TestFunctionSpec spec, std::span<const double> marks);

/// Global test function; `mu` is the mark mean, `mu_r` the pair mark mean at r.
[[nodiscard]] double evaluate_global(TestFunctionSpec spec, double m1, double m2, double mu, double mu_r = 0.0);

namespace detail {

inline double differentiation(double a, double b) noexcept { return 1.0 - std::min(a, b) / std::max(a, b); }

/// Distance-independent part of the local test function used in the
/// estimator's inner loop. For Schlather this is m_i m_j; the estimator
/// subtracts m_i mu(r) after smoothing.
inline double local_pair_term(TestFunction f, double mi, double mj, double mu_j) noexcept {
    switch (f) {
    case TestFunction::stoyan: return mi * mj;
    case TestFunction::beisbart: return mi + mj;
    case TestFunction::isham:
    case TestFunction::shimatani: return mi * (mj - mu_j);
    case TestFunction::schlather: return mi * mj;
    case TestFunction::r_mark_bullet: return mj;
    case TestFunction::r_mark_dot: return mi;
    case TestFunction::variogram: return 0.5 * (mi - mj) * (mi - mj);
    case TestFunction::differentiation: return differentiation(mi, mj);
    }
    return 0.0;
}

} // namespace detail

} // namespace lima
