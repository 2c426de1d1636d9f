#include "lima/testfn.hpp"

#include "lima/error.hpp"
#include "lima/pattern.hpp"

#include <cmath>
#include <string>

namespace lima {

TestFunctionSpec make_spec(TestFunction kind) noexcept {
    return {kind, kind == TestFunction::differentiation};
}

std::string_view name(TestFunction kind) noexcept {
    switch (kind) {
    case TestFunction::stoyan: return "stoyan";
    case TestFunction::beisbart: return "beisbart";
    case TestFunction::isham: return "isham";
    case TestFunction::shimatani: return "shimatani";
    case TestFunction::schlather: return "schlather";
    case TestFunction::r_mark_bullet: return "rmark-bullet";
    case TestFunction::r_mark_dot: return "rmark-dot";
    case TestFunction::variogram: return "variogram";
    case TestFunction::differentiation: return "differentiation";
    }
    return "?";
}

TestFunction parse_test_function(std::string_view text) {
    for (auto f : kAllTestFunctions)
        if (name(f) == text) return f;
    std::string valid;
    for (auto f : kAllTestFunctions) {
        if (!valid.empty()) valid += '|';
        valid += name(f);
    }
    throw InputError("unknown test function '" + std::string(text) + "' (valid: " + valid + ")");
}

std::string_view name(NormalizerRule rule) noexcept {
    switch (rule) {
    case NormalizerRule::expectation: return "expectation";
    case NormalizerRule::empirical: return "empirical";
    case NormalizerRule::sigma2_fallback: return "sigma2_fallback";
    }
    return "?";
}

MarkContext make_context(std::span<const double> marks, std::size_t i, std::vector<double>& others_storage) {
    const auto s = mark_summary(marks, i);
    others_storage.clear();
    for (std::size_t j = 0; j < marks.size(); ++j)
        if (j != i) others_storage.push_back(marks[j]);
    MarkContext ctx;
    ctx.mu_j = s.mean;
    ctx.sigma2_j = s.variance;
    ctx.others = others_storage;
    return ctx;
}

namespace {

void require_positive(TestFunctionSpec spec, double a, double b) {
    if (spec.requires_positive_marks && !(a > 0.0 && b > 0.0))
        throw InputError(std::string(name(spec.kind)) + " requires strictly positive marks");
}

} // namespace

double evaluate_local(TestFunctionSpec spec, double m_i, double m_j, const MarkContext& ctx, double r) {
    require_positive(spec, m_i, m_j);
    if (spec.kind == TestFunction::schlather) {
        if (!ctx.mu_at_r) throw InputError("schlather needs the pair mark mean mu(r)");
        return m_i * (m_j - ctx.mu_at_r(r));
    }
    return detail::local_pair_term(spec.kind, m_i, m_j, ctx.mu_j);
}

Normalizer local_normalizer(TestFunctionSpec spec, double m_i, const MarkContext& ctx) {
    switch (spec.kind) {
    case TestFunction::stoyan: return {m_i * ctx.mu_j, NormalizerRule::expectation};
    case TestFunction::beisbart: return {m_i + ctx.mu_j, NormalizerRule::expectation};
    case TestFunction::r_mark_bullet: return {ctx.mu_j, NormalizerRule::expectation};
    case TestFunction::r_mark_dot: return {m_i, NormalizerRule::expectation};
    case TestFunction::variogram: {
        const double dm = m_i - ctx.mu_j;
        return {0.5 * (dm * dm + ctx.sigma2_j), NormalizerRule::expectation};
    }
    case TestFunction::differentiation: {
        if (ctx.others.empty()) throw InputError("differentiation normalizer needs the other marks");
        double sum = 0.0;
        for (double m_j : ctx.others) {
            require_positive(spec, m_i, m_j);
            sum += detail::differentiation(m_i, m_j);
        }
        return {sum / static_cast<double>(ctx.others.size()), NormalizerRule::empirical};
    }
    case TestFunction::isham:
    case TestFunction::shimatani:
    case TestFunction::schlather: return {ctx.sigma2_j, NormalizerRule::sigma2_fallback};
    }
    return {};
}

double evaluate_local_functional(TestFunctionSpec spec, std::span<const double> f_i, std::span<const double> f_j,
                                 const MarkContext& ctx_at_t, std::size_t t_index, double r) {
    if (t_index >= f_i.size() || t_index >= f_j.size()) throw InputError("t index outside the curve");
    return evaluate_local(spec, f_i[t_index], f_j[t_index], ctx_at_t, r);
}

Normalizer global_normalizer(TestFunctionSpec spec, std::span<const double> marks) {
    const auto s = mark_summary(marks);
    switch (spec.kind) {
    case TestFunction::stoyan: return {s.mean * s.mean, NormalizerRule::expectation};
    case TestFunction::beisbart: return {2.0 * s.mean, NormalizerRule::expectation};
    case TestFunction::r_mark_bullet:
    case TestFunction::r_mark_dot: return {s.mean, NormalizerRule::expectation};
    case TestFunction::variogram: return {s.variance, NormalizerRule::expectation};
    case TestFunction::differentiation: {
        double sum = 0.0;
        const std::size_t n = marks.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) {
                    require_positive(spec, marks[i], marks[j]);
                    sum += detail::differentiation(marks[i], marks[j]);
                }
        return {sum / static_cast<double>(n * (n - 1)), NormalizerRule::empirical};
    }
    case TestFunction::isham:
    case TestFunction::shimatani:
    case TestFunction::schlather: return {s.variance, NormalizerRule::sigma2_fallback};
    }
    return {};
}

double evaluate_global(TestFunctionSpec spec, double m1, double m2, double mu, double mu_r) {
    require_positive(spec, m1, m2);
    switch (spec.kind) {
    case TestFunction::isham: return m1 * m2 - mu * mu;
    case TestFunction::shimatani: return (m1 - mu) * (m2 - mu);
    case TestFunction::schlather: return (m1 - mu_r) * (m2 - mu_r);
    default: return detail::local_pair_term(spec.kind, m1, m2, mu);
    }
}

} // namespace lima
