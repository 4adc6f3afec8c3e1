#pragma once

// Summation, mean and variance kernels with the fixed operation orderings
// that the rounding-error analyses assume. Every kernel is a template over
// the arithmetic so that op-count tracing can be layered on top.

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "srvar/fp_core.hpp"

namespace srvar {

template <typename A>
concept RoundedArithmetic = requires(A& a, FpValue x, std::size_t n) {
    { a.add(x, x) } -> std::same_as<FpValue>;
    { a.sub(x, x) } -> std::same_as<FpValue>;
    { a.mul(x, x) } -> std::same_as<FpValue>;
    { a.div_by_count(x, n) } -> std::same_as<FpValue>;
};

enum class SummationScheme { RECURSIVE, PAIRWISE };

enum class VarianceFormula { TEXTBOOK, TWO_PASS };

struct VarianceAlgorithm
{
    VarianceFormula formula = VarianceFormula::TEXTBOOK;
    SummationScheme scheme = SummationScheme::RECURSIVE;

    friend bool operator==(VarianceAlgorithm, VarianceAlgorithm) = default;
};

inline const char* to_string(SummationScheme scheme) noexcept
{
    return scheme == SummationScheme::PAIRWISE ? "pairwise" : "recursive";
}

/// A variance result together with the computed sum s-hat it used.
struct VarianceResult
{
    FpValue value;
    FpValue sum;
};

namespace detail {

inline void require_nonempty(std::size_t n)
{
    if (n == 0)
        throw InvalidInput("empty input");
}

/// Height h of the padded tree: smallest h with 2^h >= n.
inline unsigned tree_height(std::size_t n) noexcept
{
    return n <= 1 ? 0u : static_cast<unsigned>(std::bit_width(n - 1));
}

} // namespace detail

/// fl(((x1 + x2) + x3) + ... + xn): n - 1 rounded additions in index order.
template <RoundedArithmetic A>
FpValue recursive_sum(std::span<const FpValue> x, A& arith)
{
    detail::require_nonempty(x.size());
    FpValue acc = x[0];
    for (std::size_t i = 1; i < x.size(); ++i)
        acc = arith.add(acc, x[i]);
    return acc;
}

/// Balanced tree over the input zero-padded to 2^h entries, reduced level by
/// level left to right: 2^h - 1 additions, the padding ones exact.
template <RoundedArithmetic A>
FpValue pairwise_sum(std::span<const FpValue> x, A& arith)
{
    detail::require_nonempty(x.size());
    const std::size_t width = std::size_t{1} << detail::tree_height(x.size());
    std::vector<FpValue> level(width, FpValue::unchecked(0.0));
    std::copy(x.begin(), x.end(), level.begin());
    for (std::size_t len = width; len > 1; len /= 2) {
        for (std::size_t i = 0; i < len / 2; ++i)
            level[i] = arith.add(level[2 * i], level[2 * i + 1]);
    }
    return level[0];
}

template <RoundedArithmetic A>
FpValue sum(std::span<const FpValue> x, SummationScheme scheme, A& arith)
{
    return scheme == SummationScheme::PAIRWISE ? pairwise_sum(x, arith) : recursive_sum(x, arith);
}

/// fl(s-hat / n) together with s-hat.
template <RoundedArithmetic A>
VarianceResult mean_with_sum(std::span<const FpValue> x, SummationScheme scheme, A& arith)
{
    const FpValue s = sum(x, scheme, arith);
    return {arith.div_by_count(s, x.size()), s};
}

template <RoundedArithmetic A>
FpValue mean(std::span<const FpValue> x, SummationScheme scheme, A& arith)
{
    return mean_with_sum(x, scheme, arith).value;
}

/**
 * y-hat = fl(fl(sum x_i^2) - fl(fl(s-hat^2) / n)).
 *
 * Order: the n squares in index order, their sum, s-hat, s-hat squared, the
 * division by n, the final subtraction.
 */
template <RoundedArithmetic A>
VarianceResult textbook_variance_with_sum(std::span<const FpValue> x, SummationScheme scheme, A& arith)
{
    detail::require_nonempty(x.size());
    std::vector<FpValue> squares;
    squares.reserve(x.size());
    for (const FpValue xi : x)
        squares.push_back(arith.mul(xi, xi));
    const FpValue sum_sq = sum(std::span<const FpValue>{squares}, scheme, arith);
    const FpValue s = sum(x, scheme, arith);
    const FpValue s_sq = arith.mul(s, s);
    const FpValue correction = arith.div_by_count(s_sq, x.size());
    return {arith.sub(sum_sq, correction), s};
}

/**
 * z-hat = fl(sum fl(fl(x_i - m-hat)^2)).
 *
 * Order: m-hat via mean, the n subtractions, the n squares, their sum.
 */
template <RoundedArithmetic A>
VarianceResult two_pass_variance_with_sum(std::span<const FpValue> x, SummationScheme scheme, A& arith)
{
    detail::require_nonempty(x.size());
    const auto [m, s] = mean_with_sum(x, scheme, arith);
    std::vector<FpValue> deviations;
    deviations.reserve(x.size());
    for (const FpValue xi : x)
        deviations.push_back(arith.sub(xi, m));
    for (FpValue& d : deviations)
        d = arith.mul(d, d);
    return {sum(std::span<const FpValue>{deviations}, scheme, arith), s};
}

template <RoundedArithmetic A>
FpValue textbook_variance(std::span<const FpValue> x, SummationScheme scheme, A& arith)
{
    return textbook_variance_with_sum(x, scheme, arith).value;
}

template <RoundedArithmetic A>
FpValue two_pass_variance(std::span<const FpValue> x, SummationScheme scheme, A& arith)
{
    return two_pass_variance_with_sum(x, scheme, arith).value;
}

template <RoundedArithmetic A>
VarianceResult variance_with_sum(std::span<const FpValue> x, VarianceAlgorithm algo, A& arith)
{
    return algo.formula == VarianceFormula::TWO_PASS ? two_pass_variance_with_sum(x, algo.scheme, arith)
                                                     : textbook_variance_with_sum(x, algo.scheme, arith);
}

// Convenience overloads binding (fmt, ctx).

inline FpValue recursive_sum(std::span<const FpValue> x, FpFormat fmt, RoundingContext& ctx)
{
    Arithmetic arith{fmt, ctx};
    return recursive_sum(x, arith);
}

inline FpValue pairwise_sum(std::span<const FpValue> x, FpFormat fmt, RoundingContext& ctx)
{
    Arithmetic arith{fmt, ctx};
    return pairwise_sum(x, arith);
}

inline FpValue mean(std::span<const FpValue> x, FpFormat fmt, RoundingContext& ctx,
                    SummationScheme scheme = SummationScheme::RECURSIVE)
{
    Arithmetic arith{fmt, ctx};
    return mean(x, scheme, arith);
}

inline FpValue textbook_variance(std::span<const FpValue> x, FpFormat fmt, RoundingContext& ctx,
                                 SummationScheme scheme = SummationScheme::RECURSIVE)
{
    Arithmetic arith{fmt, ctx};
    return textbook_variance(x, scheme, arith);
}

inline FpValue two_pass_variance(std::span<const FpValue> x, FpFormat fmt, RoundingContext& ctx,
                                 SummationScheme scheme = SummationScheme::RECURSIVE)
{
    Arithmetic arith{fmt, ctx};
    return two_pass_variance(x, scheme, arith);
}

/// Per-operation counters wrapped around another arithmetic.
struct OpTrace
{
    std::size_t adds = 0;
    std::size_t subs = 0;
    std::size_t muls = 0;
    std::size_t divs = 0;
    /// Operations whose carrier result was off the grid (i.e. actually rounded).
    std::size_t inexact = 0;

    [[nodiscard]] std::size_t total() const noexcept { return adds + subs + muls + divs; }
    friend bool operator==(const OpTrace&, const OpTrace&) = default;
};

template <RoundedArithmetic Inner>
class TracingArithmetic
{
public:
    explicit TracingArithmetic(Inner& inner) noexcept : inner_{&inner} {}

    FpValue add(FpValue a, FpValue b)
    {
        ++trace_.adds;
        return note(inner_->add(a, b), a.value() + b.value(), a.value(), b.value());
    }
    FpValue sub(FpValue a, FpValue b)
    {
        ++trace_.subs;
        return note(inner_->sub(a, b), a.value() - b.value(), a.value(), -b.value());
    }
    FpValue mul(FpValue a, FpValue b)
    {
        ++trace_.muls;
        const double p = a.value() * b.value();
        const FpValue r = inner_->mul(a, b);
        if (r.value() != p || std::fma(a.value(), b.value(), -p) != 0.0)
            ++trace_.inexact;
        return r;
    }
    FpValue div_by_count(FpValue a, std::size_t n)
    {
        ++trace_.divs;
        const double d = static_cast<double>(n);
        const double q = a.value() / d;
        const FpValue r = inner_->div_by_count(a, n);
        if (r.value() != q || std::fma(-q, d, a.value()) != 0.0)
            ++trace_.inexact;
        return r;
    }

    [[nodiscard]] const OpTrace& trace() const noexcept { return trace_; }

private:
    FpValue note(FpValue r, double s, double a, double b)
    {
        const double bb = s - a;
        const double err = (a - (s - bb)) + (b - bb);
        if (r.value() != s || err != 0.0)
            ++trace_.inexact;
        return r;
    }

    Inner* inner_;
    OpTrace trace_;
};

} // namespace srvar
