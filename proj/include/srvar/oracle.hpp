#pragma once

// Exact reference values over dyadic inputs and the error/conditioning
// metrics derived from them. No rounding happens before the final
// conversion of a metric to double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "srvar/errors.hpp"
#include "srvar/fp_core.hpp"

namespace srvar {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// An exact rational value.
class ExactValue
{
public:
    ExactValue() = default;
    explicit ExactValue(Rational q) : q_{std::move(q)} {}

    /// Exact value of a finite double.
    static ExactValue from_double(double x);

    [[nodiscard]] const Rational& rational() const noexcept { return q_; }
    [[nodiscard]] bool is_zero() const { return q_ == 0; }
    [[nodiscard]] double to_double() const { return to_double(q_); }

    /// Correctly rounded for results in the normal range.
    static double to_double(const Rational& q)
    {
        if (q == 0)
            return 0.0;
        BigInt num = boost::multiprecision::numerator(q);
        BigInt den = boost::multiprecision::denominator(q);
        const bool negative = num < 0;
        if (negative)
            num = -num;
        // Scale so the integer quotient carries 62 or 63 bits, then add a sticky bit.
        const long long shift = 62 - (static_cast<long long>(boost::multiprecision::msb(num))
                                      - static_cast<long long>(boost::multiprecision::msb(den)));
        if (shift > 0)
            num <<= static_cast<unsigned>(shift);
        else if (shift < 0)
            den <<= static_cast<unsigned>(-shift);
        BigInt quot;
        BigInt rem;
        boost::multiprecision::divide_qr(num, den, quot, rem);
        auto bits = quot.convert_to<std::uint64_t>();
        if (rem != 0)
            bits |= 1u;
        const double mag = std::ldexp(static_cast<double>(bits), static_cast<int>(-std::clamp(shift, -100000LL, 100000LL)));
        return negative ? -mag : mag;
    }

    friend bool operator==(const ExactValue&, const ExactValue&) = default;

private:
    Rational q_;
};

namespace detail {

/// x = mantissa * 2^exponent with an integer mantissa.
struct Dyadic
{
    std::int64_t mantissa = 0;
    int exponent = 0;
};

inline Dyadic decompose(double x)
{
    if (!std::isfinite(x))
        throw InvalidInput("non-finite value");
    if (x == 0.0)
        return {};
    int e = 0;
    const double f = std::frexp(x, &e);
    return {static_cast<std::int64_t>(std::ldexp(f, 53)), e - 53};
}

inline Rational pow2_rational(int k)
{
    BigInt one = 1;
    return k >= 0 ? Rational{one << k} : Rational{BigInt{1}, one << (-k)};
}

/// Exact sums of x_i, |x_i| and x_i^2 over a common power-of-two scale.
struct DyadicSums
{
    BigInt sum;
    BigInt abs_sum;
    BigInt sum_sq;
    int scale_exponent = 0; // sum = value * 2^scale_exponent, sum_sq uses 2 * scale_exponent

    [[nodiscard]] Rational scaled(const BigInt& v, int power) const
    {
        return Rational{v} * pow2_rational(power * scale_exponent);
    }
};

inline DyadicSums dyadic_sums(std::span<const double> x)
{
    std::vector<Dyadic> parts;
    parts.reserve(x.size());
    int min_exp = std::numeric_limits<int>::max();
    for (const double xi : x) {
        parts.push_back(decompose(xi));
        if (parts.back().mantissa != 0)
            min_exp = std::min(min_exp, parts.back().exponent);
    }
    DyadicSums out;
    if (min_exp == std::numeric_limits<int>::max())
        return out;
    out.scale_exponent = min_exp;
    for (const auto& [mantissa, exponent] : parts) {
        if (mantissa == 0)
            continue;
        const unsigned shift = static_cast<unsigned>(exponent - min_exp);
        BigInt m = mantissa;
        const BigInt term = m << shift;
        out.sum += term;
        out.abs_sum += mantissa < 0 ? BigInt{-term} : term;
        out.sum_sq += (m * m) << (2 * shift);
    }
    return out;
}

inline std::vector<double> carrier_values(std::span<const FpValue> x)
{
    std::vector<double> v;
    v.reserve(x.size());
    for (const FpValue xi : x)
        v.push_back(xi.value());
    return v;
}

} // namespace detail

inline ExactValue ExactValue::from_double(double x)
{
    const auto [mantissa, exponent] = detail::decompose(x);
    return ExactValue{Rational{BigInt{mantissa}} * detail::pow2_rational(exponent)};
}

/// s = sum x_i, exactly.
inline ExactValue exact_sum(std::span<const double> x)
{
    const auto sums = detail::dyadic_sums(x);
    return ExactValue{sums.scaled(sums.sum, 1)};
}

inline ExactValue exact_sum(std::span<const FpValue> x)
{
    const auto v = detail::carrier_values(x);
    return exact_sum(std::span<const double>{v});
}

/// y = sum x_i^2 - s^2 / n, exactly (equal to the two-pass z).
inline ExactValue exact_variance(std::span<const double> x)
{
    if (x.empty())
        throw InvalidInput("empty input");
    const auto sums = detail::dyadic_sums(x);
    // y = (n * sum_sq - sum^2) / n, all over 2^(2 * scale_exponent).
    const BigInt n = static_cast<unsigned long long>(x.size());
    const BigInt numerator = n * sums.sum_sq - sums.sum * sums.sum;
    return ExactValue{Rational{numerator, n} * detail::pow2_rational(2 * sums.scale_exponent)};
}

inline ExactValue exact_variance(std::span<const FpValue> x)
{
    const auto v = detail::carrier_values(x);
    return exact_variance(std::span<const double>{v});
}

/// z = sum (x_i - m)^2 with m = s / n, evaluated term by term in rationals.
/// Independent of exact_variance; used to cross-check it.
inline ExactValue exact_two_pass_variance(std::span<const double> x)
{
    if (x.empty())
        throw InvalidInput("empty input");
    Rational s = 0;
    for (const double xi : x)
        s += ExactValue::from_double(xi).rational();
    const Rational m = s / Rational{static_cast<unsigned long long>(x.size())};
    Rational z = 0;
    for (const double xi : x) {
        const Rational d = ExactValue::from_double(xi).rational() - m;
        z += d * d;
    }
    return ExactValue{z};
}

/// Textbook formula sum x_i^2 - s^2 / n evaluated term by term in rationals.
inline ExactValue exact_textbook_variance(std::span<const double> x)
{
    if (x.empty())
        throw InvalidInput("empty input");
    Rational s = 0;
    Rational sq = 0;
    for (const double xi : x) {
        const Rational q = ExactValue::from_double(xi).rational();
        s += q;
        sq += q * q;
    }
    return ExactValue{sq - s * s / Rational{static_cast<unsigned long long>(x.size())}};
}

/// |approx - exact| / |exact|, computed exactly and rounded once.
inline double relative_error(double approx, const ExactValue& exact)
{
    if (exact.is_zero())
        throw UndefinedValue("relative error is undefined for an exact value of zero");
    const Rational diff = ExactValue::from_double(approx).rational() - exact.rational();
    return ExactValue::to_double(abs(diff) / abs(exact.rational()));
}

inline double relative_error(FpValue approx, const ExactValue& exact)
{
    return relative_error(approx.value(), exact);
}

/// kappa = |x|_1 / |s|, K1 = |x|_1 / sqrt(n y), K2 = |x|_2 / sqrt(y).
/// Undefined entries are +inf and flagged.
struct ConditionReport
{
    double kappa = std::numeric_limits<double>::infinity();
    double k1 = std::numeric_limits<double>::infinity();
    double k2 = std::numeric_limits<double>::infinity();
    bool kappa_defined = false;
    bool variance_defined = false;
};

inline ConditionReport condition_numbers(std::span<const double> x)
{
    if (x.empty())
        throw InvalidInput("empty input");
    const auto sums = detail::dyadic_sums(x);
    ConditionReport r;
    if (sums.sum != 0) {
        r.kappa = ExactValue::to_double(Rational{sums.abs_sum, abs(sums.sum)});
        r.kappa_defined = true;
    }
    const BigInt n = static_cast<unsigned long long>(x.size());
    // n * y and sum_sq share the scale 2^(2 * scale_exponent), so the ratios are scale free.
    const BigInt n_y = n * sums.sum_sq - sums.sum * sums.sum;
    if (n_y != 0) {
        // K1^2 = |x|_1^2 / (n y) ; K2^2 = sum_sq / y = n sum_sq / (n y).
        const Rational k1_sq{sums.abs_sum * sums.abs_sum, n_y};
        const Rational k2_sq{n * sums.sum_sq, n_y};
        r.k1 = std::sqrt(ExactValue::to_double(k1_sq));
        r.k2 = std::sqrt(ExactValue::to_double(k2_sq));
        r.variance_defined = true;
    }
    return r;
}

inline ConditionReport condition_numbers(std::span<const FpValue> x)
{
    const auto v = detail::carrier_values(x);
    return condition_numbers(std::span<const double>{v});
}

struct Moments
{
    double mean = 0.0;
    double variance = 0.0; ///< unbiased, 1/(N-1)
    double stderr_mean = 0.0;
};

inline Moments empirical_moments(std::span<const double> samples)
{
    if (samples.size() < 2)
        throw InvalidInput("at least two samples are required");
    const auto count = static_cast<long double>(samples.size());
    long double total = 0;
    for (const double s : samples)
        total += s;
    const long double mean = total / count;
    long double ss = 0;
    for (const double s : samples)
        ss += (s - mean) * (s - mean);
    const long double var = ss / (count - 1);
    return {static_cast<double>(mean), static_cast<double>(var),
            static_cast<double>(std::sqrt(var / count))};
}

inline Moments empirical_moments(std::span<const FpValue> samples)
{
    const auto v = detail::carrier_values(samples);
    return empirical_moments(std::span<const double>{v});
}

} // namespace srvar
