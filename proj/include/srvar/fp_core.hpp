#pragma once

// Emulation of a reduced-precision binary format inside IEEE binary64,
// with stochastic rounding (SR-nearness) and round-to-nearest-even.

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "srvar/errors.hpp"
#include "srvar/random.hpp"

namespace srvar {

/// Binary format with `precision` significand bits; unit roundoff u = 2^(1-p).
class FpFormat
{
public:
    static constexpr int kMinPrecision = 2;
    static constexpr int kMaxPrecision = 24;

    explicit FpFormat(int precision) : precision_{precision}
    {
        if (precision < kMinPrecision || precision > kMaxPrecision)
            throw InvalidInput("precision must lie in [2, 24], got " + std::to_string(precision));
    }

    [[nodiscard]] int precision() const noexcept { return precision_; }
    [[nodiscard]] double unit_roundoff() const noexcept { return std::ldexp(1.0, 1 - precision_); }

    friend bool operator==(FpFormat, FpFormat) = default;

private:
    int precision_;
};

enum class RoundingMode { SR_NEARNESS, RN };

inline const char* to_string(RoundingMode mode) noexcept
{
    return mode == RoundingMode::RN ? "RN" : "SR";
}

/// Rounding mode plus the random stream that drives SR decisions.
/// RN never touches the stream.
class RoundingContext
{
public:
    explicit RoundingContext(RoundingMode mode, RandomStream stream = {}) noexcept
        : mode_{mode}, stream_{stream}
    {}

    static RoundingContext sr(std::uint64_t seed, std::uint64_t stream = 0) noexcept
    {
        return RoundingContext{RoundingMode::SR_NEARNESS, RandomStream{seed, stream}};
    }
    static RoundingContext rn() noexcept { return RoundingContext{RoundingMode::RN}; }

    [[nodiscard]] RoundingMode mode() const noexcept { return mode_; }
    [[nodiscard]] const RandomStream& stream() const noexcept { return stream_; }
    double next_uniform() noexcept { return stream_.next_uniform(); }

private:
    RoundingMode mode_;
    RandomStream stream_;
};

/// A carrier double known to lie on the grid of the format it was produced for.
class FpValue
{
public:
    constexpr FpValue() noexcept = default;

    /// Wraps x after checking it is on the grid of fmt.
    static FpValue on_grid(double x, FpFormat fmt);

    /// Wraps x without checking; callers guarantee representability.
    static constexpr FpValue unchecked(double x) noexcept { return FpValue{x}; }

    [[nodiscard]] constexpr double value() const noexcept { return value_; }
    constexpr explicit operator double() const noexcept { return value_; }

    friend constexpr bool operator==(FpValue, FpValue) = default;

private:
    constexpr explicit FpValue(double x) noexcept : value_{x} {}
    double value_ = 0.0;
};

struct Neighbors
{
    FpValue lo;
    FpValue hi;
};

namespace detail {

inline void require_carrier_normal(double x)
{
    if (!std::isfinite(x))
        throw InvalidInput("non-finite value");
    // Headroom below DBL_MIN keeps the grid scaling factor 2^(p-1-e) finite.
    if (x != 0.0 && std::fabs(x) < 0x1.0p-960)
        throw InvalidInput("value below the supported carrier range");
}

/// 2^k for k in the normal exponent range.
inline double pow2(int k) noexcept
{
    return std::bit_cast<double>(static_cast<std::uint64_t>(k + 1023) << 52);
}

inline int exponent_of(double x) noexcept
{
    return static_cast<int>((std::bit_cast<std::uint64_t>(x) >> 52) & 0x7FF) - 1023;
}

/// x scaled so that its format significand is an integer in [2^(p-1), 2^p).
/// Both the scaling and its inverse are exact.
struct Scaled
{
    double significand;
    double scale;
};

inline Scaled scale_to_grid(double x, int precision) noexcept
{
    const double scale = pow2(precision - 1 - exponent_of(x));
    return {x * scale, scale};
}

} // namespace detail

/// Format neighbors lo <= x <= hi; lo == hi == x exactly when x is on the grid.
inline Neighbors neighbors(double x, FpFormat fmt)
{
    detail::require_carrier_normal(x);
    if (x == 0.0)
        return {FpValue::unchecked(0.0), FpValue::unchecked(0.0)};
    const auto [m, scale] = detail::scale_to_grid(x, fmt.precision());
    const double f = std::floor(m);
    if (f == m)
        return {FpValue::unchecked(x), FpValue::unchecked(x)};
    return {FpValue::unchecked(f / scale), FpValue::unchecked((f + 1.0) / scale)};
}

inline bool is_representable(double x, FpFormat fmt)
{
    const auto nb = neighbors(x, fmt);
    return nb.lo == nb.hi;
}

inline FpValue FpValue::on_grid(double x, FpFormat fmt)
{
    if (!is_representable(x, fmt))
        throw InvalidInput("value is not representable in the format");
    return FpValue{x};
}

/// Probability that SR rounds x up: (x - lo) / (hi - lo). Zero on the grid.
inline double round_up_probability(double x, FpFormat fmt)
{
    detail::require_carrier_normal(x);
    if (x == 0.0)
        return 0.0;
    const auto [m, scale] = detail::scale_to_grid(x, fmt.precision());
    return m - std::floor(m);
}

namespace detail {

inline FpValue round_scaled(double m, double scale, RoundingContext& ctx)
{
    const double f = std::floor(m);
    const double frac = m - f;
    if (frac == 0.0)
        return FpValue::unchecked(m / scale);
    bool up;
    if (ctx.mode() == RoundingMode::SR_NEARNESS) {
        up = ctx.next_uniform() < frac;
    } else if (frac != 0.5) {
        up = frac > 0.5;
    } else {
        up = std::fmod(f, 2.0) != 0.0;
    }
    return FpValue::unchecked((up ? f + 1.0 : f) / scale);
}

/**
 * Rounds the exact value head + tail, where head = RN_binary64(head + tail)
 * and tail is either exact or carries only a relative error far below one
 * binary64 ulp of head. The sign of tail must be exact.
 */
inline FpValue round_two_part(double head, double tail, FpFormat fmt, RoundingContext& ctx)
{
    if (!std::isfinite(head) || !std::isfinite(tail))
        throw Overflow("carrier result is not finite");
    if ((head != 0.0 && std::fabs(head) < 0x1.0p-960) || (head == 0.0 && tail != 0.0))
        throw Overflow("carrier result below the supported range");
    if (head == 0.0)
        return FpValue::unchecked(0.0);
    if (tail == 0.0) {
        const auto [m, scale] = scale_to_grid(head, fmt.precision());
        return round_scaled(m, scale, ctx);
    }

    const auto [m, scale] = scale_to_grid(head, fmt.precision());
    const double f = std::floor(m);
    if (f != m) {
        // head is off-grid, so head and head + tail share the same pair of
        // neighbors (no binary64 value lies strictly between them).
        const double frac = m - f;
        const double p = frac + tail * scale;
        bool up;
        if (ctx.mode() == RoundingMode::SR_NEARNESS) {
            up = ctx.next_uniform() < p;
        } else if (frac != 0.5) {
            up = frac > 0.5;
        } else {
            up = tail > 0.0;
        }
        return FpValue::unchecked((up ? f + 1.0 : f) / scale);
    }

    // head is on the grid: the exact value sits just beside it on the side
    // given by the sign of tail.
    const double beside = std::nextafter(head, tail > 0.0 ? HUGE_VAL : -HUGE_VAL);
    const auto nb = neighbors(beside, fmt);
    const double gap = nb.hi.value() - nb.lo.value();
    if (ctx.mode() == RoundingMode::RN)
        return FpValue::unchecked(head);
    const double p_up = tail > 0.0 ? tail / gap : 1.0 + tail / gap;
    return ctx.next_uniform() < p_up ? nb.hi : nb.lo;
}

} // namespace detail

/// Rounds a carrier real onto the format grid. Representable inputs are
/// returned unchanged and consume no randomness.
inline FpValue round(double x, FpFormat fmt, RoundingContext& ctx)
{
    detail::require_carrier_normal(x);
    if (x == 0.0)
        return FpValue::unchecked(0.0);
    const auto [m, scale] = detail::scale_to_grid(x, fmt.precision());
    return detail::round_scaled(m, scale, ctx);
}

/// Round-to-nearest-even projection used to build datasets.
inline FpValue quantize_input(double x, FpFormat fmt)
{
    auto ctx = RoundingContext::rn();
    return round(x, fmt, ctx);
}

enum class Op { ADD, SUB, MUL, DIV };

inline const char* to_string(Op op) noexcept
{
    switch (op) {
    case Op::ADD: return "add";
    case Op::SUB: return "sub";
    case Op::MUL: return "mul";
    case Op::DIV: return "div";
    }
    return "?";
}

/**
 * fl(a op b) in the emulated format.
 *
 * The carrier result is paired with its exact error term (TwoSum for
 * add/sub, FMA for mul, FMA residual for div), so the rounding direction
 * is always exact and the SR probability is exact for add/sub/mul. For div
 * the probability is accurate to a few binary64 ulps.
 *
 * The divisor of DIV may be any nonzero carrier value (used for division by
 * the sample count n, which need not be representable in the format).
 */
inline FpValue sr_op(FpValue a, FpValue b, Op op, FpFormat fmt, RoundingContext& ctx)
{
    const double x = a.value();
    const double y = b.value();
    switch (op) {
    case Op::ADD:
    case Op::SUB: {
        const double yy = op == Op::ADD ? y : -y;
        const double s = x + yy;
        const double bb = s - x;
        const double err = (x - (s - bb)) + (yy - bb);
        return detail::round_two_part(s, std::isfinite(s) ? err : 0.0, fmt, ctx);
    }
    case Op::MUL: {
        const double prod = x * y;
        if (prod == 0.0 && x != 0.0 && y != 0.0)
            throw Overflow("carrier product underflows");
        const double err = std::isfinite(prod) ? std::fma(x, y, -prod) : 0.0;
        return detail::round_two_part(prod, err, fmt, ctx);
    }
    case Op::DIV: {
        if (y == 0.0)
            throw InvalidInput("division by zero");
        const double q = x / y;
        if (!std::isfinite(q))
            throw Overflow("carrier quotient is not finite");
        if (q == 0.0 && x != 0.0)
            throw Overflow("carrier quotient underflows");
        const double r = std::fma(-q, y, x);
        return detail::round_two_part(q, r / y, fmt, ctx);
    }
    }
    throw InvalidInput("unknown operation");
}

/// Binds a format to a rounding context; the arithmetic used by the kernels.
class Arithmetic
{
public:
    Arithmetic(FpFormat fmt, RoundingContext& ctx) noexcept : fmt_{fmt}, ctx_{&ctx} {}

    FpValue add(FpValue a, FpValue b) { return sr_op(a, b, Op::ADD, fmt_, *ctx_); }
    FpValue sub(FpValue a, FpValue b) { return sr_op(a, b, Op::SUB, fmt_, *ctx_); }
    FpValue mul(FpValue a, FpValue b) { return sr_op(a, b, Op::MUL, fmt_, *ctx_); }
    FpValue div(FpValue a, FpValue b) { return sr_op(a, b, Op::DIV, fmt_, *ctx_); }
    /// fl(a / count) with count taken as an exact integer.
    FpValue div_by_count(FpValue a, std::size_t count)
    {
        return sr_op(a, FpValue::unchecked(static_cast<double>(count)), Op::DIV, fmt_, *ctx_);
    }

    [[nodiscard]] FpFormat format() const noexcept { return fmt_; }
    [[nodiscard]] RoundingContext& context() const noexcept { return *ctx_; }

private:
    FpFormat fmt_;
    RoundingContext* ctx_;
};

} // namespace srvar
