#pragma once

// Closed-form forward-error bounds for recursive/pairwise summation and the
// textbook/two-pass variance algorithms: the deterministic bound and the
// probabilistic bounds obtained with the Bienayme-Chebyshev (BC),
// Azuma-Hoeffding (AH) and Doob-Meyer (DM) methods.
//
// Bounds are evaluated in double precision. They are diagnostics, not
// certified enclosures.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "srvar/errors.hpp"

namespace srvar {

enum class BoundMethod {
    DET_TEXTBOOK,
    BC_PAIRWISE_SUM,
    AH_PAIRWISE_SUM,
    HI_PAIRWISE_SUM,
    BC_RECURSIVE_SUM,
    AH_RECURSIVE_SUM,
    BC_TEXTBOOK,
    AH_TEXTBOOK,
    DM_TEXTBOOK,
    BC_TWOPASS,
    AH_TWOPASS,
    BC_PAIRWISE_TEXTBOOK,
    AH_PAIRWISE_TEXTBOOK,
    BC_PAIRWISE_TWOPASS,
    AH_PAIRWISE_TWOPASS,
};

inline constexpr std::array kAllBoundMethods{
    BoundMethod::DET_TEXTBOOK,         BoundMethod::BC_PAIRWISE_SUM,      BoundMethod::AH_PAIRWISE_SUM,
    BoundMethod::HI_PAIRWISE_SUM,      BoundMethod::BC_RECURSIVE_SUM,     BoundMethod::AH_RECURSIVE_SUM,
    BoundMethod::BC_TEXTBOOK,          BoundMethod::AH_TEXTBOOK,          BoundMethod::DM_TEXTBOOK,
    BoundMethod::BC_TWOPASS,           BoundMethod::AH_TWOPASS,           BoundMethod::BC_PAIRWISE_TEXTBOOK,
    BoundMethod::AH_PAIRWISE_TEXTBOOK, BoundMethod::BC_PAIRWISE_TWOPASS,  BoundMethod::AH_PAIRWISE_TWOPASS,
};

inline constexpr std::string_view to_string(BoundMethod m) noexcept
{
    switch (m) {
    case BoundMethod::DET_TEXTBOOK: return "DET_TEXTBOOK";
    case BoundMethod::BC_PAIRWISE_SUM: return "BC_PAIRWISE_SUM";
    case BoundMethod::AH_PAIRWISE_SUM: return "AH_PAIRWISE_SUM";
    case BoundMethod::HI_PAIRWISE_SUM: return "HI_PAIRWISE_SUM";
    case BoundMethod::BC_RECURSIVE_SUM: return "BC_RECURSIVE_SUM";
    case BoundMethod::AH_RECURSIVE_SUM: return "AH_RECURSIVE_SUM";
    case BoundMethod::BC_TEXTBOOK: return "BC_TEXTBOOK";
    case BoundMethod::AH_TEXTBOOK: return "AH_TEXTBOOK";
    case BoundMethod::DM_TEXTBOOK: return "DM_TEXTBOOK";
    case BoundMethod::BC_TWOPASS: return "BC_TWOPASS";
    case BoundMethod::AH_TWOPASS: return "AH_TWOPASS";
    case BoundMethod::BC_PAIRWISE_TEXTBOOK: return "BC_PAIRWISE_TEXTBOOK";
    case BoundMethod::AH_PAIRWISE_TEXTBOOK: return "AH_PAIRWISE_TEXTBOOK";
    case BoundMethod::BC_PAIRWISE_TWOPASS: return "BC_PAIRWISE_TWOPASS";
    case BoundMethod::AH_PAIRWISE_TWOPASS: return "AH_PAIRWISE_TWOPASS";
    }
    return "UNKNOWN";
}

inline std::optional<BoundMethod> parse_bound_method(std::string_view name) noexcept
{
    for (const auto m : kAllBoundMethods)
        if (to_string(m) == name)
            return m;
    return std::nullopt;
}

/// Inputs shared by every bound. Only the condition numbers a bound uses are read.
struct BoundQuery
{
    std::uint64_t n = 1;
    double u = 0x1.0p-23;
    double lambda = 0.1;
    double kappa = 1.0;
    double k1 = 1.0;
    double k2 = 1.0;

    /// n u^2 < 1: the regime where the gamma expansions are meaningful.
    [[nodiscard]] bool in_gamma_regime() const noexcept
    {
        return static_cast<double>(n) * u * u < 1.0;
    }
};

struct BoundValue
{
    BoundMethod method{};
    double value = 0.0;
    /// 1 - lambda for probabilistic bounds, 1 for the deterministic one.
    double holds_with_probability = 1.0;
    /// Set for the pairwise two-pass bounds, obtained by substituting the
    /// tree height into the flat two-pass formulas.
    bool by_analogy = false;
    /// Set when n u^2 >= 1.
    bool regime_warning = false;
};

/// gamma_n(t) = (1 + t)^n - 1, via expm1(n log1p(t)).
inline double gamma(std::uint64_t n, double t)
{
    if (!(t > -1.0))
        throw DomainError("gamma requires t > -1");
    if (n == 0)
        return 0.0;
    return std::expm1(static_cast<double>(n) * std::log1p(t));
}

/// ceil(log2 n); 0 for n = 1.
inline unsigned ceil_log2(std::uint64_t n) noexcept
{
    return n <= 1 ? 0u : static_cast<unsigned>(std::bit_width(n - 1));
}

namespace detail {

inline void check_query(const BoundQuery& q, bool uses_lambda = true)
{
    if (q.n < 1)
        throw DomainError("n must be at least 1");
    if (!(q.u >= 0.0) || !std::isfinite(q.u))
        throw DomainError("u must be finite and non-negative");
    if (uses_lambda && !(q.lambda > 0.0 && q.lambda < 1.0))
        throw DomainError("lambda must lie in (0, 1)");
}

inline void check_condition(double c, const char* name)
{
    if (!std::isfinite(c) || c < 0.0)
        throw UndefinedValue(std::string{name} + " is undefined for this data");
}

inline BoundValue make(BoundMethod m, const BoundQuery& q, double value, bool probabilistic)
{
    BoundValue b;
    b.method = m;
    b.value = value;
    b.holds_with_probability = probabilistic ? 1.0 - q.lambda : 1.0;
    b.regime_warning = !q.in_gamma_regime();
    return b;
}

// (1+u)^3 - 1 without cancellation.
inline double cube_minus_one(double u)
{
    return u * (3.0 + u * (3.0 + u));
}

// Shared shapes of the textbook bounds: K2^2 * a + K1^2 * ((1+u)^3 (b + 1)^2 - 1).
inline double textbook_shape(const BoundQuery& q, double a, double b)
{
    return q.k2 * q.k2 * a + q.k1 * q.k1 * (cube_minus_one(q.u) * (b + 1.0) * (b + 1.0) + b * (b + 2.0));
}

// Shared shape of the two-pass bounds: (1+u)(r + r^2 (2 K1 + K1^2 (r + 1))) + u.
inline double twopass_shape(const BoundQuery& q, double r)
{
    return (1.0 + q.u) * (r + r * r * (2.0 * q.k1 + q.k1 * q.k1 * (r + 1.0))) + q.u;
}

inline double bc_twopass_value(const BoundQuery& q, std::uint64_t levels)
{
    return twopass_shape(q, std::sqrt(4.0 * gamma(levels, q.u * q.u) / q.lambda));
}

inline double ah_twopass_value(const BoundQuery& q, std::uint64_t levels)
{
    const double r = std::sqrt(q.u * gamma(2 * levels, q.u)) * std::sqrt(std::log(8.0 / q.lambda));
    return twopass_shape(q, r);
}

} // namespace detail

/// BC pairwise sum: kappa sqrt(gamma_h(u^2) / lambda), h = ceil(log2 n).
inline BoundValue bc_pairwise_sum_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.kappa, "kappa");
    const double v = q.kappa * std::sqrt(gamma(ceil_log2(q.n), q.u * q.u) / q.lambda);
    return detail::make(BoundMethod::BC_PAIRWISE_SUM, q, v, true);
}

/// AH pairwise sum: kappa sqrt(u gamma_{2h}(u)) sqrt(ln(2/lambda)).
inline BoundValue ah_pairwise_sum_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.kappa, "kappa");
    const double v = q.kappa * std::sqrt(q.u * gamma(2 * std::uint64_t{ceil_log2(q.n)}, q.u))
                     * std::sqrt(std::log(2.0 / q.lambda));
    return detail::make(BoundMethod::AH_PAIRWISE_SUM, q, v, true);
}

/**
 * Hallman-Ipsen pairwise bound, kept for comparison:
 * kappa u sqrt(h) sqrt(2 ln(2/delta)) (1 + phi), with
 * phi = L sqrt(2h) u exp(L^2 h u^2) and L = sqrt(2 ln(2n/eta)).
 * Holds with probability 1 - (eta + delta).
 */
inline BoundValue hallman_ipsen_bound(const BoundQuery& q, double eta, double delta)
{
    detail::check_query(q, false);
    detail::check_condition(q.kappa, "kappa");
    if (!(eta > 0.0 && eta < 1.0) || !(delta > 0.0 && delta < 1.0) || !(eta + delta < 1.0))
        throw DomainError("eta and delta must lie in (0, 1) with eta + delta < 1");
    const double h = ceil_log2(q.n);
    const double big_l = std::sqrt(2.0 * std::log(2.0 * static_cast<double>(q.n) / eta));
    const double phi = big_l * std::sqrt(2.0 * h) * q.u * std::exp(big_l * big_l * h * q.u * q.u);
    const double v = q.kappa * q.u * std::sqrt(h) * std::sqrt(2.0 * std::log(2.0 / delta)) * (1.0 + phi);
    BoundValue b = detail::make(BoundMethod::HI_PAIRWISE_SUM, q, v, true);
    b.holds_with_probability = 1.0 - (eta + delta);
    return b;
}

/// Total failure probability q.lambda split evenly between eta and delta.
inline BoundValue hallman_ipsen_bound(const BoundQuery& q)
{
    detail::check_query(q);
    return hallman_ipsen_bound(q, q.lambda / 2.0, q.lambda / 2.0);
}

/// BC recursive sum: kappa sqrt(2 gamma_{n-1}(u^2) / lambda).
inline BoundValue bc_recursive_sum_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.kappa, "kappa");
    const double v = q.kappa * std::sqrt(2.0 * gamma(q.n - 1, q.u * q.u) / q.lambda);
    return detail::make(BoundMethod::BC_RECURSIVE_SUM, q, v, true);
}

/// AH recursive sum: kappa sqrt(u gamma_{2(n-1)}(u)) sqrt(ln(4/lambda)).
inline BoundValue ah_recursive_sum_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.kappa, "kappa");
    const double v = q.kappa * std::sqrt(q.u * gamma(2 * (q.n - 1), q.u)) * std::sqrt(std::log(4.0 / q.lambda));
    return detail::make(BoundMethod::AH_RECURSIVE_SUM, q, v, true);
}

/// Deterministic textbook bound K2^2 gamma_{n+1}(u) + K1^2 gamma_{2n+1}(u).
inline BoundValue det_textbook_bound(const BoundQuery& q)
{
    detail::check_query(q, false);
    detail::check_condition(q.k1, "K1");
    detail::check_condition(q.k2, "K2");
    const double v = q.k2 * q.k2 * gamma(q.n + 1, q.u) + q.k1 * q.k1 * gamma(2 * q.n + 1, q.u);
    return detail::make(BoundMethod::DET_TEXTBOOK, q, v, false);
}

inline BoundValue bc_textbook_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.k1, "K1");
    detail::check_condition(q.k2, "K2");
    const double uu = q.u * q.u;
    const double a = std::sqrt(2.0 * gamma(q.n + 1, uu) / q.lambda);
    const double b = std::sqrt(2.0 * gamma(q.n - 1, uu) / q.lambda);
    return detail::make(BoundMethod::BC_TEXTBOOK, q, detail::textbook_shape(q, a, b), true);
}

inline BoundValue ah_textbook_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.k1, "K1");
    detail::check_condition(q.k2, "K2");
    const double tail = std::sqrt(std::log(4.0 / q.lambda));
    const double a = std::sqrt(q.u * gamma(2 * (q.n + 1), q.u)) * tail;
    const double b = std::sqrt(q.u * gamma(2 * (q.n - 1), q.u)) * tail;
    return detail::make(BoundMethod::AH_TEXTBOOK, q, detail::textbook_shape(q, a, b), true);
}

/// Doob-Meyer textbook bound.
inline BoundValue dm_textbook_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.k1, "K1");
    detail::check_condition(q.k2, "K2");
    const double tail = std::sqrt(std::log(4.0 / q.lambda));
    const double k1_sq = q.k1 * q.k1;
    const double first = q.k2 * q.k2 * std::sqrt(q.u * gamma(2 * (q.n + 1), q.u)) * tail;
    const double c = std::sqrt(2.0 * q.u * gamma(4 * (q.n - 1), q.u)) * tail + q.u * gamma(2 * (q.n - 1), q.u) / 2.0;
    const double v = first + k1_sq * (detail::cube_minus_one(q.u) * (c + 1.0) + c);
    return detail::make(BoundMethod::DM_TEXTBOOK, q, v, true);
}

inline BoundValue bc_twopass_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.k1, "K1");
    return detail::make(BoundMethod::BC_TWOPASS, q, detail::bc_twopass_value(q, q.n + 1), true);
}

inline BoundValue ah_twopass_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.k1, "K1");
    return detail::make(BoundMethod::AH_TWOPASS, q, detail::ah_twopass_value(q, q.n + 1), true);
}

inline BoundValue bc_pairwise_textbook_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.k1, "K1");
    detail::check_condition(q.k2, "K2");
    const std::uint64_t h = ceil_log2(q.n);
    const double uu = q.u * q.u;
    const double a = std::sqrt(2.0 * gamma(h + 1, uu) / q.lambda);
    const double b = std::sqrt(2.0 * gamma(h, uu) / q.lambda);
    return detail::make(BoundMethod::BC_PAIRWISE_TEXTBOOK, q, detail::textbook_shape(q, a, b), true);
}

inline BoundValue ah_pairwise_textbook_bound(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.k1, "K1");
    detail::check_condition(q.k2, "K2");
    const std::uint64_t h = ceil_log2(q.n);
    const double tail = std::sqrt(std::log(4.0 / q.lambda));
    const double a = std::sqrt(q.u * gamma(2 * (h + 1), q.u)) * tail;
    const double b = std::sqrt(q.u * gamma(2 * h, q.u)) * tail;
    return detail::make(BoundMethod::AH_PAIRWISE_TEXTBOOK, q, detail::textbook_shape(q, a, b), true);
}

struct PairwiseTwoPassBounds
{
    BoundValue bc;
    BoundValue ah;
};

/// Two-pass bounds with n + 1 replaced by ceil(log2 n) + 1. Marked by_analogy.
inline PairwiseTwoPassBounds pairwise_twopass_bounds(const BoundQuery& q)
{
    detail::check_query(q);
    detail::check_condition(q.k1, "K1");
    const std::uint64_t levels = std::uint64_t{ceil_log2(q.n)} + 1;
    PairwiseTwoPassBounds out{
        detail::make(BoundMethod::BC_PAIRWISE_TWOPASS, q, detail::bc_twopass_value(q, levels), true),
        detail::make(BoundMethod::AH_PAIRWISE_TWOPASS, q, detail::ah_twopass_value(q, levels), true)};
    out.bc.by_analogy = true;
    out.ah.by_analogy = true;
    return out;
}

/// Dispatch by method. HI_PAIRWISE_SUM uses the even lambda split.
inline BoundValue evaluate_bound(BoundMethod m, const BoundQuery& q)
{
    switch (m) {
    case BoundMethod::DET_TEXTBOOK: return det_textbook_bound(q);
    case BoundMethod::BC_PAIRWISE_SUM: return bc_pairwise_sum_bound(q);
    case BoundMethod::AH_PAIRWISE_SUM: return ah_pairwise_sum_bound(q);
    case BoundMethod::HI_PAIRWISE_SUM: return hallman_ipsen_bound(q);
    case BoundMethod::BC_RECURSIVE_SUM: return bc_recursive_sum_bound(q);
    case BoundMethod::AH_RECURSIVE_SUM: return ah_recursive_sum_bound(q);
    case BoundMethod::BC_TEXTBOOK: return bc_textbook_bound(q);
    case BoundMethod::AH_TEXTBOOK: return ah_textbook_bound(q);
    case BoundMethod::DM_TEXTBOOK: return dm_textbook_bound(q);
    case BoundMethod::BC_TWOPASS: return bc_twopass_bound(q);
    case BoundMethod::AH_TWOPASS: return ah_twopass_bound(q);
    case BoundMethod::BC_PAIRWISE_TEXTBOOK: return bc_pairwise_textbook_bound(q);
    case BoundMethod::AH_PAIRWISE_TEXTBOOK: return ah_pairwise_textbook_bound(q);
    case BoundMethod::BC_PAIRWISE_TWOPASS: return pairwise_twopass_bounds(q).bc;
    case BoundMethod::AH_PAIRWISE_TWOPASS: return pairwise_twopass_bounds(q).ah;
    }
    throw DomainError("unknown bound method");
}

struct BiasPrediction
{
    /// -V(s-hat)/n (textbook) or +V(s-hat)/n (two-pass); empty without V(s-hat).
    std::optional<double> bias;
    /// Bound on |E(estimate) - exact|.
    double bound = 0.0;
};

/// E(y-hat) = y - V(s-hat)/n, and |bias| <= y K1^2 gamma_{n-1}(u^2).
inline BiasPrediction textbook_bias_prediction(std::uint64_t n, double u, double y, double k1,
                                               std::optional<double> v_s_hat = std::nullopt)
{
    if (n < 1)
        throw DomainError("n must be at least 1");
    if (!(y > 0.0))
        throw DomainError("y must be positive");
    BiasPrediction p;
    if (v_s_hat)
        p.bias = -*v_s_hat / static_cast<double>(n);
    p.bound = y * k1 * k1 * gamma(n - 1, u * u);
    return p;
}

/// E(z-hat) = z + V(s-hat)/n + O(u^2), and E(z-hat) - z <= z((1+u^2)(1 + K1^2 gamma_n(u^2)) - 1).
inline BiasPrediction twopass_bias_prediction(std::uint64_t n, double u, double z, double k1,
                                              std::optional<double> v_s_hat = std::nullopt)
{
    if (n < 1)
        throw DomainError("n must be at least 1");
    if (!(z > 0.0))
        throw DomainError("z must be positive");
    BiasPrediction p;
    if (v_s_hat)
        p.bias = *v_s_hat / static_cast<double>(n);
    const double uu = u * u;
    p.bound = z * ((1.0 + uu) * (1.0 + k1 * k1 * gamma(n, uu)) - 1.0);
    return p;
}

enum class AsymptoticRegime { SMALL_NU, LARGE_NU };

enum class TextbookBoundKind { DET, BC, AH, DM };

/**
 * Leading-order forms of the textbook bounds.
 *
 *         n u << 1                         n u >> 1, n u^2 << 1
 * DET   (K2^2 + 2K1^2) n u                (K2^2 + K1^2) e^{(2n+1)u}
 * BC    (K2^2 + 2K1^2) sqrt(2/l) sqrt(n) u    same
 * AH    (K2^2 + 2K1^2) sqrt(ln(4/l)) sqrt(n) u
 *                                         (K2^2 + K1^2 sqrt(u ln(4/l))) sqrt(u ln(4/l)) e^{(2n+1)u}
 * DM    (K2^2 + sqrt(8) K1^2) sqrt(ln(4/l)) sqrt(n) u
 *                                         (sqrt(u ln(4/l)) (K2^2 + sqrt(2) K1^2) + K1^2 u/2) e^{(2n+1)u}
 */
inline double asymptotic_textbook_bound(AsymptoticRegime regime, TextbookBoundKind kind, const BoundQuery& q)
{
    const double n = static_cast<double>(q.n);
    const double k1_sq = q.k1 * q.k1;
    const double k2_sq = q.k2 * q.k2;
    const double growth = std::exp((2.0 * n + 1.0) * q.u);
    const double root_n_u = std::sqrt(n) * q.u;
    const bool small = regime == AsymptoticRegime::SMALL_NU;
    if (q.u == 0.0)
        return 0.0;
    switch (kind) {
    case TextbookBoundKind::DET:
        return small ? (k2_sq + 2.0 * k1_sq) * n * q.u : (k2_sq + k1_sq) * growth;
    case TextbookBoundKind::BC:
        return (k2_sq + 2.0 * k1_sq) * std::sqrt(2.0 / q.lambda) * root_n_u;
    case TextbookBoundKind::AH: {
        const double ln = std::log(4.0 / q.lambda);
        if (small)
            return (k2_sq + 2.0 * k1_sq) * std::sqrt(ln) * root_n_u;
        const double r = std::sqrt(q.u * ln);
        return (k2_sq + k1_sq * r) * r * growth;
    }
    case TextbookBoundKind::DM: {
        const double ln = std::log(4.0 / q.lambda);
        if (small)
            return (k2_sq + std::sqrt(8.0) * k1_sq) * std::sqrt(ln) * root_n_u;
        const double r = std::sqrt(q.u * ln);
        return (r * (k2_sq + std::sqrt(2.0) * k1_sq) + k1_sq * q.u / 2.0) * growth;
    }
    }
    throw DomainError("unknown bound kind");
}

} // namespace srvar
