#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "srvar/bounds.hpp"

using namespace srvar;

namespace {

constexpr double kU24 = 0x1.0p-23;

BoundQuery query(std::uint64_t n, double lambda = 0.1, double u = kU24)
{
    BoundQuery q;
    q.n = n;
    q.u = u;
    q.lambda = lambda;
    return q;
}

void expect_rel(double got, double want, double tol)
{
    EXPECT_NEAR(got, want, tol * std::fabs(want)) << "got " << got << " want " << want;
}

} // namespace

TEST(Gamma, Basics)
{
    EXPECT_EQ(gamma(0, 0.3), 0.0);
    EXPECT_DOUBLE_EQ(gamma(1, kU24), kU24);
    EXPECT_DOUBLE_EQ(gamma(3, 0.5), 2.375);
    EXPECT_THROW(gamma(2, -1.0), DomainError);
}

TEST(Gamma, CompositionIdentity)
{
    for (const double t : {1e-14, 1e-7, 0.01, 0.5}) {
        for (const auto& [a, b] : {std::pair{3u, 5u}, std::pair{100u, 1000u}, std::pair{1u, 1u}}) {
            const double ga = gamma(a, t);
            const double gb = gamma(b, t);
            expect_rel(gamma(a + b, t), ga + gb + ga * gb, 1e-13);
        }
    }
}

TEST(Gamma, SeriesForSmallArgument)
{
    // gamma_20(t) = 20t + 190t^2 + ... for t = 2^-46.
    const double t = 0x1.0p-46;
    expect_rel(gamma(20, t), 20 * t + 190 * t * t, 1e-14);
}

TEST(CeilLog2, Values)
{
    EXPECT_EQ(ceil_log2(1), 0u);
    EXPECT_EQ(ceil_log2(2), 1u);
    EXPECT_EQ(ceil_log2(3), 2u);
    EXPECT_EQ(ceil_log2(1024), 10u);
    EXPECT_EQ(ceil_log2(1025), 11u);
    EXPECT_EQ(ceil_log2(1000000), 20u);
}

// Reference values evaluated once in 40-digit arithmetic.
TEST(Bounds, FrozenReferenceValues)
{
    const auto q20 = query(std::uint64_t{1} << 20);
    const auto q6 = query(1000000);
    expect_rel(bc_pairwise_sum_bound(q20).value, 1.6858739404358750706e-6, 1e-12);
    expect_rel(ah_pairwise_sum_bound(q20).value, 1.3049446741856992627e-6, 1e-12);
    expect_rel(hallman_ipsen_bound(q20, 0.05, 0.05).value, 1.4480690359915740782e-6, 1e-12);
    expect_rel(hallman_ipsen_bound(query(2), 0.05, 0.05).value, 3.2379679526174749108e-7, 1e-12);
    expect_rel(det_textbook_bound(q6).value, 0.39584629911686857782, 1e-12);
    expect_rel(bc_textbook_bound(q6).value, 0.0016000024151739370844, 1e-10);
    expect_rel(ah_textbook_bound(q6).value, 0.0010327467831552797284, 1e-10);
    expect_rel(dm_textbook_bound(q6).value, 0.0010775037699102367195, 1e-10);
    expect_rel(bc_twopass_bound(q6).value, 0.00075577115833599425104, 1e-12);
    expect_rel(ah_twopass_bound(q6).value, 0.00037556852870557207151, 1e-12);
    expect_rel(bc_pairwise_textbook_bound(q20).value, 7.5690703247070980806e-6, 1e-9);
    expect_rel(ah_pairwise_textbook_bound(q20).value, 4.7375839416284230601e-6, 1e-9);
    const auto pw = pairwise_twopass_bounds(q20);
    expect_rel(pw.bc.value, 3.5742589658720301988e-6, 1e-12);
    expect_rel(pw.ah.value, 1.7364510266530439113e-6, 1e-12);
    expect_rel(bc_recursive_sum_bound(q6).value, 0.00053311988530388138092, 1e-12);
    expect_rel(ah_recursive_sum_bound(q6).value, 0.00034409004146507667072, 1e-12);
}

TEST(Bounds, LeadingOrderCrossChecks)
{
    const auto q6 = query(1000000);
    // sqrt(2n/lambda) u and sqrt(4n/lambda) u leading terms.
    expect_rel(bc_recursive_sum_bound(q6).value, std::sqrt(2e6 / 0.1) * kU24, 1e-3);
    expect_rel(bc_twopass_bound(q6).value, std::sqrt(4e6 / 0.1) * kU24, 0.01);
    expect_rel(ah_twopass_bound(q6).value, std::sqrt(2e6 * kU24 * kU24) * std::sqrt(std::log(80.0)), 0.07);
    expect_rel(bc_pairwise_sum_bound(query(std::uint64_t{1} << 20)).value, std::sqrt(20 * kU24 * kU24 / 0.1), 1e-6);
    expect_rel(ah_pairwise_sum_bound(query(std::uint64_t{1} << 20)).value, std::sqrt(40 * kU24 * kU24) * std::sqrt(std::log(20.0)), 1e-5);
}

TEST(Bounds, DegenerateSizes)
{
    EXPECT_EQ(bc_pairwise_sum_bound(query(1)).value, 0.0);
    EXPECT_EQ(ah_pairwise_sum_bound(query(1)).value, 0.0);
    EXPECT_EQ(bc_recursive_sum_bound(query(1)).value, 0.0);
    EXPECT_EQ(ah_recursive_sum_bound(query(1)).value, 0.0);
    const auto q1 = query(1);
    EXPECT_DOUBLE_EQ(det_textbook_bound(q1).value, gamma(2, kU24) + gamma(3, kU24));
    const double tail = std::sqrt(std::log(40.0));
    EXPECT_DOUBLE_EQ(dm_textbook_bound(q1).value,
                     std::sqrt(kU24 * gamma(4, kU24)) * tail + kU24 * (3 + kU24 * (3 + kU24)));
    // n = 2, lambda -> 1: a single level gives kappa u.
    expect_rel(bc_pairwise_sum_bound(query(2, 1.0 - 1e-12)).value, kU24, 1e-9);
    EXPECT_GT(bc_pairwise_textbook_bound(query(2)).value, 0.0);
    EXPECT_GT(pairwise_twopass_bounds(query(2)).bc.value, 0.0);
}

TEST(Bounds, ZeroUnitRoundoffGivesZero)
{
    for (const auto m : kAllBoundMethods) {
        const auto v = evaluate_bound(m, query(1000, 0.1, 0.0));
        EXPECT_EQ(v.value, 0.0) << to_string(m);
    }
    EXPECT_EQ(asymptotic_textbook_bound(AsymptoticRegime::SMALL_NU, TextbookBoundKind::BC, query(1000, 0.1, 0.0)), 0.0);
}

TEST(Bounds, LambdaDomain)
{
    for (const auto m : kAllBoundMethods) {
        if (m == BoundMethod::DET_TEXTBOOK)
            continue;
        EXPECT_THROW(evaluate_bound(m, query(100, 2.0)), DomainError) << to_string(m);
        EXPECT_THROW(evaluate_bound(m, query(100, 0.0)), DomainError) << to_string(m);
    }
    EXPECT_THROW(ah_textbook_bound(query(100, 4.0)), DomainError);
    EXPECT_THROW(ah_twopass_bound(query(100, 8.0)), DomainError);
    EXPECT_THROW(hallman_ipsen_bound(query(100), 0.6, 0.5), DomainError);
    EXPECT_NO_THROW(det_textbook_bound(query(100, 5.0)));
}

TEST(Bounds, UndefinedConditionNumbers)
{
    auto q = query(100);
    q.kappa = std::numeric_limits<double>::infinity();
    EXPECT_THROW(bc_pairwise_sum_bound(q), UndefinedValue);
    EXPECT_NO_THROW(bc_textbook_bound(q));
    q.k1 = std::numeric_limits<double>::infinity();
    EXPECT_THROW(bc_textbook_bound(q), UndefinedValue);
    EXPECT_THROW(bc_twopass_bound(q), UndefinedValue);
}

TEST(Bounds, ProbabilityMetadata)
{
    const auto q = query(1000, 0.2);
    EXPECT_EQ(det_textbook_bound(q).holds_with_probability, 1.0);
    EXPECT_DOUBLE_EQ(bc_textbook_bound(q).holds_with_probability, 0.8);
    EXPECT_DOUBLE_EQ(hallman_ipsen_bound(q, 0.05, 0.01).holds_with_probability, 0.94);
    EXPECT_DOUBLE_EQ(hallman_ipsen_bound(q).holds_with_probability, 0.8);
    EXPECT_TRUE(pairwise_twopass_bounds(q).ah.by_analogy);
    EXPECT_FALSE(bc_twopass_bound(q).by_analogy);
    EXPECT_TRUE(evaluate_bound(BoundMethod::BC_PAIRWISE_TWOPASS, q).by_analogy);
}

TEST(Bounds, RegimeWarning)
{
    EXPECT_FALSE(bc_textbook_bound(query(1000)).regime_warning);
    EXPECT_TRUE(bc_textbook_bound(query(std::uint64_t{1} << 40, 0.1, 0x1.0p-7)).regime_warning);
}

TEST(Bounds, MonotoneInLambdaNAndU)
{
    for (const auto m : kAllBoundMethods) {
        if (m == BoundMethod::DET_TEXTBOOK)
            continue;
        double prev = std::numeric_limits<double>::infinity();
        for (const double lambda : {1e-6, 1e-4, 1e-2, 0.1, 0.5, 0.9}) {
            const double v = evaluate_bound(m, query(100000, lambda)).value;
            EXPECT_LT(v, prev) << to_string(m) << " lambda " << lambda;
            prev = v;
        }
    }
    for (const auto m : kAllBoundMethods) {
        double prev_n = 0.0;
        for (const std::uint64_t n : {2ull, 10ull, 1000ull, 1ull << 20, 1000000000ull}) {
            const double v = evaluate_bound(m, query(n)).value;
            EXPECT_GE(v, prev_n) << to_string(m) << " n " << n;
            prev_n = v;
        }
        double prev_u = 0.0;
        for (const double u : {0x1.0p-52, 0x1.0p-23, 0x1.0p-10, 0x1.0p-7}) {
            const double v = evaluate_bound(m, query(1000, 0.1, u)).value;
            EXPECT_GE(v, prev_u) << to_string(m) << " u " << u;
            prev_u = v;
        }
    }
}

TEST(Bounds, HallmanIpsenLimitForTinyU)
{
    const double u = 0x1.0p-60;
    const auto v = hallman_ipsen_bound(query(std::uint64_t{1} << 20, 0.1, u), 0.05, 0.05).value;
    expect_rel(v / u, std::sqrt(20.0) * std::sqrt(2.0 * std::log(40.0)), 1e-12);
}

TEST(Bounds, AhPairwiseBelowHallmanIpsen)
{
    for (unsigned k = 10; k <= 30; ++k) {
        const auto q = query(std::uint64_t{1} << k);
        EXPECT_LT(ah_pairwise_sum_bound(q).value, hallman_ipsen_bound(q).value) << k;
    }
}

TEST(Bounds, ProbabilisticBelowDeterministic)
{
    for (const std::uint64_t n : {1000ull, 100000ull, 1000000ull}) {
        const auto q = query(n);
        const double det = det_textbook_bound(q).value;
        EXPECT_LT(bc_textbook_bound(q).value, det);
        EXPECT_LT(ah_textbook_bound(q).value, det);
        EXPECT_LT(dm_textbook_bound(q).value, det);
    }
}

TEST(Bounds, LambdaCrossover)
{
    const auto at = [](double lambda) {
        const auto q = query(1000000, lambda);
        return ah_textbook_bound(q).value - bc_textbook_bound(q).value;
    };
    EXPECT_LT(at(1e-5), 0.0);
    EXPECT_GT(at(0.9), 0.0);
    // A single sign change on a log grid.
    int changes = 0;
    double prev = at(1e-8);
    for (double l = 1e-8; l < 0.95; l *= 1.5) {
        const double d = at(l);
        changes += (d > 0) != (prev > 0) ? 1 : 0;
        prev = d;
    }
    EXPECT_EQ(changes, 1);
}

TEST(Bounds, PairwiseTwoPassBelowFlat)
{
    const double pw = pairwise_twopass_bounds(query(std::uint64_t{1} << 20)).bc.value;
    EXPECT_LT(pw, bc_twopass_bound(query(1000000)).value);
}

TEST(BiasPrediction, Textbook)
{
    const double u = 0x1.0p-7;
    const auto p = textbook_bias_prediction(10000, u, 1.0, 1.0);
    expect_rel(p.bound, 0.84093188658297018132, 1e-12);
    EXPECT_FALSE(p.bias.has_value());
    EXPECT_EQ(textbook_bias_prediction(10000, 0.0, 1.0, 1.0).bound, 0.0);
    const auto with_v = textbook_bias_prediction(100, u, 2.0, 1.5, 3.0);
    EXPECT_DOUBLE_EQ(*with_v.bias, -0.03);
    EXPECT_LE(*with_v.bias, 0.0);
    EXPECT_THROW(textbook_bias_prediction(10, u, 0.0, 1.0), DomainError);
}

TEST(BiasPrediction, TwoPass)
{
    const double u = 0x1.0p-7;
    const auto p = twopass_bias_prediction(10000, u, 1.0, 1.0, 4.0);
    expect_rel(p.bound, 0.84115661657166227626, 1e-12);
    EXPECT_DOUBLE_EQ(*p.bias, 4e-4);
    EXPECT_EQ(twopass_bias_prediction(10000, 0.0, 1.0, 1.0).bound, 0.0);
}

TEST(Asymptotic, TableCells)
{
    auto q = query(1000000);
    const double nu = 1e6 * kU24;
    EXPECT_DOUBLE_EQ(asymptotic_textbook_bound(AsymptoticRegime::SMALL_NU, TextbookBoundKind::DET, q), 3 * nu);
    EXPECT_DOUBLE_EQ(asymptotic_textbook_bound(AsymptoticRegime::SMALL_NU, TextbookBoundKind::DM, q),
                     (1 + std::sqrt(8.0)) * std::sqrt(std::log(40.0)) * 1000.0 * kU24);
    EXPECT_DOUBLE_EQ(asymptotic_textbook_bound(AsymptoticRegime::SMALL_NU, TextbookBoundKind::BC, q),
                     3 * std::sqrt(2 / 0.1) * 1000.0 * kU24);
    const double r = std::sqrt(kU24 * std::log(40.0));
    EXPECT_DOUBLE_EQ(asymptotic_textbook_bound(AsymptoticRegime::LARGE_NU, TextbookBoundKind::AH, q),
                     (1 + r) * r * std::exp((2e6 + 1) * kU24));
}

TEST(Asymptotic, ExactMatchesSmallNuFormsWithinOnePercent)
{
    // n u <= 1e-3 with u = 2^-23 means n <= 8388.
    for (const std::uint64_t n : {1000ull, 4000ull, 8000ull}) {
        for (const double lambda : {0.5, 0.1, 1e-3}) {
            auto q = query(n, lambda);
            q.k1 = 0.7;
            q.k2 = 1.3;
            expect_rel(det_textbook_bound(q).value,
                       asymptotic_textbook_bound(AsymptoticRegime::SMALL_NU, TextbookBoundKind::DET, q), 0.01);
            expect_rel(bc_textbook_bound(q).value,
                       asymptotic_textbook_bound(AsymptoticRegime::SMALL_NU, TextbookBoundKind::BC, q), 0.01);
        }
    }
}

TEST(Asymptotic, AhAndDmTableFormsAreUpToAConstant)
{
    // sqrt(u gamma_{2n}(u)) ~ sqrt(2n) u, so the exact leading terms carry extra sqrt(2) factors.
    for (const std::uint64_t n : {1000ull, 4000ull, 8000ull}) {
        for (const double lambda : {0.5, 0.1, 1e-3}) {
            auto q = query(n, lambda);
            q.k1 = 0.7;
            q.k2 = 1.3;
            const double base = std::sqrt(std::log(4.0 / lambda)) * std::sqrt(static_cast<double>(n)) * q.u;
            const double k1_sq = q.k1 * q.k1;
            const double k2_sq = q.k2 * q.k2;
            expect_rel(ah_textbook_bound(q).value, std::sqrt(2.0) * (k2_sq + 2.0 * k1_sq) * base, 0.01);
            expect_rel(dm_textbook_bound(q).value, (std::sqrt(2.0) * k2_sq + std::sqrt(8.0) * k1_sq) * base, 0.01);
            expect_rel(asymptotic_textbook_bound(AsymptoticRegime::SMALL_NU, TextbookBoundKind::AH, q),
                       (k2_sq + 2.0 * k1_sq) * base, 1e-12);
            expect_rel(asymptotic_textbook_bound(AsymptoticRegime::SMALL_NU, TextbookBoundKind::DM, q),
                       (k2_sq + std::sqrt(8.0) * k1_sq) * base, 1e-12);
        }
    }
}

TEST(BoundMethodNames, RoundTrip)
{
    for (const auto m : kAllBoundMethods)
        EXPECT_EQ(parse_bound_method(to_string(m)), m);
    EXPECT_FALSE(parse_bound_method("NOPE").has_value());
}
