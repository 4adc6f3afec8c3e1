#pragma once

// Seeded Monte Carlo experiments: datasets, repeated SR evaluations of the
// kernels, forward errors against the exact oracle, bound coverage and
// empirical bias. Records are returned in memory; serialization lives in
// report.hpp.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "srvar/algorithms.hpp"
#include "srvar/bounds.hpp"
#include "srvar/fp_core.hpp"
#include "srvar/oracle.hpp"

namespace srvar {

enum class Distribution { UNIFORM };

struct DatasetSpec
{
    Distribution distribution = Distribution::UNIFORM;
    double lo = 0.0;
    double hi = 1.0;
    std::uint64_t n = 1000;
    std::uint64_t seed = 1;
};

/// n uniform draws on [lo, hi], each projected onto the format grid (RN).
inline std::vector<FpValue> generate_dataset(const DatasetSpec& spec, FpFormat fmt)
{
    if (!std::isfinite(spec.lo) || !std::isfinite(spec.hi) || !(spec.lo < spec.hi))
        throw InvalidInput("dataset interval must satisfy lo < hi");
    if (spec.n == 0)
        throw InvalidInput("dataset size must be positive");
    // Stream id 0 of the dataset seed is reserved for data generation.
    RandomStream rng{spec.seed, 0};
    std::vector<FpValue> out;
    out.reserve(spec.n);
    const double width = spec.hi - spec.lo;
    for (std::uint64_t i = 0; i < spec.n; ++i)
        out.push_back(quantize_input(spec.lo + width * rng.next_uniform(), fmt));
    return out;
}

enum class Algorithm {
    SUM_RECURSIVE,
    SUM_PAIRWISE,
    TEXTBOOK_RECURSIVE,
    TEXTBOOK_PAIRWISE,
    TWOPASS_RECURSIVE,
    TWOPASS_PAIRWISE,
};

inline constexpr std::array kAllAlgorithms{
    Algorithm::SUM_RECURSIVE,     Algorithm::SUM_PAIRWISE,      Algorithm::TEXTBOOK_RECURSIVE,
    Algorithm::TEXTBOOK_PAIRWISE, Algorithm::TWOPASS_RECURSIVE, Algorithm::TWOPASS_PAIRWISE,
};

inline constexpr std::string_view to_string(Algorithm a) noexcept
{
    switch (a) {
    case Algorithm::SUM_RECURSIVE: return "sum_recursive";
    case Algorithm::SUM_PAIRWISE: return "sum_pairwise";
    case Algorithm::TEXTBOOK_RECURSIVE: return "textbook_recursive";
    case Algorithm::TEXTBOOK_PAIRWISE: return "textbook_pairwise";
    case Algorithm::TWOPASS_RECURSIVE: return "two_pass_recursive";
    case Algorithm::TWOPASS_PAIRWISE: return "two_pass_pairwise";
    }
    return "unknown";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view name) noexcept
{
    for (const auto a : kAllAlgorithms)
        if (to_string(a) == name)
            return a;
    return std::nullopt;
}

inline bool is_sum(Algorithm a) noexcept
{
    return a == Algorithm::SUM_RECURSIVE || a == Algorithm::SUM_PAIRWISE;
}

inline SummationScheme scheme_of(Algorithm a) noexcept
{
    switch (a) {
    case Algorithm::SUM_PAIRWISE:
    case Algorithm::TEXTBOOK_PAIRWISE:
    case Algorithm::TWOPASS_PAIRWISE: return SummationScheme::PAIRWISE;
    default: return SummationScheme::RECURSIVE;
    }
}

/// Bounds that apply to the error of an algorithm.
inline std::vector<BoundMethod> applicable_bounds(Algorithm a)
{
    using M = BoundMethod;
    switch (a) {
    case Algorithm::SUM_RECURSIVE: return {M::BC_RECURSIVE_SUM, M::AH_RECURSIVE_SUM};
    case Algorithm::SUM_PAIRWISE: return {M::BC_PAIRWISE_SUM, M::AH_PAIRWISE_SUM, M::HI_PAIRWISE_SUM};
    case Algorithm::TEXTBOOK_RECURSIVE: return {M::DET_TEXTBOOK, M::BC_TEXTBOOK, M::AH_TEXTBOOK, M::DM_TEXTBOOK};
    case Algorithm::TEXTBOOK_PAIRWISE: return {M::BC_PAIRWISE_TEXTBOOK, M::AH_PAIRWISE_TEXTBOOK};
    case Algorithm::TWOPASS_RECURSIVE: return {M::BC_TWOPASS, M::AH_TWOPASS};
    case Algorithm::TWOPASS_PAIRWISE: return {M::BC_PAIRWISE_TWOPASS, M::AH_PAIRWISE_TWOPASS};
    }
    return {};
}

/// Result of one evaluation: the estimate and the s-hat computed on the way.
inline VarianceResult evaluate(Algorithm a, std::span<const FpValue> x, FpFormat fmt, RoundingContext& ctx)
{
    Arithmetic arith{fmt, ctx};
    switch (a) {
    case Algorithm::SUM_RECURSIVE:
    case Algorithm::SUM_PAIRWISE: {
        const FpValue s = sum(x, scheme_of(a), arith);
        return {s, s};
    }
    case Algorithm::TEXTBOOK_RECURSIVE:
    case Algorithm::TEXTBOOK_PAIRWISE: return textbook_variance_with_sum(x, scheme_of(a), arith);
    case Algorithm::TWOPASS_RECURSIVE:
    case Algorithm::TWOPASS_PAIRWISE: return two_pass_variance_with_sum(x, scheme_of(a), arith);
    }
    throw InvalidInput("unknown algorithm");
}

struct ExperimentConfig
{
    DatasetSpec dataset;
    int precision = 24;
    /// SR repetitions; 0 runs no SR trials (bounds and the RN run only).
    std::uint64_t repetitions = 30;
    std::vector<Algorithm> algorithms{Algorithm::TEXTBOOK_RECURSIVE};
    std::vector<double> lambdas{0.1};
    std::uint64_t master_seed = 42;
    bool include_rn = true;
    /// Worker threads for the trials; results do not depend on it.
    unsigned threads = 1;
};

/// Random stream of SR trial `trial` of algorithm `a`.
inline RandomStream trial_stream(std::uint64_t master_seed, std::uint64_t trial, Algorithm a) noexcept
{
    return RandomStream{master_seed, 0}.substream(trial).substream(static_cast<std::uint64_t>(a));
}

struct TrialRecord
{
    std::uint64_t n = 0;
    Algorithm algorithm{};
    RoundingMode mode = RoundingMode::SR_NEARNESS;
    std::uint64_t trial = 0;
    double value = 0.0;
    double sum_hat = 0.0;
    std::optional<double> rel_error; ///< absent when the exact value is zero
};

struct BoundEntry
{
    BoundMethod method{};
    double lambda = 0.0;
    std::optional<double> value;
    double holds_with_probability = 0.0;
    std::optional<double> coverage; ///< fraction of SR trials with error <= value
    bool by_analogy = false;
    std::string status = "ok";
};

struct SummaryRecord
{
    Algorithm algorithm{};
    std::uint64_t n = 0;
    int precision = 24;
    double u = 0.0;
    std::uint64_t repetitions = 0;
    double exact_value = 0.0;
    bool exact_is_zero = false;
    std::optional<double> mean_value;           ///< mean of the R SR estimates
    std::optional<double> mean_rel_error;       ///< relative error of that mean
    std::optional<double> avg_trial_rel_error;  ///< mean of the per-trial relative errors
    std::optional<double> rn_value;
    std::optional<double> rn_rel_error;
    std::optional<double> bias;                 ///< mean estimate minus exact value
    std::optional<double> bias_stderr;
    std::optional<double> v_s_hat;              ///< sample variance of s-hat over the trials
    ConditionReport condition;
    std::vector<BoundEntry> bounds;
    std::vector<std::string> flags;
};

struct ExperimentResult
{
    std::vector<TrialRecord> trials;
    std::vector<SummaryRecord> summaries;
};

namespace detail {

/// Runs fn(i) for i in [0, count) on `threads` workers. The assignment of
/// indices to workers does not affect any output slot.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn)
{
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard lock{failure_mutex};
                    if (!failure)
                        failure = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

inline void validate(const ExperimentConfig& cfg)
{
    if (cfg.algorithms.empty())
        throw InvalidInput("no algorithms selected");
    for (const double l : cfg.lambdas)
        if (!(l > 0.0 && l < 1.0))
            throw InvalidInput("every lambda must lie in (0, 1)");
    if (cfg.repetitions == 0 && !cfg.include_rn)
        throw InvalidInput("nothing to run: zero repetitions and no RN run");
}

inline BoundQuery query_for(std::uint64_t n, double u, double lambda, const ConditionReport& c)
{
    return BoundQuery{n, u, lambda, c.kappa, c.k1, c.k2};
}

} // namespace detail

/// Runs every configured algorithm on a given dataset.
inline ExperimentResult run_experiment_on(std::span<const FpValue> data, const ExperimentConfig& cfg)
{
    detail::validate(cfg);
    const FpFormat fmt{cfg.precision};
    const double u = fmt.unit_roundoff();
    const std::uint64_t n = data.size();
    const ExactValue s_exact = exact_sum(data);
    const ExactValue y_exact = exact_variance(data);
    const ConditionReport cond = condition_numbers(data);

    ExperimentResult result;
    for (const Algorithm algo : cfg.algorithms) {
        const ExactValue& exact = is_sum(algo) ? s_exact : y_exact;
        const bool exact_zero = exact.is_zero();

        std::vector<TrialRecord> trials(cfg.repetitions);
        detail::parallel_for(trials.size(), cfg.threads, [&](std::size_t t) {
            RoundingContext ctx{RoundingMode::SR_NEARNESS, trial_stream(cfg.master_seed, t, algo)};
            const auto r = evaluate(algo, data, fmt, ctx);
            TrialRecord& rec = trials[t];
            rec.n = n;
            rec.algorithm = algo;
            rec.trial = t;
            rec.value = r.value.value();
            rec.sum_hat = r.sum.value();
            if (!exact_zero)
                rec.rel_error = relative_error(r.value, exact);
        });

        SummaryRecord sum_rec;
        sum_rec.algorithm = algo;
        sum_rec.n = n;
        sum_rec.precision = cfg.precision;
        sum_rec.u = u;
        sum_rec.repetitions = cfg.repetitions;
        sum_rec.exact_value = exact.to_double();
        sum_rec.exact_is_zero = exact_zero;
        sum_rec.condition = cond;
        if (exact_zero)
            sum_rec.flags.emplace_back("exact_zero");

        if (!trials.empty()) {
            long double total = 0;
            long double err_total = 0;
            std::vector<double> diffs;
            std::vector<double> sums;
            diffs.reserve(trials.size());
            sums.reserve(trials.size());
            for (const auto& t : trials) {
                total += t.value;
                diffs.push_back(t.value - sum_rec.exact_value);
                sums.push_back(t.sum_hat);
                if (t.rel_error)
                    err_total += *t.rel_error;
            }
            const double mean = static_cast<double>(total / trials.size());
            sum_rec.mean_value = mean;
            if (!exact_zero) {
                sum_rec.mean_rel_error = relative_error(mean, exact);
                sum_rec.avg_trial_rel_error = static_cast<double>(err_total / trials.size());
            }
            if (trials.size() >= 2) {
                const Moments dm = empirical_moments(std::span<const double>{diffs});
                sum_rec.bias = dm.mean;
                sum_rec.bias_stderr = dm.stderr_mean;
                sum_rec.v_s_hat = empirical_moments(std::span<const double>{sums}).variance;
            }
        }

        if (cfg.include_rn) {
            auto ctx = RoundingContext::rn();
            const auto r = evaluate(algo, data, fmt, ctx);
            TrialRecord rec;
            rec.n = n;
            rec.algorithm = algo;
            rec.mode = RoundingMode::RN;
            rec.value = r.value.value();
            rec.sum_hat = r.sum.value();
            sum_rec.rn_value = rec.value;
            if (!exact_zero) {
                rec.rel_error = relative_error(r.value, exact);
                sum_rec.rn_rel_error = rec.rel_error;
            }
            trials.push_back(rec);
        }

        for (const double lambda : cfg.lambdas) {
            for (const BoundMethod m : applicable_bounds(algo)) {
                BoundEntry e;
                e.method = m;
                e.lambda = lambda;
                try {
                    const BoundValue b = evaluate_bound(m, detail::query_for(n, u, lambda, cond));
                    e.value = b.value;
                    e.holds_with_probability = b.holds_with_probability;
                    e.by_analogy = b.by_analogy;
                    if (b.regime_warning)
                        e.status = "warning: n*u^2 >= 1";
                } catch (const Error& err) {
                    e.status = std::string{"undefined: "} + err.what();
                }
                if (e.value && !exact_zero && cfg.repetitions > 0) {
                    std::size_t covered = 0;
                    for (std::uint64_t t = 0; t < cfg.repetitions; ++t)
                        covered += *trials[t].rel_error <= *e.value ? 1 : 0;
                    e.coverage = static_cast<double>(covered) / static_cast<double>(cfg.repetitions);
                }
                sum_rec.bounds.push_back(std::move(e));
            }
        }

        result.trials.insert(result.trials.end(), trials.begin(), trials.end());
        result.summaries.push_back(std::move(sum_rec));
    }
    return result;
}

/// Generates the configured dataset and runs every algorithm on it.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    const FpFormat fmt{cfg.precision};
    const auto data = generate_dataset(cfg.dataset, fmt);
    return run_experiment_on(data, cfg);
}

/// Parameter grid of a sweep. A non-empty n grid runs one experiment per n;
/// a non-empty lambda grid replaces the configured lambdas.
struct SweepGrid
{
    std::vector<std::uint64_t> n_values;
    std::vector<double> lambdas;
};

inline ExperimentResult coverage_sweep(ExperimentConfig cfg, const SweepGrid& grid)
{
    if (grid.n_values.empty() && grid.lambdas.empty())
        throw InvalidInput("sweep grid is empty");
    if (!grid.lambdas.empty())
        cfg.lambdas = grid.lambdas;
    if (grid.n_values.empty())
        return run_experiment(cfg);
    ExperimentResult out;
    for (const std::uint64_t n : grid.n_values) {
        cfg.dataset.n = n;
        auto r = run_experiment(cfg);
        out.trials.insert(out.trials.end(), r.trials.begin(), r.trials.end());
        out.summaries.insert(out.summaries.end(), r.summaries.begin(), r.summaries.end());
    }
    return out;
}

/// Textbook vs two-pass (recursive) over an n grid, with the RN reference.
inline ExperimentResult stagnation_demo(ExperimentConfig cfg, const std::vector<std::uint64_t>& n_values)
{
    cfg.algorithms = {Algorithm::TEXTBOOK_RECURSIVE, Algorithm::TWOPASS_RECURSIVE};
    cfg.include_rn = true;
    return coverage_sweep(std::move(cfg), SweepGrid{n_values, {}});
}

/// Defaults of the stagnation experiment: data on [1024, 1025], binary32 significand.
inline ExperimentConfig stagnation_config()
{
    ExperimentConfig cfg;
    cfg.dataset.lo = 1024.0;
    cfg.dataset.hi = 1025.0;
    cfg.precision = 24;
    cfg.repetitions = 30;
    return cfg;
}

struct BiasEstimate
{
    double bias = 0.0;     ///< mean(estimate) - exact
    double std_error = 0.0;  ///< standard error of that mean
};

struct BiasReport
{
    std::uint64_t n = 0;
    double u = 0.0;
    std::uint64_t repetitions = 0;
    double exact_sum = 0.0;
    double exact_variance = 0.0;
    double k1 = 0.0;
    BiasEstimate sum;
    BiasEstimate textbook;
    BiasEstimate two_pass;
    double v_s_hat = 0.0;
    double predicted_textbook_bias = 0.0; ///< -V(s-hat)/n
    double predicted_twopass_bias = 0.0;  ///< +V(s-hat)/n
    std::optional<double> textbook_bias_bound;
    std::optional<double> twopass_bias_bound;
    bool textbook_negative = false;  ///< bias below -3 standard errors
    bool twopass_positive = false;   ///< bias above +3 standard errors
    bool sum_unbiased = false;       ///< |bias| within 4 standard errors
};

inline constexpr std::uint64_t kMinBiasRepetitions = 1000;

/// Empirical bias of s-hat, y-hat and z-hat over `repetitions` SR runs on `data`.
inline BiasReport empirical_bias(std::span<const FpValue> data, int precision, std::uint64_t repetitions,
                                 std::uint64_t master_seed, SummationScheme scheme = SummationScheme::RECURSIVE,
                                 unsigned threads = 1)
{
    if (repetitions < kMinBiasRepetitions)
        throw InvalidInput("bias estimation needs at least 1000 repetitions");
    const bool pairwise = scheme == SummationScheme::PAIRWISE;
    const Algorithm sum_algo = pairwise ? Algorithm::SUM_PAIRWISE : Algorithm::SUM_RECURSIVE;
    const Algorithm tb_algo = pairwise ? Algorithm::TEXTBOOK_PAIRWISE : Algorithm::TEXTBOOK_RECURSIVE;
    const Algorithm tp_algo = pairwise ? Algorithm::TWOPASS_PAIRWISE : Algorithm::TWOPASS_RECURSIVE;

    ExperimentConfig cfg;
    cfg.precision = precision;
    cfg.repetitions = repetitions;
    cfg.algorithms = {sum_algo, tb_algo, tp_algo};
    cfg.lambdas = {};
    cfg.master_seed = master_seed;
    cfg.include_rn = false;
    cfg.threads = threads;
    const auto result = run_experiment_on(data, cfg);

    BiasReport rep;
    rep.n = data.size();
    rep.u = FpFormat{precision}.unit_roundoff();
    rep.repetitions = repetitions;
    const auto& s = result.summaries[0];
    const auto& tb = result.summaries[1];
    const auto& tp = result.summaries[2];
    rep.exact_sum = s.exact_value;
    rep.exact_variance = tb.exact_value;
    rep.k1 = tb.condition.k1;
    rep.sum = {*s.bias, *s.bias_stderr};
    rep.textbook = {*tb.bias, *tb.bias_stderr};
    rep.two_pass = {*tp.bias, *tp.bias_stderr};
    rep.v_s_hat = *tb.v_s_hat;
    rep.predicted_textbook_bias = -rep.v_s_hat / static_cast<double>(rep.n);
    rep.predicted_twopass_bias = rep.v_s_hat / static_cast<double>(rep.n);
    if (rep.exact_variance > 0.0) {
        rep.textbook_bias_bound = textbook_bias_prediction(rep.n, rep.u, rep.exact_variance, rep.k1).bound;
        rep.twopass_bias_bound = twopass_bias_prediction(rep.n, rep.u, rep.exact_variance, rep.k1).bound;
    }
    rep.textbook_negative = rep.textbook.bias < -3.0 * rep.textbook.std_error;
    rep.twopass_positive = rep.two_pass.bias > 3.0 * rep.two_pass.std_error;
    rep.sum_unbiased = std::fabs(rep.sum.bias) <= 4.0 * rep.sum.std_error;
    return rep;
}

inline BiasReport empirical_bias(const ExperimentConfig& cfg, SummationScheme scheme = SummationScheme::RECURSIVE)
{
    const FpFormat fmt{cfg.precision};
    const auto data = generate_dataset(cfg.dataset, fmt);
    return empirical_bias(data, cfg.precision, cfg.repetitions, cfg.master_seed, scheme, cfg.threads);
}

} // namespace srvar
