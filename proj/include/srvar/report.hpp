#pragma once

// Tabular serialization of harness records (CSV and JSON) and the JSON
// experiment configuration. Column names and order are part of the
// interface consumed by the plotting scripts; change them only together.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "srvar/harness.hpp"

namespace srvar::report {

using nlohmann::json;

inline constexpr std::string_view kTrialsColumns = "algorithm,n,mode,trial,value,sum_hat,rel_error";

inline constexpr std::string_view kSummaryColumns =
    "algorithm,n,precision,u,repetitions,exact_value,mean_value,mean_rel_error,avg_trial_rel_error,"
    "rn_value,rn_rel_error,bias,bias_stderr,v_s_hat,kappa,k1,k2,bound_method,lambda,bound_value,"
    "holds_with_probability,coverage,by_analogy,bound_status,flags";

inline constexpr std::string_view kBoundsColumns =
    "n,u,lambda,kappa,k1,k2,method,value,holds_with_probability,by_analogy,status";

/// 17 significant digits, scientific notation; "inf"/"-inf"/"nan" otherwise.
inline std::string real(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

inline std::string real(const std::optional<double>& v)
{
    return v ? real(*v) : std::string{};
}

/// Quotes a CSV field when it contains a separator, quote or newline.
inline std::string field(std::string_view s)
{
    if (s.find_first_of(",\"\n") == std::string_view::npos)
        return std::string{s};
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Result of checking a CSV header against a documented column set.
struct SchemaReport
{
    std::vector<std::string> missing;
    std::vector<std::string> extra;

    [[nodiscard]] bool ok() const noexcept { return missing.empty(); }
};

inline std::vector<std::string> split_header(std::string_view header)
{
    while (!header.empty() && (header.back() == '\n' || header.back() == '\r'))
        header.remove_suffix(1);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= header.size()) {
        const std::size_t end = std::min(header.find(',', start), header.size());
        out.emplace_back(header.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

/// Missing columns fail the check; extra columns are only reported.
inline SchemaReport validate_header(std::string_view header, std::string_view expected)
{
    const auto have = split_header(header);
    const auto want = split_header(expected);
    SchemaReport r;
    for (const auto& c : want)
        if (std::find(have.begin(), have.end(), c) == have.end())
            r.missing.push_back(c);
    for (const auto& c : have)
        if (std::find(want.begin(), want.end(), c) == want.end())
            r.extra.push_back(c);
    return r;
}

inline void write_trials_csv(std::ostream& os, std::span<const TrialRecord> trials)
{
    os << kTrialsColumns << '\n';
    for (const auto& t : trials) {
        os << to_string(t.algorithm) << ',' << t.n << ',' << to_string(t.mode) << ',' << t.trial << ','
           << real(t.value) << ',' << real(t.sum_hat) << ',' << real(t.rel_error) << '\n';
    }
}

inline std::string join_flags(const std::vector<std::string>& flags)
{
    std::string out;
    for (const auto& f : flags) {
        if (!out.empty())
            out += ';';
        out += f;
    }
    return out;
}

inline void write_summary_csv(std::ostream& os, std::span<const SummaryRecord> summaries)
{
    os << kSummaryColumns << '\n';
    for (const auto& s : summaries) {
        const std::string prefix = std::string{to_string(s.algorithm)} + ',' + std::to_string(s.n) + ','
                                   + std::to_string(s.precision) + ',' + real(s.u) + ','
                                   + std::to_string(s.repetitions) + ',' + real(s.exact_value) + ','
                                   + real(s.mean_value) + ',' + real(s.mean_rel_error) + ','
                                   + real(s.avg_trial_rel_error) + ',' + real(s.rn_value) + ','
                                   + real(s.rn_rel_error) + ',' + real(s.bias) + ',' + real(s.bias_stderr) + ','
                                   + real(s.v_s_hat) + ',' + real(s.condition.kappa) + ','
                                   + real(s.condition.k1) + ',' + real(s.condition.k2);
        const std::string flags = field(join_flags(s.flags));
        if (s.bounds.empty()) {
            os << prefix << ",,,,,,,," << flags << '\n';
            continue;
        }
        for (const auto& b : s.bounds) {
            os << prefix << ',' << to_string(b.method) << ',' << real(b.lambda) << ',' << real(b.value) << ','
               << real(b.holds_with_probability) << ',' << real(b.coverage) << ',' << (b.by_analogy ? 1 : 0)
               << ',' << field(b.status) << ',' << flags << '\n';
        }
    }
}

/// One row of the bounds table.
struct BoundRow
{
    BoundQuery query;
    BoundMethod method{};
    std::optional<BoundValue> value;
    std::string status = "ok";
};

inline void write_bounds_csv(std::ostream& os, std::span<const BoundRow> rows)
{
    os << kBoundsColumns << '\n';
    for (const auto& r : rows) {
        os << r.query.n << ',' << real(r.query.u) << ',' << real(r.query.lambda) << ',' << real(r.query.kappa)
           << ',' << real(r.query.k1) << ',' << real(r.query.k2) << ',' << to_string(r.method) << ','
           << (r.value ? real(r.value->value) : std::string{}) << ','
           << (r.value ? real(r.value->holds_with_probability) : std::string{}) << ','
           << (r.value && r.value->by_analogy ? 1 : 0) << ',' << field(r.status) << '\n';
    }
}

/// Evaluates every method at every (n, lambda) point; failures are reported per cell.
inline std::vector<BoundRow> bounds_table(std::span<const std::uint64_t> n_values, double u,
                                          std::span<const double> lambdas, const ConditionReport& cond,
                                          std::span<const BoundMethod> methods)
{
    std::vector<BoundRow> rows;
    for (const auto n : n_values) {
        for (const double lambda : lambdas) {
            for (const auto m : methods) {
                BoundRow row;
                row.query = BoundQuery{n, u, lambda, cond.kappa, cond.k1, cond.k2};
                row.method = m;
                try {
                    row.value = evaluate_bound(m, row.query);
                    if (row.value->regime_warning)
                        row.status = "warning: n*u^2 >= 1";
                } catch (const Error& e) {
                    row.status = std::string{"error: "} + e.what();
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

inline json optional_json(const std::optional<double>& v)
{
    if (!v || !std::isfinite(*v))
        return nullptr;
    return *v;
}

inline json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

inline json to_json(const TrialRecord& t)
{
    return json{{"algorithm", to_string(t.algorithm)},
                {"n", t.n},
                {"mode", to_string(t.mode)},
                {"trial", t.trial},
                {"value", t.value},
                {"sum_hat", t.sum_hat},
                {"rel_error", optional_json(t.rel_error)}};
}

inline json to_json(const SummaryRecord& s)
{
    json bounds = json::array();
    for (const auto& b : s.bounds) {
        bounds.push_back(json{{"method", to_string(b.method)},
                              {"lambda", b.lambda},
                              {"value", optional_json(b.value)},
                              {"holds_with_probability", b.holds_with_probability},
                              {"coverage", optional_json(b.coverage)},
                              {"by_analogy", b.by_analogy},
                              {"status", b.status}});
    }
    return json{{"algorithm", to_string(s.algorithm)},
                {"n", s.n},
                {"precision", s.precision},
                {"u", s.u},
                {"repetitions", s.repetitions},
                {"exact_value", s.exact_value},
                {"mean_value", optional_json(s.mean_value)},
                {"mean_rel_error", optional_json(s.mean_rel_error)},
                {"avg_trial_rel_error", optional_json(s.avg_trial_rel_error)},
                {"rn_value", optional_json(s.rn_value)},
                {"rn_rel_error", optional_json(s.rn_rel_error)},
                {"bias", optional_json(s.bias)},
                {"bias_stderr", optional_json(s.bias_stderr)},
                {"v_s_hat", optional_json(s.v_s_hat)},
                {"kappa", finite_or_null(s.condition.kappa)},
                {"k1", finite_or_null(s.condition.k1)},
                {"k2", finite_or_null(s.condition.k2)},
                {"bounds", bounds},
                {"flags", s.flags}};
}

inline json to_json(const ExperimentConfig& cfg)
{
    json algos = json::array();
    for (const auto a : cfg.algorithms)
        algos.push_back(to_string(a));
    return json{{"dataset",
                 {{"distribution", "uniform"},
                  {"lo", cfg.dataset.lo},
                  {"hi", cfg.dataset.hi},
                  {"n", cfg.dataset.n},
                  {"seed", cfg.dataset.seed}}},
                {"precision", cfg.precision},
                {"repetitions", cfg.repetitions},
                {"algorithms", algos},
                {"lambdas", cfg.lambdas},
                {"master_seed", cfg.master_seed},
                {"include_rn", cfg.include_rn},
                {"threads", cfg.threads}};
}

/// Reads an experiment configuration; absent keys keep their defaults.
/// Throws InvalidInput on unknown names or wrongly typed values.
inline ExperimentConfig config_from_json(const json& j)
{
    ExperimentConfig cfg;
    try {
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            const std::string dist = d.value("distribution", std::string{"uniform"});
            if (dist != "uniform")
                throw InvalidInput("unsupported distribution '" + dist + "'");
            cfg.dataset.lo = d.value("lo", cfg.dataset.lo);
            cfg.dataset.hi = d.value("hi", cfg.dataset.hi);
            cfg.dataset.n = d.value("n", cfg.dataset.n);
            cfg.dataset.seed = d.value("seed", cfg.dataset.seed);
        }
        cfg.precision = j.value("precision", cfg.precision);
        cfg.repetitions = j.value("repetitions", cfg.repetitions);
        if (j.contains("algorithms")) {
            cfg.algorithms.clear();
            for (const auto& name : j.at("algorithms")) {
                const auto a = parse_algorithm(name.get<std::string>());
                if (!a)
                    throw InvalidInput("unknown algorithm '" + name.get<std::string>() + "'");
                cfg.algorithms.push_back(*a);
            }
        }
        if (j.contains("lambdas"))
            cfg.lambdas = j.at("lambdas").get<std::vector<double>>();
        cfg.master_seed = j.value("master_seed", cfg.master_seed);
        cfg.include_rn = j.value("include_rn", cfg.include_rn);
        cfg.threads = j.value("threads", cfg.threads);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string{"malformed configuration: "} + e.what());
    }
    return cfg;
}

inline SweepGrid sweep_from_json(const json& j)
{
    SweepGrid grid;
    if (!j.contains("sweep"))
        return grid;
    try {
        const auto& s = j.at("sweep");
        if (s.contains("n"))
            grid.n_values = s.at("n").get<std::vector<std::uint64_t>>();
        if (s.contains("lambdas"))
            grid.lambdas = s.at("lambdas").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string{"malformed sweep section: "} + e.what());
    }
    return grid;
}

inline json to_json(const SweepGrid& grid)
{
    return json{{"n", grid.n_values}, {"lambdas", grid.lambdas}};
}

} // namespace srvar::report
