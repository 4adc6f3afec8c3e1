#pragma once

// Command-line front end: round, sum, variance, bounds-table, experiment,
// figures-data. Kept header-only so tests can drive it in-process.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical-domain error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "srvar/bounds.hpp"
#include "srvar/harness.hpp"
#include "srvar/report.hpp"

namespace srvar::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

inline constexpr const char* kOutputDirEnv = "SRVAR_OUTPUT_DIR";
inline constexpr const char* kVersion = "1.0.0";

class ConfigError : public Error
{
public:
    using Error::Error;
};

enum class OutputFormat { CSV, JSON };

inline std::filesystem::path default_output_dir()
{
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0')
        return env;
    return ".";
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in{path, std::ios::binary};
    if (!in)
        throw ConfigError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out{path, std::ios::binary | std::ios::trunc};
    if (!out)
        throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
}

/// Figure ids with a canned configuration.
inline const std::vector<std::string>& figure_ids()
{
    static const std::vector<std::string> ids{"fig2", "fig3_left", "fig3_right", "fig4_left", "fig4_right"};
    return ids;
}

struct FigurePlan
{
    std::string id;
    bool bounds_only = false;
    ExperimentConfig config;
    SweepGrid sweep;
    // Bound-curve grid for bounds_only figures.
    std::vector<std::uint64_t> bound_n;
    std::vector<BoundMethod> bound_methods;
    double bound_u = 0x1.0p-23;
    double bound_lambda = 0.1;
};

inline std::vector<std::uint64_t> decades(std::uint64_t from, std::uint64_t to)
{
    std::vector<std::uint64_t> out;
    for (std::uint64_t n = from; n <= to; n *= 10)
        out.push_back(n);
    return out;
}

/// Canned configurations reproducing the published figures' parameters.
inline FigurePlan figure_plan(const std::string& id)
{
    FigurePlan plan;
    plan.id = id;
    ExperimentConfig& cfg = plan.config;
    cfg.precision = 24;
    cfg.repetitions = 30;
    cfg.include_rn = true;
    cfg.lambdas = {0.1};
    if (id == "fig2") {
        plan.bounds_only = true;
        for (unsigned k = 10; k <= 30; ++k)
            plan.bound_n.push_back(std::uint64_t{1} << k);
        plan.bound_methods = {BoundMethod::AH_PAIRWISE_SUM, BoundMethod::HI_PAIRWISE_SUM, BoundMethod::BC_PAIRWISE_SUM};
    } else if (id == "fig3_left") {
        cfg.dataset = {Distribution::UNIFORM, 0.0, 1.0, 1000000, 1};
        cfg.algorithms = {Algorithm::TEXTBOOK_RECURSIVE};
        plan.sweep.n_values = decades(100, 1000000);
    } else if (id == "fig3_right") {
        cfg.dataset = {Distribution::UNIFORM, 0.0, 1.0, 1000000, 1};
        cfg.algorithms = {Algorithm::TEXTBOOK_RECURSIVE};
        plan.sweep.lambdas = {0.9, 0.7, 0.5, 0.3, 0.1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    } else if (id == "fig4_left" || id == "fig4_right") {
        const bool right = id == "fig4_right";
        cfg.dataset = {Distribution::UNIFORM, right ? 1024.0 : -1.0, right ? 1025.0 : 1.0, 1000000, 1};
        cfg.algorithms = {Algorithm::TEXTBOOK_RECURSIVE, Algorithm::TWOPASS_RECURSIVE};
        plan.sweep.n_values = decades(100, 1000000);
    } else {
        throw ConfigError("unknown figure id '" + id + "'");
    }
    return plan;
}

/// Resolved parameters shared by experiment and figures-data.
struct Overrides
{
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> reps;
    std::optional<int> precision;
    std::vector<double> lambdas;
    std::optional<unsigned> threads;

    void apply(ExperimentConfig& cfg) const
    {
        if (seed)
            cfg.master_seed = *seed;
        if (reps)
            cfg.repetitions = *reps;
        if (precision)
            cfg.precision = *precision;
        if (!lambdas.empty())
            cfg.lambdas = lambdas;
        if (threads)
            cfg.threads = *threads;
    }
};

inline void validate_config(const ExperimentConfig& cfg)
{
    if (cfg.precision < FpFormat::kMinPrecision || cfg.precision > FpFormat::kMaxPrecision)
        throw ConfigError("precision must lie in [2, 24]");
    if (!(cfg.dataset.lo < cfg.dataset.hi))
        throw ConfigError("dataset interval must satisfy lo < hi");
    if (cfg.dataset.n == 0)
        throw ConfigError("dataset size must be positive");
    if (cfg.algorithms.empty())
        throw ConfigError("no algorithms selected");
    for (const double l : cfg.lambdas)
        if (!(l > 0.0 && l < 1.0))
            throw ConfigError("lambda must lie in (0, 1)");
    if (cfg.repetitions == 0 && !cfg.include_rn)
        throw ConfigError("nothing to run: zero repetitions and no RN run");
}

inline std::string trials_text(const ExperimentResult& r, OutputFormat fmt)
{
    std::ostringstream os;
    if (fmt == OutputFormat::CSV) {
        report::write_trials_csv(os, r.trials);
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : r.trials)
            arr.push_back(report::to_json(t));
        os << arr.dump(2) << '\n';
    }
    return os.str();
}

inline std::string summary_text(const ExperimentResult& r, OutputFormat fmt)
{
    std::ostringstream os;
    if (fmt == OutputFormat::CSV) {
        report::write_summary_csv(os, r.summaries);
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& s : r.summaries)
            arr.push_back(report::to_json(s));
        os << arr.dump(2) << '\n';
    }
    return os.str();
}

inline const char* extension(OutputFormat fmt)
{
    return fmt == OutputFormat::CSV ? ".csv" : ".json";
}

inline const char* format_name(OutputFormat fmt)
{
    return fmt == OutputFormat::CSV ? "csv" : "json";
}

/// Runs the experiment described by (cfg, sweep) and writes trials, summary and manifest.
inline void write_experiment(const std::filesystem::path& dir, const ExperimentConfig& cfg, const SweepGrid& sweep,
                             OutputFormat fmt, nlohmann::json manifest)
{
    validate_config(cfg);
    const bool has_sweep = !sweep.n_values.empty() || !sweep.lambdas.empty();
    const ExperimentResult r = has_sweep ? coverage_sweep(cfg, sweep) : run_experiment(cfg);
    const std::string ext = extension(fmt);
    write_file(dir / ("trials" + ext), trials_text(r, fmt));
    write_file(dir / ("summary" + ext), summary_text(r, fmt));
    manifest["tool"] = "srvar";
    manifest["version"] = kVersion;
    manifest["format"] = format_name(fmt);
    manifest["config"] = report::to_json(cfg);
    if (has_sweep)
        manifest["config"]["sweep"] = report::to_json(sweep);
    manifest["outputs"] = {"trials" + ext, "summary" + ext};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline std::vector<FpValue> read_values(const std::filesystem::path& path, FpFormat fmt, bool& quantized)
{
    std::istringstream in{read_file(path)};
    std::vector<FpValue> out;
    std::string token;
    quantized = false;
    while (in >> token) {
        double x = 0.0;
        try {
            std::size_t used = 0;
            x = std::stod(token, &used);
            if (used != token.size())
                throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw ConfigError("not a number in input file: '" + token + "'");
        }
        const FpValue v = quantize_input(x, fmt);
        quantized = quantized || v.value() != x;
        out.push_back(v);
    }
    if (out.empty())
        throw ConfigError("input file holds no values");
    return out;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Stochastic rounding emulation, variance kernels, error bounds and experiments", "srvar"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string output_dir = default_output_dir().string();
    std::string format_str = "csv";
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-o,--output", output_dir, "Output directory (default from $SRVAR_OUTPUT_DIR or .)");
        sub->add_option("--format", format_str, "Output format")->check(CLI::IsMember({"csv", "json"}));
    };

    // round
    auto* round_cmd = app.add_subcommand("round", "Inspect one SR/RN rounding of x");
    double round_x = 0.0;
    int round_p = 24;
    std::string round_mode = "sr";
    std::uint64_t round_seed = 42;
    std::uint64_t round_draws = 10000;
    round_cmd->add_option("x", round_x, "Value to round")->required();
    round_cmd->add_option("-p,--precision", round_p, "Significand bits");
    round_cmd->add_option("--mode", round_mode)->check(CLI::IsMember({"sr", "rn"}));
    round_cmd->add_option("--seed", round_seed);
    round_cmd->add_option("--draws", round_draws);

    // sum / variance share the data options
    struct DataOptions
    {
        std::string input;
        DatasetSpec dataset;
        int precision = 24;
        std::string mode = "both";
        std::uint64_t seed = 42;
        std::uint64_t reps = 1;
        std::string scheme = "recursive";
    };
    DataOptions sum_opts;
    DataOptions var_opts;
    std::string var_algorithm = "two-pass";
    auto add_data = [](CLI::App* sub, DataOptions& o) {
        sub->add_option("--input", o.input, "File of whitespace-separated values (quantized with RN)");
        sub->add_option("--n", o.dataset.n, "Generated dataset size");
        sub->add_option("--lo", o.dataset.lo, "Lower end of the uniform interval");
        sub->add_option("--hi", o.dataset.hi, "Upper end of the uniform interval");
        sub->add_option("--data-seed", o.dataset.seed, "Dataset seed");
        sub->add_option("-p,--precision", o.precision, "Significand bits");
        sub->add_option("--mode", o.mode)->check(CLI::IsMember({"sr", "rn", "both"}));
        sub->add_option("--seed", o.seed, "Master seed of the SR trials");
        sub->add_option("--reps", o.reps, "SR repetitions");
        sub->add_option("--scheme", o.scheme)->check(CLI::IsMember({"recursive", "pairwise"}));
    };
    auto* sum_cmd = app.add_subcommand("sum", "Sum a dataset under SR and/or RN");
    add_data(sum_cmd, sum_opts);
    auto* var_cmd = app.add_subcommand("variance", "Variance of a dataset under SR and/or RN");
    add_data(var_cmd, var_opts);
    var_cmd->add_option("--algorithm", var_algorithm)->check(CLI::IsMember({"textbook", "two-pass"}));

    // bounds-table
    auto* bounds_cmd = app.add_subcommand("bounds-table", "Evaluate every error bound on a grid");
    std::vector<std::uint64_t> bt_n{1000000};
    std::vector<double> bt_lambda{0.1};
    std::optional<double> bt_u;
    int bt_p = 24;
    double bt_kappa = 1.0;
    double bt_k1 = 1.0;
    double bt_k2 = 1.0;
    bool bt_from_data = false;
    DatasetSpec bt_data;
    std::vector<std::string> bt_methods;
    bounds_cmd->add_option("--n", bt_n, "Problem sizes")->expected(1, -1);
    bounds_cmd->add_option("--lambda", bt_lambda, "Failure probabilities")->expected(1, -1);
    bounds_cmd->add_option("--u", bt_u, "Unit roundoff (overrides --precision)");
    bounds_cmd->add_option("-p,--precision", bt_p, "Significand bits; u = 2^(1-p)");
    bounds_cmd->add_option("--kappa", bt_kappa);
    bounds_cmd->add_option("--k1", bt_k1);
    bounds_cmd->add_option("--k2", bt_k2);
    bounds_cmd->add_flag("--from-dataset", bt_from_data, "Take condition numbers from a generated dataset");
    bounds_cmd->add_option("--lo", bt_data.lo);
    bounds_cmd->add_option("--hi", bt_data.hi);
    bounds_cmd->add_option("--data-n", bt_data.n);
    bounds_cmd->add_option("--data-seed", bt_data.seed);
    bounds_cmd->add_option("--methods", bt_methods, "Subset of methods (default: all)");
    bool bt_stdout = false;
    bounds_cmd->add_flag("--stdout", bt_stdout, "Also print the table");
    add_common(bounds_cmd);

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "Run a configured Monte Carlo experiment");
    std::string exp_config;
    Overrides exp_over;
    exp_cmd->add_option("-c,--config", exp_config, "JSON configuration or manifest")->required();
    exp_cmd->add_option("--seed", exp_over.seed, "Master seed");
    exp_cmd->add_option("--reps", exp_over.reps, "SR repetitions");
    exp_cmd->add_option("--precision", exp_over.precision, "Significand bits");
    exp_cmd->add_option("--lambda", exp_over.lambdas, "Failure probabilities")->expected(1, -1);
    exp_cmd->add_option("--threads", exp_over.threads, "Worker threads");
    add_common(exp_cmd);

    // figures-data
    auto* fig_cmd = app.add_subcommand("figures-data", "Emit the data behind one figure");
    std::string fig_id;
    Overrides fig_over;
    std::optional<std::uint64_t> fig_max_n;
    fig_cmd->add_option("figure", fig_id, "Figure id")->required()->check(CLI::IsMember(figure_ids()));
    fig_cmd->add_option("--seed", fig_over.seed);
    fig_cmd->add_option("--reps", fig_over.reps);
    fig_cmd->add_option("--threads", fig_over.threads);
    fig_cmd->add_option("--max-n", fig_max_n, "Drop grid points above this size");
    add_common(fig_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    const OutputFormat format = format_str == "json" ? OutputFormat::JSON : OutputFormat::CSV;
    const std::filesystem::path dir{output_dir};

    try {
        if (*round_cmd) {
            const FpFormat fmt{round_p};
            const auto nb = neighbors(round_x, fmt);
            const double p_up = round_up_probability(round_x, fmt);
            RoundingContext ctx{round_mode == "rn" ? RoundingMode::RN : RoundingMode::SR_NEARNESS,
                                RandomStream{round_seed, 0}};
            std::uint64_t hi_count = 0;
            long double total = 0;
            for (std::uint64_t i = 0; i < round_draws; ++i) {
                const FpValue r = round(round_x, fmt, ctx);
                total += r.value();
                hi_count += (r == nb.hi && nb.lo != nb.hi) ? 1 : 0;
            }
            const double freq = round_draws ? static_cast<double>(hi_count) / static_cast<double>(round_draws) : 0.0;
            out << "x,precision,mode,lo,hi,p_up,draws,hi_count,hi_frequency,sample_mean\n"
                << report::real(round_x) << ',' << round_p << ',' << round_mode << ',' << report::real(nb.lo.value())
                << ',' << report::real(nb.hi.value()) << ',' << report::real(p_up) << ',' << round_draws << ','
                << hi_count << ',' << report::real(freq) << ','
                << (round_draws ? report::real(static_cast<double>(total / round_draws)) : std::string{}) << '\n';
            return kExitOk;
        }

        if (*sum_cmd || *var_cmd) {
            const bool is_var = static_cast<bool>(*var_cmd);
            const DataOptions& o = is_var ? var_opts : sum_opts;
            if (o.precision < FpFormat::kMinPrecision || o.precision > FpFormat::kMaxPrecision)
                throw ConfigError("precision must lie in [2, 24]");
            const FpFormat fmt{o.precision};
            bool quantized = false;
            const auto data = o.input.empty() ? generate_dataset(o.dataset, fmt) : read_values(o.input, fmt, quantized);
            const bool pairwise = o.scheme == "pairwise";
            ExperimentConfig cfg;
            cfg.precision = o.precision;
            cfg.master_seed = o.seed;
            cfg.repetitions = o.mode == "rn" ? 0 : o.reps;
            cfg.include_rn = o.mode != "sr";
            cfg.lambdas = {};
            if (is_var) {
                const bool two_pass = var_algorithm == "two-pass";
                cfg.algorithms = {two_pass ? (pairwise ? Algorithm::TWOPASS_PAIRWISE : Algorithm::TWOPASS_RECURSIVE)
                                           : (pairwise ? Algorithm::TEXTBOOK_PAIRWISE : Algorithm::TEXTBOOK_RECURSIVE)};
            } else {
                cfg.algorithms = {pairwise ? Algorithm::SUM_PAIRWISE : Algorithm::SUM_RECURSIVE};
            }
            if (cfg.repetitions == 0 && !cfg.include_rn)
                throw ConfigError("nothing to run: zero repetitions with --mode sr");
            const auto r = run_experiment_on(data, cfg);
            report::write_trials_csv(out, r.trials);
            out << "# exact_value," << report::real(r.summaries.front().exact_value) << '\n';
            if (quantized)
                out << "# note,input values were rounded to the format\n";
            return kExitOk;
        }

        if (*bounds_cmd) {
            double u = 0.0;
            if (bt_u) {
                u = *bt_u;
            } else {
                if (bt_p < FpFormat::kMinPrecision || bt_p > FpFormat::kMaxPrecision)
                    throw ConfigError("precision must lie in [2, 24]");
                u = FpFormat{bt_p}.unit_roundoff();
            }
            ConditionReport cond;
            if (bt_from_data) {
                const auto data = generate_dataset(bt_data, FpFormat{bt_p});
                cond = condition_numbers(data);
            } else {
                cond.kappa = bt_kappa;
                cond.k1 = bt_k1;
                cond.k2 = bt_k2;
            }
            std::vector<BoundMethod> methods;
            for (const auto& name : bt_methods) {
                const auto m = parse_bound_method(name);
                if (!m)
                    throw ConfigError("unknown bound method '" + name + "'");
                methods.push_back(*m);
            }
            if (methods.empty())
                methods.assign(kAllBoundMethods.begin(), kAllBoundMethods.end());
            const auto rows = report::bounds_table(bt_n, u, bt_lambda, cond, methods);
            std::ostringstream os;
            report::write_bounds_csv(os, rows);
            write_file(dir / "bounds.csv", os.str());
            if (bt_stdout)
                out << os.str();
            else
                out << "wrote " << (dir / "bounds.csv").string() << '\n';
            return kExitOk;
        }

        if (*exp_cmd) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(read_file(exp_config));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string{"configuration is not valid JSON: "} + e.what());
            }
            // A manifest nests the resolved configuration under "config".
            const nlohmann::json& body = j.contains("config") ? j.at("config") : j;
            ExperimentConfig cfg = report::config_from_json(body);
            const SweepGrid sweep = report::sweep_from_json(body);
            exp_over.apply(cfg);
            nlohmann::json manifest{{"command", "experiment"}};
            write_experiment(dir, cfg, sweep, format, manifest);
            out << "wrote " << dir.string() << '\n';
            return kExitOk;
        }

        if (*fig_cmd) {
            FigurePlan plan = figure_plan(fig_id);
            if (plan.bounds_only) {
                if (fig_max_n)
                    std::erase_if(plan.bound_n, [&](std::uint64_t n) { return n > *fig_max_n; });
                ConditionReport cond;
                cond.kappa = cond.k1 = cond.k2 = 1.0;
                const std::vector<double> lambdas{plan.bound_lambda};
                const auto rows = report::bounds_table(plan.bound_n, plan.bound_u, lambdas, cond, plan.bound_methods);
                std::ostringstream os;
                report::write_bounds_csv(os, rows);
                write_file(dir / "bounds.csv", os.str());
                write_file(dir / "trials.csv", std::string{report::kTrialsColumns} + "\n");
                nlohmann::json manifest{{"tool", "srvar"},
                                        {"version", kVersion},
                                        {"command", "figures-data"},
                                        {"figure", fig_id},
                                        {"u", plan.bound_u},
                                        {"lambda", plan.bound_lambda},
                                        {"kappa", 1.0},
                                        {"n", plan.bound_n},
                                        {"outputs", {"bounds.csv", "trials.csv"}}};
                write_file(dir / "manifest.json", manifest.dump(2) + "\n");
            } else {
                fig_over.apply(plan.config);
                if (fig_max_n) {
                    std::erase_if(plan.sweep.n_values, [&](std::uint64_t n) { return n > *fig_max_n; });
                    plan.config.dataset.n = std::min(plan.config.dataset.n, *fig_max_n);
                    if (plan.sweep.n_values.empty() && plan.sweep.lambdas.empty())
                        throw ConfigError("--max-n removes every grid point");
                }
                nlohmann::json manifest{{"command", "figures-data"}, {"figure", fig_id}};
                write_experiment(dir, plan.config, plan.sweep, format, manifest);
            }
            out << "wrote " << dir.string() << '\n';
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("srvar");
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace srvar::cli
