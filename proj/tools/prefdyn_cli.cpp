// Command-line driver: train, diagnose, sweep, verify. All outputs are plain
// CSV/JSON files in the --out directory and are byte-reproducible for a
// given config and seed.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prefdyn/config.hpp"
#include "prefdyn/verify.hpp"

namespace {

using json = nlohmann::json;
using prefdyn::config::Config;
using prefdyn::experiments::RunResult;
using prefdyn::experiments::ScanRow;

constexpr int exit_config = 1;
constexpr int exit_numeric = 2;
constexpr int exit_verify = 3;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string metrics_csv(const RunResult& res) {
    std::ostringstream os;
    os << "step,chosen_logp,rejected_logp,margin,alpha,gamma,grad_norm,"
          "gamma_advantage,frac_gamma_positive\n";
    for (const auto& r : res.records)
        os << r.step << ',' << num(r.chosen_logp) << ',' << num(r.rejected_logp) << ','
           << num(r.margin) << ',' << num(r.alpha) << ',' << num(r.gamma) << ','
           << num(r.grad_norm) << ',' << num(r.gamma_advantage) << ','
           << num(r.frac_gamma_positive) << '\n';
    return os.str();
}

std::string trace_csv(const RunResult& res) {
    std::ostringstream os;
    os << "step,margin,alpha,gamma,gamma_advantage\n";
    for (const auto& r : res.trace)
        os << r.step << ',' << num(r.margin) << ',' << num(r.alpha) << ','
           << num(r.gamma) << ',' << num(r.gamma_advantage) << '\n';
    return os.str();
}

std::string scan_csv(const std::vector<ScanRow>& rows) {
    std::ostringstream os;
    os << "index,margin,grad_norm,similarity_factor,pred_dlogp_w,pred_dlogp_l,"
          "meas_dlogp_w,meas_dlogp_l\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << i << ',' << num(r.margin) << ',' << num(r.grad_norm) << ','
           << num(r.similarity_factor) << ',' << num(r.pred_dlogp_w) << ','
           << num(r.pred_dlogp_l) << ',' << num(r.meas_dlogp_w) << ','
           << num(r.meas_dlogp_l) << '\n';
    }
    return os.str();
}

json summary_json(const Config& cfg, const RunResult& res) {
    json j;
    j["config"] = json::parse(prefdyn::config::to_json(cfg));
    j["pretrain_mse_start"] = res.pretrain_mse_start;
    j["pretrain_mse_end"] = res.pretrain_mse_end;
    j["mean_realized_alpha"] = res.mean_realized_alpha;
    j["mean_realized_gamma"] = res.mean_realized_gamma;
    j["frac_gamma_positive"] = res.frac_gamma_positive;
    j["final_param_dist"] = res.final_param_dist;
    j["completed_steps"] = res.completed_steps;
    j["aborted"] = res.aborted;
    j["abort_reason"] = res.abort_reason;
    if (!res.records.empty()) {
        const auto& last = res.records.back();
        j["final"] = {{"step", last.step},
                      {"chosen_logp", last.chosen_logp},
                      {"rejected_logp", last.rejected_logp},
                      {"margin", last.margin},
                      {"alpha", last.alpha},
                      {"gamma", last.gamma},
                      {"grad_norm", last.grad_norm}};
    }
    return j;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    bool code_convention = false;
    bool literal_denominator = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out) {
    cmd->add_option("--config", args.config_path, "config file (key=value or JSON)");
    auto* out = cmd->add_option("--out", args.out_dir, "output directory");
    if (needs_out) out->required();
    cmd->add_option("--seed", args.seed, "overrides run.seed and data.seed");
    cmd->add_flag("--code-convention", args.code_convention,
                  "adaptive weights from raw squared-error differences");
    cmd->add_flag("--literal-denominator", args.literal_denominator,
                  "use r_l + eps instead of |r_l| + eps in the weight margins");
}

Config resolve_config(const CommonArgs& args) {
    Config cfg;
    if (!args.config_path.empty()) cfg = prefdyn::config::load(args.config_path);
    if (args.seed >= 0) {
        cfg.run.seed = static_cast<std::uint64_t>(args.seed);
        cfg.run.data.seed = static_cast<std::uint64_t>(args.seed);
    }
    if (args.code_convention) cfg.run.loss.code_convention = true;
    if (args.literal_denominator) cfg.run.loss.literal_denominator = true;
    cfg.run.loss.T = cfg.run.sched_T;
    cfg.run.validate();
    return cfg;
}

void write_run_outputs(const std::filesystem::path& dir, const Config& cfg,
                       const RunResult& res) {
    std::filesystem::create_directories(dir);
    write_file(dir / "config.resolved.json", prefdyn::config::to_json(cfg));
    write_file(dir / "metrics.csv", metrics_csv(res));
    write_file(dir / "summary.json", summary_json(cfg, res).dump(2) + "\n");
}

int finish_run(const RunResult& res) {
    if (res.aborted) {
        std::cerr << "aborted: " << res.abort_reason << "\n";
        return exit_numeric;
    }
    return 0;
}

int cmd_train(const CommonArgs& args) {
    const Config cfg = resolve_config(args);
    const RunResult res = prefdyn::experiments::train(cfg.run);
    write_run_outputs(args.out_dir, cfg, res);
    return finish_run(res);
}

int cmd_diagnose(const CommonArgs& args) {
    Config cfg = resolve_config(args);
    cfg.run.record_trace = true;
    const RunResult res = prefdyn::experiments::train(cfg.run);
    const std::filesystem::path dir(args.out_dir);
    write_run_outputs(dir, cfg, res);
    write_file(dir / "gamma_trace.csv", trace_csv(res));
    if (!res.aborted) {
        const auto rows = prefdyn::experiments::margin_scan(
            cfg.run, res.final_params, res.ref_params, cfg.diagnose_n_points);
        write_file(dir / "margin_scan.csv", scan_csv(rows));
        const auto scaled = prefdyn::experiments::margin_scan_scaled(
            cfg.run, res.final_params, res.ref_params, cfg.diagnose_n_points);
        write_file(dir / "margin_scan_scaled.csv", scan_csv(scaled));
    }
    return finish_run(res);
}

int cmd_sweep(const CommonArgs& args, const std::string& axis_name,
              const std::vector<double>& values) {
    const auto axis = prefdyn::experiments::parse_sweep_axis(axis_name);
    if (!axis)
        throw prefdyn::config::ConfigError("unknown sweep axis '" + axis_name +
                                           "' (use K1, K2, or beta)");
    if (values.empty())
        throw prefdyn::config::ConfigError("sweep: at least one --values entry needed");
    const Config cfg = resolve_config(args);
    const auto entries = prefdyn::experiments::sweep(cfg.run, *axis, values);
    const std::filesystem::path dir(args.out_dir);
    std::filesystem::create_directories(dir);
    json summary = json::array();
    bool any_aborted = false;
    for (const auto& entry : entries) {
        Config sub = cfg;
        switch (*axis) {
            case prefdyn::experiments::SweepAxis::k1: sub.run.loss.k1 = entry.value; break;
            case prefdyn::experiments::SweepAxis::k2: sub.run.loss.k2 = entry.value; break;
            case prefdyn::experiments::SweepAxis::beta: sub.run.loss.beta = entry.value; break;
        }
        std::ostringstream leaf;
        leaf << axis_name << '_' << num(entry.value);
        write_run_outputs(dir / leaf.str(), sub, entry.result);
        any_aborted = any_aborted || entry.result.aborted;
        summary.push_back({{"value", entry.value},
                           {"dir", leaf.str()},
                           {"mean_realized_alpha", entry.result.mean_realized_alpha},
                           {"mean_realized_gamma", entry.result.mean_realized_gamma},
                           {"frac_gamma_positive", entry.result.frac_gamma_positive},
                           {"final_param_dist", entry.result.final_param_dist},
                           {"final_margin", entry.result.records.empty()
                                                ? 0.0
                                                : entry.result.records.back().margin},
                           {"aborted", entry.result.aborted}});
    }
    json top;
    top["axis"] = axis_name;
    top["entries"] = summary;
    write_file(dir / "sweep_summary.json", top.dump(2) + "\n");
    if (any_aborted) {
        std::cerr << "aborted: at least one sweep run hit a numeric failure\n";
        return exit_numeric;
    }
    return 0;
}

int cmd_verify(const std::string& only, bool flip_dpo_partials) {
    prefdyn::verify::CheckOptions opts;
    opts.flip_dpo_partials_sign = flip_dpo_partials;
    std::vector<prefdyn::verify::CheckResult> results;
    if (only.empty()) {
        results = prefdyn::verify::run_all(opts);
    } else {
        results.push_back(prefdyn::verify::run_check(only, opts));
    }
    std::string first_failure;
    for (const auto& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail
                  << "\n";
        if (!r.passed && first_failure.empty()) first_failure = r.name;
    }
    if (!first_failure.empty()) {
        std::cerr << "verification failed: " << first_failure << "\n";
        return exit_verify;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"preference-optimization dynamics laboratory"};
    app.require_subcommand(1);

    CommonArgs train_args, diag_args, sweep_args;
    std::string sweep_axis;
    std::vector<double> sweep_values;
    std::string verify_only;
    bool flip_dpo_partials = false;

    auto* train = app.add_subcommand("train", "pretrain a reference, then run one "
                                              "preference-training run");
    add_common(train, train_args, true);

    auto* diagnose = app.add_subcommand(
        "diagnose", "train, then emit per-step traces and margin scans");
    add_common(diagnose, diag_args, true);

    auto* sweep = app.add_subcommand("sweep", "repeat a run across one config axis");
    add_common(sweep, sweep_args, true);
    sweep->add_option("--axis", sweep_axis, "K1, K2, or beta")->required();
    sweep->add_option("--values", sweep_values, "axis values")
        ->required()
        ->delimiter(',');

    auto* verify = app.add_subcommand("verify", "run the numerical self-checks");
    verify->add_option("--check", verify_only, "run a single named check");
    verify->add_flag("--flip-dpo-partials", flip_dpo_partials,
                     "negate one analytic partial; the matching check must fail")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return exit_config;
    }

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (diagnose->parsed()) return cmd_diagnose(diag_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_axis, sweep_values);
        if (verify->parsed()) return cmd_verify(verify_only, flip_dpo_partials);
    } catch (const prefdyn::config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numeric;
    }
    return 0;
}
