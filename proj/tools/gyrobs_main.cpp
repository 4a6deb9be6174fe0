// gyrobs command line tool.
//
// Subcommands:
//   run          integrate one configured run, write CSV + summary JSON
//   compare      proposed observer vs the Mahony-style baseline, shared truth
//   montecarlo   sweep observer initial conditions, per-trial CSV + summary
//   selfcheck    randomized algebra and reduction identity battery
//   certificate  print/export the convergence certificate for a config
//
// Exit codes: 0 success, 1 a check failed, 2 invalid configuration or usage,
// 3 integration diverged.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gyrobs/config.hpp"
#include "gyrobs/csv.hpp"
#include "gyrobs/harness.hpp"
#include "gyrobs/selfcheck.hpp"

namespace {

using nlohmann::json;

std::filesystem::path resolve_out_dir(const std::string& cli_value) {
    std::filesystem::path dir;
    if (!cli_value.empty()) {
        dir = cli_value;
    } else if (const char* env = std::getenv("GYROBS_OUT_DIR"); env && *env) {
        dir = env;
    } else {
        dir = ".";
    }
    std::filesystem::create_directories(dir);
    return dir;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

json certificate_json(const gyrobs::LyapunovCertificate& cert) {
    return json{{"epsilon", cert.epsilon},
                {"alpha", cert.alpha},
                {"beta", cert.beta},
                {"error_rate", cert.error_rate},
                {"error_prefactor", cert.error_prefactor},
                {"signal_norm", cert.signal_norm},
                {"lambda_min_gram", cert.lambda_min_gram},
                {"kp", cert.gains.kp},
                {"ki", cert.gains.ki},
                {"omega_bound", cert.bounds.omega_bound},
                {"bias_bound", cert.bounds.bias_bound}};
}

json run_summary_json(const gyrobs::RunRecord& rec,
                      const std::optional<gyrobs::DecayReport>& decay) {
    json j;
    j["samples"] = rec.samples();
    j["final"] = {{"t", rec.t.back()},
                  {"signal_error", rec.signal_error.back()},
                  {"bias_error", rec.bias_error.back()},
                  {"attitude_error", rec.attitude_error.back()},
                  {"attitude_error_polar", rec.attitude_error_polar.back()}};
    std::vector<double> sum(rec.samples());
    for (std::size_t i = 0; i < rec.samples(); ++i) {
        sum[i] = rec.signal_error[i] + rec.bias_error[i];
    }
    try {
        const gyrobs::RateFit fit = gyrobs::fit_exponential_rate(
            rec.t, sum, gyrobs::kFitFloor, gyrobs::kFitCeiling);
        j["rate_fit"] = {{"rate", fit.rate},
                         {"amplitude", fit.amplitude},
                         {"residual_rms", fit.residual_rms},
                         {"samples_used", fit.samples_used},
                         {"t_begin", fit.t_begin},
                         {"t_end", fit.t_end}};
    } catch (const std::exception&) {
        // decay never entered the fit window; leave the fit out
    }
    if (rec.certificate) {
        j["certificate"] = certificate_json(*rec.certificate);
    }
    if (decay) {
        j["decay"] = {{"passed", decay->passed},
                      {"first_violation", decay->first_violation},
                      {"max_value_ratio", decay->max_value_ratio},
                      {"max_norm_ratio", decay->max_norm_ratio}};
    }
    return j;
}

const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Plot gyrobs run CSVs: python3 plot.py run.csv [more.csv ...]"""
import csv
import sys

import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {k: [float(r[k]) for r in rows] for k in rows[0]}
    return cols


def main(paths):
    fig, ax = plt.subplots(figsize=(8, 5))
    for path in paths:
        cols = load(path)
        for key in ("e_A_norm", "e_b_norm", "V", "V_bound"):
            if key in cols and any(v == v and v > 0 for v in cols[key]):
                style = "--" if key == "V_bound" else "-"
                ax.semilogy(cols["t"], cols[key], style, label=f"{path}:{key}")
    ax.set_xlabel("t [s]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig("run_plot.png", dpi=150)
    print("wrote run_plot.png")


if __name__ == "__main__":
    main(sys.argv[1:] or ["run.csv"])
)PY";

int cmd_run(const std::string& config_path, const std::string& out,
            std::optional<std::uint64_t> seed, bool emit_plot) {
    const gyrobs::LoadedConfig cfg = gyrobs::load_config(config_path, seed);
    const std::filesystem::path out_dir = resolve_out_dir(out);

    const gyrobs::RunRecord rec = gyrobs::integrate_run(cfg.run);

    {
        std::ofstream csv_out(out_dir / cfg.output.csv, std::ios::binary);
        if (!csv_out) throw std::runtime_error("cannot write " + (out_dir / cfg.output.csv).string());
        gyrobs::write_run_csv(rec, csv_out);
    }

    std::optional<gyrobs::DecayReport> decay;
    if (rec.certificate) {
        decay = gyrobs::verify_decay(rec);
    }
    write_json_file(out_dir / cfg.output.summary, run_summary_json(rec, decay));
    if (emit_plot) {
        write_text_file(out_dir / "plot.py", kPlotScript);
    }

    std::printf("run: %zu samples, final signal error %.6g, final bias error %.6g\n",
                rec.samples(), rec.signal_error.back(), rec.bias_error.back());
    if (decay) {
        std::printf("decay audit: %s (max value ratio %.6g)\n",
                    decay->passed ? "pass" : "FAIL", decay->max_value_ratio);
        if (!decay->passed) return 1;
    }
    return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out,
                std::optional<std::uint64_t> seed, bool emit_plot) {
    const gyrobs::LoadedConfig cfg = gyrobs::load_config(config_path, seed);
    const std::filesystem::path out_dir = resolve_out_dir(out);

    gyrobs::ComparisonReport report;
    try {
        report = gyrobs::compare_observers(cfg.run);
    } catch (const std::invalid_argument& e) {
        throw gyrobs::ConfigError(std::string("config: ") + e.what());
    }

    std::string stem = cfg.output.csv;
    if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv") {
        stem = stem.substr(0, stem.size() - 4);
    }
    const auto proposed_path = out_dir / (stem + "_proposed.csv");
    const auto baseline_path = out_dir / (stem + "_baseline.csv");
    {
        std::ofstream o(proposed_path, std::ios::binary);
        gyrobs::write_run_csv(report.proposed, o);
    }
    {
        std::ofstream o(baseline_path, std::ios::binary);
        gyrobs::write_run_csv(report.baseline, o);
    }

    json j;
    j["proposed_csv"] = proposed_path.filename().string();
    j["baseline_csv"] = baseline_path.filename().string();
    j["peak_bias_error"] = {{"proposed", report.peak_bias_error_proposed},
                            {"baseline", report.peak_bias_error_baseline}};
    j["crossings"] = json::array();
    for (const auto& c : report.crossings) {
        j["crossings"].push_back({{"threshold", c.threshold},
                                  {"t_proposed", c.t_proposed},
                                  {"t_baseline", c.t_baseline}});
    }
    write_json_file(out_dir / cfg.output.summary, j);
    if (emit_plot) {
        write_text_file(out_dir / "plot.py", kPlotScript);
    }

    std::printf("compare: wrote %s and %s\n", proposed_path.filename().string().c_str(),
                baseline_path.filename().string().c_str());
    for (const auto& c : report.crossings) {
        std::printf("  threshold %-8g proposed %8.3f s   baseline %8.3f s\n", c.threshold,
                    c.t_proposed, c.t_baseline);
    }
    std::printf("  peak bias error: proposed %.6g, baseline %.6g\n",
                report.peak_bias_error_proposed, report.peak_bias_error_baseline);
    return 0;
}

int cmd_montecarlo(const std::string& config_path, const std::string& out,
                   std::optional<std::uint64_t> seed, std::optional<int> trials,
                   std::optional<double> init_box) {
    const gyrobs::LoadedConfig cfg = gyrobs::load_config(config_path, seed);
    const std::filesystem::path out_dir = resolve_out_dir(out);

    const int n = trials.value_or(cfg.montecarlo.trials);
    const double box = init_box.value_or(cfg.montecarlo.init_box);
    gyrobs::MonteCarloSummary summary;
    try {
        summary = gyrobs::monte_carlo_global(cfg.run, n, box, cfg.montecarlo.bias_box);
    } catch (const std::invalid_argument& e) {
        throw gyrobs::ConfigError(std::string("config: ") + e.what());
    }

    {
        std::ofstream o(out_dir / cfg.output.csv, std::ios::binary);
        o << "trial,seed,converged,final_error,rate,max_value_ratio,decay_ok\n";
        for (std::size_t i = 0; i < summary.results.size(); ++i) {
            const auto& r = summary.results[i];
            char buf[160];
            std::snprintf(buf, sizeof buf, "%zu,%" PRIu64 ",%d,%.15g,%.15g,%.15g,%d\n", i, r.seed,
                          r.converged ? 1 : 0, r.final_error, r.rate, r.max_value_ratio,
                          r.decay_ok ? 1 : 0);
            o << buf;
        }
    }

    json j;
    j["trials"] = summary.trials;
    j["init_box"] = box;
    j["fraction_converged"] = summary.fraction_converged;
    j["convergence_threshold"] = summary.convergence_threshold;
    j["rate"] = {{"min", summary.rate_min},
                 {"median", summary.rate_median},
                 {"max", summary.rate_max}};
    j["decay_violations"] = summary.decay_violations;
    if (cfg.run.variant.has_certificate()) {
        const gyrobs::LyapunovCertificate cert = gyrobs::make_certificate(
            cfg.run.variant.G(0.0), cfg.run.variant.base_equivalent_gains(cfg.run.gains),
            gyrobs::SignalBounds(cfg.run.profile.bound(), cfg.run.gyro.bias.norm()));
        j["certificate"] = certificate_json(cert);
    }
    write_json_file(out_dir / cfg.output.summary, j);

    std::printf("montecarlo: %d trials, %.1f%% converged, rate in [%.4g, %.4g], %d decay violations\n",
                summary.trials, 100.0 * summary.fraction_converged, summary.rate_min,
                summary.rate_max, summary.decay_violations);
    return (summary.fraction_converged < 1.0 || summary.decay_violations > 0) ? 1 : 0;
}

int cmd_selfcheck(std::uint64_t seed, int samples, long pairs, bool negate) {
    auto algebra = gyrobs::algebra_identity_battery(seed, samples, pairs, negate);
    auto reductions = gyrobs::reduction_battery(gyrobs::derive_seed(seed, 1), samples);

    bool ok = true;
    auto print = [&](const gyrobs::CheckResult& r) {
        std::printf("[%s] %-55s worst %.3e%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.worst, r.note.empty() ? "" : "  ", r.note.c_str());
        ok = ok && r.passed;
    };
    for (const auto& r : algebra) print(r);
    for (const auto& r : reductions) print(r);
    std::printf("%s\n", ok ? "selfcheck passed" : "selfcheck FAILED");
    return ok ? 0 : 1;
}

int cmd_certificate(const std::string& config_path, const std::string& out) {
    const gyrobs::LoadedConfig cfg = gyrobs::load_config(config_path);
    if (!cfg.run.variant.has_certificate()) {
        throw gyrobs::ConfigError("config: no convergence certificate for this observer kind");
    }
    const gyrobs::LyapunovCertificate cert = gyrobs::make_certificate(
        cfg.run.variant.G(0.0), cfg.run.variant.base_equivalent_gains(cfg.run.gains),
        gyrobs::SignalBounds(cfg.run.profile.bound(), cfg.run.gyro.bias.norm()));

    const json j = certificate_json(cert);
    for (const auto& [key, value] : j.items()) {
        std::printf("%-16s = %.12g\n", key.c_str(), value.get<double>());
    }
    if (!out.empty()) {
        const std::filesystem::path out_dir = resolve_out_dir(out);
        write_json_file(out_dir / "certificate.json", j);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attitude and gyro-bias observer toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool emit_plot = false;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (default: $GYROBS_OUT_DIR or .)");
        sub->add_option("--seed", seed, "override the configured seed");
    };

    CLI::App* run = app.add_subcommand("run", "integrate one run");
    add_common(run, true);
    run->add_flag("--emit-plot", emit_plot, "also write a plot.py helper");

    CLI::App* compare = app.add_subcommand("compare", "proposed observer vs baseline");
    add_common(compare, true);
    compare->add_flag("--emit-plot", emit_plot, "also write a plot.py helper");

    std::optional<int> trials;
    std::optional<double> init_box;
    CLI::App* mc = app.add_subcommand("montecarlo", "sweep observer initial conditions");
    add_common(mc, true);
    mc->add_option("--trials", trials, "number of trials");
    mc->add_option("--init-box", init_box, "half-width of the initial estimate box");

    std::uint64_t check_seed = 2024;
    int check_samples = 1000;
    long check_pairs = 100000;
    bool negate = false;
    CLI::App* selfcheck = app.add_subcommand("selfcheck", "randomized identity battery");
    selfcheck->add_option("--seed", check_seed, "battery seed");
    selfcheck->add_option("--samples", check_samples, "samples per identity");
    selfcheck->add_option("--pairs", check_pairs, "rotation pairs for the gap check");
    selfcheck->add_flag("--negate", negate,
                        "negative self-test: perturb the hat map, expect one failure");

    CLI::App* certificate = app.add_subcommand("certificate", "print certificate constants");
    add_common(certificate, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, seed, emit_plot);
        if (compare->parsed()) return cmd_compare(config_path, out_dir, seed, emit_plot);
        if (mc->parsed()) return cmd_montecarlo(config_path, out_dir, seed, trials, init_box);
        if (selfcheck->parsed()) return cmd_selfcheck(check_seed, check_samples, check_pairs, negate);
        if (certificate->parsed()) return cmd_certificate(config_path, out_dir);
    } catch (const gyrobs::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const gyrobs::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
