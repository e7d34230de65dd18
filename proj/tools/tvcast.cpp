// tvcast: time-varying coefficient regression with a state-space prior.
// Subcommands: simulate, fit, forecast, report. Exit codes: 0 success,
// 2 input/validation error, 3 numerical failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tvcast/config.hpp"
#include "tvcast/dataset.hpp"
#include "tvcast/diagnostics.hpp"
#include "tvcast/draws.hpp"
#include "tvcast/forecast.hpp"
#include "tvcast/gibbs.hpp"
#include "tvcast/logistic.hpp"
#include "tvcast/manifest.hpp"
#include "tvcast/simulate.hpp"
#include "tvcast/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int max_threads_from_env() {
    const char* env = std::getenv("TVCAST_THREADS");
    if (env == nullptr || *env == '\0') return 0;
    const int n = std::atoi(env);
    return n > 0 ? n : 1;
}

class Timer {
  public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw tvcast::DataError("cannot write " + path);
    out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tvcast::DataError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw tvcast::DataError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

struct SimulateArgs {
    std::string series_path;
    std::string scheme = "continuous";
    std::string out_dir;
    tvcast::SimParams params;
    int t_max = 0;
};

int cmd_simulate(const SimulateArgs& args) {
    Timer timer;
    tvcast::SeriesSpec series = tvcast::load_series(args.series_path);
    if (args.t_max > 0) series = tvcast::truncate_series(series, args.t_max);
    const tvcast::SimScheme scheme = tvcast::scheme_from_string(args.scheme);
    auto [dataset, truth] = scheme == tvcast::SimScheme::kContinuous
                                ? tvcast::gen_continuous(series, args.params)
                                : tvcast::gen_binary(scheme, series, args.params);

    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    const std::string dataset_path = (dir / "dataset.csv").string();
    const std::string truth_path = (dir / "truth.csv").string();
    tvcast::write_dataset_csv(dataset, dataset_path);
    tvcast::write_truth_csv(truth, truth_path);

    tvcast::RunManifest manifest;
    manifest.command = "simulate";
    manifest.seed = args.params.seed;
    manifest.config = json{{"scheme", args.scheme},
                           {"series", args.series_path},
                           {"t_max", args.t_max},
                           {"n_per_t", args.params.n_per_t},
                           {"coef1", args.params.coef1},
                           {"coef2", args.params.coef2},
                           {"noise_sd", args.params.noise_sd},
                           {"x1_sd", args.params.x1_sd},
                           {"x2_sd", args.params.x2_sd},
                           {"threshold", args.params.threshold},
                           {"seed", args.params.seed}};
    manifest.add_input(args.series_path);
    manifest.add_output(dataset_path);
    manifest.add_output(truth_path);
    if (scheme != tvcast::SimScheme::kContinuous) {
        // keep the pre-threshold outcomes next to the binary data
        const std::string cont_path = (dir / "continuous_outcomes.csv").string();
        tvcast::csv::Writer w(cont_path);
        w.row({"id", "y_continuous"});
        for (std::size_t i = 0; i < truth.y_continuous.size(); ++i)
            w.row({std::to_string(i + 1), tvcast::format_double(truth.y_continuous[i])});
        manifest.add_output(cont_path);
    }
    manifest.timing_ms = timer.ms();
    manifest.write((dir / "simulate_manifest.json").string());

    std::cout << "simulate: " << dataset.size() << " observations over T=" << dataset.T
              << ", scheme=" << args.scheme << " -> " << args.out_dir << "\n";
    return 0;
}

struct FitArgs {
    std::string data_path;
    std::string config_path;
    std::string out_dir;
    std::string outcome;
    std::string trend;
    int train_through = 0;
    int chains = 0;
    int warmup = 0;
    int keep = 0;
    bool add_intercept = false;
    bool seed_set = false;
    std::uint64_t seed = 0;
    double rhat_threshold = 1.05;
};

int cmd_fit(const FitArgs& args) {
    Timer timer;
    tvcast::ModelConfig config;
    if (!args.config_path.empty()) config = tvcast::load_config(args.config_path);
    if (!args.outcome.empty()) config.outcome_kind = tvcast::outcome_kind_from_string(args.outcome);
    if (!args.trend.empty()) {
        if (args.trend != "on" && args.trend != "off")
            throw tvcast::DataError("--trend expects on|off, got " + args.trend);
        config.include_trend = args.trend == "on";
    }
    if (args.chains > 0) config.n_chains = args.chains;
    if (args.warmup > 0) config.n_warmup = args.warmup;
    if (args.keep > 0) config.n_keep = args.keep;
    if (args.seed_set) config.master_seed = args.seed;
    if (args.add_intercept) config.add_intercept = true;
    config.validate();

    const bool binary = config.outcome_kind == tvcast::OutcomeKind::kBinary;
    const tvcast::Dataset full =
        tvcast::read_dataset_csv(args.data_path, binary, config.add_intercept);

    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);

    tvcast::Dataset train = full;
    std::optional<std::string> test_path;
    if (args.train_through > 0) {
        auto [tr, te] = tvcast::split_by_time(full, args.train_through);
        train = std::move(tr);
        test_path = (dir / "test.csv").string();
        tvcast::write_dataset_csv(te, *test_path);
    }

    const int threads = max_threads_from_env();
    const tvcast::DrawStore store = binary ? tvcast::run_binary(train, config, threads)
                                           : tvcast::run_gibbs(train, config, threads);

    const auto summaries = tvcast::summarize(store, config.interval_mass);
    const auto report = tvcast::convergence_report(summaries, args.rhat_threshold);

    const std::string draws_path = (dir / "draws.csv").string();
    const std::string summary_path = (dir / "summary.csv").string();
    const std::string convergence_path = (dir / "convergence.json").string();
    const std::string config_path = (dir / "config.json").string();
    tvcast::write_draws_csv(store, draws_path);
    tvcast::write_summary_csv(summaries, summary_path);
    write_json(tvcast::to_json(report), convergence_path);

    json resolved = tvcast::to_json(config);
    resolved["t_train"] = train.T;
    resolved["n_predictors"] = train.P;
    resolved["has_intercept"] = train.has_intercept;
    resolved["n_observations"] = train.size();
    write_json(resolved, config_path);

    tvcast::RunManifest manifest;
    manifest.command = "fit";
    manifest.seed = config.master_seed;
    manifest.config = resolved;
    manifest.add_input(args.data_path);
    if (!args.config_path.empty()) manifest.add_input(args.config_path);
    manifest.add_output(config_path);
    manifest.add_output(draws_path);
    manifest.add_output(summary_path);
    manifest.add_output(convergence_path);
    if (test_path) manifest.add_output(*test_path);
    manifest.timing_ms = timer.ms();
    manifest.write((dir / "fit_manifest.json").string());

    std::cout << "fit: " << store.total_draws() << " draws ("
              << config.n_chains << " chains x " << config.n_keep << " kept) over T="
              << train.T << ", P=" << train.P << "\n";
    std::cout << "fit: converged=" << (report.converged ? "true" : "false");
    if (!std::isnan(report.worst_rhat))
        std::cout << ", worst rhat " << report.worst_rhat << " (" << report.worst_parameter
                  << ")";
    std::cout << " -> " << args.out_dir << "\n";
    return 0;
}

struct ForecastArgs {
    std::string fit_dir;
    std::string test_path;
    std::string truth_path;
    std::string out_dir;
    int horizon = 0;
    bool seed_set = false;
    std::uint64_t seed = 0;
};

int cmd_forecast(const ForecastArgs& args) {
    Timer timer;
    const fs::path fit_dir(args.fit_dir);
    const json resolved = read_json((fit_dir / "config.json").string());
    const tvcast::ModelConfig config = tvcast::config_from_json(resolved);
    const int t_train = resolved.at("t_train").get<int>();
    const int n_predictors = resolved.at("n_predictors").get<int>();
    const bool has_intercept = resolved.at("has_intercept").get<bool>();

    if (args.horizon < 1) throw tvcast::DataError("--horizon must be >= 1");
    const tvcast::ParamLayout layout = tvcast::make_layout(t_train, n_predictors, config);
    const tvcast::DrawStore store =
        tvcast::read_draws_csv((fit_dir / "draws.csv").string(), layout);

    const bool binary = config.outcome_kind == tvcast::OutcomeKind::kBinary;
    const tvcast::Dataset test = tvcast::read_dataset_csv(args.test_path, binary, false);

    std::optional<Eigen::MatrixXd> truth;
    if (!args.truth_path.empty()) truth = tvcast::read_truth_csv(args.truth_path);

    const std::uint64_t seed = args.seed_set ? args.seed : config.master_seed;
    const tvcast::StateForecast fc = tvcast::forecast_states(store, args.horizon, seed);
    const tvcast::StatePathSummary future = tvcast::summarize_states(fc, config.interval_mass);
    const auto outcomes = tvcast::predict_outcomes(fc, test, store, config.outcome_kind,
                                                   config.interval_mass, seed);
    const auto metrics = tvcast::evaluate(outcomes, config.interval_mass, &store,
                                          truth ? &*truth : nullptr);

    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    tvcast::PlotPaths paths;
    paths.smoothed_series = (dir / "smoothed_series.csv").string();
    paths.coefficients = (dir / "coefficients.csv").string();
    paths.predictions = (dir / "predictions.csv").string();
    tvcast::export_plot_data(store, future, outcomes, truth ? &*truth : nullptr, has_intercept,
                             config.interval_mass, paths);
    const std::string metrics_path = (dir / "metrics.json").string();
    write_json(tvcast::to_json(metrics), metrics_path);

    tvcast::RunManifest manifest;
    manifest.command = "forecast";
    manifest.seed = seed;
    manifest.config = json{{"fit_dir", args.fit_dir},
                           {"horizon", args.horizon},
                           {"seed", seed},
                           {"interval_mass", config.interval_mass},
                           {"outcome_kind", tvcast::to_string(config.outcome_kind)}};
    manifest.add_input((fit_dir / "config.json").string());
    manifest.add_input((fit_dir / "draws.csv").string());
    manifest.add_input(args.test_path);
    if (!args.truth_path.empty()) manifest.add_input(args.truth_path);
    manifest.add_output(paths.smoothed_series);
    manifest.add_output(paths.coefficients);
    manifest.add_output(paths.predictions);
    manifest.add_output(metrics_path);
    manifest.timing_ms = timer.ms();
    manifest.write((dir / "forecast_manifest.json").string());

    std::cout << "forecast: horizon " << args.horizon << ", " << outcomes.size()
              << " test outcomes, coverage " << metrics.coverage << ", rmse " << metrics.rmse
              << " -> " << args.out_dir << "\n";
    return 0;
}

struct ReportArgs {
    std::string run_dir;
    std::string out_path;
};

int cmd_report(const ReportArgs& args) {
    Timer timer;
    const fs::path dir(args.run_dir);
    if (!fs::is_directory(dir)) throw tvcast::DataError("not a directory: " + args.run_dir);

    std::vector<std::string> manifest_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 14 && name.substr(name.size() - 14) == "_manifest.json")
            manifest_files.push_back(entry.path().string());
    }
    std::sort(manifest_files.begin(), manifest_files.end());
    if (manifest_files.empty())
        throw tvcast::DataError("no *_manifest.json found in " + args.run_dir);

    json manifests = json::array();
    for (const std::string& path : manifest_files) {
        json m = read_json(path);
        for (const auto& file : m.at("outputs")) {
            const std::string out_path = file.at("path").get<std::string>();
            if (!fs::exists(out_path))
                throw tvcast::DataError("integrity error: missing output " + out_path);
            const std::string digest = tvcast::file_digest(out_path);
            if (digest != file.at("digest").get<std::string>())
                throw tvcast::DataError("integrity error: digest mismatch for " + out_path);
        }
        manifests.push_back(std::move(m));
    }

    json report{{"run_dir", args.run_dir},
                {"integrity", "ok"},
                {"manifests", manifests}};
    const fs::path convergence = dir / "convergence.json";
    const fs::path metrics = dir / "metrics.json";
    report["convergence"] = fs::exists(convergence)
                                ? read_json(convergence.string())
                                : json{{"status", "fit not run"}};
    report["forecast"] = fs::exists(metrics) ? read_json(metrics.string())
                                             : json{{"status", "forecast not run"}};

    const std::string out_path =
        args.out_path.empty() ? (dir / "report.json").string() : args.out_path;
    write_json(report, out_path);

    tvcast::RunManifest manifest;
    manifest.command = "report";
    manifest.config = json{{"run_dir", args.run_dir}};
    manifest.add_output(out_path);
    manifest.timing_ms = timer.ms();
    manifest.write((dir / "report_manifest.json").string());

    std::cout << "report: integrity ok, " << manifests.size() << " manifest(s)\n";
    if (report["convergence"].contains("converged"))
        std::cout << "  converged: " << report["convergence"]["converged"].dump() << "\n";
    else
        std::cout << "  fit not run\n";
    if (report["forecast"].contains("coverage"))
        std::cout << "  coverage: " << report["forecast"]["coverage"].dump() << ", rmse: "
                  << report["forecast"]["rmse"].dump() << "\n";
    else
        std::cout << "  forecast not run\n";
    std::cout << "  -> " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian regression with time-varying coefficients"};
    app.set_version_flag("--version", tvcast::kVersion);
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "generate a ground-truth dataset");
    simulate->add_option("--series", sim.series_path, "driving series CSV (t,value)")->required();
    simulate->add_option("--scheme", sim.scheme, "continuous|b1|b2|b3 (default continuous)");
    simulate->add_option("--n-per-t", sim.params.n_per_t, "observations per time point");
    simulate->add_option("--coef1", sim.params.coef1, "true coefficient of x1");
    simulate->add_option("--coef2", sim.params.coef2, "true coefficient of x2");
    simulate->add_option("--noise-sd", sim.params.noise_sd, "outcome noise sd");
    simulate->add_option("--x1-sd", sim.params.x1_sd, "sd of covariate x1");
    simulate->add_option("--x2-sd", sim.params.x2_sd, "sd of covariate x2");
    simulate->add_option("--threshold", sim.params.threshold, "cutoff for scheme b3");
    simulate->add_option("--t-max", sim.t_max, "truncate the series to its first t-max points");
    simulate->add_option("--seed", sim.params.seed, "generator seed");
    simulate->add_option("--out-dir", sim.out_dir, "output directory")->required();

    FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "run the Gibbs sampler");
    fit_cmd->add_option("--data", fit.data_path, "dataset CSV (t,id,y,x1,...)")->required();
    fit_cmd->add_option("--config", fit.config_path, "model config JSON");
    fit_cmd->add_option("--outcome", fit.outcome, "continuous|binary");
    fit_cmd->add_option("--train-through", fit.train_through,
                        "fit t <= this; the rest is written to test.csv");
    fit_cmd->add_option("--chains", fit.chains, "number of chains");
    fit_cmd->add_option("--warmup", fit.warmup, "warmup sweeps per chain");
    fit_cmd->add_option("--keep", fit.keep, "kept sweeps per chain");
    fit_cmd->add_option("--trend", fit.trend, "on|off");
    auto* seed_opt = fit_cmd->add_option("--seed", fit.seed, "master seed");
    fit_cmd->add_flag("--add-intercept", fit.add_intercept, "prepend a constant-1 column");
    fit_cmd->add_option("--rhat-threshold", fit.rhat_threshold, "convergence verdict threshold");
    fit_cmd->add_option("--out-dir", fit.out_dir, "output directory")->required();

    ForecastArgs fc;
    CLI::App* fc_cmd = app.add_subcommand("forecast", "posterior-predictive forecasting");
    fc_cmd->add_option("--fit-dir", fc.fit_dir, "directory produced by fit")->required();
    fc_cmd->add_option("--test", fc.test_path, "held-out dataset CSV")->required();
    fc_cmd->add_option("--horizon", fc.horizon, "forecast steps past the training end")
        ->required();
    fc_cmd->add_option("--truth", fc.truth_path, "simulation truth CSV (t,p,beta_true)");
    auto* fc_seed_opt = fc_cmd->add_option("--seed", fc.seed, "forecast seed");
    fc_cmd->add_option("--out-dir", fc.out_dir, "output directory")->required();

    ReportArgs rep;
    CLI::App* rep_cmd = app.add_subcommand("report", "merge and verify a run directory");
    rep_cmd->add_option("--run-dir", rep.run_dir, "directory with manifests")->required();
    rep_cmd->add_option("--out", rep.out_path, "report path (default <run-dir>/report.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        fit.seed_set = seed_opt->count() > 0;
        fc.seed_set = fc_seed_opt->count() > 0;
        if (simulate->parsed()) return cmd_simulate(sim);
        if (fit_cmd->parsed()) return cmd_fit(fit);
        if (fc_cmd->parsed()) return cmd_forecast(fc);
        if (rep_cmd->parsed()) return cmd_report(rep);
    } catch (const tvcast::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tvcast::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
