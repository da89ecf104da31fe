// Command-line driver: runs synthetic or replayed probability streams
// through SAMOCP, standalone MOCP or the per-model ScaleFreeOGD baseline,
// writes report/plot-data files, and validates stream files.
//
// Exit codes: 0 success, 1 malformed configuration, 2 malformed or
// unreadable stream file, 3 internal invariant violation.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "confstream/engine.hpp"

namespace fs = std::filesystem;
using namespace confstream;

namespace {

struct CliOptions {
    std::string method = "samocp";
    std::string mode = "deterministic";
    std::string sign_mode = "corrected";
    double target_alpha = 0.1;
    double eta = 0.05;
    double epsilon = 0.9;
    double sigma = 140.0;
    long g = 8;
    double xi = 0.1;
    int k_reg = 1;
    std::string stream = "synthetic";
    std::uint64_t seed = 1;
    std::string seeds_range;
    std::string out_dir = "out";
    long window = 100;
    std::size_t baseline_model = 0;

    // synthetic stream shape
    int num_classes = 10;
    int num_models = 2;
    long horizon = 5000;
    std::string schedule = "sudden";
    long batch_size = 500;
    int max_severity = 5;
    std::vector<std::string> profiles;  // "base,degradation,sharpness"

    std::string export_stream;
    bool sweep_widths = false;
    bool sliding_windows = false;
};

ModelProfile parse_profile(const std::string& text) {
    ModelProfile p;
    char comma1 = 0, comma2 = 0;
    std::istringstream in(text);
    if (!(in >> p.base_accuracy >> comma1 >> p.degradation >> comma2 >> p.sharpness) ||
        comma1 != ',' || comma2 != ',')
        throw CLI::ValidationError("--profile expects base,degradation,sharpness");
    return p;
}

// Default profile family: the lowest-index model is accurate but degrades
// with severity, the highest-index one is weaker but robust. For two models
// this is exactly the crossing scenario.
std::vector<ModelProfile> default_profiles(int num_models) {
    std::vector<ModelProfile> out;
    const double span = num_models > 1 ? static_cast<double>(num_models - 1) : 1.0;
    for (int m = 0; m < num_models; ++m) {
        const double frac = static_cast<double>(m) / span;
        out.push_back(ModelProfile{0.9 - 0.3 * frac, 0.15 * (1.0 - frac), 4.0});
    }
    return out;
}

RunConfig build_config(const CliOptions& opt, std::uint64_t seed) {
    RunConfig config;
    if (opt.method == "samocp") {
        config.method = Method::Samocp;
    } else if (opt.method == "mocp") {
        config.method = Method::Mocp;
    } else if (opt.method == "ogd-baseline") {
        config.method = Method::OgdBaseline;
    } else {
        throw CLI::ValidationError("--method must be samocp, mocp or ogd-baseline");
    }
    if (opt.mode == "deterministic") {
        config.mode = SelectMode::Deterministic;
    } else if (opt.mode == "sample") {
        config.mode = SelectMode::Sample;
    } else {
        throw CLI::ValidationError("--mode must be deterministic or sample");
    }
    if (opt.sign_mode == "corrected") {
        config.sign_mode = SignMode::Corrected;
    } else if (opt.sign_mode == "paper") {
        config.sign_mode = SignMode::Paper;
    } else {
        throw CLI::ValidationError("--sign-mode must be corrected or paper");
    }
    config.target_alpha = opt.target_alpha;
    config.eta = opt.eta;
    config.epsilon = opt.epsilon;
    config.sigma = opt.sigma;
    config.g = opt.g;
    config.score = ScoreParams{opt.xi, opt.k_reg};
    config.window = opt.window;
    config.baseline_model = opt.baseline_model;
    config.seed = seed;
    config.export_stream_path = opt.export_stream;

    if (opt.stream == "synthetic") {
        StreamConfig stream;
        stream.num_classes = opt.num_classes;
        stream.num_models = opt.num_models;
        stream.horizon = opt.horizon;
        if (opt.schedule == "sudden") {
            stream.schedule.mode = ShiftMode::Sudden;
        } else if (opt.schedule == "gradual") {
            stream.schedule.mode = ShiftMode::Gradual;
        } else if (opt.schedule == "stationary") {
            stream.schedule.mode = ShiftMode::Stationary;
        } else {
            throw CLI::ValidationError("--schedule must be sudden, gradual or stationary");
        }
        stream.schedule.batch_size = opt.batch_size;
        stream.schedule.max_severity = opt.max_severity;
        if (opt.profiles.empty()) {
            stream.profiles = default_profiles(opt.num_models);
        } else {
            for (const std::string& text : opt.profiles) stream.profiles.push_back(parse_profile(text));
        }
        stream.seed = seed;
        config.synthetic = stream;
    } else {
        config.stream_path = opt.stream;
    }
    return config;
}

void write_artifacts(const fs::path& dir, const RunConfig& config, const RunResult& result,
                     const CliOptions& opt) {
    fs::create_directories(dir);
    write_report_json((dir / "report.json").string(), result, config);
    write_steps_csv((dir / "steps.csv").string(), result.records);
    write_window_regret_csv((dir / "regret_windows.csv").string(), result.report);
    if (opt.sweep_widths) {
        std::vector<long> widths;
        for (long w = 50; w <= 500; w += 50) widths.push_back(w);
        write_regret_by_width_csv((dir / "regret_by_width.csv").string(), result.records, widths,
                                  config.target_alpha, opt.sliding_windows);
    }
}

std::size_t fanout_threads() {
    if (const char* env = std::getenv("CONFSTREAM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

int run_command(const CliOptions& opt) {
    std::vector<std::uint64_t> seeds;
    if (opt.seeds_range.empty()) {
        seeds.push_back(opt.seed);
    } else {
        const std::size_t sep = opt.seeds_range.find("..");
        if (sep == std::string::npos)
            throw CLI::ValidationError("--seeds expects the form a..b");
        const std::uint64_t lo = std::stoull(opt.seeds_range.substr(0, sep));
        const std::uint64_t hi = std::stoull(opt.seeds_range.substr(sep + 2));
        if (hi < lo) throw CLI::ValidationError("--seeds range is empty");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    if (!opt.export_stream.empty() && seeds.size() > 1)
        throw CLI::ValidationError("--export-stream works with a single seed only");

    const fs::path out_root(opt.out_dir);
    if (seeds.size() == 1) {
        const RunConfig config = build_config(opt, seeds[0]);
        const RunResult result = run(config);
        write_artifacts(out_root, config, result, opt);
        std::printf("coverage %.2f%%  avg_width %.3f  avg_regret %.5g  single_width %.3f\n",
                    result.report.coverage, result.report.avg_width, result.report.avg_regret,
                    result.report.single_width);
        return 0;
    }

    // Seed fan-out: independent runs, merged summary at the end.
    std::vector<nlohmann::json> reports(seeds.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mutex;
    std::string first_error;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= seeds.size() || failed.load()) return;
            try {
                const RunConfig config = build_config(opt, seeds[i]);
                const RunResult result = run(config);
                write_artifacts(out_root / ("seed_" + std::to_string(seeds[i])), config, result, opt);
                reports[i] = report_to_json(result, config);
            } catch (const std::exception& e) {
                std::scoped_lock lock(err_mutex);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t threads = std::min(fanout_threads(), seeds.size());
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    if (failed.load()) throw std::runtime_error(first_error);

    nlohmann::json summary;
    summary["seeds"] = seeds;
    summary["runs"] = reports;
    for (const char* key : {"coverage", "avg_width", "avg_regret", "single_width", "cove"}) {
        double mean = 0.0;
        for (const nlohmann::json& r : reports) mean += r.at(key).get<double>();
        mean /= static_cast<double>(reports.size());
        double var = 0.0;
        for (const nlohmann::json& r : reports) {
            const double d = r.at(key).get<double>() - mean;
            var += d * d;
        }
        summary[std::string("mean_") + key] = mean;
        summary[std::string("std_") + key] =
            reports.size() > 1 ? std::sqrt(var / static_cast<double>(reports.size() - 1)) : 0.0;
    }
    fs::create_directories(out_root);
    std::ofstream out(out_root / "summary.json");
    out << summary.dump(2) << '\n';
    std::printf("ran %zu seeds  mean coverage %.2f%%  mean avg_width %.3f\n", seeds.size(),
                summary["mean_coverage"].get<double>(), summary["mean_avg_width"].get<double>());
    return 0;
}

int validate_command(const std::string& path) {
    const StreamValidation v = validate_stream(path);
    if (v.ok) {
        std::printf("ok\n");
        return 0;
    }
    for (const std::string& violation : v.violations) std::fprintf(stderr, "%s\n", violation.c_str());
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming multi-model adaptive conformal prediction"};
    app.require_subcommand(1);
    CliOptions opt;

    CLI::App* run_cmd = app.add_subcommand("run", "Run a method over a stream and write artifacts");
    run_cmd->add_option("--method", opt.method, "samocp | mocp | ogd-baseline");
    run_cmd->add_option("--mode", opt.mode, "deterministic | sample");
    run_cmd->add_option("--sign-mode", opt.sign_mode, "corrected | paper");
    run_cmd->add_option("--target-alpha", opt.target_alpha, "target miss-coverage probability");
    run_cmd->add_option("--eta", opt.eta, "SF-OGD learning rate");
    run_cmd->add_option("--epsilon", opt.epsilon, "model-weight step size");
    run_cmd->add_option("--sigma", opt.sigma, "expert step-size scale");
    run_cmd->add_option("--g", opt.g, "expert lifetime multiplier");
    run_cmd->add_option("--xi", opt.xi, "score regularization strength");
    run_cmd->add_option("--k-reg", opt.k_reg, "score rank offset");
    run_cmd->add_option("--stream", opt.stream, "'synthetic' or a JSONL stream file path");
    run_cmd->add_option("--seed", opt.seed, "seed for the stream and the run randomness");
    run_cmd->add_option("--seeds", opt.seeds_range, "seed range a..b, fans out parallel runs");
    run_cmd->add_option("--out", opt.out_dir, "output directory");
    run_cmd->add_option("--window", opt.window, "regret window length");
    run_cmd->add_option("--baseline-model", opt.baseline_model, "model index for ogd-baseline");
    run_cmd->add_option("--num-classes", opt.num_classes, "synthetic: number of classes");
    run_cmd->add_option("--num-models", opt.num_models, "synthetic: number of models");
    run_cmd->add_option("--horizon", opt.horizon, "synthetic: stream length");
    run_cmd->add_option("--schedule", opt.schedule, "synthetic: sudden | gradual | stationary");
    run_cmd->add_option("--batch-size", opt.batch_size, "synthetic: steps per severity batch");
    run_cmd->add_option("--max-severity", opt.max_severity, "synthetic: peak severity level");
    run_cmd->add_option("--profile", opt.profiles,
                        "synthetic: per-model base,degradation,sharpness (repeatable)");
    run_cmd->add_option("--export-stream", opt.export_stream, "export the synthetic stream to a file");
    run_cmd->add_flag("--sweep-widths", opt.sweep_widths, "write regret_by_width.csv (50..500)");
    run_cmd->add_flag("--sliding-windows", opt.sliding_windows, "stride-1 windows in the sweep");

    std::string validate_path;
    CLI::App* validate_cmd = app.add_subcommand("validate", "Check a JSONL stream file");
    validate_cmd->add_option("path", validate_path, "stream file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (run_cmd->parsed()) return run_command(opt);
        if (validate_cmd->parsed()) return validate_command(validate_path);
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const StreamFormatError& e) {
        std::fprintf(stderr, "stream error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::logic_error& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "stream error: %s\n", e.what());
        return 2;
    }
    return 0;
}
