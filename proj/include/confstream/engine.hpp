#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "confstream/baselines.hpp"
#include "confstream/metrics.hpp"
#include "confstream/mocp.hpp"
#include "confstream/rng.hpp"
#include "confstream/samocp.hpp"
#include "confstream/scoring.hpp"
#include "confstream/simulator.hpp"
#include "confstream/stream_io.hpp"

namespace confstream {

enum class Method { Samocp, Mocp, OgdBaseline };

// Standalone multi-model expert driven directly by the stream (no expert
// covering). The recorded learner loss is the weight-averaged slot loss,
// the quantity the static regret benchmark compares against.
class MocpRunner {
public:
    MocpRunner(std::size_t num_models, int num_classes, const OcpParams& params, double step_size,
               const ScoreParams& score, SelectMode mode)
        : state_(mocp_init(num_models, params.target_alpha, params, step_size)),
          stores_(num_models),
          score_(score),
          mode_(mode),
          num_classes_(num_classes) {
        score.validate();
    }

    std::pair<PredictionSet, StepRecord> step(const ModelOutputs& outputs, int true_label, double u,
                                              double rand_model = 0.0) {
        const long t = ++clock_;
        if (outputs.size() != state_.num_models())
            throw std::invalid_argument("MocpRunner::step: wrong number of model outputs");
        if (true_label < 0 || true_label >= num_classes_)
            throw std::invalid_argument("MocpRunner::step: label out of range");

        const MocpSelection sel = mocp_select(state_, mode_, rand_model);
        const PredictionSet set =
            prediction_set(outputs[sel.model], stores_[sel.model], sel.alpha, t, u, score_);
        const std::vector<double> w_bar = mocp_distribution(state_);

        std::vector<double> true_scores(state_.num_models());
        std::vector<double> alpha_bars(state_.num_models());
        for (std::size_t m = 0; m < state_.num_models(); ++m) {
            true_scores[m] = raps_score(outputs[m], true_label, u, score_);
            alpha_bars[m] = alpha_bar(true_scores[m], stores_[m], t);
        }

        double expected_err = 0.0;
        for (std::size_t m = 0; m < state_.num_models(); ++m) {
            if (state_.slots[m].sfogd.alpha >= alpha_bars[m]) expected_err += w_bar[m];
        }
        const std::vector<double> losses = mocp_update(state_, alpha_bars);
        double weighted_loss = 0.0;
        for (std::size_t m = 0; m < losses.size(); ++m) weighted_loss += w_bar[m] * losses[m];
        for (std::size_t m = 0; m < state_.num_models(); ++m) stores_[m].insert(true_scores[m]);

        StepRecord rec;
        rec.t = t;
        rec.err = set.contains(true_label) ? 0 : 1;
        rec.expected_err = expected_err;
        rec.width = set.width();
        rec.learner_loss = weighted_loss;
        rec.learner_alpha = sel.alpha;
        rec.selected_expert = -1;
        rec.selected_model = static_cast<int>(sel.model);
        rec.alpha_bars = alpha_bars;
        rec.model_mass = w_bar;
        return {set, rec};
    }

    const MocpExpertState& state() const noexcept { return state_; }

private:
    MocpExpertState state_;
    std::vector<CalibrationStore> stores_;
    ScoreParams score_;
    SelectMode mode_;
    int num_classes_;
    long clock_ = 0;
};

struct RunConfig {
    Method method = Method::Samocp;
    SelectMode mode = SelectMode::Deterministic;
    SignMode sign_mode = SignMode::Corrected;
    double target_alpha = 0.1;
    double eta = 0.05;
    double epsilon = 0.9;
    double sigma = 140.0;
    long g = 8;
    ScoreParams score{0.1, 1};
    std::size_t baseline_model = 0;
    long window = 100;
    std::uint64_t seed = 1;
    std::optional<StreamConfig> synthetic;  // when absent, replay stream_path
    std::string stream_path;
    std::string export_stream_path;  // optional synthetic-stream export

    OcpParams ocp() const { return OcpParams{target_alpha, eta}; }
    SamocpParams samocp() const { return SamocpParams{g, sigma, epsilon, ocp()}; }
};

struct RunResult {
    std::vector<StepRecord> records;
    MetricsReport report;
    int num_classes = 0;
    int num_models = 0;
};

namespace detail {

// Per-step driver shared by the synthetic and replay paths. The run RNG is
// consumed in a fixed order each step: u first, then (sample mode only) the
// expert draw and the model draw.
class MethodDriver {
public:
    MethodDriver(const RunConfig& config, int num_classes, int num_models) : config_(config) {
        switch (config.method) {
            case Method::Samocp:
                samocp_.emplace(static_cast<std::size_t>(num_models), num_classes, config.samocp(),
                                config.score, config.mode, config.sign_mode);
                break;
            case Method::Mocp:
                mocp_.emplace(static_cast<std::size_t>(num_models), num_classes, config.ocp(),
                              config.epsilon, config.score, config.mode);
                break;
            case Method::OgdBaseline:
                baseline_.emplace(static_cast<std::size_t>(num_models), num_classes, config.ocp(),
                                  config.score);
                break;
        }
    }

    StepRecord step(const ModelOutputs& outputs, int label, Rng& run_rng) {
        const double u = run_rng.next_double();
        if (samocp_.has_value()) {
            double re = 0.0, rm = 0.0;
            if (config_.mode == SelectMode::Sample) {
                re = run_rng.next_double();
                rm = run_rng.next_double();
            }
            return samocp_->step(outputs, label, u, re, rm).second;
        }
        if (mocp_.has_value()) {
            double rm = 0.0;
            if (config_.mode == SelectMode::Sample) rm = run_rng.next_double();
            return mocp_->step(outputs, label, u, rm).second;
        }
        return baseline_->step(outputs, label, u, config_.baseline_model).second;
    }

private:
    RunConfig config_;
    std::optional<SamocpRunner> samocp_;
    std::optional<MocpRunner> mocp_;
    std::optional<OgdBaselineRunner> baseline_;
};

}  // namespace detail

inline RunResult run(const RunConfig& config) {
    RunResult result;
    Rng run_rng(config.seed, kRunStreamTag);

    if (config.synthetic.has_value()) {
        StreamConfig stream = *config.synthetic;
        stream.validate();
        result.num_classes = stream.num_classes;
        result.num_models = stream.num_models;
        detail::MethodDriver driver(config, stream.num_classes, stream.num_models);
        Rng sim_rng(stream.seed, kSimStreamTag);
        std::optional<StreamWriter> writer;
        if (!config.export_stream_path.empty()) {
            writer.emplace(config.export_stream_path,
                           StreamHeader{stream.num_classes, stream.num_models, config.score.xi,
                                        config.score.k_reg});
        }
        result.records.reserve(static_cast<std::size_t>(stream.horizon));
        for (long t = 1; t <= stream.horizon; ++t) {
            const Instance inst = emit_instance(sim_rng, t, stream);
            if (writer.has_value()) writer->write(t, inst.outputs, inst.label);
            result.records.push_back(driver.step(inst.outputs, inst.label, run_rng));
        }
    } else {
        StreamReader reader(config.stream_path);
        const StreamHeader& header = reader.header();
        result.num_classes = header.num_classes;
        result.num_models = header.num_models;
        RunConfig effective = config;
        effective.score = ScoreParams{header.xi, header.k_reg};
        detail::MethodDriver driver(effective, header.num_classes, header.num_models);
        while (auto rec = reader.next()) {
            result.records.push_back(driver.step(rec->second.outputs, rec->second.label, run_rng));
        }
        if (result.records.empty()) throw StreamFormatError(2, "stream holds no records");
    }

    result.report = compute_report(result.records, config.target_alpha, config.window);
    return result;
}

// ---------------------------------------------------------------------------
// Artifact writers. steps.csv uses %.17g so reruns are byte-identical.

inline void write_steps_csv(const std::string& path, std::span<const StepRecord> records) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) throw std::runtime_error("cannot open " + path);
    const std::size_t num_models = records.empty() ? 0 : records.front().alpha_bars.size();
    std::fprintf(f, "t,err,expected_err,width,learner_loss,learner_alpha,selected_expert,selected_model");
    for (std::size_t m = 0; m < num_models; ++m) std::fprintf(f, ",alpha_bar_%zu", m);
    for (std::size_t m = 0; m < num_models; ++m) std::fprintf(f, ",model_mass_%zu", m);
    std::fprintf(f, ",weight_smoothness\n");
    for (const StepRecord& r : records) {
        std::fprintf(f, "%ld,%d,%.17g,%d,%.17g,%.17g,%ld,%d", r.t, r.err, r.expected_err, r.width,
                     r.learner_loss, r.learner_alpha, r.selected_expert, r.selected_model);
        for (double ab : r.alpha_bars) std::fprintf(f, ",%.17g", ab);
        for (double mm : r.model_mass) std::fprintf(f, ",%.17g", mm);
        std::fprintf(f, ",%.17g\n", r.weight_smoothness);
    }
    std::fclose(f);
}

inline nlohmann::json report_to_json(const RunResult& result, const RunConfig& config) {
    nlohmann::json j;
    j["coverage"] = result.report.coverage;
    j["cove"] = result.report.cove;
    j["avg_width"] = result.report.avg_width;
    j["single_width"] = result.report.single_width;
    j["avg_regret"] = result.report.avg_regret;
    j["window"] = result.report.window;
    j["num_windows"] = result.report.window_regrets.size();
    j["target_alpha"] = config.target_alpha;
    j["num_classes"] = result.num_classes;
    j["num_models"] = result.num_models;
    j["horizon"] = result.records.size();
    j["seed"] = config.seed;
    switch (config.method) {
        case Method::Samocp: j["method"] = "samocp"; break;
        case Method::Mocp: j["method"] = "mocp"; break;
        case Method::OgdBaseline: j["method"] = "ogd-baseline"; break;
    }
    j["mode"] = config.mode == SelectMode::Deterministic ? "deterministic" : "sample";
    j["sign_mode"] = config.sign_mode == SignMode::Corrected ? "corrected" : "paper";
    return j;
}

inline void write_report_json(const std::string& path, const RunResult& result, const RunConfig& config) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << report_to_json(result, config).dump(2) << '\n';
}

inline void write_window_regret_csv(const std::string& path, const MetricsReport& report) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "window_start,window_end,regret\n");
    for (std::size_t i = 0; i < report.window_regrets.size(); ++i) {
        const long start = static_cast<long>(i) * report.window + 1;
        std::fprintf(f, "%ld,%ld,%.17g\n", start, start + report.window - 1, report.window_regrets[i]);
    }
    std::fclose(f);
}

// Average regret per interval size, for the regret-vs-width sweep.
inline void write_regret_by_width_csv(const std::string& path, std::span<const StepRecord> records,
                                      std::span<const long> widths, double target_alpha,
                                      bool sliding) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "width,avg_regret,max_regret,num_windows\n");
    for (long w : widths) {
        if (w > static_cast<long>(records.size())) continue;
        const std::vector<double> regrets = windowed_regret(records, w, target_alpha, sliding ? 1 : w);
        double sum = 0.0, mx = 0.0;
        for (double r : regrets) {
            sum += r;
            if (r > mx) mx = r;
        }
        const double avg = regrets.empty() ? 0.0 : sum / static_cast<double>(regrets.size());
        std::fprintf(f, "%ld,%.17g,%.17g,%zu\n", w, avg, mx, regrets.size());
    }
    std::fclose(f);
}

}  // namespace confstream
