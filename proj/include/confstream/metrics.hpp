#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "confstream/ocp.hpp"

namespace confstream {

// Everything recorded about one stream step; all reports derive from these.
struct StepRecord {
    long t = 0;
    int err = 0;                      // 1 if the emitted set missed the true label
    double expected_err = 0.0;        // weight-averaged miss indicator across slots
    int width = 0;
    double learner_loss = 0.0;
    double learner_alpha = 0.0;
    long selected_expert = -1;        // expert birth index, -1 when the method has no experts
    int selected_model = 0;
    std::vector<double> alpha_bars;   // per model
    std::vector<double> model_mass;   // per model, aggregated selection mass
    double weight_smoothness = 0.0;   // diagnostic, see samocp.hpp
};

// Percent of steps whose prediction set covered the true label.
inline double coverage(std::span<const StepRecord> records) {
    if (records.empty()) throw std::invalid_argument("coverage: no records");
    double miss = 0.0;
    for (const StepRecord& r : records) miss += r.err;
    return 100.0 * (1.0 - miss / static_cast<double>(records.size()));
}

// |time-averaged expected miss rate - target_alpha|.
inline double coverage_error(std::span<const StepRecord> records, double target_alpha) {
    if (records.empty()) throw std::invalid_argument("coverage_error: no records");
    double sum = 0.0;
    for (const StepRecord& r : records) sum += r.expected_err;
    const double mean = sum / static_cast<double>(records.size());
    return mean >= target_alpha ? mean - target_alpha : target_alpha - mean;
}

inline double average_width(std::span<const StepRecord> records) {
    if (records.empty()) throw std::invalid_argument("average_width: no records");
    double sum = 0.0;
    for (const StepRecord& r : records) sum += r.width;
    return sum / static_cast<double>(records.size());
}

// Fraction of steps producing a correct singleton set.
inline double single_width(std::span<const StepRecord> records) {
    if (records.empty()) throw std::invalid_argument("single_width: no records");
    double hits = 0.0;
    for (const StepRecord& r : records) {
        if (r.width == 1 && r.err == 0) hits += 1.0;
    }
    return hits / static_cast<double>(records.size());
}

// Per-window regret against the best fixed (model, alpha) pair inside the
// window: sum of learner losses minus the minimum over models of the best
// fixed-alpha loss on that model's alpha_bar sequence.
//
// Windows tile the horizon with the given stride (stride == window gives
// disjoint tiling, the default); a trailing partial window is dropped.
inline std::vector<double> windowed_regret(std::span<const StepRecord> records, long window,
                                           double target_alpha, long stride = 0) {
    if (window <= 0) throw std::invalid_argument("windowed_regret: window must be positive");
    if (stride <= 0) stride = window;
    const long n = static_cast<long>(records.size());
    std::vector<double> regrets;
    std::vector<double> model_bars;
    for (long start = 0; start + window <= n; start += stride) {
        double learner = 0.0;
        for (long i = start; i < start + window; ++i) learner += records[static_cast<std::size_t>(i)].learner_loss;
        const std::size_t num_models = records[static_cast<std::size_t>(start)].alpha_bars.size();
        double best = 0.0;
        for (std::size_t m = 0; m < num_models; ++m) {
            model_bars.clear();
            for (long i = start; i < start + window; ++i)
                model_bars.push_back(records[static_cast<std::size_t>(i)].alpha_bars[m]);
            const double loss = best_fixed_alpha(model_bars, target_alpha).loss_star;
            if (m == 0 || loss < best) best = loss;
        }
        regrets.push_back(learner - best);
    }
    return regrets;
}

struct MetricsReport {
    double coverage = 0.0;      // percent
    double cove = 0.0;
    double avg_width = 0.0;
    double single_width = 0.0;
    double avg_regret = 0.0;    // mean of per-window regrets (unnormalized window sums)
    long window = 0;
    std::vector<double> window_regrets;
};

inline MetricsReport compute_report(std::span<const StepRecord> records, double target_alpha, long window) {
    MetricsReport report;
    report.coverage = coverage(records);
    report.cove = coverage_error(records, target_alpha);
    report.avg_width = average_width(records);
    report.single_width = single_width(records);
    report.window = window;
    if (window <= static_cast<long>(records.size())) {
        report.window_regrets = windowed_regret(records, window, target_alpha);
        for (double r : report.window_regrets) report.avg_regret += r;
        if (!report.window_regrets.empty()) report.avg_regret /= static_cast<double>(report.window_regrets.size());
    }
    return report;
}

}  // namespace confstream
