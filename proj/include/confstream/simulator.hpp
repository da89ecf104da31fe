#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "confstream/rng.hpp"
#include "confstream/scoring.hpp"

namespace confstream {

enum class ShiftMode { Sudden, Gradual, Stationary };

// Severity schedule over batches: sudden alternates 0 and max_severity,
// gradual sweeps 0..max..0 cyclically, stationary stays at 0.
struct ShiftSchedule {
    ShiftMode mode = ShiftMode::Sudden;
    long batch_size = 500;
    int max_severity = 5;

    void validate() const {
        if (batch_size <= 0) throw std::invalid_argument("ShiftSchedule: batch_size must be positive");
        if (max_severity < 0) throw std::invalid_argument("ShiftSchedule: max_severity must be nonnegative");
    }
};

inline int severity_at(long t, const ShiftSchedule& schedule) {
    if (t <= 0) throw std::invalid_argument("severity_at: t must be positive");
    const long batch = (t - 1) / schedule.batch_size;  // 0-based batch index
    switch (schedule.mode) {
        case ShiftMode::Stationary:
            return 0;
        case ShiftMode::Sudden:
            return batch % 2 == 0 ? 0 : schedule.max_severity;
        case ShiftMode::Gradual: {
            const long period = 2L * schedule.max_severity + 1;
            const long p = batch % period;
            return static_cast<int>(p <= schedule.max_severity ? p : 2L * schedule.max_severity - p);
        }
    }
    return 0;
}

// Stochastic classifier stand-in: top-1 accuracy degrades linearly with
// severity, the softmax concentration is controlled by `sharpness`.
struct ModelProfile {
    double base_accuracy = 0.8;  // in (0, 1)
    double degradation = 0.0;    // accuracy lost per severity level
    double sharpness = 4.0;      // winning logit; losers are standard normal
};

inline double effective_accuracy(const ModelProfile& profile, int severity, int num_classes) {
    const double floor = 1.0 / static_cast<double>(num_classes);
    return std::clamp(profile.base_accuracy - profile.degradation * severity, floor, 1.0);
}

struct StreamConfig {
    int num_classes = 10;
    int num_models = 2;
    long horizon = 5000;
    ShiftSchedule schedule;
    std::vector<ModelProfile> profiles;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("StreamConfig: need at least two classes");
        if (num_models < 1) throw std::invalid_argument("StreamConfig: need at least one model");
        if (horizon < 1) throw std::invalid_argument("StreamConfig: horizon must be positive");
        if (profiles.size() != static_cast<std::size_t>(num_models))
            throw std::invalid_argument("StreamConfig: one profile per model required");
        schedule.validate();
    }
};

struct Instance {
    ModelOutputs outputs;
    int label = 0;
};

// One synthetic instance. Draw order is part of the reproducibility
// contract: (1) the true label, then per model (2) the hit/miss uniform,
// (3) the wrong-argmax label on a miss, (4) K-1 loser logits in ascending
// label order. Loser logits are clipped just below the winner's so the
// intended argmax always wins.
inline Instance emit_instance(Rng& rng, long t, const StreamConfig& config) {
    Instance inst;
    const int k = config.num_classes;
    const int severity = severity_at(t, config.schedule);
    inst.label = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
    inst.outputs.reserve(static_cast<std::size_t>(config.num_models));
    for (int m = 0; m < config.num_models; ++m) {
        const ModelProfile& profile = config.profiles[static_cast<std::size_t>(m)];
        const double acc = effective_accuracy(profile, severity, k);
        const bool hit = rng.next_double() < acc;
        int winner = inst.label;
        if (!hit) {
            const int offset = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k - 1)));
            winner = offset >= inst.label ? offset + 1 : offset;
        }
        std::vector<double> logits(static_cast<std::size_t>(k));
        for (int y = 0; y < k; ++y) {
            if (y == winner) {
                logits[static_cast<std::size_t>(y)] = profile.sharpness;
            } else {
                logits[static_cast<std::size_t>(y)] =
                    std::min(rng.next_gaussian(), profile.sharpness - 1e-6);
            }
        }
        double norm = 0.0;
        for (double& z : logits) {
            z = std::exp(z - profile.sharpness);
            norm += z;
        }
        for (double& z : logits) z /= norm;
        inst.outputs.push_back(ProbVector{std::move(logits)});
    }
    return inst;
}

// Two models whose top-1 ranking flips with severity: the sharp model leads
// on clean data, the flat one under heavy corruption. This is the
// heterogeneity the multi-model learner exists to exploit.
inline StreamConfig crossing_scenario(long horizon = 5000, std::uint64_t seed = 1,
                                      ShiftMode mode = ShiftMode::Sudden) {
    StreamConfig config;
    config.num_classes = 10;
    config.num_models = 2;
    config.horizon = horizon;
    config.schedule = ShiftSchedule{mode, 500, 5};
    config.profiles = {ModelProfile{0.9, 0.15, 4.0}, ModelProfile{0.6, 0.0, 4.0}};
    config.seed = seed;
    return config;
}

// Stationary multi-model stream with spread accuracies, used by the static
// regret and coverage-error checks.
inline StreamConfig stationary_scenario(int num_models, long horizon, std::uint64_t seed) {
    StreamConfig config;
    config.num_classes = 10;
    config.num_models = num_models;
    config.horizon = horizon;
    config.schedule = ShiftSchedule{ShiftMode::Stationary, 500, 0};
    for (int m = 0; m < num_models; ++m) {
        const double acc = 0.85 - 0.12 * m;
        config.profiles.push_back(ModelProfile{acc, 0.0, 4.0 - 0.5 * m});
    }
    config.seed = seed;
    return config;
}

}  // namespace confstream
