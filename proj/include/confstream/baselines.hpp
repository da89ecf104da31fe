#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "confstream/metrics.hpp"
#include "confstream/ocp.hpp"
#include "confstream/scoring.hpp"

namespace confstream {

// Single miss-coverage update against an observed alpha_bar (Eq. 4/5 path
// shared by the baseline runner and by scripted-sequence tests).
inline SfogdState ogd_update(SfogdState state, double alpha_bar, const OcpParams& params) {
    const int err = alpha_bar < state.alpha ? 1 : 0;
    return sfogd_step(state, pinball_grad(err, params.target_alpha), params.eta);
}

// ScaleFreeOGD baseline: one SF-OGD thread per model at the fixed target,
// no experts. Each step predicts with one model's thread and updates it;
// every model's calibration store is still appended so benchmark runs share
// identical score histories.
struct OgdBaselineState {
    std::vector<SfogdState> threads;
    OcpParams params;
};

class OgdBaselineRunner {
public:
    OgdBaselineRunner(std::size_t num_models, int num_classes, const OcpParams& params,
                      const ScoreParams& score)
        : stores_(num_models), score_(score), num_classes_(num_classes) {
        params.validate();
        score.validate();
        state_.params = params;
        state_.threads.assign(num_models, SfogdState{params.target_alpha, 0.0});
    }

    std::pair<PredictionSet, StepRecord> step(const ModelOutputs& outputs, int true_label, double u,
                                              std::size_t model_index) {
        const long t = ++clock_;
        if (model_index >= state_.threads.size())
            throw std::invalid_argument("OgdBaselineRunner::step: model index out of range");
        if (outputs.size() != state_.threads.size())
            throw std::invalid_argument("OgdBaselineRunner::step: wrong number of model outputs");
        if (true_label < 0 || true_label >= num_classes_)
            throw std::invalid_argument("OgdBaselineRunner::step: label out of range");

        SfogdState& thread = state_.threads[model_index];
        const double alpha = thread.alpha;
        const PredictionSet set =
            prediction_set(outputs[model_index], stores_[model_index], alpha, t, u, score_);

        std::vector<double> alpha_bars(state_.threads.size());
        std::vector<double> true_scores(state_.threads.size());
        for (std::size_t m = 0; m < state_.threads.size(); ++m) {
            true_scores[m] = raps_score(outputs[m], true_label, u, score_);
            alpha_bars[m] = alpha_bar(true_scores[m], stores_[m], t);
        }

        const double loss = pinball_loss(alpha_bars[model_index], alpha, state_.params.target_alpha);
        thread = ogd_update(thread, alpha_bars[model_index], state_.params);
        for (std::size_t m = 0; m < state_.threads.size(); ++m) stores_[m].insert(true_scores[m]);

        StepRecord rec;
        rec.t = t;
        rec.err = set.contains(true_label) ? 0 : 1;
        rec.expected_err = alpha_bars[model_index] <= alpha ? 1.0 : 0.0;
        rec.width = set.width();
        rec.learner_loss = loss;
        rec.learner_alpha = alpha;
        rec.selected_expert = -1;
        rec.selected_model = static_cast<int>(model_index);
        rec.alpha_bars = alpha_bars;
        rec.model_mass.assign(state_.threads.size(), 0.0);
        rec.model_mass[model_index] = 1.0;
        return {set, rec};
    }

    const OgdBaselineState& state() const noexcept { return state_; }

private:
    OgdBaselineState state_;
    std::vector<CalibrationStore> stores_;
    ScoreParams score_;
    int num_classes_;
    long clock_ = 0;
};

}  // namespace confstream
