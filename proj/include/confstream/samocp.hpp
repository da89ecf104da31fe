#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "confstream/metrics.hpp"
#include "confstream/mocp.hpp"
#include "confstream/scoring.hpp"

namespace confstream {

// Lifetime of the expert born at step t: g times the largest power of two
// dividing t. The resulting active intervals form geometric covers of the
// horizon, so every interval is approximately spanned by some expert.
inline long expert_lifetime(long t, long g) {
    if (t <= 0) throw std::invalid_argument("expert_lifetime: t must be positive");
    if (g <= 0) throw std::invalid_argument("expert_lifetime: g must be positive");
    return g * (t & -t);
}

// Sign convention for the meta-weight update. The printed update rule
// decreases the weight of an expert that outperforms the learner; Corrected
// flips the exponent so better experts gain weight. Paper mode reproduces
// the rule literally.
enum class SignMode { Corrected, Paper };

struct SamocpParams {
    long g = 8;
    double sigma = 140.0;      // > 1
    double epsilon = 0.9;      // in (0, 1)
    OcpParams ocp;

    void validate() const {
        if (g <= 0) throw std::invalid_argument("SamocpParams: g must be positive");
        if (!(sigma > 1.0)) throw std::invalid_argument("SamocpParams: sigma must exceed 1");
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw std::invalid_argument("SamocpParams: epsilon must lie in (0, 1)");
        ocp.validate();
    }
};

// One expert: a MOCP instance with a birth step, a finite lifetime, its own
// step size and a meta-weight h.
struct Expert {
    long birth = 0;
    long lifetime = 1;
    double step_size = 0.0;   // min(epsilon, sigma / sqrt(lifetime))
    double meta_weight = 0.0;
    MocpExpertState mocp;

    long last_active() const noexcept { return birth + lifetime - 1; }
    bool active_at(long t) const noexcept { return birth <= t && t <= last_active(); }
};

struct SamocpState {
    SamocpParams params;
    std::size_t num_models = 0;
    std::vector<Expert> experts;      // active experts, oldest first
    double last_learner_alpha = 0.0;  // selected alpha of the previous step

    // Previous-step per-slot masses and gradient norms, kept only for the
    // weight-smoothness diagnostic.
    struct SlotSnapshot {
        long birth = 0;
        std::vector<double> mass;
        std::vector<double> grad_norm;
    };
    std::vector<SlotSnapshot> prev_slots;
};

inline SamocpState samocp_init(std::size_t num_models, const SamocpParams& params) {
    if (num_models == 0) throw std::invalid_argument("samocp_init: need at least one model");
    params.validate();
    SamocpState state;
    state.params = params;
    state.num_models = num_models;
    state.last_learner_alpha = params.ocp.target_alpha;
    return state;
}

// New expert for step t. Its slots start at the learner's previous alpha,
// its meta-weight at its own step size.
inline Expert spawn_expert(const SamocpState& state, long t) {
    Expert e;
    e.birth = t;
    e.lifetime = expert_lifetime(t, state.params.g);
    e.step_size = std::min(state.params.epsilon,
                           state.params.sigma / std::sqrt(static_cast<double>(e.lifetime)));
    e.meta_weight = e.step_size;
    e.mocp = mocp_init(state.num_models, state.last_learner_alpha, state.params.ocp, e.step_size);
    return e;
}

inline void retire_expired(SamocpState& state, long t) {
    std::erase_if(state.experts, [t](const Expert& e) { return e.last_active() < t; });
}

// Normalized meta-weights over the active experts.
inline std::vector<double> meta_distribution(const SamocpState& state) {
    if (state.experts.empty()) throw std::logic_error("meta_distribution: no active experts");
    double sum = 0.0;
    for (const Expert& e : state.experts) sum += e.meta_weight;
    std::vector<double> out(state.experts.size());
    for (std::size_t n = 0; n < state.experts.size(); ++n) out[n] = state.experts[n].meta_weight / sum;
    return out;
}

struct SamocpSelection {
    std::size_t expert_index = 0;  // position in SamocpState::experts
    long expert_birth = 0;
    std::size_t model = 0;
    double alpha = 0.0;
    std::vector<double> model_mass;  // sum over experts of h_bar * w_bar, per model
};

// Sample mode draws an expert by inverse CDF over the normalized
// meta-weights and a model within it; deterministic mode returns the doubly
// weighted alpha mixture, the argmax expert and the argmax of the
// aggregated model mass (lowest index on ties).
inline SamocpSelection samocp_select(const SamocpState& state, SelectMode mode,
                                     double rand_expert, double rand_model) {
    const std::vector<double> h_bar = meta_distribution(state);
    SamocpSelection sel;
    sel.model_mass.assign(state.num_models, 0.0);
    for (std::size_t n = 0; n < state.experts.size(); ++n) {
        const std::vector<double> w_bar = mocp_distribution(state.experts[n].mocp);
        for (std::size_t m = 0; m < state.num_models; ++m) sel.model_mass[m] += h_bar[n] * w_bar[m];
    }
    if (mode == SelectMode::Sample) {
        double cum = 0.0;
        sel.expert_index = state.experts.size() - 1;
        for (std::size_t n = 0; n < h_bar.size(); ++n) {
            cum += h_bar[n];
            if (rand_expert < cum) {
                sel.expert_index = n;
                break;
            }
        }
        const MocpSelection inner = mocp_select(state.experts[sel.expert_index].mocp, SelectMode::Sample, rand_model);
        sel.model = inner.model;
        sel.alpha = inner.alpha;
    } else {
        double best_h = -1.0;
        for (std::size_t n = 0; n < state.experts.size(); ++n) {
            const Expert& e = state.experts[n];
            const std::vector<double> w_bar = mocp_distribution(e.mocp);
            for (std::size_t m = 0; m < state.num_models; ++m)
                sel.alpha += h_bar[n] * w_bar[m] * e.mocp.slots[m].sfogd.alpha;
            if (h_bar[n] > best_h) {
                best_h = h_bar[n];
                sel.expert_index = n;
            }
        }
        double best_mass = -1.0;
        for (std::size_t m = 0; m < state.num_models; ++m) {
            if (sel.model_mass[m] > best_mass) {
                best_mass = sel.model_mass[m];
                sel.model = m;
            }
        }
    }
    sel.expert_birth = state.experts[sel.expert_index].birth;
    return sel;
}

// Meta-weight update for step t with relative loss r = learner - expert.
// An expert past its last active step drops to weight zero.
inline void meta_weight_update(Expert& expert, long t, double learner_loss, double expert_loss,
                               SignMode sign) {
    if (t >= expert.birth && t < expert.last_active()) {
        const double r = learner_loss - expert_loss;
        const double exponent = sign == SignMode::Corrected ? expert.step_size * r : -expert.step_size * r;
        expert.meta_weight *= std::exp(exponent);
    } else if (t >= expert.last_active()) {
        expert.meta_weight = 0.0;
    }
}

struct SamocpFeedback {
    double learner_loss = 0.0;
    double expected_err = 0.0;
    double weight_smoothness = 0.0;
};

// Applies one step of feedback to every active expert, given the per-model
// alpha_bar values of step t and the selection made at that step. Exposed
// separately from the data-driven step so scripted alpha_bar sequences can
// drive the state directly.
//
// The learner loss entering the meta update is the realized selected slot
// loss in sample mode and the doubly weighted loss in deterministic mode;
// the expert-side loss mirrors that choice (the selected model's slot loss
// vs. the expert's weight-averaged loss).
inline SamocpFeedback samocp_apply_feedback(SamocpState& state, long t,
                                            std::span<const double> alpha_bars,
                                            const SamocpSelection& sel, SelectMode mode,
                                            SignMode sign) {
    if (alpha_bars.size() != state.num_models)
        throw std::invalid_argument("samocp_apply_feedback: alpha_bars size must match model count");
    const std::size_t num_experts = state.experts.size();
    const std::vector<double> h_bar = meta_distribution(state);

    SamocpFeedback fb;
    std::vector<double> expert_losses(num_experts, 0.0);
    std::vector<std::vector<double>> masses(num_experts);
    double selected_slot_loss = 0.0;
    for (std::size_t n = 0; n < num_experts; ++n) {
        Expert& e = state.experts[n];
        const std::vector<double> w_bar = mocp_distribution(e.mocp);
        masses[n].resize(state.num_models);
        double weighted_loss = 0.0;
        for (std::size_t m = 0; m < state.num_models; ++m) {
            const double slot_alpha = e.mocp.slots[m].sfogd.alpha;
            const double loss = pinball_loss(alpha_bars[m], slot_alpha, state.params.ocp.target_alpha);
            weighted_loss += w_bar[m] * loss;
            if (slot_alpha >= alpha_bars[m]) fb.expected_err += h_bar[n] * w_bar[m];
            masses[n][m] = h_bar[n] * w_bar[m];
            if (n == sel.expert_index && m == sel.model) selected_slot_loss = loss;
        }
        if (mode == SelectMode::Deterministic) {
            expert_losses[n] = weighted_loss;
        } else {
            expert_losses[n] = pinball_loss(alpha_bars[sel.model], e.mocp.slots[sel.model].sfogd.alpha,
                                            state.params.ocp.target_alpha);
        }
    }
    if (mode == SelectMode::Deterministic) {
        for (std::size_t n = 0; n < num_experts; ++n) fb.learner_loss += h_bar[n] * expert_losses[n];
    } else {
        fb.learner_loss = selected_slot_loss;
    }

    double weight_sum = 0.0;
    for (std::size_t n = 0; n < num_experts; ++n) {
        Expert& e = state.experts[n];
        mocp_update(e.mocp, alpha_bars);
        meta_weight_update(e, t, fb.learner_loss, expert_losses[n], sign);
        weight_sum += e.meta_weight;
    }
    if (weight_sum > 0.0 && (weight_sum < 1e-150 || weight_sum > 1e150)) {
        for (Expert& e : state.experts) e.meta_weight /= weight_sum;
    }

    // Diagnostic summand |h_bar*w_bar - prev * H_prev/H_now| over the slots
    // active at t; experts born this step contribute their full mass.
    std::vector<SamocpState::SlotSnapshot> snapshots(num_experts);
    for (std::size_t n = 0; n < num_experts; ++n) {
        const Expert& e = state.experts[n];
        snapshots[n].birth = e.birth;
        snapshots[n].mass = masses[n];
        snapshots[n].grad_norm.resize(state.num_models);
        const SamocpState::SlotSnapshot* prev = nullptr;
        for (const SamocpState::SlotSnapshot& s : state.prev_slots) {
            if (s.birth == e.birth) {
                prev = &s;
                break;
            }
        }
        for (std::size_t m = 0; m < state.num_models; ++m) {
            const double h_now = std::sqrt(e.mocp.slots[m].sfogd.cum_sq_grad);
            snapshots[n].grad_norm[m] = h_now;
            double carried = 0.0;
            if (prev != nullptr && h_now > 0.0) carried = prev->mass[m] * prev->grad_norm[m] / h_now;
            fb.weight_smoothness += std::abs(masses[n][m] - carried);
        }
    }
    state.prev_slots = std::move(snapshots);
    return fb;
}

// Full online step: spawn and retire experts, select, build the prediction
// set from the selected model's calibration scores, observe the label,
// update every active expert and append the step's scores to every store.
class SamocpRunner {
public:
    SamocpRunner(std::size_t num_models, int num_classes, const SamocpParams& params,
                 const ScoreParams& score, SelectMode mode, SignMode sign)
        : state_(samocp_init(num_models, params)),
          stores_(num_models),
          score_(score),
          mode_(mode),
          sign_(sign),
          num_classes_(num_classes) {
        score.validate();
    }

    // rand_expert and rand_model are consumed only in sample mode.
    std::pair<PredictionSet, StepRecord> step(const ModelOutputs& outputs, int true_label, double u,
                                              double rand_expert = 0.0, double rand_model = 0.0) {
        const long t = ++clock_;
        if (outputs.size() != state_.num_models)
            throw std::invalid_argument("SamocpRunner::step: wrong number of model outputs");
        if (true_label < 0 || true_label >= num_classes_)
            throw std::invalid_argument("SamocpRunner::step: label out of range");

        state_.experts.push_back(spawn_expert(state_, t));
        retire_expired(state_, t);
        const long active_cap = state_.params.g * (std::bit_width(static_cast<unsigned long>(t)));
        if (static_cast<long>(state_.experts.size()) > active_cap)
            throw std::logic_error("SamocpRunner::step: active expert bound violated");

        const SamocpSelection sel = samocp_select(state_, mode_, rand_expert, rand_model);
        const PredictionSet set =
            prediction_set(outputs[sel.model], stores_[sel.model], sel.alpha, t, u, score_);

        std::vector<double> true_scores(state_.num_models);
        std::vector<double> alpha_bars(state_.num_models);
        for (std::size_t m = 0; m < state_.num_models; ++m) {
            true_scores[m] = raps_score(outputs[m], true_label, u, score_);
            alpha_bars[m] = alpha_bar(true_scores[m], stores_[m], t);
        }

        const SamocpFeedback fb = samocp_apply_feedback(state_, t, alpha_bars, sel, mode_, sign_);
        state_.last_learner_alpha = sel.alpha;
        for (std::size_t m = 0; m < state_.num_models; ++m) stores_[m].insert(true_scores[m]);

        StepRecord rec;
        rec.t = t;
        rec.err = set.contains(true_label) ? 0 : 1;
        rec.expected_err = fb.expected_err;
        rec.width = set.width();
        rec.learner_loss = fb.learner_loss;
        rec.learner_alpha = sel.alpha;
        rec.selected_expert = sel.expert_birth;
        rec.selected_model = static_cast<int>(sel.model);
        rec.alpha_bars = alpha_bars;
        rec.model_mass = sel.model_mass;
        rec.weight_smoothness = fb.weight_smoothness;
        return {set, rec};
    }

    const SamocpState& state() const noexcept { return state_; }
    long clock() const noexcept { return clock_; }

private:
    SamocpState state_;
    std::vector<CalibrationStore> stores_;
    ScoreParams score_;
    SelectMode mode_;
    SignMode sign_;
    int num_classes_;
    long clock_ = 0;
};

}  // namespace confstream
