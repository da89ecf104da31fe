#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "confstream/ocp.hpp"

namespace confstream {

enum class SelectMode { Sample, Deterministic };

// One model's state inside an expert: its adaptive miss-coverage thread
// and its exponential weight.
struct ModelSlot {
    SfogdState sfogd;
    double weight = 1.0;
};

// One multi-model expert: M slots sharing a step size and target.
struct MocpExpertState {
    std::vector<ModelSlot> slots;
    double step_size = 0.0;  // in (0, 1)
    OcpParams params;

    std::size_t num_models() const noexcept { return slots.size(); }
};

inline MocpExpertState mocp_init(std::size_t num_models, double init_alpha,
                                 const OcpParams& params, double step_size) {
    if (num_models == 0) throw std::invalid_argument("mocp_init: need at least one model");
    if (!(step_size > 0.0 && step_size < 1.0))
        throw std::invalid_argument("mocp_init: step_size must lie in (0, 1)");
    params.validate();
    MocpExpertState state;
    state.step_size = step_size;
    state.params = params;
    state.slots.assign(num_models, ModelSlot{SfogdState{init_alpha, 0.0}, 1.0 / static_cast<double>(num_models)});
    return state;
}

// Normalized model weights; entries sum to 1.
inline std::vector<double> mocp_distribution(const MocpExpertState& state) {
    double sum = 0.0;
    for (const ModelSlot& s : state.slots) sum += s.weight;
    std::vector<double> out(state.slots.size());
    for (std::size_t m = 0; m < state.slots.size(); ++m) out[m] = state.slots[m].weight / sum;
    return out;
}

struct MocpSelection {
    std::size_t model = 0;
    double alpha = 0.0;
};

// Sample mode draws a slot by inverse CDF over the normalized weights;
// deterministic mode returns the weight-averaged alpha with the argmax
// slot as the representative model (lowest index on ties).
inline MocpSelection mocp_select(const MocpExpertState& state, SelectMode mode, double rand) {
    const std::vector<double> dist = mocp_distribution(state);
    MocpSelection sel;
    if (mode == SelectMode::Sample) {
        double cum = 0.0;
        sel.model = dist.size() - 1;
        for (std::size_t m = 0; m < dist.size(); ++m) {
            cum += dist[m];
            if (rand < cum) {
                sel.model = m;
                break;
            }
        }
        sel.alpha = state.slots[sel.model].sfogd.alpha;
        return sel;
    }
    double best = -1.0;
    for (std::size_t m = 0; m < dist.size(); ++m) {
        sel.alpha += dist[m] * state.slots[m].sfogd.alpha;
        if (dist[m] > best) {
            best = dist[m];
            sel.model = m;
        }
    }
    return sel;
}

// Feedback for one step: every slot incurs its pinball loss against its
// model's alpha_bar, its weight decays exponentially in that loss, and its
// alpha takes an SF-OGD step. Returns the per-slot losses (computed from
// the pre-update alphas).
//
// Raw weights shrink monotonically, so they are rescaled to sum 1 whenever
// the total drops below 1e-150; selection is invariant under positive
// scaling, so this changes no observable behavior.
inline std::vector<double> mocp_update(MocpExpertState& state, std::span<const double> alpha_bars) {
    if (alpha_bars.size() != state.slots.size())
        throw std::invalid_argument("mocp_update: alpha_bars size must match model count");
    std::vector<double> losses(state.slots.size());
    double weight_sum = 0.0;
    for (std::size_t m = 0; m < state.slots.size(); ++m) {
        ModelSlot& slot = state.slots[m];
        const double ab = alpha_bars[m];
        losses[m] = pinball_loss(ab, slot.sfogd.alpha, state.params.target_alpha);
        slot.weight *= std::exp(-state.step_size * losses[m]);
        const int err = ab < slot.sfogd.alpha ? 1 : 0;
        slot.sfogd = sfogd_step(slot.sfogd, pinball_grad(err, state.params.target_alpha), state.params.eta);
        weight_sum += slot.weight;
    }
    if (weight_sum < 1e-150) {
        for (ModelSlot& slot : state.slots) slot.weight /= weight_sum;
    }
    return losses;
}

}  // namespace confstream
