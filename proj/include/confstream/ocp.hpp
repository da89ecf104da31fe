#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace confstream {

// Fixed target miss-coverage and SF-OGD learning rate.
struct OcpParams {
    double target_alpha = 0.1;  // in (0, 1)
    double eta = 0.05;          // > 0

    void validate() const {
        if (!(target_alpha > 0.0 && target_alpha < 1.0))
            throw std::invalid_argument("OcpParams: target_alpha must lie in (0, 1)");
        if (!(eta > 0.0)) throw std::invalid_argument("OcpParams: eta must be positive");
    }
};

// One adaptive miss-coverage thread: current alpha plus the cumulative
// squared gradient norm that scales the step.
struct SfogdState {
    double alpha = 0.0;
    double cum_sq_grad = 0.0;
};

// Pinball loss between the realized best miss-coverage and the played one.
inline double pinball_loss(double alpha_bar, double alpha_hat, double target_alpha) {
    const double diff = alpha_bar - alpha_hat;
    return target_alpha * diff - std::min(0.0, diff);
}

// err is the miss indicator I[alpha_bar < alpha_hat].
inline double pinball_grad(int err, double target_alpha) {
    return static_cast<double>(err) - target_alpha;
}

// Scale-free OGD step; the denominator includes the current gradient.
// A zero cumulative norm leaves alpha unchanged (0/0 guard).
inline SfogdState sfogd_step(SfogdState state, double grad, double eta) {
    state.cum_sq_grad += grad * grad;
    if (state.cum_sq_grad > 0.0) {
        state.alpha -= eta * grad / std::sqrt(state.cum_sq_grad);
    }
    return state;
}

struct FixedAlphaFit {
    double alpha_star = 0.0;
    double loss_star = 0.0;
};

// Best fixed alpha in hindsight for a sequence of alpha_bar values: the
// summed pinball loss is piecewise linear with breakpoints at the values,
// minimized at the empirical target_alpha-quantile. Returns the lower
// endpoint of the minimizing interval.
inline FixedAlphaFit best_fixed_alpha(std::span<const double> alpha_bars, double target_alpha) {
    if (alpha_bars.empty()) throw std::invalid_argument("best_fixed_alpha: empty sequence");
    std::vector<double> sorted(alpha_bars.begin(), alpha_bars.end());
    const std::size_t n = sorted.size();
    std::size_t k = static_cast<std::size_t>(std::ceil(target_alpha * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, n);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
    FixedAlphaFit fit;
    fit.alpha_star = sorted[k - 1];
    for (double ab : alpha_bars) fit.loss_star += pinball_loss(ab, fit.alpha_star, target_alpha);
    return fit;
}

}  // namespace confstream
