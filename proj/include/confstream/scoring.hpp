#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "confstream/calibration.hpp"

namespace confstream {

// One model's softmax output for one instance.
struct ProbVector {
    std::vector<double> probs;

    int num_classes() const noexcept { return static_cast<int>(probs.size()); }
};

// Per-instance outputs, one probability vector per candidate model.
using ModelOutputs = std::vector<ProbVector>;

inline bool is_valid_prob_vector(const ProbVector& pv, double tol = 1e-9) {
    if (pv.probs.empty()) return false;
    double sum = 0.0;
    for (double p : pv.probs) {
        if (!(p >= 0.0 && p <= 1.0)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
}

// Regularized adaptive score hyperparameters.
struct ScoreParams {
    double xi = 0.1;  // regularization strength, >= 0
    int k_reg = 1;    // rank offset, >= 1

    void validate() const {
        if (xi < 0.0) throw std::invalid_argument("ScoreParams: xi must be nonnegative");
        if (k_reg < 1) throw std::invalid_argument("ScoreParams: k_reg must be >= 1");
    }
};

// Nonconformity score for a candidate label:
//
//   xi * sqrt(max(k_Y - k_reg, 0)) + u * p_label + rho
//
// where k_Y counts labels whose probability is >= the candidate's (ties
// included) and rho sums probabilities strictly above it (ties excluded).
// The same uniform draw u is shared by every candidate score of a step.
inline double raps_score(const ProbVector& probs, int label, double u, const ScoreParams& params) {
    const int k = probs.num_classes();
    if (label < 0 || label >= k) throw std::invalid_argument("raps_score: label index out of range");
    const double p_label = probs.probs[static_cast<std::size_t>(label)];
    int k_y = 0;
    double rho = 0.0;
    for (double p : probs.probs) {
        if (p >= p_label) ++k_y;
        if (p > p_label) rho += p;
    }
    const int excess = k_y - params.k_reg;
    const double reg = excess > 0 ? params.xi * std::sqrt(static_cast<double>(excess)) : 0.0;
    return reg + u * p_label + rho;
}

// Streaming quantile threshold: the ceil(t*(1-alpha))-th smallest of the
// t-1 stored scores. Ranks outside [1, t-1] map to the +/-infinity
// sentinels, which force the full and the empty prediction set; that keeps
// the threshold defined for every alpha, including t = 1 with no history.
inline double quantile_threshold(const CalibrationStore& store, double alpha, long t) {
    if (t <= 0) throw std::invalid_argument("quantile_threshold: t must be positive");
    if (store.size() != static_cast<std::size_t>(t - 1))
        throw std::invalid_argument("quantile_threshold: store must hold exactly t-1 scores");
    const double rank = std::ceil(static_cast<double>(t) * (1.0 - alpha));
    if (rank <= 0.0) return -std::numeric_limits<double>::infinity();
    if (rank > static_cast<double>(t - 1)) return std::numeric_limits<double>::infinity();
    return store.kth(static_cast<std::size_t>(rank));
}

struct PredictionSet {
    std::vector<int> labels;  // ascending label indices
    double alpha_used = 0.0;
    double threshold = 0.0;   // may be +/-infinity

    int width() const noexcept { return static_cast<int>(labels.size()); }

    bool contains(int label) const {
        return std::binary_search(labels.begin(), labels.end(), label);
    }
};

inline PredictionSet prediction_set(const ProbVector& probs, const CalibrationStore& store,
                                    double alpha, long t, double u, const ScoreParams& params) {
    PredictionSet out;
    out.alpha_used = alpha;
    out.threshold = quantile_threshold(store, alpha, t);
    const int k = probs.num_classes();
    out.labels.reserve(static_cast<std::size_t>(k));
    for (int label = 0; label < k; ++label) {
        if (raps_score(probs, label, u, params) <= out.threshold) out.labels.push_back(label);
    }
    return out;
}

// Largest miss-coverage probability at which the observed label would still
// be covered, in closed form:
//   - empty store: 1 (any alpha below 1 yields the full set)
//   - true_score above every stored score: 1/t (the full-set boundary)
//   - otherwise 1 - (k*-1)/t with k* the smallest rank whose score is
//     >= true_score
// It is a supremum: membership fails exactly at the returned value.
inline double alpha_bar(double true_score, const CalibrationStore& store, long t) {
    if (t <= 0) throw std::invalid_argument("alpha_bar: t must be positive");
    if (store.size() != static_cast<std::size_t>(t - 1))
        throw std::invalid_argument("alpha_bar: store must hold exactly t-1 scores");
    if (store.empty()) return 1.0;
    const std::size_t k_star = store.rank_geq(true_score);
    if (k_star > store.size()) return 1.0 / static_cast<double>(t);
    return 1.0 - static_cast<double>(k_star - 1) / static_cast<double>(t);
}

}  // namespace confstream
