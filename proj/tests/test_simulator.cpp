#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "confstream/rng.hpp"
#include "confstream/scoring.hpp"
#include "confstream/simulator.hpp"

using namespace confstream;

namespace {

int argmax(const ProbVector& pv) {
    return static_cast<int>(std::max_element(pv.probs.begin(), pv.probs.end()) - pv.probs.begin());
}

double top1_accuracy(const StreamConfig& config, int model, long from, long count) {
    Rng rng(config.seed, kSimStreamTag);
    long hits = 0;
    for (long t = 1; t < from + count; ++t) {
        const Instance inst = emit_instance(rng, t, config);
        if (t >= from && argmax(inst.outputs[static_cast<std::size_t>(model)]) == inst.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(count);
}

}  // namespace

TEST_CASE("sudden schedule alternates clean and max severity per batch") {
    const ShiftSchedule sched{ShiftMode::Sudden, 500, 5};
    CHECK(severity_at(1, sched) == 0);
    CHECK(severity_at(500, sched) == 0);
    CHECK(severity_at(501, sched) == 5);
    CHECK(severity_at(1000, sched) == 5);
    CHECK(severity_at(1001, sched) == 0);
    CHECK_THROWS_AS(severity_at(0, sched), std::invalid_argument);
}

TEST_CASE("gradual schedule sweeps 0..max..0 over an 11-batch cycle") {
    const ShiftSchedule sched{ShiftMode::Gradual, 500, 5};
    const std::vector<int> cycle{0, 1, 2, 3, 4, 5, 4, 3, 2, 1, 0};
    for (int b = 0; b < 22; ++b) {
        const long t = 500L * b + 1;
        CHECK(severity_at(t, sched) == cycle[static_cast<std::size_t>(b % 11)]);
    }
    // batch 7 of the cycle sits on the descending leg
    CHECK(severity_at(500L * 6 + 1, sched) == 4);
}

TEST_CASE("stationary schedule never leaves severity 0") {
    const ShiftSchedule sched{ShiftMode::Stationary, 500, 5};
    for (long t : {1L, 499L, 501L, 5000L, 99999L}) CHECK(severity_at(t, sched) == 0);
}

TEST_CASE("effective accuracy clamps into [1/K, 1]") {
    const ModelProfile p{0.9, 0.15, 4.0};
    CHECK(effective_accuracy(p, 0, 10) == doctest::Approx(0.9));
    CHECK(effective_accuracy(p, 5, 10) == doctest::Approx(0.15));
    CHECK(effective_accuracy(p, 50, 10) == doctest::Approx(0.1));
    CHECK(effective_accuracy(ModelProfile{1.5, 0.0, 4.0}, 0, 10) == doctest::Approx(1.0));
}

TEST_CASE("emitted vectors are valid distributions with the intended argmax behavior") {
    StreamConfig config = crossing_scenario(200, 42);
    Rng rng(config.seed, kSimStreamTag);
    for (long t = 1; t <= config.horizon; ++t) {
        const Instance inst = emit_instance(rng, t, config);
        CHECK(inst.label >= 0);
        CHECK(inst.label < config.num_classes);
        for (const ProbVector& pv : inst.outputs) {
            CHECK(is_valid_prob_vector(pv));
            CHECK(pv.num_classes() == config.num_classes);
        }
    }
}

TEST_CASE("sharp accurate model emits near one-hot vectors at the true label") {
    StreamConfig config;
    config.num_classes = 5;
    config.num_models = 1;
    config.horizon = 50;
    config.schedule = ShiftSchedule{ShiftMode::Stationary, 500, 0};
    config.profiles = {ModelProfile{1.0, 0.0, 30.0}};
    config.seed = 9;
    Rng rng(config.seed, kSimStreamTag);
    for (long t = 1; t <= config.horizon; ++t) {
        const Instance inst = emit_instance(rng, t, config);
        CHECK(inst.outputs[0].probs[static_cast<std::size_t>(inst.label)] > 0.999);
    }
}

TEST_CASE("empirical top-1 accuracy tracks the profile within 3 binomial sigma") {
    StreamConfig config;
    config.num_classes = 10;
    config.num_models = 2;
    config.horizon = 2000;
    config.schedule = ShiftSchedule{ShiftMode::Stationary, 500, 0};
    config.profiles = {ModelProfile{0.7, 0.0, 4.0}, ModelProfile{0.1, 0.0, 4.0}};
    config.seed = 33;
    for (int m = 0; m < 2; ++m) {
        const double a = config.profiles[static_cast<std::size_t>(m)].base_accuracy;
        const double sigma = std::sqrt(a * (1.0 - a) / 2000.0);
        const double acc = top1_accuracy(config, m, 1, 2000);
        CHECK(std::abs(acc - a) <= 3.0 * sigma);
    }
}

TEST_CASE("chance-level profile stays at chance over many draws") {
    StreamConfig config;
    config.num_classes = 10;
    config.num_models = 1;
    config.horizon = 10000;
    config.schedule = ShiftSchedule{ShiftMode::Stationary, 500, 0};
    config.profiles = {ModelProfile{0.1, 0.0, 4.0}};
    config.seed = 77;
    const double acc = top1_accuracy(config, 0, 1, 10000);
    const double sigma = std::sqrt(0.1 * 0.9 / 10000.0);
    CHECK(std::abs(acc - 0.1) <= 3.0 * sigma);
}

TEST_CASE("crossing scenario flips the top-1 leader with severity") {
    StreamConfig config = crossing_scenario(2000, 4);
    config.schedule = ShiftSchedule{ShiftMode::Stationary, 500, 0};  // severity 0 window
    const double a0_clean = top1_accuracy(config, 0, 1, 2000);
    const double a1_clean = top1_accuracy(config, 1, 1, 2000);
    CHECK(a0_clean > a1_clean);

    // Pin severity 5 by shifting the sudden schedule into its corrupt batch.
    StreamConfig corrupt = crossing_scenario(2000, 4);
    corrupt.schedule = ShiftSchedule{ShiftMode::Sudden, 1000000, 5};
    // batch 1 of a huge batch size never arrives; instead evaluate accuracy
    // directly at severity 5 via effective_accuracy plus a forced window
    CHECK(effective_accuracy(corrupt.profiles[0], 5, 10) <
          effective_accuracy(corrupt.profiles[1], 5, 10));
    StreamConfig sev5 = crossing_scenario(2000, 4);
    sev5.schedule = ShiftSchedule{ShiftMode::Sudden, 1000, 5};
    const double a0_corrupt = top1_accuracy(sev5, 0, 1001, 1000);
    const double a1_corrupt = top1_accuracy(sev5, 1, 1001, 1000);
    CHECK(a0_corrupt < a1_corrupt);
}

TEST_CASE("identical seeds produce identical streams") {
    StreamConfig config = crossing_scenario(300, 123);
    Rng a(config.seed, kSimStreamTag);
    Rng b(config.seed, kSimStreamTag);
    for (long t = 1; t <= config.horizon; ++t) {
        const Instance x = emit_instance(a, t, config);
        const Instance y = emit_instance(b, t, config);
        CHECK(x.label == y.label);
        for (int m = 0; m < config.num_models; ++m)
            CHECK(x.outputs[static_cast<std::size_t>(m)].probs ==
                  y.outputs[static_cast<std::size_t>(m)].probs);
    }
}
