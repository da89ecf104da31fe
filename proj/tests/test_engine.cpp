#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "confstream/engine.hpp"

using namespace confstream;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/confstream_engine_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

RunConfig small_samocp(std::uint64_t seed) {
    RunConfig config;
    config.method = Method::Samocp;
    config.seed = seed;
    config.synthetic = crossing_scenario(400, seed);
    return config;
}

}  // namespace

TEST_CASE("samocp smoke run populates the report") {
    const RunResult result = run(small_samocp(7));
    CHECK(result.records.size() == 400);
    CHECK(result.num_classes == 10);
    CHECK(result.num_models == 2);
    CHECK(result.report.coverage > 50.0);
    CHECK(result.report.coverage <= 100.0);
    CHECK(result.report.avg_width > 0.0);
    CHECK(result.report.window_regrets.size() == 4);
    // first step: empty calibration forces the full set
    CHECK(result.records.front().width == 10);
    CHECK(result.records.front().err == 0);
}

TEST_CASE("all three methods and both modes run on the same stream") {
    for (Method method : {Method::Samocp, Method::Mocp, Method::OgdBaseline}) {
        for (SelectMode mode : {SelectMode::Deterministic, SelectMode::Sample}) {
            RunConfig config = small_samocp(3);
            config.method = method;
            config.mode = mode;
            const RunResult result = run(config);
            CHECK(result.records.size() == 400);
            CHECK(std::isfinite(result.report.avg_regret));
        }
    }
}

TEST_CASE("two identical runs write byte-identical steps.csv") {
    TempFile a("steps_a.csv"), b("steps_b.csv");
    write_steps_csv(a.path, run(small_samocp(13)).records);
    write_steps_csv(b.path, run(small_samocp(13)).records);
    const std::string bytes_a = slurp(a.path);
    CHECK_FALSE(bytes_a.empty());
    CHECK(bytes_a == slurp(b.path));
}

TEST_CASE("export-then-replay reproduces report.json byte for byte") {
    TempFile stream("export.jsonl"), report_a("report_a.json"), report_b("report_b.json");
    RunConfig synth = small_samocp(29);
    synth.export_stream_path = stream.path;
    const RunResult direct = run(synth);
    write_report_json(report_a.path, direct, synth);

    CHECK(validate_stream(stream.path).ok);

    RunConfig replay = synth;
    replay.synthetic.reset();
    replay.export_stream_path.clear();
    replay.stream_path = stream.path;
    const RunResult replayed = run(replay);
    write_report_json(report_b.path, replayed, replay);

    CHECK(slurp(report_a.path) == slurp(report_b.path));
    REQUIRE(direct.records.size() == replayed.records.size());
    for (std::size_t i = 0; i < direct.records.size(); ++i) {
        CHECK(direct.records[i].learner_alpha == replayed.records[i].learner_alpha);
        CHECK(direct.records[i].err == replayed.records[i].err);
    }
}

TEST_CASE("replay of a malformed stream carries the offending line number") {
    TempFile stream("bad.jsonl");
    {
        std::ofstream out(stream.path);
        out << R"({"k": 2, "m": 1, "xi": 0.1, "k_reg": 1})" << '\n';
        out << R"({"t": 1, "probs": [[0.6, 0.4]], "label": 0})" << '\n';
        out << R"({"t": 2, "probs": [[0.6, 0.2]], "label": 0})" << '\n';
    }
    RunConfig config;
    config.synthetic.reset();
    config.stream_path = stream.path;
    try {
        run(config);
        FAIL("expected StreamFormatError");
    } catch (const StreamFormatError& e) {
        CHECK(e.line == 3);
    }
}

TEST_CASE("baseline: first step emits the full set, scripted trace matches hand updates") {
    RunConfig config = small_samocp(5);
    config.method = Method::OgdBaseline;
    config.baseline_model = 1;
    const RunResult result = run(config);
    CHECK(result.records.front().width == 10);
    CHECK(result.records.front().err == 0);
    CHECK(result.records.front().learner_alpha == doctest::Approx(0.1));
    for (const StepRecord& r : result.records) {
        CHECK(r.selected_model == 1);
        CHECK(r.model_mass[1] == doctest::Approx(1.0));
    }

    // Hand-stepped two-update trace of the underlying thread.
    const OcpParams ocp{0.1, 0.05};
    SfogdState thread{0.1, 0.0};
    thread = ogd_update(thread, 0.5, ocp);  // covered: grad -0.1
    CHECK(thread.alpha == doctest::Approx(0.15));
    thread = ogd_update(thread, 0.05, ocp);  // missed: grad 0.9
    CHECK(thread.alpha == doctest::Approx(0.15 - 0.045 / std::sqrt(0.82)));
}

TEST_CASE("baseline thread with zero learning rate never moves") {
    const OcpParams frozen{0.1, 0.0};  // eta = 0 bypasses validation on purpose
    SfogdState thread{0.1, 0.0};
    for (int i = 0; i < 50; ++i) {
        thread = ogd_update(thread, i % 2 == 0 ? 0.9 : 0.01, frozen);
        CHECK(thread.alpha == doctest::Approx(0.1));
    }
}

TEST_CASE("mocp run stays within the static regret bound at small horizons") {
    for (long horizon : {100L, 1000L}) {
        for (std::uint64_t seed : {1ull, 2ull}) {
            RunConfig config;
            config.method = Method::Mocp;
            config.mode = SelectMode::Deterministic;
            config.epsilon = 1.0 / std::sqrt(static_cast<double>(horizon));
            config.seed = seed;
            config.synthetic = stationary_scenario(4, horizon, seed);
            const RunResult result = run(config);
            const std::vector<double> regret =
                windowed_regret(result.records, horizon, config.target_alpha);
            REQUIRE(regret.size() == 1);
            const double eta = config.eta, alpha = config.target_alpha;
            const double bound = std::sqrt(static_cast<double>(horizon)) *
                                 ((1.0 + 2.0 * eta) * (1.0 + 2.0 * eta) / (2.0 * eta) +
                                  eta / (2.0 * alpha) + std::log(4.0) + (1.0 + eta) * (1.0 + eta));
            CHECK(regret[0] <= bound);
        }
    }
}

TEST_CASE("window and width sweep writers emit parseable csv") {
    TempFile windows("windows.csv"), widths("widths.csv");
    const RunResult result = run(small_samocp(17));
    write_window_regret_csv(windows.path, result.report);
    const std::string window_bytes = slurp(windows.path);
    CHECK(window_bytes.find("window_start,window_end,regret") == 0);

    const std::vector<long> sweep{50, 100, 200};
    write_regret_by_width_csv(widths.path, result.records, sweep, 0.1, false);
    const std::string width_bytes = slurp(widths.path);
    CHECK(width_bytes.find("width,avg_regret,max_regret,num_windows") == 0);
    int lines = 0;
    for (char c : width_bytes) {
        if (c == '\n') ++lines;
    }
    CHECK(lines == 4);  // header + three widths
}
