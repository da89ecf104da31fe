#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "confstream/calibration.hpp"
#include "confstream/rng.hpp"

using confstream::CalibrationStore;
using confstream::Rng;

TEST_CASE("insert keeps sorted iteration order and exact counts") {
    CalibrationStore store;
    std::vector<double> mirror;
    Rng rng(42);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.next_double() * 10.0 - 5.0;
        store.insert(v);
        mirror.push_back(v);
        CHECK(store.size() == mirror.size());
    }
    std::sort(mirror.begin(), mirror.end());
    CHECK(store.sorted_scores() == mirror);
}

TEST_CASE("kth matches the sorted mirror, including duplicates") {
    CalibrationStore store;
    std::vector<double> mirror;
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const double v = static_cast<double>(rng.next_below(50));  // force many ties
        store.insert(v);
        mirror.push_back(v);
    }
    std::sort(mirror.begin(), mirror.end());
    for (std::size_t k = 1; k <= mirror.size(); ++k) CHECK(store.kth(k) == mirror[k - 1]);
    CHECK_THROWS_AS(store.kth(0), std::invalid_argument);
    CHECK_THROWS_AS(store.kth(mirror.size() + 1), std::invalid_argument);
}

TEST_CASE("rank_geq agrees with a linear scan") {
    CalibrationStore store;
    std::vector<double> mirror;
    Rng rng(99);
    for (int i = 0; i < 800; ++i) {
        const double v = static_cast<double>(rng.next_below(100)) / 10.0;
        store.insert(v);
        mirror.push_back(v);
    }
    std::sort(mirror.begin(), mirror.end());
    for (int probe = 0; probe < 300; ++probe) {
        const double x = rng.next_double() * 12.0 - 1.0;
        std::size_t expected = 1;
        while (expected <= mirror.size() && mirror[expected - 1] < x) ++expected;
        CHECK(store.rank_geq(x) == expected);
    }
    CHECK(store.rank_geq(-100.0) == 1);
    CHECK(store.rank_geq(100.0) == mirror.size() + 1);
}

TEST_CASE("empty store") {
    CalibrationStore store;
    CHECK(store.empty());
    CHECK(store.size() == 0);
    CHECK(store.rank_geq(0.0) == 1);
    CHECK(store.sorted_scores().empty());
}
