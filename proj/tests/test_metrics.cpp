#include <doctest.h>

#include <random>
#include <stdexcept>

#include "evosynth/errors.hpp"
#include "evosynth/metrics.hpp"
#include "evosynth/rng.hpp"

using namespace evo;

namespace {

Tensor map_of(std::vector<float> v) {
    int n = static_cast<int>(v.size());
    return Tensor({n, 1}, std::move(v));
}

MetricsConfig sweep_cfg() { return MetricsConfig{}; }

MetricsConfig fixed_cfg(double t) {
    MetricsConfig cfg;
    cfg.mode = MetricsConfig::ThresholdMode::fixed;
    cfg.fixed_threshold = t;
    return cfg;
}

}  // namespace

TEST_CASE("f_beta: exact prediction scores 1.0") {
    Tensor gt = map_of({1, 0, 1, 1, 0, 0});
    CHECK(f_beta(gt, gt, sweep_cfg()) == 1.0);
    CHECK(f_beta(gt, gt, fixed_cfg(0.5)) == 1.0);
}

TEST_CASE("f_beta: all-zero prediction on nonempty ground truth scores 0.0") {
    Tensor pred = map_of({0, 0, 0, 0});
    Tensor gt = map_of({1, 1, 0, 0});
    CHECK(f_beta(pred, gt, fixed_cfg(0.5)) == 0.0);
}

TEST_CASE("f_beta: P=0.5, R=1.0, beta^2=0.3 evaluates to 0.5652174") {
    // tp=1, fp=1, fn=0: F = 1.3*0.5*1.0 / (0.3*0.5 + 1.0) = 0.65/1.15
    Tensor pred = map_of({1, 1});
    Tensor gt = map_of({1, 0});
    double expected = 0.65 / 1.15;
    CHECK(f_beta(pred, gt, fixed_cfg(0.5)) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(f_beta(pred, gt, sweep_cfg()) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("f_beta: rejects mismatched shapes") {
    CHECK_THROWS_AS(f_beta(map_of({1, 0}), map_of({1, 0, 1}), sweep_cfg()),
                    ShapeError);
}

TEST_CASE("f_beta: max-sweep dominates every fixed threshold in the sweep") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor pred({8, 8});
        Tensor gt({8, 8});
        for (auto& v : pred.data) v = static_cast<float>(uniform_open01(rng));
        for (auto& v : gt.data) v = uniform_open01(rng) < 0.3 ? 1.0f : 0.0f;
        double best = f_beta(pred, gt, sweep_cfg());
        CHECK(best >= 0.0);
        CHECK(best <= 1.0);
        for (int k = 0; k < 256; ++k) {
            double fixed = f_beta(pred, gt, fixed_cfg(k / 255.0));
            CHECK(best >= fixed - 1e-12);
        }
    }
}

TEST_CASE("mae: examples") {
    CHECK(mae(map_of({1, 0, 1}), map_of({1, 0, 1})) == 0.0);
    CHECK(mae(map_of({1, 1, 1}), map_of({0, 0, 0})) == 1.0);
    CHECK(mae(map_of({0.25f, 0.25f}), map_of({1, 1})) ==
          doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(mae(map_of({1}), map_of({1, 0})), ShapeError);
}

TEST_CASE("mae: invariant under a shared pixel permutation") {
    std::mt19937_64 rng(7);
    std::vector<float> p(64), g(64);
    for (auto& v : p) v = static_cast<float>(uniform_open01(rng));
    for (auto& v : g) v = uniform_open01(rng) < 0.5 ? 1.0f : 0.0f;
    double before = mae(map_of(p), map_of(g));

    std::vector<std::size_t> perm(64);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    deterministic_shuffle(perm, rng);
    std::vector<float> p2(64), g2(64);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        p2[i] = p[perm[i]];
        g2[i] = g[perm[i]];
    }
    CHECK(mae(map_of(p2), map_of(g2)) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("architectural_efficiency: reported multipliers match the pins") {
    CHECK(architectural_efficiency(63767232, 1333010) == 47.83);
    CHECK(architectural_efficiency(63767232, 15471797) == 4.12);
    CHECK(architectural_efficiency(63767232, 3603007) == 17.69);
    CHECK(architectural_efficiency(123456, 123456) == 1.00);
    CHECK_THROWS_AS(architectural_efficiency(100, 0), std::invalid_argument);
}

TEST_CASE("architectural_efficiency: raw ratios compound along a lineage") {
    std::int64_t c1 = 51768, c2 = 20891, c3 = 8342;
    double e12 = static_cast<double>(c1) / c2;
    double e23 = static_cast<double>(c2) / c3;
    double e13 = static_cast<double>(c1) / c3;
    CHECK(e12 * e23 == doctest::Approx(e13).epsilon(1e-12));
    // the identity step is exactly 1.00 after truncation
    CHECK(architectural_efficiency(c3, c3) == 1.0);
}
