#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "qloss/experiments.hpp"
#include "qloss/rng.hpp"

using namespace qloss;

namespace {

std::vector<FitRecord> synthetic_curve(uint32_t d, double alpha, double beta,
                                       const std::vector<double>& ps, uint64_t shots,
                                       uint64_t seed) {
    std::vector<FitRecord> recs;
    Rng rng(seed);
    for (double p : ps) {
        double ler = std::min(0.9, alpha * std::pow(p, beta));
        uint64_t fails = 0;
        for (uint64_t s = 0; s < shots; s++) fails += rng.bernoulli(ler);
        recs.push_back({d, p, shots, fails});
    }
    return recs;
}

}  // namespace

TEST_CASE("effective distance fit recovers the exponent") {
    // Exact synthetic records: recovery within 1%.
    std::vector<FitRecord> exact;
    for (double p : {0.001, 0.0015, 0.002, 0.003, 0.004}) {
        uint64_t n = 10000000;
        exact.push_back({3, p, n, (uint64_t)std::llround(80.0 * p * p * n)});
    }
    FitResult fr = fit_effective_distance(exact);
    REQUIRE(fr.ok);
    CHECK(std::abs(fr.value - 2.0) < 0.02);
    CHECK(fr.second == doctest::Approx(80.0).epsilon(0.05));
    // Sampled records: recovery within a few standard errors.
    auto noisy = synthetic_curve(3, 80.0, 2.0, {0.001, 0.0015, 0.002, 0.003, 0.004}, 2000000, 5);
    FitResult fn = fit_effective_distance(noisy);
    REQUIRE(fn.ok);
    CHECK(std::abs(fn.value - 2.0) < 4.0 * fn.stderr_ + 0.02);
}

TEST_CASE("effective distance fit needs tail data") {
    std::vector<FitRecord> recs = {{3, 0.01, 1000, 0}};
    CHECK(!fit_effective_distance(recs).ok);
}

TEST_CASE("threshold fit finds a synthetic crossing") {
    // Two synthetic curves crossing at p = 0.05.
    std::vector<FitRecord> recs;
    std::vector<double> ps = {0.03, 0.038, 0.046, 0.054, 0.062, 0.07};
    double pth = 0.05;
    Rng rng(7);
    for (double p : ps) {
        double l3 = 0.3 * std::pow(p / pth, 2.0);
        double l5 = 0.3 * std::pow(p / pth, 3.0);
        uint64_t n = 400000;
        uint64_t f3 = 0, f5 = 0;
        for (uint64_t s = 0; s < n; s++) {
            f3 += rng.bernoulli(l3);
            f5 += rng.bernoulli(l5);
        }
        recs.push_back({3, p, n, f3});
        recs.push_back({5, p, n, f5});
    }
    FitResult fr = fit_threshold(recs, 3, 48);
    REQUIRE(fr.ok);
    CHECK(std::abs(fr.value - pth) < 0.004);
    CHECK(fr.stderr_ > 0.0);
    CHECK(fr.stderr_ < 0.01);
}

TEST_CASE("threshold fit rejects degenerate inputs") {
    auto recs = synthetic_curve(3, 10.0, 2.0, {0.01, 0.02, 0.03, 0.04}, 10000, 1);
    CHECK(!fit_threshold(recs).ok);  // single distance
}

TEST_CASE("boundary fit recovers exact linear intercepts") {
    // p_loss = 0.08 - (0.08/0.02) p_pauli
    std::vector<std::pair<double, double>> pts;
    for (double pp : {0.002, 0.006, 0.012, 0.018})
        pts.push_back({pp, 0.08 - 4.0 * pp});
    FitResult fr = fit_loss_pauli_boundary(pts);
    REQUIRE(fr.ok);
    CHECK(fr.value == doctest::Approx(0.08).epsilon(1e-9));
    CHECK(fr.second == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(!fit_loss_pauli_boundary({{0.01, 0.05}, {0.01, 0.06}}).ok);
}

TEST_CASE("bootstrap error shrinks with shots") {
    std::vector<double> ps = {0.03, 0.04, 0.05, 0.06, 0.07};
    auto build = [&](uint64_t shots, uint64_t seed) {
        std::vector<FitRecord> recs;
        Rng rng(seed);
        for (double p : ps) {
            double l3 = 0.3 * std::pow(p / 0.05, 2.0);
            double l5 = 0.3 * std::pow(p / 0.05, 3.0);
            uint64_t f3 = 0, f5 = 0;
            for (uint64_t s = 0; s < shots; s++) {
                f3 += rng.bernoulli(l3);
                f5 += rng.bernoulli(l5);
            }
            recs.push_back({3, p, shots, f3});
            recs.push_back({5, p, shots, f5});
        }
        return recs;
    };
    FitResult small = fit_threshold(build(20000, 11), 1, 48);
    FitResult big = fit_threshold(build(320000, 12), 1, 48);
    REQUIRE(small.ok);
    REQUIRE(big.ok);
    // shots x16 => stderr ~ x1/4
    CHECK(big.stderr_ < small.stderr_ * 0.6);
}

TEST_CASE("run_experiment produces deterministic resumable records") {
    std::string path = "/tmp/qloss_test_results.jsonl";
    std::remove(path.c_str());
    ExperimentConfig cfg;
    cfg.generator = GeneratorKind::Conventional;
    cfg.se.rounds = 2;
    cfg.distances = {3};
    cfg.p_values = {0.02};
    cfg.l_values = {0.5};
    cfg.shots = 400;
    cfg.seed = 21;
    cfg.threads = 2;
    cfg.out_path = path;
    auto r1 = run_experiment(cfg);
    REQUIRE(r1.size() == 1);
    // Re-running skips the completed point.
    auto r2 = run_experiment(cfg);
    CHECK(r2.empty());
    // Deterministic: a fresh file reproduces the same failure count.
    std::string path2 = "/tmp/qloss_test_results2.jsonl";
    std::remove(path2.c_str());
    cfg.out_path = path2;
    auto r3 = run_experiment(cfg);
    REQUIRE(r3.size() == 1);
    CHECK(r3[0].failures == r1[0].failures);
    CHECK(r3[0].point_key == r1[0].point_key);
    // JSONL round trip.
    auto parsed = point_result_from_json(point_result_json(r1[0]));
    REQUIRE(parsed.has_value());
    CHECK(parsed->failures == r1[0].failures);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("noiseless grid point has zero ler") {
    ExperimentConfig cfg;
    cfg.generator = GeneratorKind::Conventional;
    cfg.se.rounds = 2;
    cfg.distances = {3};
    cfg.p_values = {0.0};
    cfg.l_values = {0.0};
    cfg.shots = 200;
    auto rs = run_experiment(cfg);
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].ler == 0.0);
}

TEST_CASE("wilson coverage on a known bernoulli source") {
    Rng rng(404);
    double p = 0.03;
    int covered = 0, total = 200;
    for (int t = 0; t < total; t++) {
        uint64_t n = 2000, f = 0;
        for (uint64_t s = 0; s < n; s++) f += rng.bernoulli(p);
        auto [lo, hi] = wilson_interval(f, n);
        covered += (p >= lo && p <= hi);
    }
    CHECK(covered >= 180);  // ~95% nominal coverage
}
