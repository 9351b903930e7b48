#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qloss/codes.hpp"
#include "qloss/lifecycle.hpp"
#include "qloss/noise.hpp"

using namespace qloss;

namespace {

std::pair<Circuit, CompiledCircuit> noisy_memory(SEMethod m, uint32_t d, uint32_t rounds,
                                                 uint32_t swap_period = 1,
                                                 double detect = 1.0, double replace = 1.0) {
    SEConfig cfg;
    cfg.distance = d;
    cfg.rounds = rounds;
    cfg.method = m;
    cfg.swap_period = swap_period;
    cfg.detect_period = detect;
    cfg.replace_period = replace;
    cfg.noiseless_first = false;
    cfg.noiseless_last = false;
    NoiseSpec ns;
    ns.p_cz = 0.01;
    ns.loss_fraction = 0.5;
    Circuit c = apply_noise(gen_se(cfg), ns);
    CompiledCircuit cc = validate_circuit(c);
    return {std::move(c), std::move(cc)};
}

}  // namespace

TEST_CASE("every loss location belongs to exactly one lifecycle") {
    auto [c, cc] = noisy_memory(SEMethod::Swap, 3, 4);
    LifecycleSet set = extract_lifecycles(c, cc);
    size_t total = 0;
    for (const auto& lc : set.lifecycles) total += lc.length();
    CHECK(total == cc.loss_locations.size());
    for (uint32_t id = 0; id < cc.loss_locations.size(); id++)
        CHECK(set.lifecycle_of_location[id] != UINT32_MAX);
}

TEST_CASE("conventional lifecycles: data 4d, measure 4") {
    auto [c, cc] = noisy_memory(SEMethod::Conventional, 5, 5);
    auto m = lifecycle_metrics(c, cc);
    CHECK(m.bulk_data.avg == doctest::Approx(20.0));
    CHECK(m.bulk_data.max == 20);
    CHECK(m.bulk_measure.avg == doctest::Approx(4.0));
}

TEST_CASE("teleportation bulk lifecycle is 4") {
    auto [c, cc] = noisy_memory(SEMethod::Teleportation, 3, 3);
    auto m = lifecycle_metrics(c, cc);
    CHECK(m.bulk_cluster.avg == doctest::Approx(4.0));
    CHECK(m.bulk_overall.avg == doctest::Approx(4.0));
}

TEST_CASE("swap period 1 bulk lifecycle near 8") {
    auto [c, cc] = noisy_memory(SEMethod::Swap, 5, 12);
    auto m = lifecycle_metrics(c, cc);
    CHECK(m.bulk_overall.avg > 7.0);
    CHECK(m.bulk_overall.avg < 9.0);
    CHECK(m.bulk_data.avg == doctest::Approx(8.0));
}

TEST_CASE("swap period 2: data near 12, conventional-round measure 4") {
    auto [c, cc] = noisy_memory(SEMethod::Swap, 5, 12, 2);
    auto m = lifecycle_metrics(c, cc);
    CHECK(m.bulk_data.avg > 10.0);
    CHECK(m.bulk_data.avg < 13.0);
    CHECK(m.bulk_measure.avg == doctest::Approx(4.0));
}

TEST_CASE("conventional data lifecycle grows linearly with rounds") {
    auto [c1, cc1] = noisy_memory(SEMethod::Conventional, 3, 3);
    auto [c2, cc2] = noisy_memory(SEMethod::Conventional, 3, 6);
    auto m1 = lifecycle_metrics(c1, cc1);
    auto m2 = lifecycle_metrics(c2, cc2);
    CHECK(m2.bulk_data.avg == doctest::Approx(2.0 * m1.bulk_data.avg));
}

TEST_CASE("noiseless circuit has no lifecycles") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    Circuit c = gen_conventional(cfg);
    CompiledCircuit cc = validate_circuit(c);
    auto m = lifecycle_metrics(c, cc);
    CHECK(m.overall.count == 0);
    CHECK(m.overall.avg == 0.0);
}

TEST_CASE("posterior weights follow the survival product") {
    Lifecycle lc;
    lc.locations = {0, 1};
    lc.priors = {0.3, 0.3};
    lc.window_of_location = {0, 0};
    lc.window_count = 1;
    auto w = posterior_weights(lc);
    double p = 0.3;
    CHECK(w[0] == doctest::Approx(1.0 / (2.0 - p)));
    CHECK(w[1] == doctest::Approx((1.0 - p) / (2.0 - p)));
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w[0] >= w[1]);  // earlier locations never weigh less at equal priors

    Lifecycle single;
    single.locations = {0};
    single.priors = {0.2};
    single.window_of_location = {0};
    CHECK(posterior_weights(single)[0] == doctest::Approx(1.0));

    Lifecycle empty;
    CHECK_THROWS(posterior_weights(empty));

    // p -> 0 limit: uniform.
    Lifecycle tiny;
    tiny.locations = {0, 1, 2};
    tiny.priors = {1e-9, 1e-9, 1e-9};
    tiny.window_of_location = {0, 0, 0};
    auto wt = posterior_weights(tiny);
    for (double x : wt) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-6));
}

TEST_CASE("posterior weights sum to one across windows") {
    Lifecycle lc;
    lc.locations = {0, 1, 2, 3};
    lc.priors = {0.1, 0.2, 0.05, 0.3};
    lc.window_of_location = {0, 0, 1, 1};
    lc.window_count = 2;
    for (uint32_t w = 0; w < 2; w++) {
        auto ws = posterior_weights_window(lc, w);
        double sum = 0;
        for (double x : ws) sum += x;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("detect-only checkpoints create single-location windows") {
    auto [c, cc] = noisy_memory(SEMethod::DirectConversion, 3, 3, 1, 0.25, 1.0);
    LifecycleSet set = extract_lifecycles(c, cc);
    size_t max_window = 0;
    for (const auto& lc : set.lifecycles) {
        std::map<uint32_t, size_t> cnt;
        for (uint32_t w : lc.window_of_location) cnt[w]++;
        for (auto [w, n] : cnt) max_window = std::max(max_window, n);
    }
    CHECK(max_window == 1);
}
