#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qloss/codes.hpp"
#include "qloss/decode.hpp"
#include "qloss/noise.hpp"
#include <set>
#include "qloss/rng.hpp"

using namespace qloss;

namespace {

double edge_w(double p) { return std::log((1.0 - std::min(std::max(p, 1e-15), 0.5)) / std::min(std::max(p, 1e-15), 0.5)); }

// Exhaustive 2^n enumeration oracle.
struct BruteResult {
    bool feasible = false;
    double weight = 1e30;
    uint64_t obs = 0;
};

BruteResult brute_force(const DecodingHypergraph& dem, const std::vector<uint8_t>& syndrome) {
    size_t n = dem.edges.size();
    BruteResult best;
    for (uint64_t mask = 0; mask < (1ull << n); mask++) {
        std::vector<uint8_t> flip(dem.detector_count, 0);
        double w = 0;
        uint64_t obs = 0;
        for (size_t e = 0; e < n; e++) {
            if (!((mask >> e) & 1)) continue;
            w += edge_w(dem.edges[e].p);
            for (uint32_t d : dem.edges[e].dets) flip[d] ^= 1;
            for (uint32_t o : dem.edges[e].obs) obs ^= 1ull << o;
        }
        bool ok = true;
        for (uint32_t d = 0; d < dem.detector_count; d++)
            if (flip[d] != syndrome[d]) { ok = false; break; }
        if (ok && w < best.weight - 1e-12) {
            best.feasible = true;
            best.weight = w;
            best.obs = obs;
        }
    }
    return best;
}

DecodingHypergraph random_dem(Rng& rng, uint32_t dets, uint32_t edges) {
    DecodingHypergraph dem;
    dem.detector_count = dets;
    dem.observable_count = 1;
    for (uint32_t e = 0; e < edges; e++) {
        Hyperedge he;
        he.p = 0.01 + 0.49 * rng.next_double();
        uint32_t k = 1 + rng.next_below(3);
        std::set<uint32_t> ds;
        while (ds.size() < k) ds.insert(rng.next_below(dets));
        he.dets.assign(ds.begin(), ds.end());
        if (rng.next_bool()) he.obs = {0};
        dem.edges.push_back(std::move(he));
    }
    return dem;
}

}  // namespace

TEST_CASE("empty syndrome decodes to the empty set") {
    DecodingHypergraph dem;
    dem.detector_count = 3;
    dem.observable_count = 1;
    dem.edges.push_back({0.1, {0}, {0}, EdgeSource::Pauli, 0, 0});
    Correction c = decode_mle(dem, {0, 0, 0});
    CHECK(c.weight == 0.0);
    CHECK(c.obs_flip == std::vector<uint8_t>{0});
}

TEST_CASE("two-edge argmin picks the likelier edge") {
    DecodingHypergraph dem;
    dem.detector_count = 1;
    dem.observable_count = 1;
    dem.edges.push_back({0.2, {0}, {0}, EdgeSource::Pauli, 0, 0});
    dem.edges.push_back({0.05, {0}, {}, EdgeSource::Pauli, 0, 0});
    Correction c = decode_mle(dem, {1});
    CHECK(c.obs_flip[0] == 1);  // p=0.2 edge wins
}

TEST_CASE("mle matches exhaustive enumeration on random instances") {
    Rng rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 120; trial++) {
        uint32_t dets = 4 + rng.next_below(5);
        uint32_t edges = 6 + rng.next_below(9);  // up to 14 edges, 2^14 oracle
        DecodingHypergraph dem = random_dem(rng, dets, edges);
        std::vector<uint8_t> syndrome(dets);
        for (auto& b : syndrome) b = rng.next_bool();
        BruteResult oracle = brute_force(dem, syndrome);
        MleOptions opts;
        opts.component_edge_cap = 64;
        opts.fallback_on_infeasible = false;
        if (!oracle.feasible) {
            CHECK_THROWS(decode_mle(dem, syndrome, opts));
            continue;
        }
        Correction c = decode_mle(dem, syndrome, opts);
        CHECK(c.weight == doctest::Approx(oracle.weight).epsilon(1e-9));
        checked++;
    }
    CHECK(checked > 50);
}

TEST_CASE("weight-zero edges never change the optimum weight") {
    Rng rng(555);
    for (int trial = 0; trial < 40; trial++) {
        DecodingHypergraph dem = random_dem(rng, 6, 8);
        std::vector<uint8_t> syndrome(6);
        for (auto& b : syndrome) b = rng.next_bool();
        BruteResult base = brute_force(dem, syndrome);
        // Add supercheck edges over random pairs.
        DecodingHypergraph plus = dem;
        for (int k = 0; k < 3; k++) {
            Hyperedge he;
            he.p = 0.5;
            uint32_t a = rng.next_below(6), b = rng.next_below(6);
            if (a == b) continue;
            he.dets = {std::min(a, b), std::max(a, b)};
            he.source = EdgeSource::Supercheck;
            plus.edges.push_back(he);
        }
        BruteResult with = brute_force(plus, syndrome);
        if (!base.feasible) continue;
        MleOptions opts;
        opts.component_edge_cap = 64;
        Correction c = decode_mle(plus, syndrome, opts);
        CHECK(c.weight <= base.weight + 1e-9);
        CHECK(c.weight == doctest::Approx(with.weight).epsilon(1e-9));
    }
}

TEST_CASE("argmin invariant under monotone probability rescaling") {
    Rng rng(808);
    int tested = 0;
    for (int trial = 0; trial < 60; trial++) {
        DecodingHypergraph dem = random_dem(rng, 5, 8);
        for (auto& e : dem.edges) e.p = std::min(e.p, 0.4);  // keep everything weighted
        std::vector<uint8_t> syndrome(5);
        for (auto& b : syndrome) b = rng.next_bool();
        BruteResult oracle = brute_force(dem, syndrome);
        if (!oracle.feasible) continue;
        // Only unique-optimum instances carry the invariant.
        size_t n = dem.edges.size();
        int optima = 0;
        for (uint64_t mask = 0; mask < (1ull << n); mask++) {
            std::vector<uint8_t> flip(dem.detector_count, 0);
            double w = 0;
            for (size_t e = 0; e < n; e++)
                if ((mask >> e) & 1) {
                    w += edge_w(dem.edges[e].p);
                    for (uint32_t det : dem.edges[e].dets) flip[det] ^= 1;
                }
            if (flip == syndrome && w < oracle.weight + 1e-9) optima++;
        }
        if (optima != 1) continue;
        MleOptions opts;
        opts.component_edge_cap = 64;
        Correction a = decode_mle(dem, syndrome, opts);
        DecodingHypergraph scaled = dem;
        for (auto& e : scaled.edges) {
            // Uniform weight scaling w -> 1.7 w, i.e. p -> p^a / (p^a + (1-p)^a).
            double pa = std::pow(e.p, 1.7), qa = std::pow(1.0 - e.p, 1.7);
            e.p = pa / (pa + qa);
        }
        Correction b = decode_mle(scaled, syndrome, opts);
        CHECK(a.obs_flip == b.obs_flip);
        tested++;
    }
    CHECK(tested > 20);
}

TEST_CASE("likelihood gap is computed on demand") {
    DecodingHypergraph dem;
    dem.detector_count = 1;
    dem.observable_count = 1;
    dem.edges.push_back({0.2, {0}, {0}, EdgeSource::Pauli, 0, 0});
    dem.edges.push_back({0.05, {0}, {}, EdgeSource::Pauli, 0, 0});
    MleOptions opts;
    opts.compute_gap = true;
    Correction c = decode_mle(dem, {1}, opts);
    REQUIRE(c.gap.has_value());
    CHECK(*c.gap == doctest::Approx(edge_w(0.05) - edge_w(0.2)));
}

TEST_CASE("mwpm handles boundary and matches mle on graphlike instances") {
    Rng rng(99);
    int agree = 0, total = 0;
    for (int trial = 0; trial < 60; trial++) {
        DecodingHypergraph dem;
        dem.detector_count = 6;
        dem.observable_count = 1;
        for (int e = 0; e < 10; e++) {
            Hyperedge he;
            he.p = 0.02 + 0.3 * rng.next_double();
            uint32_t a = rng.next_below(6);
            if (rng.next_below(3) == 0) {
                he.dets = {a};
            } else {
                uint32_t b = rng.next_below(6);
                if (a == b) b = (b + 1) % 6;
                he.dets = {std::min(a, b), std::max(a, b)};
            }
            if (rng.next_bool()) he.obs = {0};
            dem.edges.push_back(he);
        }
        std::vector<uint8_t> syndrome(6);
        for (auto& b : syndrome) b = rng.next_below(4) == 0;
        Correction m;
        try {
            m = decode_mwpm(dem, syndrome);
        } catch (const std::exception&) {
            continue;  // disconnected defect
        }
        total++;
        MleOptions opts;
        opts.component_edge_cap = 64;
        Correction x = decode_mle(dem, syndrome, opts);
        // Matching restricted to paths can exceed the hypergraph optimum but
        // never beat it.
        CHECK(m.weight >= x.weight - 1e-9);
        agree += m.obs_flip == x.obs_flip;
    }
    CHECK(total > 30);
    CHECK(agree > total * 3 / 4);
}

TEST_CASE("mwpm rejects hyperedges without a decomposition hint") {
    DecodingHypergraph dem;
    dem.detector_count = 4;
    dem.observable_count = 0;
    dem.edges.push_back({0.1, {0, 1, 2}, {}, EdgeSource::Pauli, 0, 0});
    CHECK_THROWS(decode_mwpm(dem, {1, 1, 0, 0}));
    std::vector<std::pair<uint32_t, std::vector<Hyperedge>>> hints;
    hints.push_back({0, {{0.1, {0, 1}, {}, EdgeSource::Pauli, 0, 0},
                         {0.1, {2}, {}, EdgeSource::Pauli, 0, 0}}});
    MwpmOptions opts;
    opts.decompositions = &hints;
    CHECK_NOTHROW(decode_mwpm(dem, {1, 1, 0, 0}, opts));
}

TEST_CASE("mwpm matches mle on most surface-code shots") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 3;
    NoiseSpec ns;
    ns.p_cz = 0.005;
    ns.loss_fraction = 0.0;
    ns.bias = kInfiniteBias;  // Z-only noise keeps the DEM graph-like
    Circuit noisy = apply_noise(gen_conventional(cfg), ns);
    LifecycleDemCache cache = precompute_lifecycle_dems(noisy, 2);
    ShotBatch shots = sample_shots(noisy, 2000, 17);
    // Pauli-only DEM of a CSS memory is graphlike per observable type.
    uint64_t agree = 0, counted = 0;
    std::vector<uint8_t> syndrome(shots.detector_count);
    for (uint64_t s = 0; s < shots.n_shots; s++) {
        for (uint32_t d = 0; d < shots.detector_count; d++) syndrome[d] = shots.detector(s, d);
        Correction a, b;
        try {
            b = decode_mwpm(cache.pauli, syndrome);
        } catch (const std::exception&) {
            continue;
        }
        a = decode_mle(cache.pauli, syndrome);
        counted++;
        agree += a.obs_flip == b.obs_flip;
    }
    REQUIRE(counted > 1500);
    CHECK((double)agree / counted >= 0.99);
}

TEST_CASE("wilson interval brackets the point estimate") {
    auto [lo, hi] = wilson_interval(10, 1000);
    CHECK(lo < 0.01);
    CHECK(hi > 0.01);
    CHECK(lo > 0.004);
    CHECK(hi < 0.02);
    auto [l0, h0] = wilson_interval(0, 1000);
    CHECK(l0 == 0.0);
    CHECK(h0 < 0.005);
}

TEST_CASE("logical error rate of a noiseless batch is zero") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    Circuit c = gen_conventional(cfg);
    LifecycleDemCache cache = precompute_lifecycle_dems(c, 1);
    ShotBatch shots = sample_shots(c, 500, 4);
    LerEstimate est = logical_error_rate(shots, cache);
    CHECK(est.failures == 0);
    CHECK(est.ler == 0.0);
}
