#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "qloss/codes.hpp"
#include "qloss/dem.hpp"
#include "qloss/noise.hpp"
#include "qloss/rng.hpp"

using namespace qloss;

TEST_CASE("combine probabilities basics") {
    CHECK(combine_probabilities({0.5, 0.123}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(combine_probabilities({0.1, 0.2}) == doctest::Approx(0.26).epsilon(1e-12));
    CHECK(combine_probabilities({0.37}) == doctest::Approx(0.37));
    CHECK(combine_probabilities({}) == 0.0);
}

TEST_CASE("combine probabilities tracks the exact parity oracle") {
    Rng rng(31337);
    for (int trial = 0; trial < 10000; trial++) {
        size_t n = 1 + rng.next_below(6);
        std::vector<double> ps(n);
        double pmax = 0;
        for (auto& p : ps) {
            p = 0.2 * rng.next_double();
            pmax = std::max(pmax, p);
        }
        double approx = combine_probabilities(ps);
        double exact = exact_xor_probability(ps);
        double c4 = n >= 4 ? (double)(n * (n - 1) * (n - 2) * (n - 3)) / 24.0 : 0.0;
        double tol = 5.0 * std::pow(pmax, 4) * c4 + 1e-15;
        CHECK(std::abs(approx - exact) <= tol);
    }
}

TEST_CASE("noiseless circuit yields an empty hypergraph") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    DecodingHypergraph dem = extract_dem(gen_conventional(cfg));
    CHECK(dem.edges.empty());
}

TEST_CASE("supercheck from a lost shared qubit merges two checks") {
    // Two Z checks Z0Z1 and Z1Z2 sharing qubit 1; a lost qubit 1 randomizes
    // its readout and joins the two final checks into one 0.5 edge.
    Circuit c = parse_circuit(
        "R 0\nR 1\nR 2\nRX 3\nRX 4\nTICK\n"
        "CZ 3 0\nCZ 4 1\nTICK\nLOSS(0.5) 1\nCZ 3 1\nCZ 4 2\nTICK\n"
        "H 3\nH 4\nTICK\nSSR_M 3\nSSR_M 4\nTICK\nSSR_M 0\nSSR_M 1\nSSR_M 2\n"
        "DETECTOR rec[-5] rec[-3] rec[-2]\n"
        "DETECTOR rec[-4] rec[-2] rec[-1]\n");
    CompiledCircuit cc = validate_circuit(c);
    auto ref = reference_bits(c, cc);
    Circuit t = truncate_for_loss(c, cc, {{0}});
    CompiledCircuit tcc = validate_circuit(t);
    DecodingHypergraph dem = extract_dem(t, tcc, &ref);
    bool joint = false;
    for (const auto& e : dem.edges)
        if (e.p == 0.5 && e.dets == std::vector<uint32_t>{0, 1}) joint = true;
    CHECK(joint);
}

TEST_CASE("lifecycle cache has one dem per location and the pauli base") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    cfg.noiseless_first = false;
    NoiseSpec ns;
    ns.p_cz = 0.02;
    ns.loss_fraction = 0.5;
    Circuit noisy = apply_noise(gen_conventional(cfg), ns);
    LifecycleDemCache cache = precompute_lifecycle_dems(noisy, 2);
    REQUIRE(cache.deltas.size() == cache.lifecycles.lifecycles.size());
    for (uint32_t i = 0; i < cache.deltas.size(); i++)
        CHECK(cache.deltas[i].size() == cache.lifecycles.lifecycles[i].locations.size());
    // DEM_Pauli equals the lossless extraction with LOSS annotations ignored.
    Circuit stripped = noisy;
    std::erase_if(stripped.instructions,
                  [](const Instruction& i) { return i.op == Op::LOSS || i.op == Op::CORR_LOSS2; });
    DecodingHypergraph direct = extract_dem(stripped);
    CHECK(direct.edges.size() == cache.pauli.edges.size());
}

TEST_CASE("no heralds assembles to the pauli dem") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    cfg.noiseless_first = false;
    NoiseSpec ns;
    ns.p_cz = 0.02;
    ns.loss_fraction = 0.3;
    Circuit noisy = apply_noise(gen_conventional(cfg), ns);
    LifecycleDemCache cache = precompute_lifecycle_dems(noisy, 2);
    DecodingHypergraph out = assemble_delayed_erasure_dem({}, cache, 0.0);
    CHECK(out.edges.size() == cache.pauli.edges.size());
}

TEST_CASE("supercheck edges survive assembly at exactly one half") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 3;
    cfg.noiseless_first = false;
    NoiseSpec ns;
    ns.p_cz = 0.02;
    ns.loss_fraction = 0.5;
    Circuit noisy = apply_noise(gen_conventional(cfg), ns);
    LifecycleDemCache cache = precompute_lifecycle_dems(noisy, 2);
    // Herald a measure-qubit lifecycle (ancilla lost: its readout record is
    // randomized at every location, so its supercheck must survive at 0.5).
    uint32_t target = UINT32_MAX;
    for (uint32_t i = 0; i < cache.lifecycles.lifecycles.size(); i++) {
        const Lifecycle& lc = cache.lifecycles.lifecycles[i];
        if (lc.role == QubitRole::Measure && lc.length() == 4) { target = i; break; }
    }
    REQUIRE(target != UINT32_MAX);
    DecodingHypergraph out =
        assemble_delayed_erasure_dem({{{target, 0}}}, cache, 0.0);
    // Intersect the location DEMs: edges at 0.5 in all of them.
    std::set<std::pair<std::vector<uint32_t>, std::vector<uint32_t>>> common;
    bool first = true;
    for (const auto& loc_edges : cache.deltas[target]) {
        std::set<std::pair<std::vector<uint32_t>, std::vector<uint32_t>>> here;
        for (const auto& e : loc_edges)
            if (e.p == 0.5) here.insert({e.dets, e.obs});
        if (first) { common = here; first = false; }
        else {
            std::set<std::pair<std::vector<uint32_t>, std::vector<uint32_t>>> inter;
            for (auto& k : common)
                if (here.count(k)) inter.insert(k);
            common = inter;
        }
    }
    CHECK(!common.empty());
    for (auto& key : common) {
        bool found_at_half = false;
        for (const auto& e : out.edges)
            if (e.dets == key.first && e.obs == key.second && e.p == 0.5) found_at_half = true;
        CHECK(found_at_half);
    }
}

TEST_CASE("single-location lifecycle assembles exactly") {
    // One LOSS location: assembled DEM equals pauli merged with that exact
    // truncation delta, no approximation.
    Circuit c = parse_circuit(
        "R 0\nRX 1\nTICK\nLOSS(0.2) 0\nCZ 0 1\nPAULI1(0.01,0,0.01) 0 1\nTICK\n"
        "H 1\nTICK\nSSR_M 1\nSSR_M 0\nDETECTOR rec[-2]\nDETECTOR rec[-1]\n");
    LifecycleDemCache cache = precompute_lifecycle_dems(c, 1);
    REQUIRE(cache.lifecycles.lifecycles.size() == 1);
    DecodingHypergraph out = assemble_delayed_erasure_dem({{{0, 0}}}, cache, 0.0);
    // Every delta edge must appear with its exact probability (merged with
    // pauli edges of identical symptoms where applicable).
    for (const auto& de : cache.deltas[0][0]) {
        double base = 0.0;
        for (const auto& pe : cache.pauli.edges)
            if (pe.dets == de.dets && pe.obs == de.obs) base = pe.p;
        double expect = base > 0 ? combine_probabilities({base, de.p}) : de.p;
        bool ok = false;
        for (const auto& e : out.edges)
            if (e.dets == de.dets && e.obs == de.obs &&
                std::abs(e.p - std::min(expect, 0.5)) < 1e-12)
                ok = true;
        CHECK(ok);
    }
}

TEST_CASE("edge merging is order independent") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    cfg.noiseless_first = false;
    NoiseSpec ns;
    ns.p_cz = 0.02;
    ns.loss_fraction = 0.5;
    Circuit noisy = apply_noise(gen_conventional(cfg), ns);
    LifecycleDemCache cache = precompute_lifecycle_dems(noisy, 2);
    HeraldPattern h1{{{0, 0}, {1, 0}}};
    HeraldPattern h2{{{1, 0}, {0, 0}}};
    CHECK(emit_dem(assemble_delayed_erasure_dem(h1, cache, 0.0)) ==
          emit_dem(assemble_delayed_erasure_dem(h2, cache, 0.0)));
}

TEST_CASE("dem text round trip") {
    DecodingHypergraph dem;
    dem.detector_count = 8;
    dem.observable_count = 1;
    dem.edges.push_back({0.5, {2, 4}, {}, EdgeSource::Supercheck, 0, 0});
    dem.edges.push_back({0.01, {3, 7}, {0}, EdgeSource::Pauli, 0, 0});
    std::string text = emit_dem(dem);
    DecodingHypergraph back = parse_dem(text);
    REQUIRE(back.edges.size() == 2);
    CHECK(back.detector_count == 8);
    CHECK(back.observable_count == 1);
    CHECK(back.edges[0].p == 0.5);
    CHECK(back.edges[1].dets == std::vector<uint32_t>{3, 7});
    CHECK(back.edges[1].obs == std::vector<uint32_t>{0});
    CHECK(emit_dem(back) == text);
}

TEST_CASE("omega-scaled first combination merges once") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    cfg.noiseless_first = false;
    NoiseSpec ns;
    ns.p_cz = 0.02;
    ns.loss_fraction = 0.5;
    Circuit noisy = apply_noise(gen_conventional(cfg), ns);
    LifecycleDemCache cache = precompute_lifecycle_dems(noisy, 2);
    HeraldPattern h{{{0, 0}, {2, 0}}};
    DecodingHypergraph w0 = assemble_delayed_erasure_dem(h, cache, 0.0);
    DecodingHypergraph w1 = assemble_delayed_erasure_dem(h, cache, 1.0);
    CHECK(w1.edges.size() >= w0.edges.size());
}
