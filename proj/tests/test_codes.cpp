#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "qloss/codes.hpp"
#include "qloss/dem.hpp"
#include "qloss/noise.hpp"
#include "qloss/experiments.hpp"
#include "qloss/sim.hpp"

using namespace qloss;

namespace {

void check_quiet(const Circuit& c) {
    CHECK_NOTHROW(reference_sample(c));
    ShotBatch b = sample_shots(c, 16, 11);
    uint64_t fired = 0;
    for (uint64_t s = 0; s < b.n_shots; s++) {
        for (uint32_t d = 0; d < b.detector_count; d++) fired += b.detector(s, d);
        for (uint32_t o = 0; o < b.observable_count; o++) fired += b.observable(s, o);
    }
    CHECK(fired == 0);
}

// Minimum number of Pauli mechanisms flipping the observable undetected,
// searched over subsets of size <= 3.
uint32_t distance_witness(const DecodingHypergraph& dem) {
    size_t n = dem.edges.size();
    auto undetected_flip = [&](const std::vector<size_t>& pick) {
        std::set<uint32_t> dets;
        int obs = 0;
        for (size_t e : pick) {
            for (uint32_t d : dem.edges[e].dets) {
                if (dets.count(d)) dets.erase(d);
                else dets.insert(d);
            }
            obs ^= !dem.edges[e].obs.empty();
        }
        return dets.empty() && obs;
    };
    for (size_t i = 0; i < n; i++)
        if (undetected_flip({i})) return 1;
    for (size_t i = 0; i < n; i++)
        for (size_t j = i + 1; j < n; j++)
            if (undetected_flip({i, j})) return 2;
    for (size_t i = 0; i < n; i++)
        for (size_t j = i + 1; j < n; j++)
            for (size_t k = j + 1; k < n; k++)
                if (undetected_flip({i, j, k})) return 3;
    return 4;
}

DecodingHypergraph pauli_dem(Circuit c) {
    NoiseSpec ns;
    ns.p_cz = 0.01;
    ns.loss_fraction = 0.0;
    return extract_dem(apply_noise(c, ns));
}

}  // namespace

TEST_CASE("conventional counts and structure") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    Circuit c = gen_conventional(cfg);
    CHECK(c.qubit_count == 17);
    CircuitStats s = circuit_stats(c);
    CHECK(s.entangling_gate_count == 2 * 24);  // 24 per round at d=3
    check_quiet(c);
    // 8 detectors per comparison round.
    SEConfig big = cfg;
    big.rounds = 3;
    Circuit c3 = gen_conventional(big);
    CHECK(c3.detector_count == c.detector_count + 8);
}

TEST_CASE("space-time overhead closed forms") {
    CHECK(space_time_overhead(SEMethod::Conventional, 5, 5) == doctest::Approx(980.0));
    CHECK(space_time_overhead(SEMethod::Teleportation, 5, 5) == doctest::Approx(2220.0));
    CHECK(space_time_overhead(SEMethod::Conventional, 3, 3) ==
          doctest::Approx(8.0 * 27 - 4 * 3));
    CHECK(space_time_overhead(SEMethod::Teleportation, 3, 3) ==
          doctest::Approx(18.0 * 27 - 6 * 3));
    CHECK(space_time_overhead(SEMethod::Swap, 3, 0) == 0.0);
}

TEST_CASE("teleportation qubit count is d(3d^2-1)") {
    for (uint32_t d : {3u, 5u}) {
        SEConfig cfg;
        cfg.distance = d;
        cfg.rounds = d;
        Circuit c = gen_teleportation(cfg);
        CHECK(c.qubit_count == d * (3 * d * d - 1));
    }
}

TEST_CASE("entangling gate ratio approaches 1.5 in the bulk") {
    // Per bulk data qubit per round: teleportation uses 6 entangling gates
    // against conventional's 4; full-circuit counts converge with distance.
    SEConfig cfg;
    cfg.distance = 21;
    cfg.rounds = 21;
    uint64_t conv = circuit_stats(gen_conventional(cfg)).entangling_gate_count;
    uint64_t tele = circuit_stats(gen_teleportation(cfg)).entangling_gate_count;
    double ratio = (double)tele / (double)conv;
    CHECK(ratio > 1.4);
    CHECK(ratio < 1.6);
}

TEST_CASE("swap keeps the conventional gate count") {
    SEConfig cfg;
    cfg.distance = 5;
    cfg.rounds = 4;
    CHECK(circuit_stats(gen_swap(cfg)).entangling_gate_count ==
          circuit_stats(gen_conventional(cfg)).entangling_gate_count);
}

TEST_CASE("all generators are quiet and respect validation") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 3;
    check_quiet(gen_swap(cfg));
    check_quiet(gen_teleportation(cfg));
    SEConfig dc = cfg;
    dc.detect_period = 0.25;
    dc.replace_period = 1.0;
    check_quiet(gen_direct_conversion(dc));
    check_quiet(gen_random_clifford(2, 3, 1.0, cfg, 11));
    check_quiet(gen_teleported_algorithm(2, cfg, 11));
    SEConfig xz = cfg;
    xz.variant = CodeVariant::XZZX;
    check_quiet(gen_conventional(xz));
    check_quiet(gen_swap(xz));
}

TEST_CASE("invalid configurations are rejected") {
    SEConfig cfg;
    cfg.distance = 4;
    CHECK_THROWS(gen_conventional(cfg));
    cfg.distance = 3;
    cfg.detect_period = 0.5;
    CHECK_THROWS(gen_direct_conversion(cfg));
    cfg.detect_period = 1.0;
    cfg.replace_period = 0.25;
    CHECK_THROWS(gen_direct_conversion(cfg));
    CHECK_THROWS(gen_random_clifford(2, 3, 0.0, SEConfig{}, 1));
}

TEST_CASE("distance witness at d=3 is at least 2") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 2;
    CHECK(distance_witness(pauli_dem(gen_conventional(cfg))) >= 2);
    CHECK(distance_witness(pauli_dem(gen_swap(cfg))) >= 2);
    CHECK(distance_witness(pauli_dem(gen_teleportation(cfg))) >= 2);
    SEConfig dc = cfg;
    dc.detect_period = 1.0;
    dc.replace_period = 1.0;
    CHECK(distance_witness(pauli_dem(gen_direct_conversion(dc))) >= 2);
    SEConfig xz = cfg;
    xz.variant = CodeVariant::XZZX;
    CHECK(distance_witness(pauli_dem(gen_conventional(xz))) >= 2);
}

TEST_CASE("random clifford seed determinism and n_r counting") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 1;
    Circuit a = gen_random_clifford(2, 4, 1.0, cfg, 77);
    Circuit b = gen_random_clifford(2, 4, 1.0, cfg, 77);
    Circuit c = gen_random_clifford(2, 4, 1.0, cfg, 78);
    CHECK(emit_circuit(a) == emit_circuit(b));
    CHECK(emit_circuit(a) != emit_circuit(c));
    // 24 layers at n_r = 1/24: exactly one SE round after the layers.
    Circuit d = gen_random_clifford(2, 24, 1.0 / 24, cfg, 5);
    // Count ancilla SSR blocks per patch: prep round + 1 = 2.
    CompiledCircuit cc = validate_circuit(d);
    uint32_t anc0 = 9;  // first ancilla qubit of patch 0
    uint32_t meas = 0;
    for (uint32_t r = 0; r < cc.num_records; r++)
        if (cc.record_qubit[r] == anc0) meas++;
    CHECK(meas == 2);
}

TEST_CASE("teleported algorithm grows fresh blocks per layer") {
    SEConfig cfg;
    cfg.distance = 3;
    cfg.rounds = 1;
    Circuit zero = gen_teleported_algorithm(0, cfg, 9);
    Circuit two = gen_teleported_algorithm(2, cfg, 9);
    CHECK(two.qubit_count == 3 * zero.qubit_count);
    check_quiet(two);
}
