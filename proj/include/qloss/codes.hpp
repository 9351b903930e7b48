#pragma once

#include <cstdint>
#include <string>

#include "qloss/circuit.hpp"

namespace qloss {

enum class SEMethod : uint8_t { Conventional, Swap, Teleportation, DirectConversion };
enum class CodeVariant : uint8_t { CSS, XZZX };

struct SEConfig {
    uint32_t distance = 3;  // odd, >= 3
    uint32_t rounds = 3;    // SE rounds (teleportation runs 2*rounds layers)
    SEMethod method = SEMethod::Conventional;
    uint32_t swap_period = 1;
    double detect_period = 1.0;   // 0.25 = per entangling layer, k >= 1 = per k rounds
    double replace_period = 1.0;  // >= detect_period
    CodeVariant variant = CodeVariant::CSS;
    char basis = 'Z';
    bool noiseless_first = true;
    bool noiseless_last = true;
    bool native_cx = false;  // false: CX compiled as H.CZ.H
};

Circuit gen_conventional(const SEConfig& cfg);
Circuit gen_swap(const SEConfig& cfg);
Circuit gen_teleportation(const SEConfig& cfg);
Circuit gen_direct_conversion(const SEConfig& cfg);

Circuit gen_se(const SEConfig& cfg);  // dispatch on cfg.method

Circuit gen_random_clifford(uint32_t num_logical, uint32_t layers, double n_r,
                            const SEConfig& cfg, uint64_t seed);

// Teleported-gate toy algorithm: each layer teleports the logical qubit to a
// fresh block, measuring the old block out and heralding its losses.
// erasure_channel adds replace-every-gate erasure checks (the period-0.25
// lower-bound comparison).
Circuit gen_teleported_algorithm(uint32_t layers, const SEConfig& cfg, uint64_t seed,
                                 bool erasure_channel = false);

}  // namespace qloss
