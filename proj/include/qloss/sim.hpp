#pragma once

#include <iosfwd>
#include <vector>

#include "qloss/circuit.hpp"
#include "qloss/tableau.hpp"

namespace qloss {

// Noiseless symbolic run: every measurement record as an affine form over
// the circuit's innovation coins.
struct SymbolicRun {
    std::vector<AffineBit> records;
    uint32_t num_coins = 0;
};

SymbolicRun run_symbolic(const Circuit& c, const CompiledCircuit& cc);

// Noiseless record with all coins collapsed to the 0 branch. Throws if any
// detector or observable is nondeterministic, or if the circuit has
// nondeterministic measurements and nothing that pins them down.
std::vector<uint8_t> reference_sample(const Circuit& c);

// Reference bits without the determinism check (coins -> 0 convention).
std::vector<uint8_t> reference_bits(const Circuit& c, const CompiledCircuit& cc);

struct LossAssignment {
    std::vector<uint32_t> fired;  // indices into CompiledCircuit::loss_locations, sorted

    bool operator==(const LossAssignment&) const = default;
};

// Deterministic loss circuit: gates in lost spans deleted, affected
// measurements replaced by RANDOM_M, replacement points restore the qubit.
Circuit truncate_for_loss(const Circuit& c, const CompiledCircuit& cc, const LossAssignment& a);

constexpr uint8_t kSsrLost = 2;

struct ShotBatch {
    uint64_t n_shots = 0;
    uint32_t detector_count = 0;
    uint32_t observable_count = 0;
    uint32_t ssr_count = 0;
    uint32_t det_words = 0;
    uint32_t obs_words = 0;
    std::vector<uint64_t> detector_bits;   // shot-major, det_words per shot
    std::vector<uint64_t> observable_bits; // shot-major, obs_words per shot
    std::vector<uint8_t> ssr;              // shot-major, ssr_count per shot: 0/1/2
    bool has_ground_truth = false;
    std::vector<LossAssignment> ground_truth;

    bool detector(uint64_t shot, uint32_t k) const {
        return (detector_bits[shot * det_words + k / 64] >> (k % 64)) & 1;
    }
    bool observable(uint64_t shot, uint32_t k) const {
        return (observable_bits[shot * obs_words + k / 64] >> (k % 64)) & 1;
    }
    uint8_t ssr_outcome(uint64_t shot, uint32_t k) const { return ssr[shot * ssr_count + k]; }

    void set_detector(uint64_t shot, uint32_t k, bool v) {
        uint64_t& w = detector_bits[shot * det_words + k / 64];
        w = (w & ~(1ull << (k % 64))) | ((uint64_t)v << (k % 64));
    }
    void set_observable(uint64_t shot, uint32_t k, bool v) {
        uint64_t& w = observable_bits[shot * obs_words + k / 64];
        w = (w & ~(1ull << (k % 64))) | ((uint64_t)v << (k % 64));
    }
};

struct SampleOptions {
    bool ground_truth = false;
    uint32_t threads = 1;
    // Forces this loss assignment in every shot instead of sampling losses.
    const LossAssignment* forced_losses = nullptr;
};

ShotBatch sample_shots(const Circuit& c, uint64_t n_shots, uint64_t seed,
                       const SampleOptions& opts = {});

void write_shot_batch(const ShotBatch& b, std::ostream& os);
ShotBatch read_shot_batch(std::istream& is);

}  // namespace qloss
