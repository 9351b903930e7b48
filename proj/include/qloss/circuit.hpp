#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qloss {

enum class Op : uint8_t {
    H,
    S,
    S_DAG,
    X,
    Y,
    Z,
    CX,
    CZ,
    SWAP,
    R,
    RX,
    M,
    MX,
    SSR_M,
    ERASURE_CHECK,
    LOSS,
    PAULI1,
    PAULI2,
    CORR_LOSS2,
    RANDOM_M,
    DETECTOR,
    OBSERVABLE,
    TICK,
    QUBIT_COORDS,
};

const char* op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

bool op_is_two_qubit(Op op);
bool op_is_measurement(Op op);  // produces a measurement record per target
bool op_is_reset(Op op);
bool op_is_unitary_1q(Op op);

// Replacement state codes for SSR_M / ERASURE_CHECK replacement.
enum class ReplaceState : uint8_t { Zero = 0, Plus = 1, One = 2 };

// One instruction. Targets are qubit indices, except for DETECTOR/OBSERVABLE
// where they are measurement-record back-references (negative, rec[-k] == -k).
struct Instruction {
    Op op;
    std::vector<int32_t> targets;
    std::vector<double> params;

    bool operator==(const Instruction&) const = default;
};

struct CircuitStats {
    uint64_t depth = 0;  // TICK count
    uint64_t entangling_gate_count = 0;
    uint64_t measurement_count = 0;
    uint64_t qubit_count = 0;
};

struct Circuit {
    uint32_t qubit_count = 0;
    std::vector<Instruction> instructions;
    // Optional layout coordinates, keyed by qubit.
    std::map<uint32_t, std::array<double, 3>> qubit_coords;
    // Tick ranges [first, last] that noise annotation must skip.
    std::vector<std::pair<uint32_t, uint32_t>> noiseless_tick_ranges;
    // Qubit-movement points (instruction index the movement precedes, qubit);
    // apply_noise turns these into idle-accumulated error channels.
    std::vector<std::pair<uint32_t, uint32_t>> movement_marks;

    uint32_t detector_count = 0;   // filled by validate()
    uint32_t observable_count = 0; // filled by validate()

    Circuit& append(Op op, std::initializer_list<int32_t> targets,
                    std::initializer_list<double> params = {});
    Circuit& append(Op op, const std::vector<int32_t>& targets,
                    const std::vector<double>& params = {});

    bool tick_is_noiseless(uint32_t tick) const;

    bool operator==(const Circuit& other) const;
};

// Structural index built by validation: resolved records, detectors,
// loss locations, ssr records. Everything downstream consumes this.
struct LossLocation {
    uint32_t instr_index = 0;
    uint32_t qubit = 0;      // the qubit that gets lost
    uint32_t partner = 0;    // other qubit of a CORR_LOSS2 pair (== qubit if none)
    double prior = 0.0;      // probability that this location fires
    double partner_z = 0.0;  // P(Z on partner | fired), CORR_LOSS2 only
};

struct SsrRecord {
    uint32_t instr_index = 0;
    uint32_t qubit = 0;
    bool replaces = false;
    ReplaceState replace_state = ReplaceState::Zero;
    int32_t meas_record = -1;  // measurement record index for SSR_M, -1 otherwise
};

struct CompiledCircuit {
    const Circuit* circuit = nullptr;
    uint32_t num_records = 0;
    // First measurement-record index of each measuring instruction.
    std::vector<uint32_t> record_offset;  // size == instructions.size(), UINT32_MAX if none
    std::vector<uint32_t> record_qubit;   // measured qubit per record
    std::vector<std::vector<uint32_t>> detector_records;
    std::vector<std::vector<uint32_t>> observable_records;
    std::vector<LossLocation> loss_locations;
    std::vector<SsrRecord> ssr_records;
    std::vector<uint32_t> instr_tick;  // tick index per instruction
    uint32_t num_ticks = 0;
};

// Throws std::runtime_error with a description on any invariant violation.
CompiledCircuit validate_circuit(const Circuit& c);

Circuit parse_circuit(const std::string& text);
std::string emit_circuit(const Circuit& c);
CircuitStats circuit_stats(const Circuit& c);

// Canonical probability formatting used by emit_circuit (9 significant digits).
std::string format_param(double p);

}  // namespace qloss
