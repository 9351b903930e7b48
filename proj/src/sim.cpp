#include "qloss/sim.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace qloss {

namespace {

void apply_unitary(StabilizerSim& sim, Op op, uint32_t q) {
    switch (op) {
        case Op::H: sim.do_h(q); break;
        case Op::S: sim.do_s(q); break;
        case Op::S_DAG: sim.do_s_dag(q); break;
        case Op::X: sim.do_x(q); break;
        case Op::Y: sim.do_y(q); break;
        case Op::Z: sim.do_z(q); break;
        default: break;
    }
}

void run_replacement(StabilizerSim& sim, uint32_t q, ReplaceState rs) {
    sim.reset_z(q);
    if (rs == ReplaceState::One) sim.do_x(q);
    if (rs == ReplaceState::Plus) sim.do_h(q);
}

}  // namespace

SymbolicRun run_symbolic(const Circuit& c, const CompiledCircuit& cc) {
    StabilizerSim sim(c.qubit_count, CoinMode::Symbolic);
    SymbolicRun out;
    out.records.reserve(cc.num_records);
    for (const auto& ins : c.instructions) {
        switch (ins.op) {
            case Op::H:
            case Op::S:
            case Op::S_DAG:
            case Op::X:
            case Op::Y:
            case Op::Z:
                for (int32_t q : ins.targets) apply_unitary(sim, ins.op, q);
                break;
            case Op::CX:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_cx(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::CZ:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_cz(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::SWAP:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_swap(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::R:
                for (int32_t q : ins.targets) sim.reset_z(q);
                break;
            case Op::RX:
                for (int32_t q : ins.targets) sim.reset_x(q);
                break;
            case Op::M:
            case Op::SSR_M:
                for (int32_t q : ins.targets) out.records.push_back(sim.measure_z(q));
                break;
            case Op::MX:
                for (int32_t q : ins.targets) out.records.push_back(sim.measure_x(q));
                break;
            case Op::RANDOM_M:
                // Record of a traced-out qubit: an independent fair coin.
                for (size_t k = 0; k < ins.targets.size(); k++)
                    out.records.push_back(sim.external_coin());
                break;
            default:
                break;
        }
    }
    out.num_coins = sim.num_coins();
    return out;
}

std::vector<uint8_t> reference_bits(const Circuit& c, const CompiledCircuit& cc) {
    StabilizerSim sim(c.qubit_count, CoinMode::Zero);
    std::vector<uint8_t> bits;
    bits.reserve(cc.num_records);
    for (const auto& ins : c.instructions) {
        switch (ins.op) {
            case Op::H:
            case Op::S:
            case Op::S_DAG:
            case Op::X:
            case Op::Y:
            case Op::Z:
                for (int32_t q : ins.targets) apply_unitary(sim, ins.op, q);
                break;
            case Op::CX:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_cx(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::CZ:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_cz(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::SWAP:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_swap(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::R:
                for (int32_t q : ins.targets) sim.reset_z(q);
                break;
            case Op::RX:
                for (int32_t q : ins.targets) sim.reset_x(q);
                break;
            case Op::M:
            case Op::SSR_M:
                for (int32_t q : ins.targets) bits.push_back(sim.measure_z(q).constant);
                break;
            case Op::MX:
                for (int32_t q : ins.targets) bits.push_back(sim.measure_x(q).constant);
                break;
            case Op::RANDOM_M:
                for (size_t k = 0; k < ins.targets.size(); k++) bits.push_back(0);
                break;
            default:
                break;
        }
    }
    return bits;
}

std::vector<uint8_t> reference_sample(const Circuit& c) {
    CompiledCircuit cc = validate_circuit(c);
    SymbolicRun run = run_symbolic(c, cc);
    bool has_parity_checks = !cc.detector_records.empty() || !cc.observable_records.empty();
    if (!has_parity_checks && run.num_coins > 0)
        throw std::runtime_error("reference_sample: circuit has nondeterministic noiseless measurements");
    auto check = [&](const std::vector<uint32_t>& recs, const char* what) {
        AffineBit acc;
        for (uint32_t r : recs) acc.xor_with(run.records[r]);
        if (!acc.is_constant())
            throw std::runtime_error(std::string("reference_sample: nondeterministic ") + what);
    };
    for (const auto& d : cc.detector_records) check(d, "detector");
    for (const auto& o : cc.observable_records) check(o, "observable");
    std::vector<uint8_t> bits(run.records.size());
    for (size_t i = 0; i < run.records.size(); i++) bits[i] = run.records[i].constant;
    return bits;
}

Circuit truncate_for_loss(const Circuit& c, const CompiledCircuit& cc, const LossAssignment& a) {
    // Group firings per instruction.
    std::map<uint32_t, std::vector<const LossLocation*>> by_instr;
    for (uint32_t id : a.fired) {
        if (id >= cc.loss_locations.size())
            throw std::runtime_error("truncate_for_loss: unknown loss location");
        const LossLocation& loc = cc.loss_locations[id];
        by_instr[loc.instr_index].push_back(&loc);
    }
    Circuit out;
    out.qubit_count = c.qubit_count;
    out.qubit_coords = c.qubit_coords;
    out.noiseless_tick_ranges = c.noiseless_tick_ranges;
    std::vector<uint8_t> lost(c.qubit_count, 0);

    for (uint32_t i = 0; i < c.instructions.size(); i++) {
        const Instruction& ins = c.instructions[i];
        auto fired_here = by_instr.find(i);
        switch (ins.op) {
            case Op::H:
            case Op::S:
            case Op::S_DAG:
            case Op::X:
            case Op::Y:
            case Op::Z:
            case Op::R:
            case Op::RX: {
                std::vector<int32_t> keep;
                for (int32_t q : ins.targets)
                    if (!lost[q]) keep.push_back(q);
                if (!keep.empty()) out.append(ins.op, keep, ins.params);
                break;
            }
            case Op::CX:
            case Op::CZ:
            case Op::SWAP: {
                std::vector<int32_t> keep;
                for (size_t k = 0; k < ins.targets.size(); k += 2) {
                    int32_t q1 = ins.targets[k], q2 = ins.targets[k + 1];
                    if (!lost[q1] && !lost[q2]) {
                        keep.push_back(q1);
                        keep.push_back(q2);
                    }
                }
                if (!keep.empty()) out.append(ins.op, keep);
                break;
            }
            case Op::M:
            case Op::MX:
                for (int32_t q : ins.targets)
                    out.append(lost[q] ? Op::RANDOM_M : ins.op, {q});
                break;
            case Op::SSR_M: {
                ReplaceState rs = ins.params.empty() ? ReplaceState::Zero
                                                     : (ReplaceState)(uint8_t)ins.params[0];
                for (int32_t q : ins.targets) {
                    if (lost[q]) {
                        out.append(Op::RANDOM_M, {q});
                        out.append(Op::R, {q});
                        if (rs == ReplaceState::One) out.append(Op::X, {q});
                        if (rs == ReplaceState::Plus) out.append(Op::H, {q});
                        lost[q] = 0;
                    } else {
                        out.append(Op::SSR_M, {q}, ins.params);
                    }
                }
                break;
            }
            case Op::ERASURE_CHECK: {
                bool replaces = !ins.params.empty() && ins.params[0] != 0;
                ReplaceState rs = ins.params.size() > 1 ? (ReplaceState)(uint8_t)ins.params[1]
                                                        : ReplaceState::Zero;
                if (replaces) {
                    for (int32_t q : ins.targets) {
                        if (!lost[q]) continue;
                        out.append(Op::R, {q});
                        if (rs == ReplaceState::One) out.append(Op::X, {q});
                        if (rs == ReplaceState::Plus) out.append(Op::H, {q});
                        lost[q] = 0;
                    }
                }
                break;
            }
            case Op::LOSS:
            case Op::CORR_LOSS2: {
                if (fired_here != by_instr.end()) {
                    for (const LossLocation* loc : fired_here->second) {
                        if (lost[loc->qubit])
                            throw std::runtime_error("truncate_for_loss: inconsistent assignment (qubit already lost)");
                        lost[loc->qubit] = 1;
                        // Correlated loss term: the partner sees Z with the
                        // term's conditional probability.
                        if (loc->partner != loc->qubit && loc->partner_z > 0 && !lost[loc->partner])
                            out.append(Op::PAULI1, {(int32_t)loc->partner},
                                       {0.0, 0.0, loc->partner_z});
                    }
                }
                break;
            }
            case Op::PAULI1:
            case Op::PAULI2: {
                // Keep Pauli noise; mechanisms on lost qubits propagate nowhere.
                out.append(ins.op, ins.targets, ins.params);
                break;
            }
            case Op::DETECTOR:
            case Op::OBSERVABLE:
            case Op::TICK:
                out.append(ins.op, ins.targets, ins.params);
                break;
            default:
                break;
        }
    }
    return out;
}

namespace {

// Pauli frame: actual Pauli error relative to the noiseless run.
struct Frame {
    std::vector<uint8_t> fx, fz;
    explicit Frame(uint32_t n) : fx(n, 0), fz(n, 0) {}
    void clear(uint32_t q) { fx[q] = fz[q] = 0; }
    void do_op(Op op, uint32_t q) {
        switch (op) {
            case Op::H: std::swap(fx[q], fz[q]); break;
            case Op::S:
            case Op::S_DAG: fz[q] ^= fx[q]; break;
            default: break;
        }
    }
    void do_cx(uint32_t c, uint32_t t) {
        fx[t] ^= fx[c];
        fz[c] ^= fz[t];
    }
    void do_cz(uint32_t a, uint32_t b) {
        fz[a] ^= fx[b];
        fz[b] ^= fx[a];
    }
    void do_swap(uint32_t a, uint32_t b) {
        std::swap(fx[a], fx[b]);
        std::swap(fz[a], fz[b]);
    }
};

struct PauliEvent {
    uint32_t instr;
    uint32_t qubit;
    uint8_t x, z;
};

// Precompiled sampling script.
struct SiteLoss {
    uint32_t instr;
    uint32_t loc_id;   // index into loss_locations
};

struct Precomputed {
    const Circuit* c;
    const CompiledCircuit* cc;
    std::vector<uint8_t> ref;
    std::vector<uint8_t> det_ref;  // reference parity per detector
    std::vector<uint8_t> obs_ref;
    // loss location ids grouped by instruction, in instruction order
    std::vector<std::vector<uint32_t>> locs_at_instr;
    // checkpoints: state after executing instructions [0, instr)
    struct Checkpoint {
        uint32_t instr;
        uint32_t records_done;
        StabilizerSim sim;
    };
    std::vector<Checkpoint> checkpoints;
};

Precomputed precompute(const Circuit& c, const CompiledCircuit& cc) {
    Precomputed p{&c, &cc, reference_bits(c, cc), {}, {}, {}, {}};
    p.det_ref.resize(cc.detector_records.size());
    for (size_t d = 0; d < cc.detector_records.size(); d++) {
        uint8_t v = 0;
        for (uint32_t r : cc.detector_records[d]) v ^= p.ref[r];
        p.det_ref[d] = v;
    }
    p.obs_ref.resize(cc.observable_records.size());
    for (size_t o = 0; o < cc.observable_records.size(); o++) {
        uint8_t v = 0;
        for (uint32_t r : cc.observable_records[o]) v ^= p.ref[r];
        p.obs_ref[o] = v;
    }
    p.locs_at_instr.resize(c.instructions.size());
    for (uint32_t id = 0; id < cc.loss_locations.size(); id++)
        p.locs_at_instr[cc.loss_locations[id].instr_index].push_back(id);

    // Checkpoints every ~1/24 of the ticks.
    uint32_t step = std::max<uint32_t>(1, cc.num_ticks / 24);
    StabilizerSim sim(c.qubit_count, CoinMode::Zero);
    uint32_t records_done = 0;
    uint32_t next_tick = 0;
    for (uint32_t i = 0; i < c.instructions.size(); i++) {
        if (cc.instr_tick[i] >= next_tick) {
            p.checkpoints.push_back({i, records_done, sim});
            next_tick = cc.instr_tick[i] + step;
        }
        const Instruction& ins = c.instructions[i];
        switch (ins.op) {
            case Op::H:
            case Op::S:
            case Op::S_DAG:
            case Op::X:
            case Op::Y:
            case Op::Z:
                for (int32_t q : ins.targets) apply_unitary(sim, ins.op, q);
                break;
            case Op::CX:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_cx(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::CZ:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_cz(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::SWAP:
                for (size_t k = 0; k < ins.targets.size(); k += 2)
                    sim.do_swap(ins.targets[k], ins.targets[k + 1]);
                break;
            case Op::R:
                for (int32_t q : ins.targets) sim.reset_z(q);
                break;
            case Op::RX:
                for (int32_t q : ins.targets) sim.reset_x(q);
                break;
            case Op::M:
            case Op::SSR_M:
                for (int32_t q : ins.targets) {
                    sim.measure_z(q);
                    records_done++;
                }
                break;
            case Op::MX:
                for (int32_t q : ins.targets) {
                    sim.measure_x(q);
                    records_done++;
                }
                break;
            case Op::RANDOM_M:
                records_done += ins.targets.size();
                break;
            default:
                break;
        }
    }
    return p;
}

// Samples the noise events of one shot. Returns fired loss locations (sorted)
// and Pauli events; maintains the lost-interval state machine.
void sample_events(const Precomputed& p, Rng& rng, const LossAssignment* forced,
                   std::vector<uint32_t>& fired, std::vector<PauliEvent>& paulis) {
    const Circuit& c = *p.c;
    const CompiledCircuit& cc = *p.cc;
    std::vector<uint8_t> lost(c.qubit_count, 0);
    size_t forced_ptr = 0;
    for (uint32_t i = 0; i < c.instructions.size(); i++) {
        const Instruction& ins = c.instructions[i];
        switch (ins.op) {
            case Op::LOSS: {
                if (forced) {
                    while (forced_ptr < forced->fired.size()) {
                        uint32_t id = forced->fired[forced_ptr];
                        if (cc.loss_locations[id].instr_index != i) break;
                        fired.push_back(id);
                        lost[cc.loss_locations[id].qubit] = 1;
                        forced_ptr++;
                    }
                    break;
                }
                for (size_t k = 0; k < ins.targets.size(); k++) {
                    double u = rng.next_double();
                    uint32_t q = ins.targets[k];
                    if (!lost[q] && u < ins.params[0]) {
                        fired.push_back(p.locs_at_instr[i][k]);
                        lost[q] = 1;
                    }
                }
                break;
            }
            case Op::CORR_LOSS2: {
                if (forced) {
                    while (forced_ptr < forced->fired.size()) {
                        uint32_t id = forced->fired[forced_ptr];
                        const LossLocation& loc = cc.loss_locations[id];
                        if (loc.instr_index != i) break;
                        fired.push_back(id);
                        lost[loc.qubit] = 1;
                        if (loc.partner_z > 0 && rng.bernoulli(loc.partner_z) && !lost[loc.partner])
                            paulis.push_back({i, loc.partner, 0, 1});
                        forced_ptr++;
                    }
                    break;
                }
                for (size_t k = 0; k < ins.targets.size(); k += 2) {
                    double u = rng.next_double();
                    uint32_t a = ins.targets[k], b = ins.targets[k + 1];
                    if (lost[a] || lost[b]) continue;  // gate cancelled, no event
                    double p_li = ins.params[0], p_il = ins.params[1];
                    double p_lz = ins.params[2], p_zl = ins.params[3];
                    uint32_t lost_q = UINT32_MAX, z_q = UINT32_MAX;
                    if (u < p_li) {
                        lost_q = a;
                    } else if (u < p_li + p_il) {
                        lost_q = b;
                    } else if (u < p_li + p_il + p_lz) {
                        lost_q = a; z_q = b;
                    } else if (u < p_li + p_il + p_lz + p_zl) {
                        lost_q = b; z_q = a;
                    }
                    if (lost_q == UINT32_MAX) continue;
                    for (uint32_t id : p.locs_at_instr[i]) {
                        if (cc.loss_locations[id].qubit == lost_q) fired.push_back(id);
                    }
                    lost[lost_q] = 1;
                    if (z_q != UINT32_MAX) paulis.push_back({i, z_q, 0, 1});
                }
                break;
            }
            case Op::PAULI1: {
                for (size_t k = 0; k < ins.targets.size(); k++) {
                    double u = rng.next_double();
                    uint32_t q = ins.targets[k];
                    uint8_t x = 0, z = 0;
                    if (u < ins.params[0]) x = 1;
                    else if (u < ins.params[0] + ins.params[1]) x = z = 1;
                    else if (u < ins.params[0] + ins.params[1] + ins.params[2]) z = 1;
                    else continue;
                    if (!lost[q]) paulis.push_back({i, q, x, z});
                }
                break;
            }
            case Op::PAULI2: {
                for (size_t k = 0; k < ins.targets.size(); k += 2) {
                    double u = rng.next_double();
                    double acc = 0;
                    int term = -1;
                    for (int t = 0; t < 15; t++) {
                        acc += ins.params[t];
                        if (u < acc) { term = t; break; }
                    }
                    if (term < 0) continue;
                    int pa = (term + 1) / 4, pb = (term + 1) % 4;  // 0=I,1=X,2=Y,3=Z
                    uint32_t a = ins.targets[k], b = ins.targets[k + 1];
                    if (pa && !lost[a]) paulis.push_back({i, a, (uint8_t)(pa != 3), (uint8_t)(pa != 1)});
                    if (pb && !lost[b]) paulis.push_back({i, b, (uint8_t)(pb != 3), (uint8_t)(pb != 1)});
                }
                break;
            }
            case Op::SSR_M: {
                for (int32_t q : ins.targets)
                    if (lost[q]) lost[q] = 0;  // replaced
                break;
            }
            case Op::ERASURE_CHECK: {
                bool replaces = !ins.params.empty() && ins.params[0] != 0;
                if (replaces)
                    for (int32_t q : ins.targets)
                        if (lost[q]) lost[q] = 0;
                break;
            }
            default:
                break;
        }
    }
    std::sort(fired.begin(), fired.end());
}

struct ShotScratch {
    std::vector<uint8_t> records;
    std::vector<uint8_t> ssr;
    std::vector<uint8_t> lost;
};

// Runs one shot. The fast path (no losses) is a pure Pauli-frame walk against
// the reference; lossy shots clone the nearest checkpoint and finish with a
// concrete tableau run of the truncated suffix.
void run_shot(const Precomputed& p, Rng& rng, const std::vector<uint32_t>& fired,
              const std::vector<PauliEvent>& paulis, ShotScratch& s) {
    const Circuit& c = *p.c;
    const CompiledCircuit& cc = *p.cc;
    s.records.assign(cc.num_records, 0);
    s.ssr.assign(cc.ssr_records.size(), 0);
    s.lost.assign(c.qubit_count, 0);

    Frame frame(c.qubit_count);
    size_t pauli_ptr = 0;
    size_t ssr_ptr = 0;
    uint32_t rec = 0;

    uint32_t switch_instr = UINT32_MAX;  // first instruction needing the tableau
    const Precomputed::Checkpoint* ckpt = nullptr;
    if (!fired.empty()) {
        uint32_t first = cc.loss_locations[fired[0]].instr_index;
        for (const auto& cp : p.checkpoints)
            if (cp.instr <= first) ckpt = &cp;
        switch_instr = ckpt->instr;
    }

    StabilizerSim sim(0, CoinMode::Random, &rng);
    size_t fired_ptr = 0;

    for (uint32_t i = 0; i < c.instructions.size(); i++) {
        if (i == switch_instr) {
            sim = ckpt->sim;
            sim.set_coin_mode(CoinMode::Random, &rng);
        }
        bool tableau = (switch_instr != UINT32_MAX && i >= switch_instr);
        const Instruction& ins = c.instructions[i];

        // Loss firings at this instruction.
        while (fired_ptr < fired.size() && cc.loss_locations[fired[fired_ptr]].instr_index == i) {
            s.lost[cc.loss_locations[fired[fired_ptr]].qubit] = 1;
            fired_ptr++;
        }
        // Sampled Pauli events at this instruction.
        while (pauli_ptr < paulis.size() && paulis[pauli_ptr].instr == i) {
            const PauliEvent& e = paulis[pauli_ptr++];
            if (!s.lost[e.qubit]) {
                frame.fx[e.qubit] ^= e.x;
                frame.fz[e.qubit] ^= e.z;
            }
        }

        switch (ins.op) {
            case Op::H:
            case Op::S:
            case Op::S_DAG:
                for (int32_t q : ins.targets) {
                    if (s.lost[q]) continue;
                    frame.do_op(ins.op, q);
                    if (tableau) apply_unitary(sim, ins.op, q);
                }
                break;
            case Op::X:
            case Op::Y:
            case Op::Z:
                if (tableau)
                    for (int32_t q : ins.targets)
                        if (!s.lost[q]) apply_unitary(sim, ins.op, q);
                break;
            case Op::CX:
            case Op::CZ:
            case Op::SWAP:
                for (size_t k = 0; k < ins.targets.size(); k += 2) {
                    uint32_t a = ins.targets[k], b = ins.targets[k + 1];
                    if (s.lost[a] || s.lost[b]) continue;
                    if (ins.op == Op::CX) frame.do_cx(a, b);
                    else if (ins.op == Op::CZ) frame.do_cz(a, b);
                    else frame.do_swap(a, b);
                    if (tableau) {
                        if (ins.op == Op::CX) sim.do_cx(a, b);
                        else if (ins.op == Op::CZ) sim.do_cz(a, b);
                        else sim.do_swap(a, b);
                    }
                }
                break;
            case Op::R:
                for (int32_t q : ins.targets) {
                    if (s.lost[q]) continue;
                    frame.clear(q);
                    frame.fz[q] = rng.next_bool();
                    if (tableau) sim.reset_z(q);
                }
                break;
            case Op::RX:
                for (int32_t q : ins.targets) {
                    if (s.lost[q]) continue;
                    frame.clear(q);
                    frame.fx[q] = rng.next_bool();
                    if (tableau) sim.reset_x(q);
                }
                break;
            case Op::M:
            case Op::MX:
                for (int32_t q : ins.targets) {
                    uint8_t bit;
                    if (s.lost[q]) {
                        bit = rng.next_bool();
                    } else if (ins.op == Op::M) {
                        bit = (tableau ? sim.measure_z(q).constant : p.ref[rec]) ^ frame.fx[q];
                        frame.fz[q] ^= rng.next_bool();
                    } else {
                        bit = (tableau ? sim.measure_x(q).constant : p.ref[rec]) ^ frame.fz[q];
                        frame.fx[q] ^= rng.next_bool();
                    }
                    s.records[rec++] = bit;
                }
                break;
            case Op::RANDOM_M:
                for (size_t k = 0; k < ins.targets.size(); k++) s.records[rec++] = rng.next_bool();
                break;
            case Op::SSR_M: {
                ReplaceState rs = ins.params.empty() ? ReplaceState::Zero
                                                     : (ReplaceState)(uint8_t)ins.params[0];
                for (int32_t q : ins.targets) {
                    uint8_t bit;
                    if (s.lost[q]) {
                        bit = rng.next_bool();
                        s.ssr[ssr_ptr++] = kSsrLost;
                        if (tableau) run_replacement(sim, q, rs);
                        frame.clear(q);
                        s.lost[q] = 0;
                    } else {
                        bit = (tableau ? sim.measure_z(q).constant : p.ref[rec]) ^ frame.fx[q];
                        frame.fz[q] ^= rng.next_bool();
                        s.ssr[ssr_ptr++] = bit;
                    }
                    s.records[rec++] = bit;
                }
                break;
            }
            case Op::ERASURE_CHECK: {
                bool replaces = !ins.params.empty() && ins.params[0] != 0;
                ReplaceState rs = ins.params.size() > 1 ? (ReplaceState)(uint8_t)ins.params[1]
                                                        : ReplaceState::Zero;
                for (int32_t q : ins.targets) {
                    if (s.lost[q]) {
                        s.ssr[ssr_ptr++] = kSsrLost;
                        if (replaces) {
                            if (tableau) run_replacement(sim, q, rs);
                            frame.clear(q);
                            s.lost[q] = 0;
                        }
                    } else {
                        s.ssr[ssr_ptr++] = 0;
                    }
                }
                break;
            }
            default:
                break;
        }
    }
}

}  // namespace

ShotBatch sample_shots(const Circuit& c, uint64_t n_shots, uint64_t seed,
                       const SampleOptions& opts) {
    CompiledCircuit cc = validate_circuit(c);
    Precomputed p = precompute(c, cc);

    ShotBatch b;
    b.n_shots = n_shots;
    b.detector_count = (uint32_t)cc.detector_records.size();
    b.observable_count = (uint32_t)cc.observable_records.size();
    b.ssr_count = (uint32_t)cc.ssr_records.size();
    b.det_words = (b.detector_count + 63) / 64;
    b.obs_words = (b.observable_count + 63) / 64;
    b.detector_bits.assign(n_shots * b.det_words, 0);
    b.observable_bits.assign(n_shots * b.obs_words, 0);
    b.ssr.assign(n_shots * b.ssr_count, 0);
    b.has_ground_truth = opts.ground_truth;
    if (opts.ground_truth) b.ground_truth.resize(n_shots);

    auto worker = [&](uint64_t lo, uint64_t hi) {
        ShotScratch scratch;
        std::vector<uint32_t> fired;
        std::vector<PauliEvent> paulis;
        for (uint64_t shot = lo; shot < hi; shot++) {
            Rng rng(seed, shot);
            fired.clear();
            paulis.clear();
            sample_events(p, rng, opts.forced_losses, fired, paulis);
            run_shot(p, rng, fired, paulis, scratch);
            for (uint32_t d = 0; d < b.detector_count; d++) {
                uint8_t v = p.det_ref[d];
                for (uint32_t r : cc.detector_records[d]) v ^= scratch.records[r];
                if (v) b.set_detector(shot, d, true);
            }
            for (uint32_t o = 0; o < b.observable_count; o++) {
                uint8_t v = p.obs_ref[o];
                for (uint32_t r : cc.observable_records[o]) v ^= scratch.records[r];
                if (v) b.set_observable(shot, o, true);
            }
            std::memcpy(&b.ssr[shot * b.ssr_count], scratch.ssr.data(), b.ssr_count);
            if (opts.ground_truth) b.ground_truth[shot].fired = fired;
        }
    };

    uint32_t threads = std::max<uint32_t>(1, opts.threads);
    if (threads == 1 || n_shots < 2 * threads) {
        worker(0, n_shots);
    } else {
        std::vector<std::thread> pool;
        uint64_t chunk = (n_shots + threads - 1) / threads;
        for (uint32_t t = 0; t < threads; t++) {
            uint64_t lo = t * chunk, hi = std::min<uint64_t>(n_shots, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return b;
}

namespace {
template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
}  // namespace

void write_shot_batch(const ShotBatch& b, std::ostream& os) {
    put<uint32_t>(os, 0x42534c51);  // "QLSB"
    put<uint32_t>(os, 1);
    put<uint64_t>(os, b.n_shots);
    put<uint32_t>(os, b.detector_count);
    put<uint32_t>(os, b.observable_count);
    put<uint32_t>(os, b.ssr_count);
    put<uint32_t>(os, b.has_ground_truth ? 1 : 0);
    os.write(reinterpret_cast<const char*>(b.detector_bits.data()), b.detector_bits.size() * 8);
    os.write(reinterpret_cast<const char*>(b.observable_bits.data()), b.observable_bits.size() * 8);
    os.write(reinterpret_cast<const char*>(b.ssr.data()), b.ssr.size());
    if (b.has_ground_truth) {
        for (const auto& a : b.ground_truth) {
            put<uint32_t>(os, (uint32_t)a.fired.size());
            for (uint32_t id : a.fired) put<uint32_t>(os, id);
        }
    }
}

ShotBatch read_shot_batch(std::istream& is) {
    ShotBatch b;
    if (get<uint32_t>(is) != 0x42534c51) throw std::runtime_error("shot batch: bad magic");
    if (get<uint32_t>(is) != 1) throw std::runtime_error("shot batch: unsupported version");
    b.n_shots = get<uint64_t>(is);
    b.detector_count = get<uint32_t>(is);
    b.observable_count = get<uint32_t>(is);
    b.ssr_count = get<uint32_t>(is);
    b.has_ground_truth = get<uint32_t>(is) != 0;
    b.det_words = (b.detector_count + 63) / 64;
    b.obs_words = (b.observable_count + 63) / 64;
    b.detector_bits.resize(b.n_shots * b.det_words);
    b.observable_bits.resize(b.n_shots * b.obs_words);
    b.ssr.resize(b.n_shots * b.ssr_count);
    is.read(reinterpret_cast<char*>(b.detector_bits.data()), b.detector_bits.size() * 8);
    is.read(reinterpret_cast<char*>(b.observable_bits.data()), b.observable_bits.size() * 8);
    is.read(reinterpret_cast<char*>(b.ssr.data()), b.ssr.size());
    if (b.has_ground_truth) {
        b.ground_truth.resize(b.n_shots);
        for (auto& a : b.ground_truth) {
            uint32_t n = get<uint32_t>(is);
            a.fired.resize(n);
            for (uint32_t& id : a.fired) id = get<uint32_t>(is);
        }
    }
    if (!is) throw std::runtime_error("shot batch: truncated stream");
    return b;
}

}  // namespace qloss
