#include "qloss/noise.hpp"

#include <algorithm>
#include <stdexcept>

namespace qloss {

namespace {

double per_qubit_error(double p_cz) { return 1.0 - std::sqrt(1.0 - p_cz); }

}  // namespace

ChannelTerms derive_channel_model_a(const NoiseSpec& spec) {
    if (spec.model != ErrorModel::A && spec.model != ErrorModel::C)
        throw std::invalid_argument("derive_channel_model_a: model is not A/C");
    double p = per_qubit_error(spec.p_cz);
    double L = spec.loss_fraction;
    ChannelTerms t;
    t.loss = L * p;
    if (std::isinf(spec.bias)) {
        t.px = t.py = 0.0;
        t.pz = (1.0 - L) * p;
    } else {
        t.px = t.py = (1.0 - L) * p / (2.0 * (1.0 + spec.bias));
        t.pz = (1.0 - L) * spec.bias * p / (1.0 + spec.bias);
    }
    return t;
}

ChannelTerms derive_channel_model_b(const NoiseSpec& spec) {
    if (spec.model != ErrorModel::B)
        throw std::invalid_argument("derive_channel_model_b: model is not B");
    if (spec.loss_fraction != 1.0)
        throw std::invalid_argument("derive_channel_model_b: model B is defined for L = 1 only");
    ChannelTerms t;
    double half = per_qubit_error(spec.p_cz) / 2.0;
    if (half > 0) t.corr2 = {half, half, half, half};  // (L⊗I, I⊗L, L⊗Z, Z⊗L)
    return t;
}

double movement_error(double p_idle, double motion_time, double slot_time) {
    if (slot_time <= 0) throw std::invalid_argument("movement_error: slot_time must be positive");
    if (motion_time <= 0 || p_idle <= 0) return 0.0;
    // Non-integral T/tau rounds up to the next slot.
    uint64_t slots = (uint64_t)std::ceil(motion_time / slot_time - 1e-12);
    return 1.0 - std::pow(1.0 - p_idle, (double)slots);
}

Circuit apply_noise(const Circuit& c, const NoiseSpec& spec) {
    validate_circuit(c);
    ChannelTerms terms;
    if (spec.model == ErrorModel::B) terms = derive_channel_model_b(spec);
    else terms = derive_channel_model_a(spec);

    double p_move = movement_error(spec.p_idle, spec.motion_time, spec.slot_time);

    std::vector<std::vector<uint32_t>> moves_at(c.instructions.size() + 1);
    for (auto [i, q] : c.movement_marks) moves_at[std::min<size_t>(i, c.instructions.size())].push_back(q);

    Circuit out;
    out.qubit_count = c.qubit_count;
    out.qubit_coords = c.qubit_coords;
    out.noiseless_tick_ranges = c.noiseless_tick_ranges;

    uint32_t tick = 0;
    auto emit_movement = [&](const std::vector<uint32_t>& qs) {
        if (qs.empty() || p_move <= 0) return;
        std::vector<int32_t> targets(qs.begin(), qs.end());
        out.append(Op::PAULI1, targets, {p_move / 3.0, p_move / 3.0, p_move / 3.0});
    };

    for (uint32_t i = 0; i < c.instructions.size(); i++) {
        emit_movement(moves_at[i]);
        const Instruction& ins = c.instructions[i];
        if (ins.op == Op::TICK) tick++;
        bool biased = spec.biased_erasure;
        if (biased && (ins.op == Op::SSR_M || ins.op == Op::ERASURE_CHECK)) {
            // Biased erasure replaces from |1>; the (1/2){Z,I} branch rides on
            // the replacement state code.
            Instruction copy = ins;
            if (ins.op == Op::SSR_M) {
                copy.params = {(double)(uint8_t)ReplaceState::One};
            } else {
                bool replaces = !ins.params.empty() && ins.params[0] != 0;
                copy.params = {replaces ? 1.0 : 0.0, (double)(uint8_t)ReplaceState::One};
            }
            out.instructions.push_back(copy);
        } else {
            out.instructions.push_back(ins);
        }
        if (!op_is_two_qubit(ins.op)) continue;
        if (c.tick_is_noiseless(tick)) continue;
        // Noise rides on every entangling gate.
        if (spec.model == ErrorModel::B) {
            if (!terms.corr2.empty())
                out.append(Op::CORR_LOSS2, ins.targets, terms.corr2);
        } else {
            std::vector<int32_t> qs = ins.targets;
            if (terms.loss > 0) {
                std::vector<double> loss_params = {terms.loss};
                if (spec.model == ErrorModel::C) loss_params.push_back(1.0);  // erasure flag
                out.append(Op::LOSS, qs, loss_params);
            }
            if (terms.px + terms.py + terms.pz > 0)
                out.append(Op::PAULI1, qs, {terms.px, terms.py, terms.pz});
        }
    }
    emit_movement(moves_at[c.instructions.size()]);
    validate_circuit(out);
    return out;
}

}  // namespace qloss
