#include "qloss/circuit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qloss {

namespace {

struct OpInfo {
    const char* name;
    Op op;
};

constexpr OpInfo kOps[] = {
    {"H", Op::H},
    {"S", Op::S},
    {"S_DAG", Op::S_DAG},
    {"X", Op::X},
    {"Y", Op::Y},
    {"Z", Op::Z},
    {"CX", Op::CX},
    {"CZ", Op::CZ},
    {"SWAP", Op::SWAP},
    {"R", Op::R},
    {"RX", Op::RX},
    {"M", Op::M},
    {"MX", Op::MX},
    {"SSR_M", Op::SSR_M},
    {"ERASURE_CHECK", Op::ERASURE_CHECK},
    {"LOSS", Op::LOSS},
    {"PAULI1", Op::PAULI1},
    {"PAULI2", Op::PAULI2},
    {"CORR_LOSS2", Op::CORR_LOSS2},
    {"RANDOM_M", Op::RANDOM_M},
    {"DETECTOR", Op::DETECTOR},
    {"OBSERVABLE", Op::OBSERVABLE},
    {"TICK", Op::TICK},
    {"QUBIT_COORDS", Op::QUBIT_COORDS},
};

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

const char* op_name(Op op) {
    for (const auto& info : kOps)
        if (info.op == op) return info.name;
    return "?";
}

std::optional<Op> op_from_name(std::string_view name) {
    for (const auto& info : kOps)
        if (name == info.name) return info.op;
    return std::nullopt;
}

bool op_is_two_qubit(Op op) {
    return op == Op::CX || op == Op::CZ || op == Op::SWAP;
}

bool op_is_measurement(Op op) {
    return op == Op::M || op == Op::MX || op == Op::SSR_M || op == Op::RANDOM_M;
}

bool op_is_reset(Op op) { return op == Op::R || op == Op::RX; }

bool op_is_unitary_1q(Op op) {
    switch (op) {
        case Op::H:
        case Op::S:
        case Op::S_DAG:
        case Op::X:
        case Op::Y:
        case Op::Z:
            return true;
        default:
            return false;
    }
}

Circuit& Circuit::append(Op op, std::initializer_list<int32_t> targets,
                         std::initializer_list<double> params) {
    instructions.push_back({op, std::vector<int32_t>(targets), std::vector<double>(params)});
    return *this;
}

Circuit& Circuit::append(Op op, const std::vector<int32_t>& targets,
                         const std::vector<double>& params) {
    instructions.push_back({op, targets, params});
    return *this;
}

bool Circuit::tick_is_noiseless(uint32_t tick) const {
    for (auto [lo, hi] : noiseless_tick_ranges)
        if (tick >= lo && tick <= hi) return true;
    return false;
}

bool Circuit::operator==(const Circuit& other) const {
    return qubit_count == other.qubit_count && instructions == other.instructions &&
           qubit_coords == other.qubit_coords &&
           noiseless_tick_ranges == other.noiseless_tick_ranges &&
           movement_marks == other.movement_marks;
}

CompiledCircuit validate_circuit(const Circuit& c) {
    CompiledCircuit out;
    out.circuit = &c;
    out.record_offset.assign(c.instructions.size(), UINT32_MAX);
    out.instr_tick.assign(c.instructions.size(), 0);

    uint32_t tick = 0;
    uint32_t records = 0;
    uint32_t max_observable = 0;
    bool any_observable = false;
    // Per-tick two-qubit-gate occupancy.
    std::set<uint32_t> busy;

    for (auto [q, xyz] : c.qubit_coords) {
        if (q >= c.qubit_count) fail("QUBIT_COORDS target " + std::to_string(q) + " out of range");
    }

    for (size_t i = 0; i < c.instructions.size(); i++) {
        const Instruction& ins = c.instructions[i];
        out.instr_tick[i] = tick;
        auto bad = [&](const std::string& why) {
            fail("instruction " + std::to_string(i) + " (" + op_name(ins.op) + "): " + why);
        };
        auto check_qubits = [&](size_t arity_multiple) {
            if (ins.targets.empty() || ins.targets.size() % arity_multiple != 0)
                bad("expected a multiple of " + std::to_string(arity_multiple) + " targets");
            for (int32_t t : ins.targets) {
                if (t < 0 || (uint32_t)t >= c.qubit_count)
                    bad("qubit target " + std::to_string(t) + " out of range (qubit_count=" +
                        std::to_string(c.qubit_count) + ")");
            }
        };
        auto check_probs = [&](size_t n, double max_sum) {
            if (ins.params.size() != n) bad("expected " + std::to_string(n) + " params");
            double sum = 0;
            for (double p : ins.params) {
                if (!(p >= 0.0 && p <= 1.0)) bad("probability out of [0,1]");
                sum += p;
            }
            if (sum > max_sum + 1e-9) bad("probabilities sum above " + std::to_string(max_sum));
        };

        switch (ins.op) {
            case Op::TICK:
                if (!ins.targets.empty()) bad("TICK takes no targets");
                tick++;
                busy.clear();
                break;
            case Op::QUBIT_COORDS:
                bad("QUBIT_COORDS is metadata; store in Circuit::qubit_coords");
                break;
            case Op::H:
            case Op::S:
            case Op::S_DAG:
            case Op::X:
            case Op::Y:
            case Op::Z:
            case Op::R:
            case Op::RX:
                check_qubits(1);
                if (!ins.params.empty()) bad("unexpected params");
                break;
            case Op::CX:
            case Op::CZ:
            case Op::SWAP: {
                check_qubits(2);
                if (!ins.params.empty()) bad("unexpected params");
                for (size_t k = 0; k < ins.targets.size(); k += 2) {
                    uint32_t a = ins.targets[k], b = ins.targets[k + 1];
                    if (a == b) bad("two-qubit gate with identical targets");
                    if (!busy.insert(a).second || !busy.insert(b).second)
                        bad("qubit touches more than one two-qubit gate in a time step");
                }
                break;
            }
            case Op::M:
            case Op::MX:
            case Op::RANDOM_M:
                check_qubits(1);
                if (!ins.params.empty()) bad("unexpected params");
                out.record_offset[i] = records;
                for (int32_t q : ins.targets) {
                    out.record_qubit.push_back((uint32_t)q);
                    records++;
                }
                break;
            case Op::SSR_M: {
                check_qubits(1);
                if (ins.params.size() > 1) bad("expected at most one param");
                if (!ins.params.empty() && ins.params[0] != 0 && ins.params[0] != 1 && ins.params[0] != 2)
                    bad("replacement-state code must be 0, 1, or 2");
                out.record_offset[i] = records;
                ReplaceState rs = ins.params.empty() ? ReplaceState::Zero
                                                     : (ReplaceState)(uint8_t)ins.params[0];
                for (int32_t q : ins.targets) {
                    out.ssr_records.push_back({(uint32_t)i, (uint32_t)q, true, rs, (int32_t)records});
                    out.record_qubit.push_back((uint32_t)q);
                    records++;
                }
                break;
            }
            case Op::ERASURE_CHECK: {
                check_qubits(1);
                if (ins.params.size() > 2) bad("expected at most two params");
                bool replaces = !ins.params.empty() && ins.params[0] != 0;
                ReplaceState rs = ins.params.size() > 1 ? (ReplaceState)(uint8_t)ins.params[1]
                                                        : ReplaceState::Zero;
                for (int32_t q : ins.targets)
                    out.ssr_records.push_back({(uint32_t)i, (uint32_t)q, replaces, rs, -1});
                break;
            }
            case Op::LOSS: {
                check_qubits(1);
                // LOSS(p) or LOSS(p, erasure_flag).
                if (ins.params.empty() || ins.params.size() > 2) bad("expected 1 or 2 params");
                if (!(ins.params[0] >= 0.0 && ins.params[0] <= 1.0)) bad("probability out of [0,1]");
                if (ins.params.size() == 2 && ins.params[1] != 0 && ins.params[1] != 1)
                    bad("erasure flag must be 0 or 1");
                for (int32_t q : ins.targets)
                    out.loss_locations.push_back(
                        {(uint32_t)i, (uint32_t)q, (uint32_t)q, ins.params[0], 0.0});
                break;
            }
            case Op::PAULI1:
                check_qubits(1);
                check_probs(3, 1.0);
                break;
            case Op::PAULI2:
                check_qubits(2);
                check_probs(15, 1.0);
                break;
            case Op::CORR_LOSS2: {
                // Fixed term order: (L⊗I, I⊗L, L⊗Z, Z⊗L) on the target pair.
                check_qubits(2);
                check_probs(4, 1.0);
                for (size_t k = 0; k < ins.targets.size(); k += 2) {
                    uint32_t a = ins.targets[k], b = ins.targets[k + 1];
                    if (a == b) bad("CORR_LOSS2 with identical targets");
                    double p_li = ins.params[0], p_il = ins.params[1];
                    double p_lz = ins.params[2], p_zl = ins.params[3];
                    double pa = p_li + p_lz;  // qubit a lost
                    double pb = p_il + p_zl;  // qubit b lost
                    if (pa > 0)
                        out.loss_locations.push_back({(uint32_t)i, a, b, pa, p_lz / pa});
                    if (pb > 0)
                        out.loss_locations.push_back({(uint32_t)i, b, a, pb, p_zl / pb});
                }
                break;
            }
            case Op::DETECTOR:
            case Op::OBSERVABLE: {
                if (ins.op == Op::OBSERVABLE) {
                    if (ins.params.size() != 1 || ins.params[0] < 0 ||
                        ins.params[0] != std::floor(ins.params[0]))
                        bad("OBSERVABLE requires a non-negative integer index param");
                } else if (!ins.params.empty()) {
                    bad("unexpected params");
                }
                std::vector<uint32_t> recs;
                for (int32_t t : ins.targets) {
                    if (t >= 0) bad("expected rec[-k] back-references");
                    int64_t abs_rec = (int64_t)records + t;
                    if (abs_rec < 0) bad("back-reference rec[" + std::to_string(t) + "] underflows record history");
                    recs.push_back((uint32_t)abs_rec);
                }
                std::sort(recs.begin(), recs.end());
                if (ins.op == Op::DETECTOR) {
                    out.detector_records.push_back(std::move(recs));
                } else {
                    uint32_t idx = (uint32_t)ins.params[0];
                    any_observable = true;
                    max_observable = std::max(max_observable, idx);
                    if (out.observable_records.size() <= idx) out.observable_records.resize(idx + 1);
                    auto& obs = out.observable_records[idx];
                    for (uint32_t r : recs) obs.push_back(r);
                    std::sort(obs.begin(), obs.end());
                }
                break;
            }
        }
    }

    out.num_records = records;
    out.num_ticks = tick + 1;
    const_cast<Circuit&>(c).detector_count = (uint32_t)out.detector_records.size();
    const_cast<Circuit&>(c).observable_count = any_observable ? max_observable + 1 : 0;
    return out;
}

std::string format_param(double p) {
    char buf[64];
    snprintf(buf, sizeof buf, "%.9g", p);
    return buf;
}

std::string emit_circuit(const Circuit& c) {
    std::ostringstream os;
    uint32_t derived = 0;
    for (const auto& ins : c.instructions) {
        if (ins.op == Op::DETECTOR || ins.op == Op::OBSERVABLE || ins.op == Op::TICK) continue;
        for (int32_t t : ins.targets) derived = std::max<uint32_t>(derived, t + 1);
    }
    if (c.qubit_count == 0 && c.instructions.empty() && c.qubit_coords.empty() &&
        c.noiseless_tick_ranges.empty())
        return "";
    if (c.qubit_count != derived) os << "#!qubits " << c.qubit_count << "\n";
    for (auto [lo, hi] : c.noiseless_tick_ranges) os << "#!noiseless_ticks " << lo << " " << hi << "\n";
    for (auto [i, q] : c.movement_marks) os << "#!movement " << i << " " << q << "\n";
    for (auto& [q, xyz] : c.qubit_coords) {
        os << "QUBIT_COORDS(" << format_param(xyz[0]) << "," << format_param(xyz[1]) << ","
           << format_param(xyz[2]) << ") " << q << "\n";
    }
    for (const auto& ins : c.instructions) {
        os << op_name(ins.op);
        if (!ins.params.empty()) {
            os << "(";
            for (size_t k = 0; k < ins.params.size(); k++) {
                if (k) os << ",";
                os << format_param(ins.params[k]);
            }
            os << ")";
        }
        if (ins.op == Op::DETECTOR || ins.op == Op::OBSERVABLE) {
            for (int32_t t : ins.targets) os << " rec[" << t << "]";
        } else {
            for (int32_t t : ins.targets) os << " " << t;
        }
        os << "\n";
    }
    return os.str();
}

namespace {

// Round parsed params through the canonical 9-digit text form so that
// programmatic circuits and re-parsed circuits compare equal.
double canonical_param(double p) {
    return std::stod(format_param(p));
}

}  // namespace

Circuit parse_circuit(const std::string& text) {
    Circuit c;
    bool explicit_qubits = false;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        line_no++;
        auto err = [&](const std::string& why) {
            fail("line " + std::to_string(line_no) + ": " + why);
        };
        // Strip comments; keep #! directives.
        size_t hash = line.find('#');
        std::string directive;
        if (hash != std::string::npos) {
            if (line.compare(hash, 2, "#!") == 0) directive = line.substr(hash + 2);
            line = line.substr(0, hash);
        }
        if (!directive.empty()) {
            std::istringstream ds(directive);
            std::string key;
            ds >> key;
            if (key == "qubits") {
                uint64_t n;
                if (!(ds >> n)) err("bad #!qubits directive");
                c.qubit_count = (uint32_t)n;
                explicit_qubits = true;
            } else if (key == "noiseless_ticks") {
                uint32_t lo, hi;
                if (!(ds >> lo >> hi)) err("bad #!noiseless_ticks directive");
                c.noiseless_tick_ranges.push_back({lo, hi});
            } else if (key == "movement") {
                uint32_t i, q;
                if (!(ds >> i >> q)) err("bad #!movement directive");
                c.movement_marks.push_back({i, q});
            }
            // Unknown directives are ignored.
        }
        // Tokenize.
        size_t pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos) continue;
        size_t name_end = line.find_first_of(" \t(", pos);
        std::string name = line.substr(pos, name_end == std::string::npos ? std::string::npos
                                                                          : name_end - pos);
        auto op = op_from_name(name);
        if (!op) err("unknown instruction '" + name + "'");

        std::vector<double> params;
        size_t rest_pos = name_end == std::string::npos ? line.size() : name_end;
        if (rest_pos < line.size() && line[rest_pos] == '(') {
            size_t close = line.find(')', rest_pos);
            if (close == std::string::npos) err("missing ')'");
            std::string inside = line.substr(rest_pos + 1, close - rest_pos - 1);
            std::istringstream ps(inside);
            std::string tok;
            while (std::getline(ps, tok, ',')) {
                try {
                    params.push_back(canonical_param(std::stod(tok)));
                } catch (...) {
                    err("bad param '" + tok + "'");
                }
            }
            rest_pos = close + 1;
        }

        std::vector<int32_t> targets;
        std::istringstream ts(line.substr(rest_pos));
        std::string tok;
        while (ts >> tok) {
            if (tok.rfind("rec[", 0) == 0) {
                if (tok.back() != ']') err("bad record reference '" + tok + "'");
                try {
                    targets.push_back((int32_t)std::stol(tok.substr(4, tok.size() - 5)));
                } catch (...) {
                    err("bad record reference '" + tok + "'");
                }
            } else {
                try {
                    targets.push_back((int32_t)std::stol(tok));
                } catch (...) {
                    err("bad target '" + tok + "'");
                }
            }
        }

        if (*op == Op::QUBIT_COORDS) {
            if (params.size() != 3 || targets.size() != 1 || targets[0] < 0)
                err("QUBIT_COORDS needs 3 params and 1 qubit");
            c.qubit_coords[(uint32_t)targets[0]] = {params[0], params[1], params[2]};
            continue;
        }
        c.instructions.push_back({*op, std::move(targets), std::move(params)});
    }

    if (!explicit_qubits) {
        uint32_t derived = 0;
        for (const auto& ins : c.instructions) {
            if (ins.op == Op::DETECTOR || ins.op == Op::OBSERVABLE || ins.op == Op::TICK) continue;
            for (int32_t t : ins.targets) derived = std::max<uint32_t>(derived, t + 1);
        }
        for (auto& [q, xyz] : c.qubit_coords) derived = std::max(derived, q + 1);
        c.qubit_count = derived;
    }
    validate_circuit(c);
    return c;
}

CircuitStats circuit_stats(const Circuit& c) {
    CircuitStats s;
    s.qubit_count = c.qubit_count;
    for (const auto& ins : c.instructions) {
        if (ins.op == Op::TICK) s.depth++;
        if (op_is_two_qubit(ins.op)) s.entangling_gate_count += ins.targets.size() / 2;
        if (op_is_measurement(ins.op)) s.measurement_count += ins.targets.size();
    }
    return s;
}

}  // namespace qloss
