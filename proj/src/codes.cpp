#include "qloss/codes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>

#include "qloss/rng.hpp"
#include "qloss/tableau.hpp"

namespace qloss {

namespace {

struct Plaquette {
    bool is_x = false;
    int a = 0, b = 0;                    // center (2a, 2b)
    std::array<int32_t, 4> step_data{};  // data position per schedule step, -1 if none
    int last_step = -1;                  // last step with a data neighbor
    std::vector<int32_t> support;        // data positions
};

// Rotated surface code layout: data at (2i+1, 2j+1), checks on the even grid.
struct Layout {
    uint32_t d = 3;
    std::vector<Plaquette> plaquettes;

    int32_t data_pos(int i, int j) const {
        if (i < 0 || j < 0 || i >= (int)d || j >= (int)d) return -1;
        return j * d + i;
    }
    uint32_t num_data() const { return d * d; }
    uint32_t num_positions() const { return d * d + (uint32_t)plaquettes.size(); }
    int32_t anc_pos(uint32_t p) const { return d * d + p; }

    // Offsets per step: each step's X and Z offsets share a diagonal (at most
    // one gate per qubit per step); the relative order controls where
    // mid-round ancilla (hook) errors land.
    static int kXOff[4][2];
    static int kZOff[4][2];

    explicit Layout(uint32_t distance, bool reversed_order = false) : d(distance) {
        if (d < 3 || d % 2 == 0) throw std::invalid_argument("distance must be odd and >= 3");
        for (int a = 0; a <= (int)d; a++) {
            for (int b = 0; b <= (int)d; b++) {
                bool is_z = (a + b) % 2 == 1;
                bool interior = a >= 1 && a <= (int)d - 1 && b >= 1 && b <= (int)d - 1;
                bool left_right = (a == 0 || a == (int)d) && b >= 1 && b <= (int)d - 1;
                bool top_bottom = (b == 0 || b == (int)d) && a >= 1 && a <= (int)d - 1;
                if (!(interior || (left_right && is_z) || (top_bottom && !is_z))) continue;
                Plaquette p;
                p.is_x = !is_z;
                p.a = a;
                p.b = b;
                for (int s = 0; s < 4; s++) {
                    int step = reversed_order ? 3 - s : s;
                    const int* off = p.is_x ? kXOff[step] : kZOff[step];
                    int x = 2 * a + off[0], y = 2 * b + off[1];
                    int32_t dp = data_pos((x - 1) / 2, (y - 1) / 2);
                    p.step_data[s] = dp;
                    if (dp >= 0) {
                        p.last_step = s;
                        p.support.push_back(dp);
                    }
                }
                std::sort(p.support.begin(), p.support.end());
                plaquettes.push_back(std::move(p));
            }
        }
    }
};

int Layout::kXOff[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
int Layout::kZOff[4][2] = {{1, 1}, {-1, 1}, {1, -1}, {-1, -1}};

namespace {
struct SchedulePick {
    SchedulePick() {
        const char* v = getenv("QLOSS_SCHED");
        if (!v || strlen(v) < 9) return;
        static const int base[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
        for (int s = 0; s < 4; s++) {
            int ix = v[s] - '0', iz = v[5 + s] - '0';
            Layout::kXOff[s][0] = base[ix][0];
            Layout::kXOff[s][1] = base[ix][1];
            Layout::kZOff[s][0] = base[iz][0];
            Layout::kZOff[s][1] = base[iz][1];
        }
    }
};
static SchedulePick g_sched_pick;
}  // namespace

struct DetectorDef {
    std::vector<uint32_t> records;
};

struct FfEvent {
    uint32_t after_instr;    // Pauli applies after this instruction
    uint32_t virtual_instr;  // folded-away CX sits just before this instruction
    uint32_t anc;            // atom taking over the data role
    uint32_t partner;        // measured partner atom
    bool is_x;               // X correction (else Z); Z-plaquette folds a CX(partner->anc)
    bool partner_conj;       // partner carries the XZZX H-conjugation
    uint32_t record;         // conditioning measurement record
};

// Shared generation context: one growing circuit plus detector/observable
// definitions in absolute record ids, resolved to back-references at the end.
struct GenContext {
    Circuit c;
    uint32_t records = 0;
    uint32_t ticks = 0;
    std::vector<DetectorDef> detectors;
    std::vector<std::vector<uint32_t>> observables;
    std::vector<FfEvent> ffs;

    void tick() {
        c.append(Op::TICK, {});
        ticks++;
    }
    uint32_t measure(Op op, uint32_t q, std::vector<double> params = {}) {
        c.append(op, {(int32_t)q}, params);
        return records++;
    }
    void add_detector(std::vector<uint32_t> recs) { detectors.push_back({std::move(recs)}); }
    void add_observable(uint32_t idx, const std::vector<uint32_t>& recs) {
        if (observables.size() <= idx) observables.resize(idx + 1);
        auto& o = observables[idx];
        o.insert(o.end(), recs.begin(), recs.end());
    }
    void add_ff(bool is_x, uint32_t anc, uint32_t partner, bool partner_conj,
                uint32_t virtual_instr, uint32_t record) {
        ffs.push_back({(uint32_t)c.instructions.size() - 1, virtual_instr, anc, partner, is_x,
                       partner_conj, record});
    }

    // Emits a CX(ctl -> tgt), compiled to H.CZ.H unless native, with optional
    // extra H conjugation on one qubit (XZZX variant).
    void cx(uint32_t ctl, uint32_t tgt, bool native, uint32_t h_wrap = UINT32_MAX) {
        std::vector<uint32_t> pre;
        if (h_wrap != UINT32_MAX) pre.push_back(h_wrap);
        if (!native) {
            // H(tgt) CZ H(tgt); an H pair on the same qubit cancels.
            if (h_wrap == tgt) pre.clear();
            else pre.push_back(tgt);
            for (uint32_t q : pre) c.append(Op::H, {(int32_t)q});
            c.append(Op::CZ, {(int32_t)ctl, (int32_t)tgt});
            for (uint32_t q : pre) c.append(Op::H, {(int32_t)q});
        } else {
            for (uint32_t q : pre) c.append(Op::H, {(int32_t)q});
            c.append(Op::CX, {(int32_t)ctl, (int32_t)tgt});
            for (uint32_t q : pre) c.append(Op::H, {(int32_t)q});
        }
    }

    // Propagates feedforward Pauli frames and folds the conditioning records
    // into every detector/observable they flip, then emits the definitions.
    void finalize() {
        if (!ffs.empty()) {
            CompiledCircuit cc = validate_circuit(c);
            // Folded-away gates grouped by position: the feedforward frames
            // must propagate through the true gate sequence.
            std::vector<std::vector<const FfEvent*>> virtual_at(c.instructions.size() + 1);
            for (const FfEvent& ff : ffs)
                virtual_at[std::min<size_t>(ff.virtual_instr, c.instructions.size())].push_back(&ff);
            for (const FfEvent& ff : ffs) {
                std::vector<uint8_t> fx(c.qubit_count, 0), fz(c.qubit_count, 0);
                fx[ff.anc] = ff.is_x;
                fz[ff.anc] = !ff.is_x;
                std::vector<uint8_t> flips(records, 0);
                uint32_t rec = 0;
                for (uint32_t i = 0; i < c.instructions.size(); i++) {
                    if (i > ff.after_instr) {
                        for (const FfEvent* v : virtual_at[i]) {
                            // Z-plaquette fold: CX(partner -> anc); X: CX(anc -> partner).
                            // A conjugated partner H-wraps the folded gate.
                            uint32_t c2 = v->is_x ? v->partner : v->anc;
                            uint32_t t2 = v->is_x ? v->anc : v->partner;
                            if (!v->partner_conj) {
                                fx[t2] ^= fx[c2];
                                fz[c2] ^= fz[t2];
                            } else if (v->is_x) {
                                // H(p) CX(p->a) H(p)
                                fx[v->anc] ^= fz[v->partner];
                                fx[v->partner] ^= fz[v->anc];
                            } else {
                                // H(p) CX(a->p) H(p) = CZ(a,p)
                                fz[v->anc] ^= fx[v->partner];
                                fz[v->partner] ^= fx[v->anc];
                            }
                        }
                    }
                    const Instruction& ins = c.instructions[i];
                    if (op_is_measurement(ins.op)) {
                        for (size_t k = 0; k < ins.targets.size(); k++) {
                            uint32_t q = ins.targets[k];
                            if (i > ff.after_instr)
                                flips[rec] = ins.op == Op::MX ? fz[q] : fx[q];
                            rec++;
                        }
                    }
                    if (i <= ff.after_instr) continue;
                    switch (ins.op) {
                        case Op::H:
                            for (int32_t q : ins.targets) std::swap(fx[q], fz[q]);
                            break;
                        case Op::S:
                        case Op::S_DAG:
                            for (int32_t q : ins.targets) fz[q] ^= fx[q];
                            break;
                        case Op::CX:
                            for (size_t k = 0; k < ins.targets.size(); k += 2) {
                                fx[ins.targets[k + 1]] ^= fx[ins.targets[k]];
                                fz[ins.targets[k]] ^= fz[ins.targets[k + 1]];
                            }
                            break;
                        case Op::CZ:
                            for (size_t k = 0; k < ins.targets.size(); k += 2) {
                                fz[ins.targets[k]] ^= fx[ins.targets[k + 1]];
                                fz[ins.targets[k + 1]] ^= fx[ins.targets[k]];
                            }
                            break;
                        case Op::SWAP:
                            for (size_t k = 0; k < ins.targets.size(); k += 2) {
                                std::swap(fx[ins.targets[k]], fx[ins.targets[k + 1]]);
                                std::swap(fz[ins.targets[k]], fz[ins.targets[k + 1]]);
                            }
                            break;
                        case Op::R:
                        case Op::RX:
                            for (int32_t q : ins.targets) fx[q] = fz[q] = 0;
                            break;
                        default:
                            break;
                    }
                }
                auto correct = [&](std::vector<uint32_t>& recs) {
                    int flipped = 0;
                    for (uint32_t r : recs) flipped ^= flips[r];
                    if (!flipped) return;
                    auto it = std::find(recs.begin(), recs.end(), ff.record);
                    if (it != recs.end()) recs.erase(it);
                    else recs.push_back(ff.record);
                };
                for (auto& det : detectors) correct(det.records);
                for (auto& obs : observables) correct(obs);
            }
        }
        for (const auto& det : detectors) {
            std::vector<int32_t> refs;
            for (uint32_t r : det.records) refs.push_back((int32_t)r - (int32_t)records);
            c.append(Op::DETECTOR, refs);
        }
        for (uint32_t o = 0; o < observables.size(); o++) {
            std::vector<int32_t> refs;
            for (uint32_t r : observables[o]) refs.push_back((int32_t)r - (int32_t)records);
            c.append(Op::OBSERVABLE, refs, {(double)o});
        }
        validate_circuit(c);
    }
};

// One surface-code patch with movable atoms (SWAP SE) and per-plaquette
// measurement history.
struct MemoryBuilder {
    GenContext* ctx;
    SEConfig cfg;
    Layout layout_a, layout_b;  // standard and reversed gate orders
    uint32_t qubit_base;
    std::vector<uint32_t> atom_at;  // position -> atom (qubit id)
    // Per-plaquette parity chain: records whose XOR equals the plaquette's
    // current value. Transversal gates merge chains across patches.
    std::vector<std::vector<uint32_t>> chain;
    std::vector<uint8_t> chain_valid;  // value pinned by initialization or a measurement
    std::vector<uint8_t> conj;         // data position -> XZZX H-conjugation flag
    uint32_t swap_rounds_done = 0;
    uint32_t rounds_done = 0;

    MemoryBuilder(GenContext* context, const SEConfig& config, uint32_t base)
        : ctx(context), cfg(config), layout_a(config.distance, false),
          layout_b(config.distance, true), qubit_base(base) {
        atom_at.resize(layout_a.num_positions());
        for (uint32_t p = 0; p < atom_at.size(); p++) atom_at[p] = qubit_base + p;
        chain.assign(layout_a.plaquettes.size(), {});
        chain_valid.assign(layout_a.plaquettes.size(), 0);
        for (uint32_t p = 0; p < layout_a.plaquettes.size(); p++)
            chain_valid[p] = layout_a.plaquettes[p].is_x == (cfg.basis == 'X');
        conj.assign(layout_a.num_data(), 0);
        if (cfg.variant == CodeVariant::XZZX) {
            for (uint32_t j = 0; j < cfg.distance; j++)
                for (uint32_t i = 0; i < cfg.distance; i++)
                    conj[layout_a.data_pos(i, j)] = (i + j) % 2;
        }
        for (uint32_t j = 0; j < cfg.distance; j++)
            for (uint32_t i = 0; i < cfg.distance; i++)
                ctx->c.qubit_coords[qubit_base + layout_a.data_pos(i, j)] = {
                    (double)(2 * i + 1), (double)(2 * j + 1), 0.0};
        for (uint32_t p = 0; p < layout_a.plaquettes.size(); p++)
            ctx->c.qubit_coords[qubit_base + layout_a.anc_pos(p)] = {
                (double)(2 * layout_a.plaquettes[p].a), (double)(2 * layout_a.plaquettes[p].b),
                1.0};
    }

    uint32_t num_qubits() const { return layout_a.num_positions(); }

    bool data_x_basis(uint32_t pos) const { return (cfg.basis == 'X') != (bool)conj[pos]; }

    void init_data() {
        for (uint32_t pos = 0; pos < layout_a.num_data(); pos++)
            ctx->c.append(data_x_basis(pos) ? Op::RX : Op::R, {(int32_t)atom_at[pos]});
    }

    // Measurement basis of a plaquette's compiled-swap partner.
    bool partner_x_basis(const Plaquette& p, uint32_t pos) const {
        return p.is_x != (bool)conj[pos];
    }

    // Emits one SE round for a set of patches in lockstep.
    struct RoundOptions {
        bool swap = false;
        bool detect_each_layer = false;
        bool replace_each_layer = false;
        bool check_end_of_round = false;
        bool replace_end_of_round = false;
    };

    void round_init(bool) {
        const Layout& L = layout_a;
        for (uint32_t p = 0; p < L.plaquettes.size(); p++) {
            uint32_t a = atom_at[L.anc_pos(p)];
            ctx->c.append(L.plaquettes[p].is_x ? Op::RX : Op::R, {(int32_t)a});
        }
    }

    // Partner data position of plaquette p this swap round, or -1.
    int32_t partner_of(const Layout& L, uint32_t p,
                       const std::vector<std::pair<int, uint32_t>>& last_gate) const {
        const Plaquette& pl = L.plaquettes[p];
        if (pl.last_step < 0) return -1;
        int32_t q = pl.step_data[pl.last_step];
        if (last_gate[q] == std::make_pair(pl.last_step, p)) return q;
        return -1;
    }

    std::vector<std::pair<int, uint32_t>> last_gates(const Layout& L) const {
        std::vector<std::pair<int, uint32_t>> last(L.num_data(), {-1, 0});
        for (uint32_t p = 0; p < L.plaquettes.size(); p++)
            for (int s = 0; s < 4; s++) {
                int32_t q = L.plaquettes[p].step_data[s];
                if (q >= 0 && s >= last[q].first) last[q] = {s, p};
            }
        return last;
    }

    void round_step(int s, bool swap_round) {
        const Layout& L = swap_round && swap_rounds_done % 2 == 1 ? layout_b : layout_a;
        auto last = swap_round ? last_gates(L) : std::vector<std::pair<int, uint32_t>>{};
        for (uint32_t p = 0; p < L.plaquettes.size(); p++) {
            const Plaquette& pl = L.plaquettes[p];
            int32_t dpos = pl.step_data[s];
            if (dpos < 0) continue;
            uint32_t a = atom_at[L.anc_pos(p)];
            uint32_t dq = atom_at[dpos];
            uint32_t wrap = conj[dpos] ? dq : UINT32_MAX;
            bool partner_slot = swap_round && partner_of(L, p, last) == dpos;
            bool forward = pl.is_x != partner_slot;  // X-plaq parity: anc is control
            if (forward) ctx->cx(a, dq, cfg.native_cx, wrap);
            else ctx->cx(dq, a, cfg.native_cx, wrap);
        }
    }

    void round_measure(bool swap_round) {
        const Layout& L = swap_round && swap_rounds_done % 2 == 1 ? layout_b : layout_a;
        auto last = swap_round ? last_gates(L) : std::vector<std::pair<int, uint32_t>>{};
        for (uint32_t p = 0; p < L.plaquettes.size(); p++) {
            const Plaquette& pl = L.plaquettes[p];
            uint32_t a_atom = atom_at[L.anc_pos(p)];
            uint32_t rec;
            int32_t partner = swap_round ? partner_of(L, p, last) : -1;
            if (partner >= 0) {
                uint32_t d_atom = atom_at[partner];
                bool xb = partner_x_basis(pl, partner);
                uint32_t vpos = (uint32_t)ctx->c.instructions.size();
                if (xb) ctx->c.append(Op::H, {(int32_t)d_atom});
                rec = ctx->measure(Op::SSR_M, d_atom);
                // The folded-away CX becomes a record-conditioned Pauli on the
                // atom that takes over the data role.
                ctx->add_ff(!pl.is_x, a_atom, d_atom, conj[partner], vpos, rec);
                // A conjugated position stores its state H-rotated; rotate
                // the incoming atom into that frame.
                if (conj[partner]) ctx->c.append(Op::H, {(int32_t)a_atom});
                atom_at[partner] = a_atom;
                atom_at[L.anc_pos(p)] = d_atom;
                uint32_t mark = (uint32_t)ctx->c.instructions.size();
                ctx->c.movement_marks.push_back({mark, a_atom});
                ctx->c.movement_marks.push_back({mark, d_atom});
            } else {
                if (pl.is_x) ctx->c.append(Op::H, {(int32_t)a_atom});
                rec = ctx->measure(Op::SSR_M, a_atom);
            }
            if (chain_valid[p]) {
                std::vector<uint32_t> det = chain[p];
                det.push_back(rec);
                ctx->add_detector(std::move(det));
            }
            chain[p] = {rec};
            chain_valid[p] = 1;
        }
        if (swap_round) swap_rounds_done++;
        rounds_done++;
    }

    void erasure_check(bool replace) {
        std::vector<int32_t> targets;
        for (uint32_t pos = 0; pos < atom_at.size(); pos++)
            targets.push_back((int32_t)atom_at[pos]);
        ctx->c.append(Op::ERASURE_CHECK, targets, {replace ? 1.0 : 0.0});
    }

    void final_readout() {
        std::vector<uint32_t> data_rec(layout_a.num_data());
        for (uint32_t pos = 0; pos < layout_a.num_data(); pos++) {
            uint32_t atom = atom_at[pos];
            if (data_x_basis(pos)) ctx->c.append(Op::H, {(int32_t)atom});
            data_rec[pos] = ctx->measure(Op::SSR_M, atom);
        }
        for (uint32_t p = 0; p < layout_a.plaquettes.size(); p++) {
            const Plaquette& pl = layout_a.plaquettes[p];
            if (pl.is_x != (cfg.basis == 'X') || !chain_valid[p]) continue;
            std::vector<uint32_t> recs = chain[p];
            for (int32_t pos : pl.support) recs.push_back(data_rec[pos]);
            ctx->add_detector(recs);
        }
        std::vector<uint32_t> obs;
        for (uint32_t i = 0; i < cfg.distance; i++) {
            uint32_t pos = cfg.basis == 'X' ? layout_a.data_pos(0, i) : layout_a.data_pos(i, 0);
            obs.push_back(data_rec[pos]);
        }
        ctx->add_observable(0, obs);
    }

    // X_L / Z_L / Y_L as physical Pauli strings on the current data atoms.
    void logical_pauli(char which) {
        auto string_on = [&](char op, bool column) {
            for (uint32_t i = 0; i < cfg.distance; i++) {
                uint32_t pos = column ? layout_a.data_pos(0, i) : layout_a.data_pos(i, 0);
                char eff = op;
                if (conj[pos]) eff = op == 'X' ? 'Z' : 'X';
                ctx->c.append(eff == 'X' ? Op::X : Op::Z, {(int32_t)atom_at[pos]});
            }
        };
        if (which == 'X' || which == 'Y') string_on('X', true);
        if (which == 'Z' || which == 'Y') string_on('Z', false);
    }

    // Transversal CX between patches: gates plus stabilizer-chain merging
    // (Z-plaquette values copy control->target, X-plaquettes target->control).
    static void transversal_cx(MemoryBuilder& ctrl, MemoryBuilder& tgt) {
        GenContext* ctx = ctrl.ctx;
        for (uint32_t pos = 0; pos < ctrl.layout_a.num_data(); pos++)
            ctx->cx(ctrl.atom_at[pos], tgt.atom_at[pos], ctrl.cfg.native_cx,
                    ctrl.conj[pos] ? ctrl.atom_at[pos] : UINT32_MAX);
        for (uint32_t p = 0; p < ctrl.layout_a.plaquettes.size(); p++) {
            if (ctrl.layout_a.plaquettes[p].is_x) {
                xor_sorted(ctrl.chain[p], tgt.chain[p]);
                ctrl.chain_valid[p] = ctrl.chain_valid[p] && tgt.chain_valid[p];
            } else {
                xor_sorted(tgt.chain[p], ctrl.chain[p]);
                tgt.chain_valid[p] = tgt.chain_valid[p] && ctrl.chain_valid[p];
            }
        }
    }

    // Measures every data atom out in the X basis (logical teleportation
    // source side); emits the X-plaquette reconstruction detectors and
    // returns the per-position records.
    std::vector<uint32_t> measure_out_x() {
        std::vector<uint32_t> recs(layout_a.num_data());
        for (uint32_t pos = 0; pos < layout_a.num_data(); pos++) {
            uint32_t q = atom_at[pos];
            if (!conj[pos]) ctx->c.append(Op::H, {(int32_t)q});
            recs[pos] = ctx->measure(Op::SSR_M, q);
        }
        for (uint32_t p = 0; p < layout_a.plaquettes.size(); p++) {
            const Plaquette& pl = layout_a.plaquettes[p];
            if (!pl.is_x || !chain_valid[p]) continue;
            std::vector<uint32_t> det = chain[p];
            for (int32_t pos : pl.support) det.push_back(recs[pos]);
            ctx->add_detector(det);
        }
        return recs;
    }
};

void emit_rounds(std::vector<MemoryBuilder*> patches, uint32_t count,
                 const SEConfig& cfg, bool swap_eligible, GenContext& ctx,
                 bool noiseless, uint32_t* round_counter) {
    bool detect_layer = cfg.method == SEMethod::DirectConversion && cfg.detect_period == 0.25;
    bool replace_layer = detect_layer && cfg.replace_period == 0.25;
    uint32_t detect_rounds =
        cfg.method == SEMethod::DirectConversion && cfg.detect_period >= 1.0
            ? (uint32_t)cfg.detect_period
            : 0;
    uint32_t replace_rounds = cfg.method == SEMethod::DirectConversion && cfg.replace_period >= 1.0
                                  ? (uint32_t)cfg.replace_period
                                  : 0;
    (void)0;
    for (uint32_t k = 0; k < count; k++) {
        uint32_t r = (*round_counter)++;
        bool swap_round = swap_eligible && cfg.method == SEMethod::Swap &&
                          (r + 1) % cfg.swap_period == 0;
        uint32_t start_tick = ctx.ticks;
        ctx.tick();
        for (auto* p : patches) p->round_init(swap_round);
        ctx.tick();
        for (int s = 0; s < 4; s++) {
            for (auto* p : patches) p->round_step(s, swap_round);
            ctx.tick();
            if (detect_layer)
                for (auto* p : patches) p->erasure_check(replace_layer);
        }
        for (auto* p : patches) p->round_measure(swap_round);
        bool round_replace = replace_rounds && (r + 1) % replace_rounds == 0;
        bool round_detect = detect_rounds && (r + 1) % detect_rounds == 0;
        if (round_replace || round_detect)
            for (auto* p : patches) p->erasure_check(round_replace);
        if (noiseless)
            ctx.c.noiseless_tick_ranges.push_back({start_tick, ctx.ticks});
    }
}

Circuit gen_surface_memory(const SEConfig& cfg) {
    if (cfg.method == SEMethod::DirectConversion) {
        if (cfg.detect_period != 0.25 && cfg.detect_period != std::floor(cfg.detect_period))
            throw std::invalid_argument("detect_period must be 0.25 or a positive integer");
        if (cfg.replace_period < cfg.detect_period)
            throw std::invalid_argument("replace_period must be >= detect_period");
        if (cfg.replace_period != 0.25 && cfg.replace_period != std::floor(cfg.replace_period))
            throw std::invalid_argument("replace_period must be 0.25 or a positive integer");
    }
    if (cfg.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    GenContext ctx;
    MemoryBuilder patch(&ctx, cfg, 0);
    ctx.c.qubit_count = patch.num_qubits();

    uint32_t round_counter = 0;
    uint32_t t0 = ctx.ticks;
    patch.init_data();
    if (cfg.noiseless_first) {
        ctx.c.noiseless_tick_ranges.push_back({t0, ctx.ticks});
        emit_rounds({&patch}, 1, cfg, true, ctx, true, &round_counter);
        if (cfg.rounds > 1)
            emit_rounds({&patch}, cfg.rounds - 1, cfg, true, ctx, false, &round_counter);
    } else {
        emit_rounds({&patch}, cfg.rounds, cfg, true, ctx, false, &round_counter);
    }
    uint32_t t1 = ctx.ticks;
    ctx.tick();
    patch.final_readout();
    if (cfg.noiseless_last) ctx.c.noiseless_tick_ranges.push_back({t1, ctx.ticks});
    ctx.finalize();
    return ctx.c;
}

}  // namespace

Circuit gen_conventional(const SEConfig& cfg) {
    SEConfig c = cfg;
    c.method = SEMethod::Conventional;
    return gen_surface_memory(c);
}

Circuit gen_swap(const SEConfig& cfg) {
    SEConfig c = cfg;
    c.method = SEMethod::Swap;
    if (c.swap_period < 1) throw std::invalid_argument("swap_period must be >= 1");
    return gen_surface_memory(c);
}

Circuit gen_direct_conversion(const SEConfig& cfg) {
    SEConfig c = cfg;
    c.method = SEMethod::DirectConversion;
    return gen_surface_memory(c);
}

namespace {

// Foliated (cluster-state) teleportation SE. Sheets of data qubits chained by
// CZ teleportation; each sheet carries the check ancillas of one geometry
// (Z-plaquettes on even sheets, X-plaquettes on odd ones); everything is
// measured in the X basis via SSR.
Circuit gen_teleportation_impl(const SEConfig& cfg) {
    if (cfg.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    uint32_t d = cfg.distance;
    Layout layout(d);
    uint32_t L = 2 * cfg.rounds;  // sheets
    std::vector<uint32_t> z_plaqs, x_plaqs;
    for (uint32_t p = 0; p < layout.plaquettes.size(); p++)
        (layout.plaquettes[p].is_x ? x_plaqs : z_plaqs).push_back(p);

    GenContext ctx;
    uint32_t next_qubit = 0;
    // Qubit ids per sheet: d*d data + the sheet's ancilla group.
    std::vector<uint32_t> sheet_data_base(L), sheet_anc_base(L);
    std::vector<const std::vector<uint32_t>*> sheet_group(L);
    for (uint32_t s = 0; s < L; s++) {
        sheet_data_base[s] = next_qubit;
        next_qubit += d * d;
        sheet_anc_base[s] = next_qubit;
        sheet_group[s] = s % 2 == 0 ? &z_plaqs : &x_plaqs;
        next_qubit += (uint32_t)sheet_group[s]->size();
        for (uint32_t j = 0; j < d; j++)
            for (uint32_t i = 0; i < d; i++)
                ctx.c.qubit_coords[sheet_data_base[s] + layout.data_pos(i, j)] = {
                    (double)(2 * i + 1), (double)(2 * j + 1), (double)s};
        for (uint32_t k = 0; k < sheet_group[s]->size(); k++) {
            const Plaquette& pl = layout.plaquettes[(*sheet_group[s])[k]];
            ctx.c.qubit_coords[sheet_anc_base[s] + k] = {(double)(2 * pl.a), (double)(2 * pl.b),
                                                         (double)s};
        }
    }
    ctx.c.qubit_count = next_qubit;

    auto data_q = [&](uint32_t s, int32_t pos) { return sheet_data_base[s] + pos; };

    // Measurement records.
    std::vector<std::vector<uint32_t>> chain_rec(L);  // per sheet, per data pos (X-basis)
    std::vector<std::vector<uint32_t>> anc_rec(L);    // per sheet, per group index

    // Sheet 0 data encodes the logical state (|0..0> for memory Z).
    uint32_t t_first = ctx.ticks;
    for (uint32_t pos = 0; pos < d * d; pos++)
        ctx.c.append(Op::R, {(int32_t)data_q(0, pos)});
    if (cfg.noiseless_first) ctx.c.noiseless_tick_ranges.push_back({t_first, ctx.ticks});

    for (uint32_t s = 0; s < L; s++) {
        uint32_t layer_start = ctx.ticks;
        ctx.tick();
        // Fresh |+> qubits: this sheet's ancillas and the next data sheet.
        std::vector<int32_t> fresh;
        for (uint32_t k = 0; k < sheet_group[s]->size(); k++)
            fresh.push_back((int32_t)(sheet_anc_base[s] + k));
        if (s + 1 < L)
            for (uint32_t pos = 0; pos < d * d; pos++)
                fresh.push_back((int32_t)data_q(s + 1, pos));
        ctx.c.append(Op::RX, fresh);
        ctx.tick();
        // Four check-entangling steps.
        for (int step = 0; step < 4; step++) {
            for (uint32_t k = 0; k < sheet_group[s]->size(); k++) {
                const Plaquette& pl = layout.plaquettes[(*sheet_group[s])[k]];
                int32_t dpos = pl.step_data[step];
                if (dpos < 0) continue;
                ctx.c.append(Op::CZ,
                             {(int32_t)(sheet_anc_base[s] + k), (int32_t)data_q(s, dpos)});
            }
            ctx.tick();
        }
        // Teleport chain to the next sheet.
        if (s + 1 < L) {
            for (uint32_t pos = 0; pos < d * d; pos++)
                ctx.c.append(Op::CZ, {(int32_t)data_q(s, pos), (int32_t)data_q(s + 1, pos)});
            ctx.tick();
        }
        // Measure the sheet: ancillas and (except the last sheet) the data.
        anc_rec[s].resize(sheet_group[s]->size());
        for (uint32_t k = 0; k < sheet_group[s]->size(); k++) {
            uint32_t q = sheet_anc_base[s] + k;
            ctx.c.append(Op::H, {(int32_t)q});
            anc_rec[s][k] = ctx.measure(Op::SSR_M, q);
        }
        chain_rec[s].resize(d * d);
        if (s + 1 < L) {
            for (uint32_t pos = 0; pos < d * d; pos++) {
                uint32_t q = data_q(s, pos);
                ctx.c.append(Op::H, {(int32_t)q});
                chain_rec[s][pos] = ctx.measure(Op::SSR_M, q);
            }
        }
        bool noiseless_layer = (cfg.noiseless_first && s == 0) ||
                               (cfg.noiseless_last && s + 1 == L);
        if (noiseless_layer) ctx.c.noiseless_tick_ranges.push_back({layer_start, ctx.ticks});
    }
    // Final transversal X-basis readout of the last sheet.
    uint32_t t_last = ctx.ticks;
    ctx.tick();
    for (uint32_t pos = 0; pos < d * d; pos++) {
        uint32_t q = data_q(L - 1, pos);
        ctx.c.append(Op::H, {(int32_t)q});
        chain_rec[L - 1][pos] = ctx.measure(Op::SSR_M, q);
    }
    if (cfg.noiseless_last) ctx.c.noiseless_tick_ranges.push_back({t_last, ctx.ticks});

    // Detectors.
    auto group_index = [&](uint32_t s, uint32_t p) -> int32_t {
        const auto& g = *sheet_group[s];
        for (uint32_t k = 0; k < g.size(); k++)
            if (g[k] == p) return (int32_t)k;
        return -1;
    };
    // Sheet-0 Z-checks are deterministic on |0..0>.
    for (uint32_t k = 0; k < z_plaqs.size(); k++) ctx.add_detector({anc_rec[0][k]});
    // Same-geometry pairs two sheets apart, joined by the chain outcomes
    // of the sheet in between.
    for (uint32_t s = 0; s + 2 < L; s++) {
        for (uint32_t k = 0; k < sheet_group[s]->size(); k++) {
            uint32_t p = (*sheet_group[s])[k];
            int32_t k2 = group_index(s + 2, p);
            std::vector<uint32_t> recs = {anc_rec[s][k], anc_rec[s + 2][k2]};
            for (int32_t pos : layout.plaquettes[p].support)
                recs.push_back(chain_rec[s + 1][pos]);
            ctx.add_detector(recs);
        }
    }
    // Closure against the final X-basis readout: the geometry of sheet L-2.
    for (uint32_t k = 0; k < sheet_group[L - 2]->size(); k++) {
        uint32_t p = (*sheet_group[L - 2])[k];
        std::vector<uint32_t> recs = {anc_rec[L - 2][k]};
        for (int32_t pos : layout.plaquettes[p].support)
            recs.push_back(chain_rec[L - 1][pos]);
        ctx.add_detector(recs);
    }
    // Logical Z: the geometric row, teleported to the last sheet, with the
    // odd-sheet chain byproducts along the way.
    std::vector<uint32_t> obs;
    for (uint32_t i = 0; i < d; i++) {
        int32_t pos = layout.data_pos(i, 0);
        obs.push_back(chain_rec[L - 1][pos]);
        for (uint32_t s = 1; s + 2 < L; s += 2) obs.push_back(chain_rec[s][pos]);
    }
    ctx.add_observable(0, obs);
    ctx.finalize();
    return ctx.c;
}

}  // namespace

Circuit gen_teleportation(const SEConfig& cfg) { return gen_teleportation_impl(cfg); }

Circuit gen_se(const SEConfig& cfg) {
    switch (cfg.method) {
        case SEMethod::Conventional: return gen_conventional(cfg);
        case SEMethod::Swap: return gen_swap(cfg);
        case SEMethod::Teleportation: return gen_teleportation(cfg);
        case SEMethod::DirectConversion: return gen_direct_conversion(cfg);
    }
    throw std::invalid_argument("unknown SE method");
}

Circuit gen_random_clifford(uint32_t num_logical, uint32_t layers, double n_r,
                            const SEConfig& cfg, uint64_t seed) {
    if (num_logical < 1) throw std::invalid_argument("need at least one logical qubit");
    if (n_r <= 0) throw std::invalid_argument("n_r must be positive");
    Rng rng(seed, 0xC11FF0D);
    GenContext ctx;
    std::vector<std::unique_ptr<MemoryBuilder>> patches;
    uint32_t base = 0;
    for (uint32_t k = 0; k < num_logical; k++) {
        patches.push_back(std::make_unique<MemoryBuilder>(&ctx, cfg, base));
        base += patches.back()->num_qubits();
    }
    ctx.c.qubit_count = base;
    std::vector<MemoryBuilder*> all;
    for (auto& p : patches) all.push_back(p.get());

    uint32_t round_counter = 0;
    // Noiseless preparation: init + one projecting SE round.
    uint32_t t0 = ctx.ticks;
    for (auto* p : all) p->init_data();
    ctx.c.noiseless_tick_ranges.push_back({t0, ctx.ticks});
    emit_rounds(all, 1, cfg, false, ctx, true, &round_counter);

    uint32_t rounds_between = n_r >= 1.0 ? (uint32_t)n_r : 1;
    uint32_t layers_between = n_r >= 1.0 ? 1 : (uint32_t)std::lround(1.0 / n_r);

    for (uint32_t layer = 1; layer <= layers; layer++) {
        // Random single-qubit logical gates.
        for (auto* p : all) {
            const char gates[3] = {'X', 'Y', 'Z'};
            p->logical_pauli(gates[rng.next_below(3)]);
        }
        // Random disjoint logical CX pairs in random order.
        std::vector<uint32_t> order(num_logical);
        for (uint32_t i = 0; i < num_logical; i++) order[i] = i;
        for (uint32_t i = num_logical; i > 1; i--)
            std::swap(order[i - 1], order[rng.next_below(i)]);
        ctx.tick();
        for (uint32_t i = 0; i + 1 < num_logical; i += 2)
            MemoryBuilder::transversal_cx(*patches[order[i]], *patches[order[i + 1]]);
        ctx.tick();
        bool last_layer = layer == layers;
        if (layer % layers_between == 0 || last_layer) {
            uint32_t n = rounds_between;
            if (last_layer) {
                // Final stabilizer measurements are noiseless.
                if (n > 1) emit_rounds(all, n - 1, cfg, true, ctx, false, &round_counter);
                emit_rounds(all, 1, cfg, true, ctx, true, &round_counter);
            } else {
                emit_rounds(all, n, cfg, true, ctx, false, &round_counter);
            }
        } else if (last_layer) {
            emit_rounds(all, 1, cfg, true, ctx, true, &round_counter);
        }
    }
    uint32_t t1 = ctx.ticks;
    ctx.tick();
    for (auto* p : all) p->final_readout();
    ctx.c.noiseless_tick_ranges.push_back({t1, ctx.ticks});
    // One observable per logical qubit.
    ctx.finalize();
    return ctx.c;
}

Circuit gen_teleported_algorithm(uint32_t layers, const SEConfig& cfg, uint64_t seed,
                                 bool erasure_channel) {
    Rng rng(seed, 0x7E1E);
    GenContext ctx;
    SEConfig block_cfg = cfg;
    block_cfg.method = SEMethod::Conventional;
    block_cfg.basis = 'Z';

    uint32_t d = cfg.distance;
    bool noiseless_all = layers == 0;
    uint32_t next_base = 0;

    auto new_block = [&] {
        auto b = std::make_unique<MemoryBuilder>(&ctx, block_cfg, next_base);
        next_base += b->num_qubits();
        ctx.c.qubit_count = next_base;
        return b;
    };
    auto check_block = [&](MemoryBuilder* b) {
        if (erasure_channel) b->erasure_check(true);
    };
    // One SE round preparing a fresh |0_L> block.
    auto prep_block = [&](MemoryBuilder* b, bool noisy) {
        uint32_t t0 = ctx.ticks;
        b->init_data();
        ctx.tick();
        b->round_init(false);
        ctx.tick();
        for (int s = 0; s < 4; s++) {
            b->round_step(s, false);
            ctx.tick();
            check_block(b);
        }
        b->round_measure(false);
        if (!noisy) ctx.c.noiseless_tick_ranges.push_back({t0, ctx.ticks});
    };

    auto blockA = new_block();
    prep_block(blockA.get(), !noiseless_all);

    for (uint32_t layer = 0; layer < layers; layer++) {
        auto blockB = new_block();
        prep_block(blockB.get(), true);
        blockB->logical_pauli(rng.next_bool() ? 'X' : 'Z');
        ctx.tick();
        MemoryBuilder::transversal_cx(*blockA, *blockB);
        ctx.tick();
        check_block(blockA.get());
        check_block(blockB.get());
        // Measuring A out teleports the logical state onto B; the Z^m
        // byproduct commutes with the final Z readout.
        blockA->measure_out_x();
        blockA = std::move(blockB);
    }
    (void)d;

    // Final transversal Z readout of the live block.
    uint32_t t1 = ctx.ticks;
    ctx.tick();
    blockA->final_readout();
    ctx.c.noiseless_tick_ranges.push_back({t1, ctx.ticks});
    ctx.finalize();
    return ctx.c;
}

}  // namespace qloss
