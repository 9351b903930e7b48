#include "qloss/dem.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qloss {

namespace {

constexpr double kDropBelow = 1e-12;
constexpr double kHalf = 0.5;

struct Symptom {
    std::vector<uint32_t> dets;
    std::vector<uint32_t> obs;

    bool empty() const { return dets.empty() && obs.empty(); }
    void clear() {
        dets.clear();
        obs.clear();
    }
    void xor_with(const Symptom& o) {
        xor_sorted(dets, o.dets);
        xor_sorted(obs, o.obs);
    }
    bool operator<(const Symptom& o) const {
        if (dets != o.dets) return dets < o.dets;
        return obs < o.obs;
    }
    bool operator==(const Symptom& o) const = default;
};

std::string symptom_key(const std::vector<uint32_t>& dets, const std::vector<uint32_t>& obs) {
    std::string key;
    key.reserve((dets.size() + obs.size() + 1) * 4);
    auto put = [&](uint32_t v) { key.append(reinterpret_cast<const char*>(&v), 4); };
    for (uint32_t d : dets) put(d);
    put(UINT32_MAX);
    for (uint32_t o : obs) put(o);
    return key;
}

// GF(2) span with observable payload, keyed by leading detector id.
struct ZeroSpan {
    std::map<uint32_t, Symptom> basis;  // leading det -> vector

    void insert(Symptom v) {
        while (!v.dets.empty()) {
            uint32_t lead = v.dets[0];
            auto it = basis.find(lead);
            if (it == basis.end()) {
                basis.emplace(lead, std::move(v));
                return;
            }
            v.xor_with(it->second);
        }
    }
    // Reduces the detector part; returns the residual (payload accumulated in obs).
    Symptom reduce(Symptom v) const {
        size_t i = 0;
        while (i < v.dets.size()) {
            auto it = basis.find(v.dets[i]);
            if (it == basis.end()) {
                i++;
                continue;
            }
            v.xor_with(it->second);
        }
        return v;
    }
};

struct EdgeAccumulator {
    std::map<Symptom, std::vector<double>> probs;
    std::map<Symptom, Hyperedge> meta;

    void add(Symptom sym, double p, EdgeSource src, uint32_t lifecycle, uint32_t location) {
        if (p <= 0 || sym.empty()) return;
        auto& plist = probs[sym];
        bool is_half = std::abs(p - kHalf) <= 1e-12;
        bool have_half = false;
        if (is_half)
            for (double q : plist)
                if (std::abs(q - kHalf) <= 1e-12) have_half = true;
        if (!have_half) plist.push_back(is_half ? kHalf : p);
        auto [it, fresh] = meta.try_emplace(sym);
        Hyperedge& e = it->second;
        if (fresh) {
            e.dets = sym.dets;
            e.obs = sym.obs;
            e.source = src;
            e.lifecycle = lifecycle;
            e.location = location;
        } else if (src == EdgeSource::Supercheck) {
            e.source = EdgeSource::Supercheck;
        } else if (src == EdgeSource::Loss && e.source == EdgeSource::Pauli) {
            e.source = src;
            e.lifecycle = lifecycle;
            e.location = location;
        }
    }

    std::vector<Hyperedge> merged(std::vector<std::string>* diagnostics) {
        std::vector<Hyperedge> out;
        for (auto& [sym, ps] : probs) {
            double p = combine_probabilities(ps);
            if (p < kDropBelow) continue;
            Hyperedge e = meta[sym];
            if (p > kHalf + 1e-9 && diagnostics)
                diagnostics->push_back("edge probability above 0.5 clamped");
            e.p = std::min(p, kHalf);
            out.push_back(std::move(e));
        }
        return out;
    }
};

void canonical_sort(std::vector<Hyperedge>& edges) {
    std::sort(edges.begin(), edges.end(), [](const Hyperedge& a, const Hyperedge& b) {
        if (a.p != b.p) return a.p > b.p;
        if (a.dets != b.dets) return a.dets < b.dets;
        return a.obs < b.obs;
    });
}

}  // namespace

double combine_probabilities(const std::vector<double>& ps) {
    size_t n = ps.size();
    if (n == 0) return 0.0;
    if (n == 1) return ps[0];
    // XOR with a fair coin is exactly一half; keep superchecks pinned there.
    for (double p : ps)
        if (std::abs(p - kHalf) <= 1e-12) return kHalf;
    // sum_i p_i prod_{j!=i} (1-p_j)  +  sum_{i<j<k} p_i p_j p_k prod_{m not in ijk} (1-p_m)
    double first = 0.0;
    for (size_t i = 0; i < n; i++) {
        double term = ps[i];
        for (size_t j = 0; j < n; j++)
            if (j != i) term *= 1.0 - ps[j];
        first += term;
    }
    double third = 0.0;
    for (size_t i = 0; i < n; i++)
        for (size_t j = i + 1; j < n; j++)
            for (size_t k = j + 1; k < n; k++) {
                double term = ps[i] * ps[j] * ps[k];
                for (size_t m = 0; m < n; m++)
                    if (m != i && m != j && m != k) term *= 1.0 - ps[m];
                third += term;
            }
    return first + third;
}

double exact_xor_probability(const std::vector<double>& ps) {
    double odd = 0.0;
    for (double p : ps) odd = odd * (1.0 - p) + (1.0 - odd) * p;
    return odd;
}

namespace {

// Backward sensitivity pass: symptom of a Pauli inserted at each noise
// annotation, for the (possibly truncated) instruction stream.
struct SensitivityWalker {
    const Circuit& c;
    const CompiledCircuit& cc;
    std::vector<Symptom> rec_sym;  // per record: referencing detectors/observables
    std::vector<Symptom> sx, sz;   // per qubit

    SensitivityWalker(const Circuit& circuit, const CompiledCircuit& compiled)
        : c(circuit), cc(compiled) {
        rec_sym.resize(cc.num_records);
        for (uint32_t d = 0; d < cc.detector_records.size(); d++)
            for (uint32_t r : cc.detector_records[d]) rec_sym[r].dets.push_back(d);
        for (uint32_t o = 0; o < cc.observable_records.size(); o++)
            for (uint32_t r : cc.observable_records[o]) rec_sym[r].obs.push_back(o);
        for (auto& s : rec_sym) {
            std::sort(s.dets.begin(), s.dets.end());
            std::sort(s.obs.begin(), s.obs.end());
        }
        sx.resize(c.qubit_count);
        sz.resize(c.qubit_count);
    }

    // emit(instr_index) is called with the walker positioned at that
    // instruction, before its own transform is applied.
    template <typename EmitFn>
    void walk(EmitFn emit) {
        for (int64_t i = (int64_t)c.instructions.size() - 1; i >= 0; i--) {
            const Instruction& ins = c.instructions[i];
            emit((uint32_t)i);
            switch (ins.op) {
                case Op::H:
                    for (int32_t q : ins.targets) std::swap(sx[q], sz[q]);
                    break;
                case Op::S:
                case Op::S_DAG:
                    for (int32_t q : ins.targets) sx[q].xor_with(sz[q]);
                    break;
                case Op::CX:
                    for (size_t k = 0; k < ins.targets.size(); k += 2) {
                        uint32_t ctl = ins.targets[k], tgt = ins.targets[k + 1];
                        sx[ctl].xor_with(sx[tgt]);
                        sz[tgt].xor_with(sz[ctl]);
                    }
                    break;
                case Op::CZ:
                    for (size_t k = 0; k < ins.targets.size(); k += 2) {
                        uint32_t a = ins.targets[k], b = ins.targets[k + 1];
                        sx[a].xor_with(sz[b]);
                        sx[b].xor_with(sz[a]);
                    }
                    break;
                case Op::SWAP:
                    for (size_t k = 0; k < ins.targets.size(); k += 2) {
                        std::swap(sx[ins.targets[k]], sx[ins.targets[k + 1]]);
                        std::swap(sz[ins.targets[k]], sz[ins.targets[k + 1]]);
                    }
                    break;
                case Op::R:
                case Op::RX:
                    for (int32_t q : ins.targets) {
                        sx[q].clear();
                        sz[q].clear();
                    }
                    break;
                case Op::M:
                case Op::SSR_M: {
                    uint32_t rec = cc.record_offset[i];
                    for (size_t k = 0; k < ins.targets.size(); k++)
                        sx[ins.targets[k]].xor_with(rec_sym[rec + k]);
                    break;
                }
                case Op::MX: {
                    uint32_t rec = cc.record_offset[i];
                    for (size_t k = 0; k < ins.targets.size(); k++)
                        sz[ins.targets[k]].xor_with(rec_sym[rec + k]);
                    break;
                }
                case Op::RANDOM_M:
                    // Disconnected record; state errors cannot flip it.
                    break;
                default:
                    break;
            }
        }
    }
};

}  // namespace

DecodingHypergraph extract_dem(const Circuit& c, const CompiledCircuit& cc,
                               const std::vector<uint8_t>* lossless_reference) {
    DecodingHypergraph dem;
    dem.detector_count = (uint32_t)cc.detector_records.size();
    dem.observable_count = (uint32_t)cc.observable_records.size();

    // Gauge structure from the symbolic noiseless run.
    SymbolicRun run = run_symbolic(c, cc);
    std::vector<uint8_t> self_ref(run.records.size());
    for (size_t r = 0; r < run.records.size(); r++) self_ref[r] = run.records[r].constant;
    const std::vector<uint8_t>& ref = lossless_reference ? *lossless_reference : self_ref;
    if (ref.size() != run.records.size())
        throw std::runtime_error("extract_dem: reference record count mismatch");

    std::vector<Symptom> coin_sym(run.num_coins);
    Symptom offset;  // deterministic flips relative to the reference
    for (uint32_t d = 0; d < dem.detector_count; d++) {
        AffineBit acc;
        for (uint32_t r : cc.detector_records[d]) {
            acc.xor_with(run.records[r]);
            acc.constant ^= ref[r];
        }
        for (uint32_t k : acc.coins) coin_sym[k].dets.push_back(d);
        if (acc.constant) offset.dets.push_back(d);
    }
    for (uint32_t o = 0; o < dem.observable_count; o++) {
        AffineBit acc;
        for (uint32_t r : cc.observable_records[o]) {
            acc.xor_with(run.records[r]);
            acc.constant ^= ref[r];
        }
        for (uint32_t k : acc.coins) coin_sym[k].obs.push_back(o);
        if (acc.constant) offset.obs.push_back(o);
    }

    EdgeAccumulator acc;
    ZeroSpan gauge_span;
    for (uint32_t k = 0; k < run.num_coins; k++) {
        const Symptom& s = coin_sym[k];
        if (s.empty()) continue;
        if (s.dets.empty())
            dem.diagnostics.push_back("distance-0: coin flips only observables");
        acc.add(s, kHalf, EdgeSource::Supercheck, UINT32_MAX, UINT32_MAX);
        gauge_span.insert(s);
    }
    // A measurement whose outcome carries gauge randomness frees the XOR of
    // the detectors referencing it (the supercheck of that record), provided
    // that parity lies in the gauge span.
    {
        std::vector<Symptom> rec_refs(run.records.size());
        for (uint32_t d = 0; d < dem.detector_count; d++)
            for (uint32_t r : cc.detector_records[d]) rec_refs[r].dets.push_back(d);
        for (uint32_t o = 0; o < dem.observable_count; o++)
            for (uint32_t r : cc.observable_records[o]) rec_refs[r].obs.push_back(o);
        for (uint32_t r = 0; r < run.records.size(); r++) {
            if (run.records[r].is_constant()) continue;
            Symptom& s = rec_refs[r];
            std::sort(s.dets.begin(), s.dets.end());
            std::sort(s.obs.begin(), s.obs.end());
            if (s.empty()) continue;
            Symptom residual = gauge_span.reduce(s);
            if (residual.dets.empty() && residual.obs.empty())
                acc.add(s, kHalf, EdgeSource::Supercheck, UINT32_MAX, UINT32_MAX);
        }
    }
    if (!offset.empty()) {
        Symptom residual = gauge_span.reduce(offset);
        // An offset inside the gauge span is a relabeling of coin branches.
        if (!residual.dets.empty() || !residual.obs.empty()) {
            dem.diagnostics.push_back("deterministic flip outside gauge span");
            acc.add(residual, kHalf, EdgeSource::Supercheck, UINT32_MAX, UINT32_MAX);
        }
    }

    // Pauli mechanisms via one backward sensitivity sweep.
    SensitivityWalker walker(c, cc);
    walker.walk([&](uint32_t i) {
        const Instruction& ins = c.instructions[i];
        if (ins.op == Op::PAULI1) {
            for (size_t k = 0; k < ins.targets.size(); k++) {
                uint32_t q = ins.targets[k];
                double px = ins.params[0], py = ins.params[1], pz = ins.params[2];
                if (px > 0) acc.add(walker.sx[q], px, EdgeSource::Pauli, UINT32_MAX, UINT32_MAX);
                if (py > 0) {
                    Symptom y = walker.sx[q];
                    y.xor_with(walker.sz[q]);
                    acc.add(std::move(y), py, EdgeSource::Pauli, UINT32_MAX, UINT32_MAX);
                }
                if (pz > 0) acc.add(walker.sz[q], pz, EdgeSource::Pauli, UINT32_MAX, UINT32_MAX);
            }
        } else if (ins.op == Op::PAULI2) {
            for (size_t k = 0; k < ins.targets.size(); k += 2) {
                uint32_t a = ins.targets[k], b = ins.targets[k + 1];
                for (int t = 0; t < 15; t++) {
                    double p = ins.params[t];
                    if (p <= 0) continue;
                    int pa = (t + 1) / 4, pb = (t + 1) % 4;
                    Symptom s;
                    if (pa == 1 || pa == 2) s.xor_with(walker.sx[a]);
                    if (pa == 2 || pa == 3) s.xor_with(walker.sz[a]);
                    if (pb == 1 || pb == 2) s.xor_with(walker.sx[b]);
                    if (pb == 2 || pb == 3) s.xor_with(walker.sz[b]);
                    acc.add(std::move(s), p, EdgeSource::Pauli, UINT32_MAX, UINT32_MAX);
                }
            }
        }
    });

    for (auto& [sym, ps] : acc.probs) {
        if (sym.dets.empty() && !sym.obs.empty() && ps.front() != kHalf)
            dem.diagnostics.push_back("distance-0: undetectable observable flip");
    }
    dem.edges = acc.merged(&dem.diagnostics);
    canonical_sort(dem.edges);
    return dem;
}

DecodingHypergraph extract_dem(const Circuit& c) {
    CompiledCircuit cc = validate_circuit(c);
    return extract_dem(c, cc, nullptr);
}

std::string emit_dem(const DecodingHypergraph& dem) {
    std::ostringstream os;
    os << "# detectors=" << dem.detector_count << " observables=" << dem.observable_count << "\n";
    for (const Hyperedge& e : dem.edges) {
        os << "error(" << format_param(e.p) << ")";
        for (uint32_t d : e.dets) os << " D" << d;
        for (uint32_t o : e.obs) os << " L" << o;
        os << "\n";
    }
    return os.str();
}

DecodingHypergraph parse_dem(const std::string& text) {
    DecodingHypergraph dem;
    std::istringstream is(text);
    std::string line;
    bool have_counts = false;
    while (std::getline(is, line)) {
        if (line.rfind("# detectors=", 0) == 0) {
            sscanf(line.c_str(), "# detectors=%u observables=%u", &dem.detector_count,
                   &dem.observable_count);
            have_counts = true;
            continue;
        }
        size_t pos = line.find_first_not_of(" \t");
        if (pos == std::string::npos || line[pos] == '#') continue;
        if (line.compare(pos, 6, "error(") != 0)
            throw std::runtime_error("parse_dem: expected error(...) line");
        size_t close = line.find(')', pos);
        Hyperedge e;
        e.p = std::stod(line.substr(pos + 6, close - pos - 6));
        std::istringstream ts(line.substr(close + 1));
        std::string tok;
        while (ts >> tok) {
            if (tok[0] == 'D') e.dets.push_back((uint32_t)std::stoul(tok.substr(1)));
            else if (tok[0] == 'L') e.obs.push_back((uint32_t)std::stoul(tok.substr(1)));
            else throw std::runtime_error("parse_dem: bad target " + tok);
        }
        std::sort(e.dets.begin(), e.dets.end());
        std::sort(e.obs.begin(), e.obs.end());
        if (e.p == kHalf) e.source = EdgeSource::Supercheck;
        dem.edges.push_back(std::move(e));
    }
    if (!have_counts) {
        for (const auto& e : dem.edges) {
            for (uint32_t d : e.dets) dem.detector_count = std::max(dem.detector_count, d + 1);
            for (uint32_t o : e.obs) dem.observable_count = std::max(dem.observable_count, o + 1);
        }
    }
    return dem;
}

namespace {

// Delta of a truncated-circuit DEM against the canonical lossless DEM.
std::vector<Hyperedge> dem_delta(const DecodingHypergraph& trunc,
                                 const std::vector<std::pair<std::string, uint32_t>>& base_index,
                                 const DecodingHypergraph& base, uint32_t lifecycle,
                                 uint32_t location) {
    std::vector<Hyperedge> delta;
    for (const Hyperedge& e : trunc.edges) {
        std::string key = symptom_key(e.dets, e.obs);
        auto it = std::lower_bound(base_index.begin(), base_index.end(), key,
                                   [](const auto& a, const std::string& k) { return a.first < k; });
        if (it != base_index.end() && it->first == key &&
            std::abs(base.edges[it->second].p - e.p) <= 1e-12)
            continue;
        Hyperedge d = e;
        if (d.source == EdgeSource::Pauli) d.source = EdgeSource::Loss;
        d.lifecycle = lifecycle;
        d.location = location;
        delta.push_back(std::move(d));
    }
    return delta;
}

}  // namespace

LifecycleDemCache precompute_lifecycle_dems(const Circuit& c, uint32_t threads) {
    LifecycleDemCache cache;
    cache.circuit = c;
    cache.compiled = validate_circuit(cache.circuit);
    cache.compiled.circuit = nullptr;  // cache is relocatable; keep no back-pointer
    cache.lifecycles = extract_lifecycles(cache.circuit, cache.compiled);
    cache.reference = reference_bits(cache.circuit, cache.compiled);
    cache.pauli = extract_dem(cache.circuit, cache.compiled, &cache.reference);

    cache.pauli_index.reserve(cache.pauli.edges.size());
    for (uint32_t i = 0; i < cache.pauli.edges.size(); i++)
        cache.pauli_index.push_back(
            {symptom_key(cache.pauli.edges[i].dets, cache.pauli.edges[i].obs), i});
    std::sort(cache.pauli_index.begin(), cache.pauli_index.end());

    size_t n_lc = cache.lifecycles.lifecycles.size();
    cache.deltas.resize(n_lc);
    std::vector<std::pair<uint32_t, uint32_t>> jobs;
    for (uint32_t i = 0; i < n_lc; i++) {
        cache.deltas[i].resize(cache.lifecycles.lifecycles[i].locations.size());
        for (uint32_t j = 0; j < cache.lifecycles.lifecycles[i].locations.size(); j++)
            jobs.push_back({i, j});
    }

    auto work = [&](size_t lo, size_t hi) {
        for (size_t k = lo; k < hi; k++) {
            auto [i, j] = jobs[k];
            LossAssignment a{{cache.lifecycles.lifecycles[i].locations[j]}};
            Circuit trunc = truncate_for_loss(cache.circuit, cache.compiled, a);
            CompiledCircuit tcc = validate_circuit(trunc);
            DecodingHypergraph dem = extract_dem(trunc, tcc, &cache.reference);
            cache.deltas[i][j] = dem_delta(dem, cache.pauli_index, cache.pauli, i, j);
        }
    };
    threads = std::max<uint32_t>(1, threads);
    if (threads == 1 || jobs.size() < 2 * threads) {
        work(0, jobs.size());
    } else {
        std::vector<std::thread> pool;
        size_t chunk = (jobs.size() + threads - 1) / threads;
        for (uint32_t t = 0; t < threads; t++) {
            size_t lo = t * chunk, hi = std::min(jobs.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return cache;
}

HeraldPattern heralds_from_ssr(const LifecycleDemCache& cache, const uint8_t* ssr_row) {
    HeraldPattern h;
    for (uint32_t i = 0; i < cache.lifecycles.lifecycles.size(); i++) {
        const Lifecycle& lc = cache.lifecycles.lifecycles[i];
        for (uint32_t w = 0; w < lc.window_count; w++) {
            uint32_t s = lc.herald_ssr_of_window[w];
            if (s == UINT32_MAX) continue;
            if (ssr_row[s] == kSsrLost) {
                h.items.push_back({i, w});
                break;
            }
        }
    }
    return h;
}

namespace {

struct AssembleScratch {
    std::map<Symptom, std::vector<double>> add;
    std::map<Symptom, Hyperedge> meta;
    double floor = 0.0;

    void add_edge(const Hyperedge& e, double p) {
        if (p <= 0) return;
        Symptom sym{e.dets, e.obs};
        add[sym].push_back(p);
        meta.try_emplace(std::move(sym), e);
    }
    void add_mixture(const std::map<Symptom, std::pair<double, const Hyperedge*>>& mix) {
        for (const auto& [sym, pe] : mix) {
            if (pe.first <= 0) continue;
            double p = std::min(pe.first, kHalf);
            if (std::abs(p - kHalf) <= 1e-9) p = kHalf;
            add[sym].push_back(p);
            meta.try_emplace(sym, *pe.second);
        }
    }
};

AssembledDem finish_assembly(const LifecycleDemCache& cache, AssembleScratch& s) {
    AssembledDem out;
    out.base = &cache.pauli;
    for (auto& [sym, ps] : s.add) {
        std::string key = symptom_key(sym.dets, sym.obs);
        auto it = std::lower_bound(cache.pauli_index.begin(), cache.pauli_index.end(), key,
                                   [](const auto& a, const std::string& k) { return a.first < k; });
        if (it != cache.pauli_index.end() && it->first == key) {
            std::vector<double> all = ps;
            all.push_back(cache.pauli.edges[it->second].p);
            out.base_overrides.push_back({it->second, std::min(combine_probabilities(all), kHalf)});
        } else {
            double p = std::min(combine_probabilities(ps), kHalf);
            if (p < kDropBelow || p < s.floor) continue;
            Hyperedge e = s.meta[sym];
            e.p = p;
            out.extra.push_back(std::move(e));
        }
    }
    canonical_sort(out.extra);
    return out;
}

}  // namespace

AssembledDem assemble_delayed_erasure_view(const HeraldPattern& h, const LifecycleDemCache& cache,
                                           double omega, double floor) {
    AssembleScratch s;
    s.floor = floor;
    // Heralds whose detection window pins the loss to one location are known
    // exactly; their joint truncation is computed directly, which keeps the
    // cross-lifecycle correlations the independent sum would miss.
    LossAssignment known;
    for (const HeraldItem& item : h.items) {
        if (item.lifecycle >= cache.lifecycles.lifecycles.size())
            throw std::runtime_error("assemble: herald references unknown lifecycle");
        const Lifecycle& lc = cache.lifecycle(item.lifecycle);
        uint32_t count = 0, only = 0;
        for (uint32_t j = 0; j < lc.locations.size(); j++) {
            if (lc.window_of_location[j] == item.window) {
                count++;
                only = lc.locations[j];
            }
        }
        if (count == 1) {
            known.fired.push_back(only);
            continue;
        }
        std::vector<double> w = posterior_weights_window(lc, item.window);
        double wmax = 0.0;
        for (double x : w) wmax = std::max(wmax, x);
        // Posterior mixture over the window's loss locations.
        std::map<Symptom, std::pair<double, const Hyperedge*>> mix;
        for (uint32_t j = 0; j < lc.locations.size(); j++) {
            if (w[j] <= 0) continue;
            for (const Hyperedge& e : cache.deltas[item.lifecycle][j]) {
                if (wmax * e.p < floor) continue;  // cannot reach the floor
                auto [it, fresh] = mix.try_emplace(Symptom{e.dets, e.obs}, 0.0, &e);
                it->second.first += w[j] * e.p;
            }
        }
        s.add_mixture(mix);
    }
    if (known.fired.size() == 1) {
        // Single known loss: the cached delta is already exact.
        uint32_t id = known.fired[0];
        uint32_t i = cache.lifecycles.lifecycle_of_location[id];
        const Lifecycle& lc = cache.lifecycle(i);
        for (uint32_t j = 0; j < lc.locations.size(); j++)
            if (lc.locations[j] == id)
                for (const Hyperedge& e : cache.deltas[i][j]) s.add_edge(e, e.p);
    } else if (!known.fired.empty()) {
        std::sort(known.fired.begin(), known.fired.end());
        Circuit trunc = truncate_for_loss(cache.circuit, cache.compiled, known);
        CompiledCircuit tcc = validate_circuit(trunc);
        DecodingHypergraph dem = extract_dem(trunc, tcc, &cache.reference);
        for (Hyperedge& e : dem_delta(dem, cache.pauli_index, cache.pauli, UINT32_MAX, UINT32_MAX))
            s.add_edge(e, e.p);
    }
    if (omega > 0 && !h.items.empty()) {
        // Joint truncation at the earliest location of every heralded window.
        LossAssignment first;
        for (const HeraldItem& item : h.items) {
            const Lifecycle& lc = cache.lifecycle(item.lifecycle);
            for (uint32_t j = 0; j < lc.locations.size(); j++) {
                if (lc.window_of_location[j] == item.window) {
                    first.fired.push_back(lc.locations[j]);
                    break;
                }
            }
        }
        std::sort(first.fired.begin(), first.fired.end());
        Circuit trunc = truncate_for_loss(cache.circuit, cache.compiled, first);
        CompiledCircuit tcc = validate_circuit(trunc);
        DecodingHypergraph dem = extract_dem(trunc, tcc, &cache.reference);
        for (Hyperedge& e :
             dem_delta(dem, cache.pauli_index, cache.pauli, UINT32_MAX, UINT32_MAX)) {
            s.add_edge(e, omega * e.p);
        }
    }
    return finish_assembly(cache, s);
}

AssembledDem assemble_exact_loss_view(const LossAssignment& a, const LifecycleDemCache& cache) {
    AssembleScratch s;
    if (a.fired.size() == 1) {
        uint32_t id = a.fired[0];
        uint32_t i = cache.lifecycles.lifecycle_of_location[id];
        if (i != UINT32_MAX) {
            const Lifecycle& lc = cache.lifecycle(i);
            for (uint32_t j = 0; j < lc.locations.size(); j++)
                if (lc.locations[j] == id)
                    for (const Hyperedge& e : cache.deltas[i][j]) s.add_edge(e, e.p);
        }
    } else if (!a.fired.empty()) {
        // Joint truncation: exact cross-lifecycle structure.
        Circuit trunc = truncate_for_loss(cache.circuit, cache.compiled, a);
        CompiledCircuit tcc = validate_circuit(trunc);
        DecodingHypergraph dem = extract_dem(trunc, tcc, &cache.reference);
        for (Hyperedge& e : dem_delta(dem, cache.pauli_index, cache.pauli, UINT32_MAX, UINT32_MAX))
            s.add_edge(e, e.p);
    }
    return finish_assembly(cache, s);
}

DecodingHypergraph AssembledDem::materialize() const {
    DecodingHypergraph out;
    out.detector_count = base->detector_count;
    out.observable_count = base->observable_count;
    out.edges = base->edges;
    for (auto [idx, p] : base_overrides) out.edges[idx].p = p;
    out.edges.insert(out.edges.end(), extra.begin(), extra.end());
    std::erase_if(out.edges, [](const Hyperedge& e) { return e.p < kDropBelow; });
    canonical_sort(out.edges);
    return out;
}

DecodingHypergraph assemble_delayed_erasure_dem(const HeraldPattern& h,
                                                const LifecycleDemCache& cache, double omega) {
    return assemble_delayed_erasure_view(h, cache, omega).materialize();
}

}  // namespace qloss
