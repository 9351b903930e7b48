#include "qloss/lifecycle.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qloss {

namespace {

struct OpenSpan {
    uint32_t start = 0;
    std::vector<uint32_t> locations;
    std::vector<double> priors;
    std::vector<uint32_t> window_of_location;
    std::vector<uint32_t> herald_ssrs;  // ssr record ids of detection points so far
    std::set<uint32_t> partners;
    uint32_t current_window = 0;
};

}  // namespace

LifecycleSet extract_lifecycles(const Circuit& c, const CompiledCircuit& cc) {
    LifecycleSet out;
    out.lifecycle_of_location.assign(cc.loss_locations.size(), UINT32_MAX);
    out.lifecycle_of_ssr.assign(cc.ssr_records.size(), UINT32_MAX);

    // Cluster-style circuit: no qubit is measured more than once.
    std::vector<uint32_t> meas_per_qubit(c.qubit_count, 0);
    for (uint32_t r = 0; r < cc.num_records; r++) meas_per_qubit[cc.record_qubit[r]]++;
    bool cluster = true;
    for (uint32_t q = 0; q < c.qubit_count; q++)
        if (meas_per_qubit[q] > 1) { cluster = false; break; }

    std::vector<OpenSpan> open(c.qubit_count);

    // Whole-circuit distinct gate partners per qubit (bulk classification of
    // single-location lifecycles, e.g. the per-gate erasure channel).
    std::vector<std::set<uint32_t>> global_partners(c.qubit_count);
    for (const auto& ins : c.instructions) {
        if (!op_is_two_qubit(ins.op)) continue;
        for (size_t k = 0; k < ins.targets.size(); k += 2) {
            global_partners[ins.targets[k]].insert(ins.targets[k + 1]);
            global_partners[ins.targets[k + 1]].insert(ins.targets[k]);
        }
    }

    // Location ids grouped by instruction for the walk.
    std::vector<std::vector<uint32_t>> locs_at(c.instructions.size());
    for (uint32_t id = 0; id < cc.loss_locations.size(); id++)
        locs_at[cc.loss_locations[id].instr_index].push_back(id);
    std::vector<std::vector<uint32_t>> ssrs_at(c.instructions.size());
    for (uint32_t s = 0; s < cc.ssr_records.size(); s++)
        ssrs_at[cc.ssr_records[s].instr_index].push_back(s);

    auto close_span = [&](uint32_t q, uint32_t end_instr, uint32_t next_start) {
        OpenSpan& span = open[q];
        if (!span.locations.empty()) {
            Lifecycle lc;
            lc.qubit = q;
            lc.start_instr = span.start;
            lc.end_instr = end_instr;
            lc.locations = span.locations;
            lc.priors = span.priors;
            lc.window_of_location = span.window_of_location;
            lc.window_count = span.current_window + 1;
            lc.herald_ssr_of_window.assign(lc.window_count, UINT32_MAX);
            for (uint32_t w = 0; w < span.herald_ssrs.size() && w < lc.window_count; w++)
                lc.herald_ssr_of_window[w] = span.herald_ssrs[w];
            size_t n = lc.length();
            bool four_partners = span.partners.size() >= 4;
            lc.bulk = (n >= 4 && n % 4 == 0 && four_partners) ||
                      (n == 1 && global_partners[q].size() >= 4);
            lc.role = cluster ? QubitRole::Cluster
                              : (n > 4 ? QubitRole::Data : QubitRole::Measure);
            uint32_t lc_id = (uint32_t)out.lifecycles.size();
            for (uint32_t id : lc.locations) out.lifecycle_of_location[id] = lc_id;
            out.lifecycles.push_back(std::move(lc));
            span = OpenSpan{};
            span.start = next_start;
            return lc_id;
        }
        span = OpenSpan{};
        span.start = next_start;
        return UINT32_MAX;
    };

    for (uint32_t i = 0; i < c.instructions.size(); i++) {
        const Instruction& ins = c.instructions[i];
        for (uint32_t id : locs_at[i]) {
            const LossLocation& loc = cc.loss_locations[id];
            OpenSpan& span = open[loc.qubit];
            span.locations.push_back(id);
            span.priors.push_back(loc.prior);
            span.window_of_location.push_back(span.current_window);
            if (loc.partner != loc.qubit) span.partners.insert(loc.partner);
        }
        if (op_is_two_qubit(ins.op)) {
            for (size_t k = 0; k < ins.targets.size(); k += 2) {
                uint32_t a = ins.targets[k], b = ins.targets[k + 1];
                open[a].partners.insert(b);
                open[b].partners.insert(a);
            }
        }
        if (ins.op == Op::SSR_M || ins.op == Op::ERASURE_CHECK) {
            bool replaces = ins.op == Op::SSR_M ||
                            (!ins.params.empty() && ins.params[0] != 0);
            for (uint32_t s : ssrs_at[i]) {
                uint32_t q = cc.ssr_records[s].qubit;
                OpenSpan& span = open[q];
                span.herald_ssrs.push_back(s);
                if (replaces) {
                    uint32_t lc_id = close_span(q, i, i + 1);
                    if (lc_id != UINT32_MAX) {
                        // All detection points inside the span map to it.
                        const Lifecycle& lc = out.lifecycles[lc_id];
                        for (uint32_t w = 0; w < lc.window_count; w++)
                            if (lc.herald_ssr_of_window[w] != UINT32_MAX)
                                out.lifecycle_of_ssr[lc.herald_ssr_of_window[w]] = lc_id;
                    }
                } else {
                    // Detect-only checkpoint: next window.
                    if (!span.locations.empty() || span.current_window > 0 ||
                        !span.herald_ssrs.empty())
                        span.current_window++;
                }
            }
        }
    }
    // Open spans at the end of the circuit (never heralded).
    for (uint32_t q = 0; q < c.qubit_count; q++) {
        if (!open[q].locations.empty()) close_span(q, UINT32_MAX, UINT32_MAX);
    }
    return out;
}

std::vector<double> posterior_weights(const Lifecycle& lc) {
    if (lc.locations.empty())
        throw std::invalid_argument("posterior_weights: empty location list");
    std::vector<double> w(lc.priors.size());
    double survive = 1.0;
    double total = 0.0;
    for (size_t j = 0; j < lc.priors.size(); j++) {
        w[j] = lc.priors[j] * survive;
        survive *= 1.0 - lc.priors[j];
        total += w[j];
    }
    if (total <= 0) {
        // Degenerate (all-zero priors): uniform.
        for (double& x : w) x = 1.0 / w.size();
        return w;
    }
    for (double& x : w) x /= total;
    return w;
}

std::vector<double> posterior_weights_window(const Lifecycle& lc, uint32_t window) {
    std::vector<double> w(lc.priors.size(), 0.0);
    double survive = 1.0;
    double total = 0.0;
    for (size_t j = 0; j < lc.priors.size(); j++) {
        if (lc.window_of_location[j] == window) {
            w[j] = lc.priors[j] * survive;
            total += w[j];
        }
        survive *= 1.0 - lc.priors[j];
    }
    if (total <= 0) {
        uint32_t n = 0;
        for (size_t j = 0; j < w.size(); j++)
            if (lc.window_of_location[j] == window) n++;
        if (n == 0) throw std::invalid_argument("posterior_weights_window: empty window");
        for (size_t j = 0; j < w.size(); j++)
            if (lc.window_of_location[j] == window) w[j] = 1.0 / n;
        return w;
    }
    for (double& x : w) x /= total;
    return w;
}

namespace {

void accumulate(RoleMetrics& m, uint64_t n) {
    m.avg = (m.avg * m.count + n) / (m.count + 1);
    m.max = std::max(m.max, n);
    m.count++;
}

}  // namespace

LifecycleMetrics lifecycle_metrics(const LifecycleSet& set) {
    LifecycleMetrics out;
    for (const Lifecycle& lc : set.lifecycles) {
        uint64_t n = lc.length();
        accumulate(out.overall, n);
        if (lc.bulk) accumulate(out.bulk_overall, n);
        RoleMetrics* role = nullptr;
        RoleMetrics* bulk_role = nullptr;
        switch (lc.role) {
            case QubitRole::Data: role = &out.data; bulk_role = &out.bulk_data; break;
            case QubitRole::Measure: role = &out.measure; bulk_role = &out.bulk_measure; break;
            case QubitRole::Cluster: role = &out.cluster; bulk_role = &out.bulk_cluster; break;
        }
        accumulate(*role, n);
        if (lc.bulk) accumulate(*bulk_role, n);
    }
    return out;
}

LifecycleMetrics lifecycle_metrics(const Circuit& c, const CompiledCircuit& cc) {
    return lifecycle_metrics(extract_lifecycles(c, cc));
}

std::string metrics_csv(const LifecycleMetrics& m) {
    std::ostringstream os;
    os << "role,avg,max,count\n";
    auto row = [&](const char* name, const RoleMetrics& r) {
        os << name << "," << r.avg << "," << r.max << "," << r.count << "\n";
    };
    row("data", m.data);
    row("measure", m.measure);
    row("cluster", m.cluster);
    row("overall", m.overall);
    row("bulk_data", m.bulk_data);
    row("bulk_measure", m.bulk_measure);
    row("bulk_cluster", m.bulk_cluster);
    row("bulk_overall", m.bulk_overall);
    return os.str();
}

}  // namespace qloss
