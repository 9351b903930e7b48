#include "qloss/decode.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <thread>

namespace qloss {

namespace {

constexpr double kZeroWeightEps = 1e-9;
constexpr double kWeightTol = 1e-9;

double edge_weight(double p) {
    p = std::min(std::max(p, 1e-15), 0.5);
    return std::log((1.0 - p) / p);
}

// A weighted edge in quotient coordinates (zero-weight span eliminated).
struct QEdge {
    uint32_t index;               // canonical index (tie-breaking)
    double w;
    std::vector<uint32_t> dets;   // reduced detector ids, sorted
    uint64_t obs = 0;             // folded observable parity mask (<=64 observables)
    uint8_t gap_bit = 0;          // folded constraint coordinate for gap solving
};

struct GfBasis {
    // leading id -> (detvec, obs payload)
    std::map<uint32_t, std::pair<std::vector<uint32_t>, uint64_t>> rows;

    void insert(std::vector<uint32_t> v, uint64_t obs) {
        while (!v.empty()) {
            uint32_t lead = v[0];
            auto it = rows.find(lead);
            if (it == rows.end()) {
                rows.emplace(lead, std::make_pair(std::move(v), obs));
                return;
            }
            xor_sorted(v, it->second.first);
            obs ^= it->second.second;
        }
    }
    // Reduce v; xor payload of used rows into obs.
    void reduce(std::vector<uint32_t>& v, uint64_t& obs) const {
        size_t i = 0;
        std::vector<uint32_t> out;
        while (i < v.size()) {
            auto it = rows.find(v[i]);
            if (it == rows.end()) { i++; continue; }
            std::vector<uint32_t> rest(v.begin() + i, v.end());
            xor_sorted(rest, it->second.first);
            obs ^= it->second.second;
            v.resize(i);
            v.insert(v.end(), rest.begin(), rest.end());
        }
    }
};

struct Component {
    std::vector<uint32_t> edges;      // indices into the QEdge list
    std::vector<uint32_t> syndrome;   // active reduced detector ids
};

struct SearchState {
    const std::vector<QEdge>* edges;
    // per reduced detector: incident edge list and cheapest cover ratio
    std::map<uint32_t, std::vector<uint32_t>> incident;
    std::map<uint32_t, double> min_ratio;
    uint64_t nodes = 0;
    uint64_t budget = 0;
    bool exhausted = false;

    double best_w = 0.0;
    bool have_best = false;
    std::vector<uint32_t> best_set;
    uint64_t best_obs = 0;

    std::vector<uint32_t> chosen;
    std::vector<uint8_t> decided;

    double lower_bound(const std::vector<uint32_t>& active) const {
        double lb = 0.0;
        for (uint32_t d : active) {
            auto it = min_ratio.find(d);
            lb += it == min_ratio.end() ? 1e30 : it->second;
        }
        return lb;
    }

    // Cheap feasible solution to seed the bound: repeatedly cover an active
    // bit with its cheapest unused edge.
    void greedy_seed(std::vector<uint32_t> active) {
        std::vector<uint8_t> used(edges->size(), 0);
        std::vector<uint32_t> picks;
        double w = 0.0;
        uint64_t obs = 0;
        size_t guard = 4 * edges->size() + 16;
        while (!active.empty() && guard--) {
            uint32_t d = active[0];
            auto it = incident.find(d);
            if (it == incident.end()) return;
            uint32_t pick = UINT32_MAX;
            for (uint32_t ei : it->second) {
                if (!used[ei]) { pick = ei; break; }
            }
            if (pick == UINT32_MAX) return;
            used[pick] = 1;
            picks.push_back(pick);
            const QEdge& e = (*edges)[pick];
            w += e.w;
            obs ^= e.obs;
            xor_sorted(active, e.dets);
        }
        if (!active.empty()) return;
        std::sort(picks.begin(), picks.end());
        have_best = true;
        best_w = w;
        best_set = std::move(picks);
        best_obs = obs;
    }

    void dfs(std::vector<uint32_t>& active, double w, uint64_t obs) {
        if (++nodes > budget) {
            exhausted = true;
            return;
        }
        if (have_best && w + lower_bound(active) > best_w + kWeightTol) return;
        if (active.empty()) {
            std::vector<uint32_t> sorted = chosen;
            std::sort(sorted.begin(), sorted.end());
            if (!have_best || w < best_w - kWeightTol ||
                (w < best_w + kWeightTol && sorted < best_set)) {
                have_best = true;
                best_w = w;
                best_set = std::move(sorted);
                best_obs = obs;
            }
            return;
        }
        // Fail-first: branch on the active bit with the fewest candidates.
        uint32_t d = active[0];
        size_t best_cnt = SIZE_MAX;
        for (uint32_t a : active) {
            auto ia = incident.find(a);
            size_t cnt = ia == incident.end() ? 0 : ia->second.size();
            if (cnt < best_cnt) {
                best_cnt = cnt;
                d = a;
            }
        }
        auto it = incident.find(d);
        if (it == incident.end()) return;  // infeasible branch
        // Snapshot of the currently undecided candidates covering d. Any
        // completion must pick one of them first (in this order); candidates
        // skipped at this level stay excluded for the rest of the subtree.
        std::vector<uint32_t> cands;
        for (uint32_t ei : it->second)
            if (!decided[ei]) cands.push_back(ei);
        for (uint32_t ei : cands) {
            if (exhausted) break;
            const QEdge& e = (*edges)[ei];
            if (have_best && w + e.w > best_w + kWeightTol) continue;
            decided[ei] = 1;
            chosen.push_back(ei);
            std::vector<uint32_t> next = active;
            xor_sorted(next, e.dets);
            dfs(next, w + e.w, obs ^ e.obs);
            chosen.pop_back();
        }
        for (uint32_t ei : cands) decided[ei] = 0;
    }
};

struct QuotientProblem {
    std::vector<QEdge> edges;
    std::vector<uint32_t> syndrome;  // reduced active detectors
    uint64_t base_obs = 0;           // folded observable parity of the zero completion
    uint32_t dropped = 0;
    bool feasible = true;
};

QuotientProblem build_quotient(const DemEdgeView& view, const std::vector<uint8_t>& syndrome,
                               bool fallback, bool with_gap_coordinate) {
    GfBasis zero_span;
    std::vector<QEdge> weighted;
    uint32_t index = 0;
    view.for_each([&](const Hyperedge& e, double p) {
        uint32_t my_index = index++;
        if (p <= 0) return;
        uint64_t obs = 0;
        for (uint32_t o : e.obs)
            if (o < 64) obs |= 1ull << o;
        double w = edge_weight(p);
        if (w <= kZeroWeightEps) {
            zero_span.insert(e.dets, obs);
        } else {
            QEdge q;
            q.index = my_index;
            q.w = w;
            q.dets = e.dets;
            q.obs = obs;
            weighted.push_back(std::move(q));
        }
    });

    QuotientProblem out;
    std::vector<uint32_t> active;
    for (uint32_t d = 0; d < syndrome.size(); d++)
        if (syndrome[d]) active.push_back(d);
    uint64_t obs0 = 0;
    zero_span.reduce(active, obs0);
    out.base_obs = obs0;
    out.syndrome = active;

    for (QEdge& q : weighted) {
        uint64_t obs = q.obs;
        zero_span.reduce(q.dets, obs);
        q.obs = obs;
        if (q.dets.empty()) continue;  // pure-weight no-op in the quotient
        out.edges.push_back(std::move(q));
    }
    (void)fallback;
    (void)with_gap_coordinate;
    return out;
}

Correction solve_quotient(QuotientProblem& qp, uint32_t observable_count, const MleOptions& opts,
                          const uint64_t* obs_constraint_mask, bool constraint_parity) {
    // Optional parity constraint on one observable: append a pseudo-detector.
    const uint32_t kConstraintDet = UINT32_MAX - 1;
    if (obs_constraint_mask) {
        for (QEdge& e : qp.edges)
            if (e.obs & *obs_constraint_mask) e.dets.push_back(kConstraintDet);
        bool base_parity = (qp.base_obs & *obs_constraint_mask) != 0;
        if (constraint_parity != base_parity) qp.syndrome.push_back(kConstraintDet);
    }
    std::sort(qp.syndrome.begin(), qp.syndrome.end());

    Correction corr;
    corr.obs_flip.assign(observable_count, 0);
    uint64_t obs_acc = qp.base_obs;
    double total_w = 0.0;

    std::map<uint32_t, std::vector<uint32_t>> incident;  // reduced det -> edges
    for (uint32_t i = 0; i < qp.edges.size(); i++)
        for (uint32_t d : qp.edges[i].dets) incident[d].push_back(i);

    // Split the active syndrome into clusters. Whole-graph components when
    // they fit under the cap (globally exact); otherwise clusters of active
    // bits within two weighted hops of each other, each solved exactly.
    std::map<uint32_t, uint32_t> comp_of_det;  // full-graph component id
    {
        std::vector<uint32_t> parent(qp.edges.size());
        for (uint32_t i = 0; i < parent.size(); i++) parent[i] = i;
        std::function<uint32_t(uint32_t)> find = [&](uint32_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        std::map<uint32_t, uint32_t> owner;
        for (uint32_t i = 0; i < qp.edges.size(); i++)
            for (uint32_t d : qp.edges[i].dets) {
                auto [it, fresh] = owner.try_emplace(d, i);
                if (!fresh) parent[find(i)] = find(it->second);
            }
        for (auto& [d, e] : owner) comp_of_det[d] = find(e);
    }
    std::map<uint32_t, uint64_t> comp_size;
    for (uint32_t i = 0; i < qp.edges.size(); i++) {
        std::set<uint32_t> roots;
        for (uint32_t d : qp.edges[i].dets) roots.insert(comp_of_det[d]);
        for (uint32_t r : roots) comp_size[r]++;
    }

    // Active clusters.
    std::vector<uint32_t> active = qp.syndrome;
    std::vector<std::vector<uint32_t>> clusters;
    {
        std::map<uint32_t, uint32_t> cluster_of;
        std::vector<uint32_t> parent(active.size());
        for (uint32_t i = 0; i < parent.size(); i++) parent[i] = i;
        std::function<uint32_t(uint32_t)> find = [&](uint32_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (uint32_t i = 0; i < active.size(); i++) cluster_of[active[i]] = i;
        // Join actives within two hops: shared edge, or edges sharing a det.
        std::map<uint32_t, std::vector<uint32_t>> det_edges;
        for (uint32_t i = 0; i < qp.edges.size(); i++) {
            int first_active = -1;
            for (uint32_t d : qp.edges[i].dets) {
                auto it = cluster_of.find(d);
                if (it == cluster_of.end()) continue;
                if (first_active < 0) first_active = (int)it->second;
                else parent[find(first_active)] = find(it->second);
            }
            for (uint32_t d : qp.edges[i].dets) det_edges[d].push_back(i);
        }
        std::map<uint32_t, int> det_first_cluster;
        for (auto& [d, edges_here] : det_edges) {
            int first = -1;
            for (uint32_t e : edges_here) {
                for (uint32_t d2 : qp.edges[e].dets) {
                    auto it = cluster_of.find(d2);
                    if (it == cluster_of.end()) continue;
                    if (first < 0) first = (int)it->second;
                    else parent[find(first)] = find(it->second);
                }
            }
        }
        std::map<uint32_t, std::vector<uint32_t>> grouped;
        for (uint32_t i = 0; i < active.size(); i++) grouped[find(i)].push_back(active[i]);
        for (auto& [root, bits] : grouped) clusters.push_back(bits);
    }

    // Group the active clusters by the full-graph component they live in.
    // Small components are solved jointly (globally exact); oversized ones are
    // split into their active clusters, each solved exactly on its own.
    std::map<uint32_t, std::vector<std::vector<uint32_t>>> by_comp;
    for (auto& cluster : clusters) {
        std::vector<uint32_t> bits;
        for (uint32_t d : cluster) {
            if (incident.count(d)) bits.push_back(d);
            else corr.dropped_detectors++;
        }
        if (bits.size() != cluster.size() && !opts.fallback_on_infeasible)
            throw std::runtime_error("decode_mle: infeasible syndrome");
        if (!bits.empty()) by_comp[comp_of_det[bits[0]]].push_back(std::move(bits));
    }
    std::vector<std::vector<uint32_t>> subproblems;
    for (auto& [root, group] : by_comp) {
        if (comp_size[root] <= opts.component_edge_cap) {
            std::vector<uint32_t> joint;
            for (auto& bits : group) joint.insert(joint.end(), bits.begin(), bits.end());
            std::sort(joint.begin(), joint.end());
            subproblems.push_back(std::move(joint));
        } else {
            for (auto& bits : group) {
                if (!opts.fallback_on_infeasible) {
                    // Strict mode: report the oversized syndrome component.
                    std::set<uint32_t> frontier;
                    for (uint32_t d : bits)
                        for (uint32_t e : incident[d]) frontier.insert(e);
                    if (frontier.size() > opts.component_edge_cap)
                        throw std::runtime_error("decode_mle: component too large (" +
                                                 std::to_string(frontier.size()) + " edges)");
                }
                subproblems.push_back(bits);
            }
        }
    }

    for (auto& bits : subproblems) {
        SearchState st;
        st.edges = &qp.edges;
        st.budget = opts.node_budget;
        st.incident = incident;
        for (const QEdge& e : qp.edges) {
            double ratio = e.w / e.dets.size();
            for (uint32_t d : e.dets) {
                auto [it, fresh] = st.min_ratio.try_emplace(d, ratio);
                if (!fresh) it->second = std::min(it->second, ratio);
            }
        }
        for (auto& [d, lst] : st.incident) {
            std::sort(lst.begin(), lst.end(), [&](uint32_t a, uint32_t b) {
                if (qp.edges[a].w != qp.edges[b].w) return qp.edges[a].w < qp.edges[b].w;
                return qp.edges[a].index < qp.edges[b].index;
            });
        }
        st.decided.assign(qp.edges.size(), 0);
        st.greedy_seed(bits);
        std::vector<uint32_t> work = bits;
        st.dfs(work, 0.0, 0);
        if (st.exhausted) corr.exact = false;
        if (!st.have_best) {
            if (!opts.fallback_on_infeasible)
                throw std::runtime_error("decode_mle: infeasible syndrome");
            corr.dropped_detectors += bits.size();
            continue;
        }
        total_w += st.best_w;
        obs_acc ^= st.best_obs;
    }
    corr.weight = total_w;
    for (uint32_t o = 0; o < observable_count && o < 64; o++)
        corr.obs_flip[o] = (obs_acc >> o) & 1;
    return corr;
}

}  // namespace

Correction decode_mle(const DemEdgeView& view, const std::vector<uint8_t>& syndrome,
                      const MleOptions& opts) {
    uint32_t obs_count = view.base->observable_count;
    if (syndrome.size() != view.base->detector_count)
        throw std::invalid_argument("decode_mle: syndrome length mismatch");
    QuotientProblem qp = build_quotient(view, syndrome, opts.fallback_on_infeasible, false);
    Correction corr = solve_quotient(qp, obs_count, opts, nullptr, false);
    if (opts.compute_gap && obs_count >= 1) {
        uint64_t mask = 1;
        bool flipped = !corr.obs_flip.empty() && corr.obs_flip[0];
        QuotientProblem qp2 = build_quotient(view, syndrome, opts.fallback_on_infeasible, true);
        try {
            Correction other = solve_quotient(qp2, obs_count, opts, &mask, !flipped);
            corr.gap = other.weight - corr.weight;
        } catch (const std::exception&) {
            corr.gap = std::nullopt;  // complement infeasible: infinite confidence
        }
    }
    return corr;
}

Correction decode_mle(const DecodingHypergraph& dem, const std::vector<uint8_t>& syndrome,
                      const MleOptions& opts) {
    DemEdgeView view{&dem, nullptr};
    return decode_mle(view, syndrome, opts);
}

Correction decode_mwpm(const DecodingHypergraph& dem, const std::vector<uint8_t>& syndrome,
                       const MwpmOptions& opts) {
    if (syndrome.size() != dem.detector_count)
        throw std::invalid_argument("decode_mwpm: syndrome length mismatch");
    // Graph-like edge list (boundary = detector id detector_count).
    const uint32_t nd = dem.detector_count;
    struct GEdge {
        uint32_t a, b;
        double w;
        uint64_t obs;
    };
    std::vector<GEdge> gedges;
    auto add_edge = [&](const Hyperedge& e) {
        uint64_t obs = 0;
        for (uint32_t o : e.obs)
            if (o < 64) obs |= 1ull << o;
        double w = edge_weight(e.p);
        if (e.dets.size() == 1) gedges.push_back({e.dets[0], nd, w, obs});
        else if (e.dets.size() == 2) gedges.push_back({e.dets[0], e.dets[1], w, obs});
        else if (!e.dets.empty()) throw std::runtime_error("decode_mwpm: non-graphlike hyperedge");
    };
    for (uint32_t i = 0; i < dem.edges.size(); i++) {
        const Hyperedge& e = dem.edges[i];
        if (e.dets.size() > 2) {
            bool decomposed = false;
            if (opts.decompositions) {
                for (const auto& [idx, repl] : *opts.decompositions) {
                    if (idx != i) continue;
                    for (const Hyperedge& r : repl) add_edge(r);
                    decomposed = true;
                    break;
                }
            }
            if (!decomposed)
                throw std::runtime_error("decode_mwpm: hyperedge with >2 detectors and no decomposition hint");
        } else {
            add_edge(e);
        }
    }
    // Adjacency for Dijkstra over detectors + boundary.
    std::vector<std::vector<std::pair<uint32_t, uint32_t>>> adj(nd + 1);  // (edge idx, other)
    for (uint32_t i = 0; i < gedges.size(); i++) {
        adj[gedges[i].a].push_back({i, gedges[i].b});
        adj[gedges[i].b].push_back({i, gedges[i].a});
    }
    std::vector<uint32_t> defects;
    for (uint32_t d = 0; d < nd; d++)
        if (syndrome[d]) defects.push_back(d);
    Correction corr;
    corr.obs_flip.assign(dem.observable_count, 0);
    if (defects.empty()) return corr;
    if (defects.size() > opts.max_defects)
        throw std::runtime_error("decode_mwpm: too many defects (" +
                                 std::to_string(defects.size()) + ")");

    uint32_t n = (uint32_t)defects.size();
    // Dijkstra from every defect: distance and path observable parity.
    std::vector<std::vector<double>> dist(n, std::vector<double>(nd + 1, 1e30));
    std::vector<std::vector<uint64_t>> pobs(n, std::vector<uint64_t>(nd + 1, 0));
    for (uint32_t s = 0; s < n; s++) {
        using QN = std::pair<double, uint32_t>;
        std::priority_queue<QN, std::vector<QN>, std::greater<>> pq;
        dist[s][defects[s]] = 0;
        pq.push({0, defects[s]});
        while (!pq.empty()) {
            auto [dw, u] = pq.top();
            pq.pop();
            if (dw > dist[s][u] + 1e-12) continue;
            for (auto [ei, v] : adj[u]) {
                double nw = dw + gedges[ei].w;
                if (nw < dist[s][v] - 1e-12) {
                    dist[s][v] = nw;
                    pobs[s][v] = pobs[s][u] ^ gedges[ei].obs;
                    pq.push({nw, v});
                }
            }
        }
    }
    // Exact minimum-weight pairing over defects; any defect may pair with the
    // boundary. Bitmask DP.
    uint32_t full = (1u << n) - 1;
    std::vector<double> dp(full + 1, 1e30);
    std::vector<uint64_t> dpobs(full + 1, 0);
    dp[0] = 0;
    for (uint32_t mask = 0; mask <= full; mask++) {
        if (dp[mask] >= 1e29) continue;
        uint32_t i = 0;
        while (i < n && (mask >> i) & 1) i++;
        if (i == n) continue;
        // match defect i to boundary
        uint32_t m2 = mask | (1u << i);
        double wb = dp[mask] + dist[i][nd];
        if (wb < dp[m2] - 1e-12) {
            dp[m2] = wb;
            dpobs[m2] = dpobs[mask] ^ pobs[i][nd];
        }
        for (uint32_t j = i + 1; j < n; j++) {
            if ((mask >> j) & 1) continue;
            uint32_t m3 = mask | (1u << i) | (1u << j);
            double wp = dp[mask] + dist[i][defects[j]];
            if (wp < dp[m3] - 1e-12) {
                dp[m3] = wp;
                dpobs[m3] = dpobs[mask] ^ pobs[i][defects[j]];
            }
        }
    }
    if (dp[full] >= 1e29) throw std::runtime_error("decode_mwpm: no feasible matching");
    corr.weight = dp[full];
    for (uint32_t o = 0; o < dem.observable_count && o < 64; o++)
        corr.obs_flip[o] = (dpobs[full] >> o) & 1;
    return corr;
}

std::pair<double, double> wilson_interval(uint64_t x, uint64_t n) {
    if (n == 0) return {0.0, 1.0};
    if (x == 0 || x == n) {
        double z = 1.959963984540054;
        double z2 = z * z;
        double bound = z2 / (n + z2);
        return x == 0 ? std::make_pair(0.0, bound) : std::make_pair(1.0 - bound, 1.0);
    }
    double z = 1.959963984540054;
    double phat = (double)x / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (phat + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

LerEstimate logical_error_rate(const ShotBatch& shots, const LifecycleDemCache& cache,
                               const LerOptions& opts) {
    LerEstimate est;
    est.shots = shots.n_shots;
    est.p_l_max = 1.0 - std::pow(2.0, -(double)shots.observable_count);
    if (opts.handling == LossHandling::GroundTruth && !shots.has_ground_truth)
        throw std::invalid_argument("logical_error_rate: batch lacks ground-truth losses");

    std::vector<uint64_t> fail_per_thread, err_per_thread, drop_per_thread;
    uint32_t threads = std::max<uint32_t>(1, opts.threads);
    fail_per_thread.assign(threads, 0);
    err_per_thread.assign(threads, 0);
    drop_per_thread.assign(threads, 0);

    auto work = [&](uint32_t tid, uint64_t lo, uint64_t hi) {
        std::vector<uint8_t> syndrome(shots.detector_count);
        for (uint64_t shot = lo; shot < hi; shot++) {
            for (uint32_t d = 0; d < shots.detector_count; d++)
                syndrome[d] = shots.detector(shot, d);
            Correction corr;
            try {
                if (opts.handling == LossHandling::LossBlind) {
                    DemEdgeView view{&cache.pauli, nullptr};
                    corr = decode_mle(view, syndrome, opts.mle);
                } else if (opts.handling == LossHandling::GroundTruth) {
                    AssembledDem a = assemble_exact_loss_view(shots.ground_truth[shot], cache);
                    DemEdgeView view{&cache.pauli, &a};
                    if (opts.backend == DecoderKind::Mwpm) {
                        corr = decode_mwpm(a.materialize(), syndrome);
                    } else {
                        corr = decode_mle(view, syndrome, opts.mle);
                    }
                } else {
                    HeraldPattern h = heralds_from_ssr(cache, &shots.ssr[shot * shots.ssr_count]);
                    AssembledDem a =
                        assemble_delayed_erasure_view(h, cache, opts.omega, opts.assembly_floor);
                    DemEdgeView view{&cache.pauli, &a};
                    if (opts.backend == DecoderKind::Mwpm) {
                        corr = decode_mwpm(a.materialize(), syndrome);
                    } else {
                        corr = decode_mle(view, syndrome, opts.mle);
                    }
                }
            } catch (const std::exception&) {
                err_per_thread[tid]++;
                fail_per_thread[tid]++;  // a decoder that cannot answer has failed
                continue;
            }
            drop_per_thread[tid] += corr.dropped_detectors;
            bool fail = false;
            for (uint32_t o = 0; o < shots.observable_count; o++) {
                bool predicted = o < corr.obs_flip.size() && corr.obs_flip[o];
                if (predicted != shots.observable(shot, o)) fail = true;
            }
            if (fail) fail_per_thread[tid]++;
        }
    };

    if (threads == 1 || shots.n_shots < 2 * threads) {
        work(0, 0, shots.n_shots);
    } else {
        std::vector<std::thread> pool;
        uint64_t chunk = (shots.n_shots + threads - 1) / threads;
        for (uint32_t t = 0; t < threads; t++) {
            uint64_t lo = t * chunk, hi = std::min<uint64_t>(shots.n_shots, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, t, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    for (uint32_t t = 0; t < threads; t++) {
        est.failures += fail_per_thread[t];
        est.decoder_errors += err_per_thread[t];
        est.dropped_detectors += drop_per_thread[t];
    }
    est.ler = est.shots ? (double)est.failures / est.shots : 0.0;
    auto [lo, hi] = wilson_interval(est.failures, est.shots);
    est.ci_lo = lo;
    est.ci_hi = hi;
    return est;
}

}  // namespace qloss
