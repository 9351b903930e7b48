#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qloss/dem.hpp"

namespace qloss {

struct Correction {
    std::vector<uint8_t> obs_flip;   // predicted observable flips
    double weight = 0.0;             // sum of ln((1-p)/p) over the chosen edges
    std::optional<double> gap;       // complement-constrained weight minus weight
    bool exact = true;               // false when the node budget ran out
    uint32_t dropped_detectors = 0;  // unexplainable syndrome bits ignored
};

struct MleOptions {
    uint32_t component_edge_cap = 40;  // weighted edges per component (after quotient)
    uint64_t node_budget = 1 << 21;
    bool compute_gap = false;
    bool fallback_on_infeasible = true;  // drop unexplainable residual detectors
};

// Lightweight per-shot edge view: shared base + overrides + extras.
struct DemEdgeView {
    const DecodingHypergraph* base = nullptr;
    const AssembledDem* assembled = nullptr;  // optional

    template <typename Fn>
    void for_each(Fn fn) const {
        if (assembled) {
            size_t next_override = 0;
            const auto& ov = assembled->base_overrides;
            std::vector<std::pair<uint32_t, double>> sorted(ov.begin(), ov.end());
            std::sort(sorted.begin(), sorted.end());
            for (uint32_t i = 0; i < base->edges.size(); i++) {
                double p = base->edges[i].p;
                if (next_override < sorted.size() && sorted[next_override].first == i)
                    p = sorted[next_override++].second;
                fn(base->edges[i], p);
            }
            for (const Hyperedge& e : assembled->extra) fn(e, e.p);
        } else {
            for (const Hyperedge& e : base->edges) fn(e, e.p);
        }
    }
};

Correction decode_mle(const DemEdgeView& view, const std::vector<uint8_t>& syndrome,
                      const MleOptions& opts = {});
Correction decode_mle(const DecodingHypergraph& dem, const std::vector<uint8_t>& syndrome,
                      const MleOptions& opts = {});

struct MwpmOptions {
    uint32_t max_defects = 22;
    // Decomposition hints: canonical edge index -> replacement graph-like edges.
    const std::vector<std::pair<uint32_t, std::vector<Hyperedge>>>* decompositions = nullptr;
};

Correction decode_mwpm(const DecodingHypergraph& dem, const std::vector<uint8_t>& syndrome,
                       const MwpmOptions& opts = {});

enum class DecoderKind : uint8_t { Mle, Mwpm };
enum class LossHandling : uint8_t { DelayedErasure, LossBlind, GroundTruth };

struct LerOptions {
    DecoderKind backend = DecoderKind::Mle;
    LossHandling handling = LossHandling::DelayedErasure;
    double omega = 0.0;
    uint32_t threads = 1;
    MleOptions mle;
    // Assembly floor for per-shot lifecycle edges (production pruning).
    double assembly_floor = 1e-5;
};

struct LerEstimate {
    uint64_t shots = 0;
    uint64_t failures = 0;
    double ler = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;  // Wilson 95%
    double p_l_max = 0.0;             // 1 - 2^-N normalization
    uint64_t decoder_errors = 0;      // infeasible/budget-exhausted shots
    uint64_t dropped_detectors = 0;
};

LerEstimate logical_error_rate(const ShotBatch& shots, const LifecycleDemCache& cache,
                               const LerOptions& opts = {});

// Wilson 95% interval for x successes out of n.
std::pair<double, double> wilson_interval(uint64_t x, uint64_t n);

}  // namespace qloss
