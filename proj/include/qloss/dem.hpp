#pragma once

#include <string>
#include <vector>

#include "qloss/circuit.hpp"
#include "qloss/lifecycle.hpp"
#include "qloss/sim.hpp"

namespace qloss {

enum class EdgeSource : uint8_t { Pauli, Loss, Supercheck };

struct Hyperedge {
    double p = 0.0;
    std::vector<uint32_t> dets;  // sorted detector ids
    std::vector<uint32_t> obs;   // sorted observable ids
    EdgeSource source = EdgeSource::Pauli;
    uint32_t lifecycle = UINT32_MAX;  // provenance for Loss edges
    uint32_t location = UINT32_MAX;
};

struct DecodingHypergraph {
    uint32_t detector_count = 0;
    uint32_t observable_count = 0;
    std::vector<Hyperedge> edges;
    std::vector<std::string> diagnostics;
};

// Exact-to-third-order XOR combination of independent mechanism probabilities.
double combine_probabilities(const std::vector<double>& ps);
// Exact odd-parity convolution (test oracle and small-list reference).
double exact_xor_probability(const std::vector<double>& ps);

// Extracts the decoding hypergraph of a (possibly loss-truncated) circuit.
// `lossless_reference` pins detector values to the original circuit's
// reference sample; pass nullptr for self-referenced extraction.
DecodingHypergraph extract_dem(const Circuit& c, const CompiledCircuit& cc,
                               const std::vector<uint8_t>* lossless_reference = nullptr);
DecodingHypergraph extract_dem(const Circuit& c);

std::string emit_dem(const DecodingHypergraph& dem);
DecodingHypergraph parse_dem(const std::string& text);

struct HeraldItem {
    uint32_t lifecycle = 0;
    uint32_t window = 0;
};

struct HeraldPattern {
    std::vector<HeraldItem> items;
};

// Per-(lifecycle, location) cache of truncated-circuit DEM deltas, the
// Pauli DEM of the lossless circuit, and everything per-shot assembly needs.
struct LifecycleDemCache {
    Circuit circuit;  // the annotated circuit the cache was built from
    CompiledCircuit compiled;
    LifecycleSet lifecycles;
    std::vector<uint8_t> reference;
    DecodingHypergraph pauli;
    // deltas[lifecycle][location] = edges differing from the lossless DEM.
    std::vector<std::vector<std::vector<Hyperedge>>> deltas;
    // canonical symptom -> index into pauli.edges
    // (implementation detail used for fast merging)
    std::vector<std::pair<std::string, uint32_t>> pauli_index;

    const Lifecycle& lifecycle(uint32_t i) const { return lifecycles.lifecycles[i]; }
};

LifecycleDemCache precompute_lifecycle_dems(const Circuit& c, uint32_t threads = 1);

// Herald pattern of one shot from its SSR outcome row.
HeraldPattern heralds_from_ssr(const LifecycleDemCache& cache, const uint8_t* ssr_row);

// Assembled per-shot hypergraph: a shared base plus shot-specific overrides,
// cheap to build and to scan.
struct AssembledDem {
    const DecodingHypergraph* base = nullptr;
    std::vector<std::pair<uint32_t, double>> base_overrides;  // base edge idx -> new p
    std::vector<Hyperedge> extra;

    DecodingHypergraph materialize() const;
    size_t edge_count() const { return base->edges.size() + extra.size(); }
};

// `floor` drops assembled lifecycle edges below that probability; the
// spec-level default keeps everything above the 1e-12 conditioning cutoff,
// the hot decoding path uses a coarser production floor.
AssembledDem assemble_delayed_erasure_view(const HeraldPattern& h, const LifecycleDemCache& cache,
                                           double omega, double floor = 0.0);
DecodingHypergraph assemble_delayed_erasure_dem(const HeraldPattern& h,
                                                const LifecycleDemCache& cache, double omega);

// Ground-truth variant: exact loss locations known (debug channel).
AssembledDem assemble_exact_loss_view(const LossAssignment& a, const LifecycleDemCache& cache);

}  // namespace qloss
