#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qloss/circuit.hpp"

namespace qloss {

enum class QubitRole : uint8_t { Data, Measure, Cluster };

// One qubit's span from (re)initialization to the measurement that can
// herald its loss. Potential loss locations are ordered in time and split
// into detection windows by the detect-only erasure checkpoints inside
// the span.
struct Lifecycle {
    uint32_t qubit = 0;
    uint32_t start_instr = 0;
    uint32_t end_instr = UINT32_MAX;          // heralding instruction; UINT32_MAX if never heralded
    std::vector<uint32_t> locations;          // indices into CompiledCircuit::loss_locations
    std::vector<double> priors;               // firing prior per location
    std::vector<uint32_t> window_of_location; // detection-window index per location
    uint32_t window_count = 1;
    // ssr record index (into CompiledCircuit::ssr_records) that first reports
    // a loss in window w; parallel to windows.
    std::vector<uint32_t> herald_ssr_of_window;
    QubitRole role = QubitRole::Data;
    bool bulk = false;

    size_t length() const { return locations.size(); }
};

struct RoleMetrics {
    double avg = 0.0;
    uint64_t max = 0;
    uint64_t count = 0;
};

struct LifecycleMetrics {
    RoleMetrics data, measure, cluster, overall;
    RoleMetrics bulk_data, bulk_measure, bulk_cluster, bulk_overall;
    uint64_t empty_lifecycle_count = 0;  // spans with no potential loss locations
};

struct LifecycleSet {
    std::vector<Lifecycle> lifecycles;
    // location id -> owning lifecycle (UINT32_MAX if the location is after
    // every herald point of its qubit).
    std::vector<uint32_t> lifecycle_of_location;
    // ssr record index -> lifecycle id (or UINT32_MAX)
    std::vector<uint32_t> lifecycle_of_ssr;
};

LifecycleSet extract_lifecycles(const Circuit& c, const CompiledCircuit& cc);

// Posterior location weights given that the lifecycle heralded lost:
// w_j ∝ p_j * prod_{k<j} (1 - p_k), normalized.
std::vector<double> posterior_weights(const Lifecycle& lc);
// Restricted to one detection window (still conditioned on surviving the
// earlier windows).
std::vector<double> posterior_weights_window(const Lifecycle& lc, uint32_t window);

LifecycleMetrics lifecycle_metrics(const Circuit& c, const CompiledCircuit& cc);
LifecycleMetrics lifecycle_metrics(const LifecycleSet& set);

std::string metrics_csv(const LifecycleMetrics& m);

}  // namespace qloss
