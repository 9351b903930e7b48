#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "qloss/circuit.hpp"

namespace qloss {

constexpr double kInfiniteBias = std::numeric_limits<double>::infinity();

enum class ErrorModel : uint8_t { A, B, C };

struct NoiseSpec {
    double p_cz = 0.0;          // physical error probability per two-qubit gate
    double loss_fraction = 0.0; // L = p_loss / (p_loss + p_Pauli)
    double bias = 1.0;          // eta; kInfiniteBias for Z-only Pauli noise
    ErrorModel model = ErrorModel::A;
    bool bias_preserving_gates = false;
    bool biased_erasure = false;
    double p_idle = 0.0;   // per-slot idle error probability
    double slot_time = 1.0;
    double motion_time = 0.0;
};

struct ChannelTerms {
    double loss = 0.0;
    double px = 0.0, py = 0.0, pz = 0.0;
    // Correlated two-qubit terms in the fixed order (L⊗I, I⊗L, L⊗Z, Z⊗L).
    std::vector<double> corr2;
};

ChannelTerms derive_channel_model_a(const NoiseSpec& spec);
ChannelTerms derive_channel_model_b(const NoiseSpec& spec);
double movement_error(double p_idle, double motion_time, double slot_time);

// Inserts noise instructions after every two-qubit gate outside the
// circuit's noiseless tick ranges, plus movement-error channels at the
// recorded movement marks.
Circuit apply_noise(const Circuit& c, const NoiseSpec& spec);

}  // namespace qloss
