#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qloss/codes.hpp"
#include "qloss/decode.hpp"
#include "qloss/noise.hpp"

namespace qloss {

enum class GeneratorKind : uint8_t {
    Conventional,
    Swap,
    Teleportation,
    DirectConversion,
    RandomClifford,
    TeleportedAlgorithm,
};

struct ExperimentConfig {
    GeneratorKind generator = GeneratorKind::Conventional;
    SEConfig se;
    NoiseSpec noise;
    std::vector<double> p_values = {0.01};
    std::vector<double> l_values = {0.0};
    std::vector<double> eta_values = {1.0};
    std::vector<uint32_t> distances = {3};
    uint64_t shots = 10000;
    uint64_t seed = 1;
    LerOptions decoder;
    uint32_t threads = 1;
    std::string out_path;
    // deep-circuit knobs
    uint32_t num_logical = 2;
    uint32_t layers = 12;
    double n_r = 1.0;
};

struct PointResult {
    std::string point_key;
    std::string method;
    uint32_t d = 0;
    uint32_t rounds = 0;
    double p_cz = 0, loss_fraction = 0, eta = 1, omega = 0;
    uint64_t shots = 0, failures = 0;
    double ler = 0, ci_lo = 0, ci_hi = 0;
    double wall_s = 0;
};

std::string point_result_json(const PointResult& r);
std::optional<PointResult> point_result_from_json(const std::string& line);
std::string results_csv(const std::vector<PointResult>& rs);

// Runs the grid; appends JSON-lines to cfg.out_path (if set) and skips points
// whose key is already present there (resumable).
std::vector<PointResult> run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

ExperimentConfig config_from_json(const std::string& text);

struct FitResult {
    double value = 0.0;   // threshold / exponent / intercept
    double stderr_ = 0.0;
    double second = 0.0;  // prefactor alpha or second intercept
    double second_stderr = 0.0;
    double goodness = 0.0;  // reduced chi-square of the underlying fit
    bool ok = false;
    std::string note;
};

struct FitRecord {
    uint32_t d = 0;
    double p = 0;
    uint64_t shots = 0;
    uint64_t failures = 0;
};

// Threshold: crossing of the two largest distances' quadratic log-log fits.
FitResult fit_threshold(const std::vector<FitRecord>& records, uint64_t bootstrap_seed = 1,
                        uint32_t bootstrap_rounds = 64);
// Effective distance: WLS of ln LER = ln alpha + beta ln p.
FitResult fit_effective_distance(const std::vector<FitRecord>& records);
// Linear loss-Pauli boundary p_loss = A - (A/B) p_pauli; value = A, second = B.
FitResult fit_loss_pauli_boundary(const std::vector<std::pair<double, double>>& pts);

double space_time_overhead(SEMethod method, uint32_t d, uint32_t rounds);

}  // namespace qloss
