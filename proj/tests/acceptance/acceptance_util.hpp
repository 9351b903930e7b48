#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qloss/codes.hpp"
#include "qloss/decode.hpp"
#include "qloss/dem.hpp"
#include "qloss/experiments.hpp"
#include "qloss/noise.hpp"

namespace qloss::acceptance {

struct Reporter {
    int failures = 0;
    void check(const std::string& name, bool pass, const std::string& detail);
};

uint32_t hardware_threads();

LerOptions acceptance_decoder(LossHandling handling = LossHandling::DelayedErasure,
                              double omega = 0.0);

struct PointRun {
    LerEstimate est;
    double wall_s = 0;
};

// Generate + annotate + cache + sample + decode one parameter point.
PointRun run_point(GeneratorKind gen, SEConfig se, NoiseSpec noise, uint64_t shots, uint64_t seed,
                   const LerOptions& decoder, uint32_t threads);

std::vector<FitRecord> threshold_curve(GeneratorKind gen, SEConfig se, NoiseSpec noise,
                                       const std::vector<double>& ps,
                                       const std::vector<uint32_t>& ds, uint64_t shots,
                                       uint64_t seed, uint32_t threads, bool verbose = true);

std::string fmt(double v);

}  // namespace qloss::acceptance
