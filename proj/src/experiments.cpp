#include "qloss/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qloss/dem.hpp"
#include "qloss/rng.hpp"

namespace qloss {

namespace {

const char* generator_name(GeneratorKind g) {
    switch (g) {
        case GeneratorKind::Conventional: return "conventional";
        case GeneratorKind::Swap: return "swap";
        case GeneratorKind::Teleportation: return "teleportation";
        case GeneratorKind::DirectConversion: return "direct_conversion";
        case GeneratorKind::RandomClifford: return "random_clifford";
        case GeneratorKind::TeleportedAlgorithm: return "teleported_algorithm";
    }
    return "?";
}

}  // namespace

std::string point_result_json(const PointResult& r) {
    nlohmann::json j;
    j["point_key"] = r.point_key;
    j["method"] = r.method;
    j["d"] = r.d;
    j["rounds"] = r.rounds;
    j["p_cz"] = r.p_cz;
    j["L"] = r.loss_fraction;
    j["eta"] = r.eta;
    j["omega"] = r.omega;
    j["shots"] = r.shots;
    j["failures"] = r.failures;
    j["ler"] = r.ler;
    j["ci_lo"] = r.ci_lo;
    j["ci_hi"] = r.ci_hi;
    j["wall_s"] = r.wall_s;
    return j.dump();
}

std::optional<PointResult> point_result_from_json(const std::string& line) {
    try {
        auto j = nlohmann::json::parse(line);
        PointResult r;
        r.point_key = j.at("point_key").get<std::string>();
        r.method = j.value("method", "");
        r.d = j.value("d", 0u);
        r.rounds = j.value("rounds", 0u);
        r.p_cz = j.value("p_cz", 0.0);
        r.loss_fraction = j.value("L", 0.0);
        r.eta = j.value("eta", 1.0);
        r.omega = j.value("omega", 0.0);
        r.shots = j.value("shots", (uint64_t)0);
        r.failures = j.value("failures", (uint64_t)0);
        r.ler = j.value("ler", 0.0);
        r.ci_lo = j.value("ci_lo", 0.0);
        r.ci_hi = j.value("ci_hi", 0.0);
        r.wall_s = j.value("wall_s", 0.0);
        return r;
    } catch (...) {
        return std::nullopt;
    }
}

std::string results_csv(const std::vector<PointResult>& rs) {
    std::ostringstream os;
    os << "point_key,method,d,rounds,p_cz,L,eta,omega,shots,failures,ler,ci_lo,ci_hi,wall_s\n";
    for (const auto& r : rs) {
        os << r.point_key << "," << r.method << "," << r.d << "," << r.rounds << "," << r.p_cz
           << "," << r.loss_fraction << "," << r.eta << "," << r.omega << "," << r.shots << ","
           << r.failures << "," << r.ler << "," << r.ci_lo << "," << r.ci_hi << "," << r.wall_s
           << "\n";
    }
    return os.str();
}

namespace {

Circuit generate_point(const ExperimentConfig& cfg, uint32_t d, uint64_t point_seed) {
    SEConfig se = cfg.se;
    se.distance = d;
    se.native_cx = cfg.noise.bias_preserving_gates;
    switch (cfg.generator) {
        case GeneratorKind::Conventional: se.method = SEMethod::Conventional; return gen_se(se);
        case GeneratorKind::Swap: se.method = SEMethod::Swap; return gen_se(se);
        case GeneratorKind::Teleportation: se.method = SEMethod::Teleportation; return gen_se(se);
        case GeneratorKind::DirectConversion:
            se.method = SEMethod::DirectConversion;
            return gen_se(se);
        case GeneratorKind::RandomClifford:
            return gen_random_clifford(cfg.num_logical, cfg.layers, cfg.n_r, se, point_seed);
        case GeneratorKind::TeleportedAlgorithm:
            return gen_teleported_algorithm(cfg.layers, se, point_seed);
    }
    throw std::invalid_argument("unknown generator");
}

}  // namespace

std::vector<PointResult> run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
    std::set<std::string> done;
    if (!cfg.out_path.empty()) {
        std::ifstream in(cfg.out_path);
        std::string line;
        while (std::getline(in, line)) {
            auto r = point_result_from_json(line);
            if (r) done.insert(r->point_key);
        }
    }
    std::ofstream out;
    if (!cfg.out_path.empty()) out.open(cfg.out_path, std::ios::app);

    std::vector<PointResult> all;
    for (uint32_t d : cfg.distances) {
        for (double p : cfg.p_values) {
            for (double L : cfg.l_values) {
                for (double eta : cfg.eta_values) {
                    std::ostringstream key;
                    key << generator_name(cfg.generator) << ":d" << d << ":r" << cfg.se.rounds
                        << ":p" << format_param(p) << ":L" << format_param(L) << ":eta"
                        << format_param(eta) << ":w" << format_param(cfg.decoder.omega) << ":s"
                        << cfg.seed;
                    if (done.count(key.str())) {
                        if (log) *log << "skip " << key.str() << " (already done)\n";
                        continue;
                    }
                    auto t0 = std::chrono::steady_clock::now();
                    PointResult r;
                    r.point_key = key.str();
                    r.method = generator_name(cfg.generator);
                    r.d = d;
                    r.rounds = cfg.se.rounds;
                    r.p_cz = p;
                    r.loss_fraction = L;
                    r.eta = eta;
                    r.omega = cfg.decoder.omega;
                    try {
                        uint64_t point_seed = Rng::mix(cfg.seed ^ Rng::mix(
                                                  std::hash<std::string>{}(key.str())));
                        NoiseSpec noise = cfg.noise;
                        noise.p_cz = p;
                        noise.loss_fraction = L;
                        noise.bias = eta;
                        Circuit clean = generate_point(cfg, d, point_seed);
                        Circuit noisy = apply_noise(clean, noise);
                        LifecycleDemCache cache = precompute_lifecycle_dems(noisy, cfg.threads);
                        SampleOptions sopts;
                        sopts.threads = cfg.threads;
                        sopts.ground_truth = cfg.decoder.handling == LossHandling::GroundTruth;
                        ShotBatch shots = sample_shots(noisy, cfg.shots, point_seed, sopts);
                        LerOptions lopts = cfg.decoder;
                        lopts.threads = cfg.threads;
                        LerEstimate est = logical_error_rate(shots, cache, lopts);
                        r.shots = est.shots;
                        r.failures = est.failures;
                        r.ler = est.ler;
                        r.ci_lo = est.ci_lo;
                        r.ci_hi = est.ci_hi;
                    } catch (const std::exception& e) {
                        if (log) *log << "point " << key.str() << " failed: " << e.what() << "\n";
                        continue;
                    }
                    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                   .count();
                    all.push_back(r);
                    if (out.is_open()) {
                        out << point_result_json(r) << "\n";
                        out.flush();
                    }
                    if (log)
                        *log << r.point_key << " ler=" << r.ler << " [" << r.ci_lo << ","
                             << r.ci_hi << "] wall=" << r.wall_s << "s\n";
                }
            }
        }
    }
    return all;
}

ExperimentConfig config_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    ExperimentConfig cfg;
    std::string gen = j.value("generator", "conventional");
    if (gen == "conventional") cfg.generator = GeneratorKind::Conventional;
    else if (gen == "swap") cfg.generator = GeneratorKind::Swap;
    else if (gen == "teleportation") cfg.generator = GeneratorKind::Teleportation;
    else if (gen == "direct_conversion") cfg.generator = GeneratorKind::DirectConversion;
    else if (gen == "random_clifford") cfg.generator = GeneratorKind::RandomClifford;
    else if (gen == "teleported_algorithm") cfg.generator = GeneratorKind::TeleportedAlgorithm;
    else throw std::invalid_argument("unknown generator " + gen);

    if (j.contains("se")) {
        auto s = j["se"];
        cfg.se.rounds = s.value("rounds", cfg.se.rounds);
        cfg.se.swap_period = s.value("swap_period", cfg.se.swap_period);
        cfg.se.detect_period = s.value("detect_period", cfg.se.detect_period);
        cfg.se.replace_period = s.value("replace_period", cfg.se.replace_period);
        cfg.se.noiseless_first = s.value("noiseless_first", cfg.se.noiseless_first);
        cfg.se.noiseless_last = s.value("noiseless_last", cfg.se.noiseless_last);
        std::string variant = s.value("variant", "css");
        cfg.se.variant = variant == "xzzx" ? CodeVariant::XZZX : CodeVariant::CSS;
        std::string basis = s.value("basis", "Z");
        cfg.se.basis = basis.empty() ? 'Z' : basis[0];
    }
    if (j.contains("noise")) {
        auto n = j["noise"];
        std::string model = n.value("model", "A");
        cfg.noise.model = model == "B" ? ErrorModel::B : model == "C" ? ErrorModel::C : ErrorModel::A;
        cfg.noise.bias_preserving_gates = n.value("bias_preserving_gates", false);
        cfg.noise.biased_erasure = n.value("biased_erasure", false);
        if (n.contains("bias") && n["bias"].is_string()) cfg.noise.bias = kInfiniteBias;
        else cfg.noise.bias = n.value("bias", 1.0);
        cfg.noise.p_idle = n.value("p_idle", 0.0);
        cfg.noise.slot_time = n.value("slot_time", 1.0);
        cfg.noise.motion_time = n.value("motion_time", 0.0);
    }
    cfg.p_values = j.value("p_values", cfg.p_values);
    cfg.l_values = j.value("l_values", cfg.l_values);
    cfg.eta_values = j.value("eta_values", cfg.eta_values);
    cfg.distances = j.value("distances", cfg.distances);
    cfg.shots = j.value("shots", cfg.shots);
    if (cfg.shots < 100) throw std::invalid_argument("shots must be >= 100");
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.out_path = j.value("out", cfg.out_path);
    cfg.num_logical = j.value("num_logical", cfg.num_logical);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.n_r = j.value("n_r", cfg.n_r);
    if (j.contains("decoder")) {
        auto dj = j["decoder"];
        std::string backend = dj.value("backend", "mle");
        cfg.decoder.backend = backend == "mwpm" ? DecoderKind::Mwpm : DecoderKind::Mle;
        std::string handling = dj.value("handling", "delayed_erasure");
        cfg.decoder.handling = handling == "loss_blind" ? LossHandling::LossBlind
                               : handling == "ground_truth" ? LossHandling::GroundTruth
                                                            : LossHandling::DelayedErasure;
        cfg.decoder.omega = dj.value("omega", 0.0);
        cfg.decoder.mle.component_edge_cap = dj.value("component_edge_cap",
                                                      cfg.decoder.mle.component_edge_cap);
    }
    return cfg;
}

namespace {

// Weighted least squares for y = X beta; returns beta and covariance diag.
struct Wls {
    std::vector<double> beta;
    std::vector<double> stderr_;
    double chi2 = 0;
    uint32_t dof = 0;
    bool ok = false;
};

Wls wls_fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
            const std::vector<double>& w) {
    size_t n = y.size(), k = X.empty() ? 0 : X[0].size();
    Wls out;
    if (n < k || k == 0) return out;
    // Normal equations A = X' W X, b = X' W y (k is 2 or 3: solve directly).
    std::vector<std::vector<double>> A(k, std::vector<double>(k, 0.0));
    std::vector<double> b(k, 0.0);
    for (size_t i = 0; i < n; i++) {
        for (size_t r = 0; r < k; r++) {
            b[r] += w[i] * X[i][r] * y[i];
            for (size_t c = 0; c < k; c++) A[r][c] += w[i] * X[i][r] * X[i][c];
        }
    }
    // Gauss-Jordan with the inverse for the covariance.
    std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
    for (size_t i = 0; i < k; i++) inv[i][i] = 1.0;
    for (size_t col = 0; col < k; col++) {
        size_t piv = col;
        for (size_t r = col + 1; r < k; r++)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (std::abs(A[piv][col]) < 1e-30) return out;
        std::swap(A[piv], A[col]);
        std::swap(inv[piv], inv[col]);
        double s = A[col][col];
        for (size_t c = 0; c < k; c++) {
            A[col][c] /= s;
            inv[col][c] /= s;
        }
        for (size_t r = 0; r < k; r++) {
            if (r == col) continue;
            double f = A[r][col];
            for (size_t c = 0; c < k; c++) {
                A[r][c] -= f * A[col][c];
                inv[r][c] -= f * inv[col][c];
            }
        }
    }
    out.beta.assign(k, 0.0);
    for (size_t r = 0; r < k; r++)
        for (size_t c = 0; c < k; c++) out.beta[r] += inv[r][c] * b[c];
    out.stderr_.assign(k, 0.0);
    for (size_t r = 0; r < k; r++) out.stderr_[r] = std::sqrt(std::max(0.0, inv[r][r]));
    for (size_t i = 0; i < n; i++) {
        double pred = 0;
        for (size_t r = 0; r < k; r++) pred += X[i][r] * out.beta[r];
        out.chi2 += w[i] * (y[i] - pred) * (y[i] - pred);
    }
    out.dof = (uint32_t)(n - k);
    out.ok = true;
    return out;
}

struct LogPoint {
    double x, y, w;  // ln p, ln ler, weight
};

std::vector<LogPoint> to_log_points(const std::vector<FitRecord>& recs) {
    std::vector<LogPoint> pts;
    for (const auto& r : recs) {
        if (r.failures == 0 || r.shots == 0) continue;
        double ler = (double)r.failures / r.shots;
        // var(ln ler) ~ (1-ler)/(ler * n)
        double var = (1.0 - ler) / ((double)r.failures);
        pts.push_back({std::log(r.p), std::log(ler), 1.0 / std::max(var, 1e-12)});
    }
    return pts;
}

// Quadratic fit of ln ler vs ln p for one distance.
Wls quad_fit(const std::vector<LogPoint>& pts) {
    std::vector<std::vector<double>> X;
    std::vector<double> y, w;
    for (const auto& pt : pts) {
        X.push_back({1.0, pt.x, pt.x * pt.x});
        y.push_back(pt.y);
        w.push_back(pt.w);
    }
    return wls_fit(X, y, w);
}

double eval_quad(const Wls& q, double x) {
    return q.beta[0] + q.beta[1] * x + q.beta[2] * x * x;
}

std::optional<double> crossing_of(const std::vector<FitRecord>& small_d,
                                  const std::vector<FitRecord>& big_d) {
    auto ps = to_log_points(small_d);
    auto pb = to_log_points(big_d);
    if (ps.size() < 3 || pb.size() < 3) return std::nullopt;
    Wls qs = quad_fit(ps), qb = quad_fit(pb);
    if (!qs.ok || !qb.ok) return std::nullopt;
    double lo = 1e30, hi = -1e30;
    for (const auto& pt : ps) { lo = std::min(lo, pt.x); hi = std::max(hi, pt.x); }
    for (const auto& pt : pb) { lo = std::min(lo, pt.x); hi = std::max(hi, pt.x); }
    auto diff = [&](double x) { return eval_quad(qb, x) - eval_quad(qs, x); };
    // Scan for a sign change (big distance below small => left of threshold).
    const int kSteps = 256;
    double prev_x = lo, prev_v = diff(lo);
    for (int i = 1; i <= kSteps; i++) {
        double x = lo + (hi - lo) * i / kSteps;
        double v = diff(x);
        if (prev_v <= 0 && v > 0) {
            // Bisection.
            double a = prev_x, b = x;
            for (int it = 0; it < 60; it++) {
                double m = 0.5 * (a + b);
                (diff(m) <= 0 ? a : b) = m;
            }
            return std::exp(0.5 * (a + b));
        }
        prev_x = x;
        prev_v = v;
    }
    return std::nullopt;
}

}  // namespace

FitResult fit_threshold(const std::vector<FitRecord>& records, uint64_t bootstrap_seed,
                        uint32_t bootstrap_rounds) {
    FitResult out;
    std::set<uint32_t> dset;
    for (const auto& r : records) dset.insert(r.d);
    if (dset.size() < 2) {
        out.note = "need at least two distinct distances";
        return out;
    }
    std::vector<uint32_t> ds(dset.begin(), dset.end());
    uint32_t d_small = ds[ds.size() - 2], d_big = ds[ds.size() - 1];
    std::vector<FitRecord> rs, rb;
    for (const auto& r : records) {
        if (r.d == d_small) rs.push_back(r);
        if (r.d == d_big) rb.push_back(r);
    }
    auto cross = crossing_of(rs, rb);
    if (!cross) {
        out.note = "no crossing in range";
        return out;
    }
    out.value = *cross;
    // Bootstrap over shots.
    std::vector<double> samples;
    Rng rng(bootstrap_seed, 0xB005);
    for (uint32_t b = 0; b < bootstrap_rounds; b++) {
        auto resample = [&](std::vector<FitRecord> v) {
            for (auto& r : v) {
                double p = (double)r.failures / std::max<uint64_t>(1, r.shots);
                uint64_t f = 0;  // binomial via normal approx for speed
                double mu = r.shots * p, sd = std::sqrt(std::max(1e-9, r.shots * p * (1 - p)));
                double g = 0;
                for (int k = 0; k < 12; k++) g += rng.next_double();
                g -= 6.0;
                f = (uint64_t)std::llround(std::max(0.0, mu + sd * g));
                r.failures = std::min<uint64_t>(f, r.shots);
            }
            return v;
        };
        auto c = crossing_of(resample(rs), resample(rb));
        if (c) samples.push_back(*c);
    }
    if (samples.size() >= 8) {
        double mean = 0;
        for (double s : samples) mean += s;
        mean /= samples.size();
        double var = 0;
        for (double s : samples) var += (s - mean) * (s - mean);
        out.stderr_ = std::sqrt(var / (samples.size() - 1));
    }
    out.ok = true;
    return out;
}

FitResult fit_effective_distance(const std::vector<FitRecord>& records) {
    FitResult out;
    auto pts = to_log_points(records);
    if (pts.size() < 3) {
        out.note = "insufficient tail data";
        return out;
    }
    std::vector<std::vector<double>> X;
    std::vector<double> y, w;
    for (const auto& pt : pts) {
        X.push_back({1.0, pt.x});
        y.push_back(pt.y);
        w.push_back(pt.w);
    }
    Wls fit = wls_fit(X, y, w);
    if (!fit.ok) {
        out.note = "degenerate fit";
        return out;
    }
    out.value = fit.beta[1];               // beta = effective distance
    out.stderr_ = fit.stderr_[1];
    out.second = std::exp(fit.beta[0]);    // alpha
    out.second_stderr = out.second * fit.stderr_[0];
    out.goodness = fit.dof ? fit.chi2 / fit.dof : 0.0;
    out.ok = true;
    return out;
}

FitResult fit_loss_pauli_boundary(const std::vector<std::pair<double, double>>& pts) {
    FitResult out;
    // Fit p_loss = A + B * p_pauli (expect B < 0); intercepts A and -A/B.
    if (pts.size() < 2) {
        out.note = "need at least two boundary points";
        return out;
    }
    std::vector<std::vector<double>> X;
    std::vector<double> y, w;
    std::set<double> distinct;
    for (auto [pp, pl] : pts) {
        X.push_back({1.0, pp});
        y.push_back(pl);
        w.push_back(1.0);
        distinct.insert(pp);
    }
    if (distinct.size() < 2) {
        out.note = "collinear (single p_pauli value)";
        return out;
    }
    Wls fit = wls_fit(X, y, w);
    if (!fit.ok || std::abs(fit.beta[1]) < 1e-12) {
        out.note = "degenerate fit";
        return out;
    }
    out.value = fit.beta[0];                 // p_loss,th
    out.stderr_ = fit.stderr_[0];
    out.second = -fit.beta[0] / fit.beta[1]; // p_pauli,th
    out.second_stderr = out.second * (fit.stderr_[1] / std::abs(fit.beta[1]));
    out.goodness = fit.dof ? fit.chi2 / fit.dof : 0.0;
    out.ok = true;
    return out;
}

double space_time_overhead(SEMethod method, uint32_t d, uint32_t rounds) {
    if (rounds == 0) return 0.0;
    SEConfig cfg;
    cfg.distance = d;
    cfg.rounds = rounds;
    cfg.method = method;
    Circuit c = gen_se(cfg);
    double qubits = (double)c.qubit_count;
    // Depth = minimal entangling schedule: 4 steps per round for the
    // CX-skeleton methods; the all-commuting CZ cluster packs into 6 steps.
    double depth = method == SEMethod::Teleportation ? 6.0 : 4.0 * rounds;
    return qubits * depth;
}

}  // namespace qloss
