#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qloss/circuit.hpp"
#include "qloss/codes.hpp"
#include "qloss/decode.hpp"
#include "qloss/dem.hpp"
#include "qloss/experiments.hpp"
#include "qloss/lifecycle.hpp"
#include "qloss/noise.hpp"
#include "qloss/sim.hpp"

using namespace qloss;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
}

SEMethod method_from(const std::string& m) {
    if (m == "conventional") return SEMethod::Conventional;
    if (m == "swap") return SEMethod::Swap;
    if (m == "teleportation") return SEMethod::Teleportation;
    if (m == "direct_conversion") return SEMethod::DirectConversion;
    throw CLI::ValidationError("unknown method " + m);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qloss: loss-aware stabilizer circuit simulation and decoding"};
    app.require_subcommand(1);

    // ---- generate ----
    auto* gen = app.add_subcommand("generate", "emit a syndrome-extraction circuit");
    std::string g_method = "conventional", g_out, g_variant = "css", g_basis = "Z";
    uint32_t g_d = 3, g_rounds = 3, g_swap_period = 1, g_layers = 12, g_logical = 2;
    double g_detect = 1.0, g_replace = 1.0, g_nr = 1.0;
    double g_p = 0.0, g_L = 0.0, g_eta = 1.0;
    std::string g_model = "A";
    uint64_t g_seed = 1;
    bool g_noisy_first = false, g_noisy_last = false, g_native_cx = false;
    gen->add_option("--method", g_method,
                    "conventional|swap|teleportation|direct_conversion|random_clifford|"
                    "teleported_algorithm");
    gen->add_option("-d,--distance", g_d);
    gen->add_option("--rounds", g_rounds);
    gen->add_option("--swap-period", g_swap_period);
    gen->add_option("--detect-period", g_detect);
    gen->add_option("--replace-period", g_replace);
    gen->add_option("--variant", g_variant, "css|xzzx");
    gen->add_option("--basis", g_basis);
    gen->add_option("--layers", g_layers);
    gen->add_option("--num-logical", g_logical);
    gen->add_option("--n-r", g_nr);
    gen->add_option("--seed", g_seed);
    gen->add_flag("--noisy-first", g_noisy_first, "noise in the first round");
    gen->add_flag("--noisy-last", g_noisy_last, "noise in the final readout");
    gen->add_flag("--native-cx", g_native_cx);
    gen->add_option("-p,--p-cz", g_p, "annotate with noise at this p_cz");
    gen->add_option("-L,--loss-fraction", g_L);
    gen->add_option("--eta", g_eta);
    gen->add_option("--model", g_model, "A|B|C");
    gen->add_option("-o,--out", g_out);

    // ---- sample ----
    auto* smp = app.add_subcommand("sample", "sample shots from a noisy circuit");
    std::string s_circuit, s_out;
    uint64_t s_shots = 1000, s_seed = 1;
    uint32_t s_jobs = 1;
    bool s_ground_truth = false;
    smp->add_option("circuit", s_circuit)->required();
    smp->add_option("--shots", s_shots);
    smp->add_option("--seed", s_seed);
    smp->add_option("--jobs", s_jobs);
    smp->add_flag("--ground-truth", s_ground_truth);
    smp->add_option("-o,--out", s_out)->required();

    // ---- decode ----
    auto* dec = app.add_subcommand("decode", "decode a shot batch");
    std::string d_circuit, d_shots, d_handling = "delayed_erasure", d_backend = "mle";
    double d_omega = 0.0;
    uint32_t d_jobs = 1;
    dec->add_option("circuit", d_circuit)->required();
    dec->add_option("shots", d_shots)->required();
    dec->add_option("--handling", d_handling, "delayed_erasure|loss_blind|ground_truth");
    dec->add_option("--backend", d_backend, "mle|mwpm");
    dec->add_option("--omega", d_omega);
    dec->add_option("--jobs", d_jobs);

    // ---- dem ----
    auto* demc = app.add_subcommand("dem", "extract the decoding hypergraph");
    std::string m_circuit, m_out;
    demc->add_option("circuit", m_circuit)->required();
    demc->add_option("-o,--out", m_out);

    // ---- sweep ----
    auto* swp = app.add_subcommand("sweep", "run a config-driven experiment grid");
    std::string w_config, w_out, w_csv;
    uint32_t w_jobs = 0;
    swp->add_option("config", w_config)->required();
    swp->add_option("-o,--out", w_out, "results JSONL path (overrides config)");
    swp->add_option("--csv", w_csv, "also export CSV here");
    swp->add_option("--jobs", w_jobs);

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "fit thresholds / effective distances from results");
    std::string f_results, f_mode = "threshold";
    fit->add_option("results", f_results)->required();
    fit->add_option("--mode", f_mode, "threshold|effective_distance");

    // ---- lifecycle ----
    auto* lcc = app.add_subcommand("lifecycle", "per-role lifecycle metrics as CSV");
    std::string l_circuit;
    lcc->add_option("circuit", l_circuit)->required();

    // ---- overhead ----
    auto* ovh = app.add_subcommand("overhead", "space-time overhead of an SE method");
    std::string o_method = "conventional";
    uint32_t o_d = 3, o_rounds = 3;
    ovh->add_option("--method", o_method);
    ovh->add_option("-d,--distance", o_d);
    ovh->add_option("--rounds", o_rounds);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            SEConfig cfg;
            cfg.distance = g_d;
            cfg.rounds = g_rounds;
            cfg.swap_period = g_swap_period;
            cfg.detect_period = g_detect;
            cfg.replace_period = g_replace;
            cfg.variant = g_variant == "xzzx" ? CodeVariant::XZZX : CodeVariant::CSS;
            cfg.basis = g_basis.empty() ? 'Z' : g_basis[0];
            cfg.noiseless_first = !g_noisy_first;
            cfg.noiseless_last = !g_noisy_last;
            cfg.native_cx = g_native_cx;
            Circuit c;
            if (g_method == "random_clifford") {
                c = gen_random_clifford(g_logical, g_layers, g_nr, cfg, g_seed);
            } else if (g_method == "teleported_algorithm") {
                c = gen_teleported_algorithm(g_layers, cfg, g_seed);
            } else {
                cfg.method = method_from(g_method);
                c = gen_se(cfg);
            }
            if (g_p > 0) {
                NoiseSpec spec;
                spec.p_cz = g_p;
                spec.loss_fraction = g_L;
                spec.bias = g_eta;
                spec.model = g_model == "B"   ? ErrorModel::B
                             : g_model == "C" ? ErrorModel::C
                                              : ErrorModel::A;
                c = apply_noise(c, spec);
            }
            spit(g_out, emit_circuit(c));
        } else if (*smp) {
            Circuit c = parse_circuit(slurp(s_circuit));
            SampleOptions opts;
            opts.threads = s_jobs;
            opts.ground_truth = s_ground_truth;
            ShotBatch b = sample_shots(c, s_shots, s_seed, opts);
            std::ofstream out(s_out, std::ios::binary);
            write_shot_batch(b, out);
            std::cerr << "sampled " << b.n_shots << " shots: " << b.detector_count
                      << " detectors, " << b.observable_count << " observables, " << b.ssr_count
                      << " ssr records\n";
        } else if (*dec) {
            Circuit c = parse_circuit(slurp(d_circuit));
            std::ifstream in(d_shots, std::ios::binary);
            ShotBatch b = read_shot_batch(in);
            LifecycleDemCache cache = precompute_lifecycle_dems(c, d_jobs);
            LerOptions opts;
            opts.backend = d_backend == "mwpm" ? DecoderKind::Mwpm : DecoderKind::Mle;
            opts.handling = d_handling == "loss_blind"     ? LossHandling::LossBlind
                            : d_handling == "ground_truth" ? LossHandling::GroundTruth
                                                           : LossHandling::DelayedErasure;
            opts.omega = d_omega;
            opts.threads = d_jobs;
            LerEstimate est = logical_error_rate(b, cache, opts);
            std::cout << "{\"shots\":" << est.shots << ",\"failures\":" << est.failures
                      << ",\"ler\":" << est.ler << ",\"ci_lo\":" << est.ci_lo
                      << ",\"ci_hi\":" << est.ci_hi << ",\"p_l_max\":" << est.p_l_max
                      << ",\"decoder_errors\":" << est.decoder_errors << "}\n";
        } else if (*demc) {
            Circuit c = parse_circuit(slurp(m_circuit));
            spit(m_out, emit_dem(extract_dem(c)));
        } else if (*swp) {
            ExperimentConfig cfg = config_from_json(slurp(w_config));
            if (!w_out.empty()) cfg.out_path = w_out;
            if (w_jobs) cfg.threads = w_jobs;
            auto results = run_experiment(cfg, &std::cerr);
            if (!w_csv.empty()) spit(w_csv, results_csv(results));
        } else if (*fit) {
            std::vector<FitRecord> recs;
            std::istringstream in(slurp(f_results));
            std::string line;
            while (std::getline(in, line)) {
                auto r = point_result_from_json(line);
                if (r) recs.push_back({r->d, r->p_cz, r->shots, r->failures});
            }
            FitResult fr = f_mode == "effective_distance" ? fit_effective_distance(recs)
                                                          : fit_threshold(recs);
            std::cout << "{\"ok\":" << (fr.ok ? "true" : "false") << ",\"value\":" << fr.value
                      << ",\"stderr\":" << fr.stderr_ << ",\"second\":" << fr.second
                      << ",\"note\":\"" << fr.note << "\"}\n";
        } else if (*lcc) {
            Circuit c = parse_circuit(slurp(l_circuit));
            CompiledCircuit cc = validate_circuit(c);
            std::cout << metrics_csv(lifecycle_metrics(c, cc));
        } else if (*ovh) {
            std::cout << space_time_overhead(method_from(o_method), o_d, o_rounds) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
