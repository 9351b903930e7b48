#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qloss/circuit.hpp"
#include "qloss/noise.hpp"

using namespace qloss;

TEST_CASE("model A loss-only channel") {
    NoiseSpec s;
    s.p_cz = 0.01;
    s.loss_fraction = 1.0;
    auto t = derive_channel_model_a(s);
    CHECK(t.loss == doctest::Approx(1.0 - std::sqrt(0.99)).epsilon(1e-12));
    CHECK(t.loss == doctest::Approx(0.00501256289).epsilon(1e-6));
    CHECK(t.px == 0.0);
    CHECK(t.py == 0.0);
    CHECK(t.pz == 0.0);
}

TEST_CASE("model A depolarizing split at eta=1") {
    NoiseSpec s;
    s.p_cz = 0.02;
    s.loss_fraction = 0.0;
    s.bias = 1.0;
    auto t = derive_channel_model_a(s);
    double p = 1.0 - std::sqrt(1.0 - 0.02);
    CHECK(t.px == doctest::Approx(p / 4));
    CHECK(t.py == doctest::Approx(p / 4));
    CHECK(t.pz == doctest::Approx(p / 2));
    CHECK(t.loss == 0.0);
}

TEST_CASE("model A infinite bias") {
    NoiseSpec s;
    s.p_cz = 0.02;
    s.loss_fraction = 0.25;
    s.bias = kInfiniteBias;
    auto t = derive_channel_model_a(s);
    double p = 1.0 - std::sqrt(0.98);
    CHECK(t.px == 0.0);
    CHECK(t.py == 0.0);
    CHECK(t.pz == doctest::Approx(0.75 * p).epsilon(1e-12));
}

TEST_CASE("model A normalization identity") {
    for (double L : {0.0, 0.3, 0.5, 0.9, 1.0}) {
        for (double eta : {0.5, 1.0, 10.0}) {
            NoiseSpec s;
            s.p_cz = 0.013;
            s.loss_fraction = L;
            s.bias = eta;
            auto t = derive_channel_model_a(s);
            double p = 1.0 - std::sqrt(1.0 - s.p_cz);
            CHECK(std::abs(t.loss + t.px + t.py + t.pz - p) < 1e-12);
            if (L == 1.0) CHECK(t.px + t.py + t.pz == 0.0);
            if (L == 0.0) CHECK(t.loss == 0.0);
        }
    }
}

TEST_CASE("model B four equal terms") {
    NoiseSpec s;
    s.p_cz = 0.01;
    s.loss_fraction = 1.0;
    s.model = ErrorModel::B;
    auto t = derive_channel_model_b(s);
    REQUIRE(t.corr2.size() == 4);
    for (double x : t.corr2) CHECK(x == doctest::Approx(0.00250628).epsilon(1e-5));
}

TEST_CASE("model B rejects partial loss and zero rate is empty") {
    NoiseSpec s;
    s.p_cz = 0.01;
    s.loss_fraction = 0.5;
    s.model = ErrorModel::B;
    CHECK_THROWS(derive_channel_model_b(s));
    s.loss_fraction = 1.0;
    s.p_cz = 0.0;
    CHECK(derive_channel_model_b(s).corr2.empty());
}

TEST_CASE("movement error closed form") {
    CHECK(movement_error(0.001, 10.0, 1.0) == doctest::Approx(0.0099552).epsilon(1e-4));
    CHECK(movement_error(0.001, 0.0, 1.0) == 0.0);
    CHECK(movement_error(0.0, 100.0, 1.0) == 0.0);
    // non-integral T/tau rounds up
    CHECK(movement_error(0.5, 1.5, 1.0) == doctest::Approx(1.0 - 0.25));
}

TEST_CASE("apply_noise structure for model A") {
    Circuit c = parse_circuit("RX 0\nTICK\nCZ 0 1\nTICK\nM 0\n");
    NoiseSpec s;
    s.p_cz = 0.01;
    s.loss_fraction = 0.5;
    Circuit n = apply_noise(c, s);
    int loss = 0, pauli = 0;
    for (auto& ins : n.instructions) {
        if (ins.op == Op::LOSS) loss += ins.targets.size();
        if (ins.op == Op::PAULI1) pauli += ins.targets.size();
    }
    CHECK(loss == 2);
    CHECK(pauli == 2);
}

TEST_CASE("apply_noise model B emits correlated terms") {
    Circuit c = parse_circuit("RX 0\nTICK\nCZ 0 1\nTICK\nM 0\n");
    NoiseSpec s;
    s.p_cz = 0.01;
    s.loss_fraction = 1.0;
    s.model = ErrorModel::B;
    Circuit n = apply_noise(c, s);
    int corr = 0;
    for (auto& ins : n.instructions)
        if (ins.op == Op::CORR_LOSS2) corr++;
    CHECK(corr == 1);
}

TEST_CASE("apply_noise model C flags erasure") {
    Circuit c = parse_circuit("RX 0\nTICK\nCZ 0 1\nTICK\nM 0\n");
    NoiseSpec s;
    s.p_cz = 0.01;
    s.loss_fraction = 1.0;
    s.model = ErrorModel::C;
    Circuit n = apply_noise(c, s);
    bool flagged = false;
    for (auto& ins : n.instructions)
        if (ins.op == Op::LOSS && ins.params.size() == 2 && ins.params[1] == 1.0) flagged = true;
    CHECK(flagged);
}

TEST_CASE("noiseless windows are skipped") {
    Circuit c = parse_circuit("#!noiseless_ticks 0 0\nRX 0\nCZ 0 1\nTICK\nCZ 0 1\nTICK\nM 0\n");
    NoiseSpec s;
    s.p_cz = 0.01;
    s.loss_fraction = 0.5;
    Circuit n = apply_noise(c, s);
    int annotated = 0;
    for (auto& ins : n.instructions)
        if (ins.op == Op::LOSS || ins.op == Op::PAULI1) annotated++;
    CHECK(annotated == 2);  // only the second CZ gets LOSS + PAULI1
}

TEST_CASE("apply_noise deterministic output text") {
    Circuit c = parse_circuit("RX 0\nTICK\nCZ 0 1\nTICK\nCZ 1 2\nTICK\nM 0\n");
    NoiseSpec s;
    s.p_cz = 0.0123;
    s.loss_fraction = 0.37;
    s.bias = 2.5;
    CHECK(emit_circuit(apply_noise(c, s)) == emit_circuit(apply_noise(c, s)));
}

TEST_CASE("movement marks become pauli channels") {
    Circuit c = parse_circuit("#!movement 2 0\nRX 0\nTICK\nCZ 0 1\nTICK\nM 0\n");
    NoiseSpec s;
    s.p_cz = 0.01;
    s.p_idle = 0.001;
    s.motion_time = 10.0;
    s.slot_time = 1.0;
    Circuit n = apply_noise(c, s);
    bool move_channel = false;
    for (auto& ins : n.instructions)
        if (ins.op == Op::PAULI1 && ins.params[0] == ins.params[2] &&
            std::abs(3 * ins.params[0] - 0.0099552) < 1e-4)
            move_channel = true;
    CHECK(move_channel);
}
