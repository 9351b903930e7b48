#pragma once

#include <cstdint>
#include <vector>

#include "qloss/rng.hpp"

namespace qloss {

// GF(2) affine form: constant bit XOR a set of fair-coin variables.
// Coins are the fresh random bits introduced by nondeterministic collapses
// ("innovations"); a measurement outcome is always such a form.
struct AffineBit {
    bool constant = false;
    std::vector<uint32_t> coins;  // sorted, deduplicated

    bool is_constant() const { return coins.empty(); }
    void xor_with(const AffineBit& other);
};

void xor_sorted(std::vector<uint32_t>& a, const std::vector<uint32_t>& b);

enum class CoinMode : uint8_t {
    Symbolic,  // fresh coin variable per nondeterministic outcome
    Random,    // draw from the attached Rng
    Zero,      // collapse to the 0 branch (canonical reference convention)
};

// Aaronson-Gottesman stabilizer tableau with destabilizers.
// In Symbolic mode every nondeterministic outcome becomes a fresh coin and
// all downstream signs carry their affine dependence on the coins.
class StabilizerSim {
  public:
    explicit StabilizerSim(uint32_t n, CoinMode mode = CoinMode::Symbolic, Rng* rng = nullptr);

    uint32_t num_qubits() const { return n_; }
    uint32_t num_coins() const { return next_coin_; }
    bool symbolic() const { return mode_ == CoinMode::Symbolic; }

    void set_rng(Rng* rng) { rng_ = rng; }
    void set_coin_mode(CoinMode mode, Rng* rng) {
        mode_ = mode;
        rng_ = rng;
    }
    // Fresh coin not tied to a collapse (RANDOM_M markers).
    AffineBit external_coin();

    void do_h(uint32_t q);
    void do_s(uint32_t q);
    void do_s_dag(uint32_t q);
    void do_x(uint32_t q);
    void do_y(uint32_t q);
    void do_z(uint32_t q);
    void do_cx(uint32_t c, uint32_t t);
    void do_cz(uint32_t a, uint32_t b);
    void do_swap(uint32_t a, uint32_t b);

    AffineBit measure_z(uint32_t q);
    AffineBit measure_x(uint32_t q);
    void reset_z(uint32_t q);
    void reset_x(uint32_t q);
    // Forces the qubit to |state> in the Z basis after a collapse.
    void reset_to(uint32_t q, bool one);

    // Applies X^form (used to force reset outcomes symbolically).
    void conditional_x(uint32_t q, const AffineBit& form);
    void conditional_z(uint32_t q, const AffineBit& form);

  private:
    uint32_t n_;
    uint32_t words_;
    CoinMode mode_;
    Rng* rng_;
    uint32_t next_coin_ = 0;

    // Row-major bit-packed tableau. Rows [0, n) destabilizers, [n, 2n) stabilizers.
    std::vector<uint64_t> xs_;
    std::vector<uint64_t> zs_;
    std::vector<uint8_t> sign_;
    std::vector<std::vector<uint32_t>> sign_coins_;  // symbolic mode only

    uint64_t* xrow(uint32_t r) { return &xs_[(size_t)r * words_]; }
    uint64_t* zrow(uint32_t r) { return &zs_[(size_t)r * words_]; }
    bool xbit(uint32_t r, uint32_t q) const {
        return (xs_[(size_t)r * words_ + q / 64] >> (q % 64)) & 1;
    }
    bool zbit(uint32_t r, uint32_t q) const {
        return (zs_[(size_t)r * words_ + q / 64] >> (q % 64)) & 1;
    }

    void rowsum(uint32_t h, uint32_t i);
    int pauli_phase_exponent(const uint64_t* x1, const uint64_t* z1, const uint64_t* x2,
                             const uint64_t* z2) const;
    AffineBit fresh_coin();
};

}  // namespace qloss
