#include "qloss/tableau.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace qloss {

void xor_sorted(std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    if (b.empty()) return;
    std::vector<uint32_t> out;
    out.reserve(a.size() + b.size());
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) out.push_back(a[i++]);
        else if (b[j] < a[i]) out.push_back(b[j++]);
        else { i++; j++; }
    }
    out.insert(out.end(), a.begin() + i, a.end());
    out.insert(out.end(), b.begin() + j, b.end());
    a = std::move(out);
}

void AffineBit::xor_with(const AffineBit& other) {
    constant ^= other.constant;
    xor_sorted(coins, other.coins);
}

StabilizerSim::StabilizerSim(uint32_t n, CoinMode mode, Rng* rng)
    : n_(n), words_((n + 63) / 64), mode_(mode), rng_(rng) {
    xs_.assign((size_t)2 * n_ * words_, 0);
    zs_.assign((size_t)2 * n_ * words_, 0);
    sign_.assign(2 * n_, 0);
    if (symbolic()) sign_coins_.assign(2 * n_, {});
    for (uint32_t i = 0; i < n_; i++) {
        xrow(i)[i / 64] |= 1ull << (i % 64);       // destabilizer X_i
        zrow(n_ + i)[i / 64] |= 1ull << (i % 64);  // stabilizer Z_i
    }
}

void StabilizerSim::do_h(uint32_t q) {
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) {
        uint64_t& x = xrow(r)[w];
        uint64_t& z = zrow(r)[w];
        sign_[r] ^= ((x & z & m) != 0);
        uint64_t xb = x & m, zb = z & m;
        x = (x & ~m) | zb;
        z = (z & ~m) | xb;
    }
}

void StabilizerSim::do_s(uint32_t q) {
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) {
        uint64_t& x = xrow(r)[w];
        uint64_t& z = zrow(r)[w];
        sign_[r] ^= ((x & z & m) != 0);
        z ^= x & m;
    }
}

void StabilizerSim::do_s_dag(uint32_t q) {
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) {
        uint64_t& x = xrow(r)[w];
        uint64_t& z = zrow(r)[w];
        sign_[r] ^= ((x & ~z & m) != 0);
        z ^= x & m;
    }
}

void StabilizerSim::do_x(uint32_t q) {
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) sign_[r] ^= ((zrow(r)[w] & m) != 0);
}

void StabilizerSim::do_z(uint32_t q) {
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) sign_[r] ^= ((xrow(r)[w] & m) != 0);
}

void StabilizerSim::do_y(uint32_t q) {
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    for (uint32_t r = 0; r < 2 * n_; r++)
        sign_[r] ^= (((xrow(r)[w] ^ zrow(r)[w]) & m) != 0);
}

void StabilizerSim::do_cx(uint32_t c, uint32_t t) {
    uint32_t wc = c / 64, wt = t / 64;
    uint64_t mc = 1ull << (c % 64), mt = 1ull << (t % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) {
        uint64_t* x = xrow(r);
        uint64_t* z = zrow(r);
        bool xc = x[wc] & mc, zc = z[wc] & mc, xt = x[wt] & mt, zt = z[wt] & mt;
        sign_[r] ^= (xc & zt & (xt == zc));
        if (xc) x[wt] ^= mt;
        if (zt) z[wc] ^= mc;
    }
}

void StabilizerSim::do_cz(uint32_t a, uint32_t b) {
    uint32_t wa = a / 64, wb = b / 64;
    uint64_t ma = 1ull << (a % 64), mb = 1ull << (b % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) {
        uint64_t* x = xrow(r);
        uint64_t* z = zrow(r);
        bool xa = x[wa] & ma, za = z[wa] & ma, xb = x[wb] & mb, zb = z[wb] & mb;
        sign_[r] ^= (xa & xb & (za ^ zb));
        if (xb) z[wa] ^= ma;
        if (xa) z[wb] ^= mb;
    }
}

void StabilizerSim::do_swap(uint32_t a, uint32_t b) {
    uint32_t wa = a / 64, wb = b / 64;
    uint64_t ma = 1ull << (a % 64), mb = 1ull << (b % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) {
        uint64_t* x = xrow(r);
        uint64_t* z = zrow(r);
        bool xa = x[wa] & ma, xb = x[wb] & mb;
        if (xa != xb) { x[wa] ^= ma; x[wb] ^= mb; }
        bool za = z[wa] & ma, zb = z[wb] & mb;
        if (za != zb) { z[wa] ^= ma; z[wb] ^= mb; }
    }
}

int StabilizerSim::pauli_phase_exponent(const uint64_t* x1, const uint64_t* z1,
                                        const uint64_t* x2, const uint64_t* z2) const {
    long acc = 0;
    for (uint32_t w = 0; w < words_; w++) {
        uint64_t a = x1[w], b = z1[w], c = x2[w], d = z2[w];
        uint64_t plus = (a & b & d & ~c) | (a & ~b & d & c) | (~a & b & c & ~d);
        uint64_t minus = (a & b & c & ~d) | (a & ~b & d & ~c) | (~a & b & c & d);
        acc += std::popcount(plus) - std::popcount(minus);
    }
    return (int)(((acc % 4) + 4) % 4);
}

// Row h := row h * row i (Pauli product with exact phase bookkeeping).
void StabilizerSim::rowsum(uint32_t h, uint32_t i) {
    int g = pauli_phase_exponent(xrow(i), zrow(i), xrow(h), zrow(h));
    int phase = (2 * (int)sign_[h] + 2 * (int)sign_[i] + g) % 4;
    // Valid stabilizer rows always multiply to a +/-1 phase.
    sign_[h] = (uint8_t)(phase >> 1);
    if (symbolic()) xor_sorted(sign_coins_[h], sign_coins_[i]);
    uint64_t* xh = xrow(h);
    uint64_t* zh = zrow(h);
    const uint64_t* xi = xrow(i);
    const uint64_t* zi = zrow(i);
    for (uint32_t w = 0; w < words_; w++) {
        xh[w] ^= xi[w];
        zh[w] ^= zi[w];
    }
}

AffineBit StabilizerSim::fresh_coin() {
    switch (mode_) {
        case CoinMode::Random: return {rng_->next_bool(), {}};
        case CoinMode::Zero: return {false, {}};
        default: return {false, {next_coin_++}};
    }
}

AffineBit StabilizerSim::external_coin() { return fresh_coin(); }

AffineBit StabilizerSim::measure_z(uint32_t q) {
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    uint32_t p = UINT32_MAX;
    for (uint32_t r = n_; r < 2 * n_; r++) {
        if (xrow(r)[w] & m) { p = r; break; }
    }
    if (p != UINT32_MAX) {
        // Nondeterministic: collapse, outcome is a fresh coin.
        for (uint32_t r = 0; r < 2 * n_; r++) {
            if (r != p && (xrow(r)[w] & m)) rowsum(r, p);
        }
        // Destabilizer p-n := old stabilizer p; stabilizer p := +/-Z_q.
        uint32_t d = p - n_;
        std::memcpy(xrow(d), xrow(p), words_ * 8);
        std::memcpy(zrow(d), zrow(p), words_ * 8);
        sign_[d] = sign_[p];
        if (symbolic()) sign_coins_[d] = sign_coins_[p];
        std::memset(xrow(p), 0, words_ * 8);
        std::memset(zrow(p), 0, words_ * 8);
        zrow(p)[w] |= m;
        AffineBit outcome = fresh_coin();
        sign_[p] = outcome.constant;
        if (symbolic()) sign_coins_[p] = outcome.coins;
        return outcome;
    }
    // Deterministic: accumulate stabilizer product into a scratch row.
    std::vector<uint64_t> sx(words_, 0), sz(words_, 0);
    AffineBit out{false, {}};
    int phase = 0;
    for (uint32_t r = 0; r < n_; r++) {
        if (!(xrow(r)[w] & m)) continue;
        uint32_t s = r + n_;
        int g = pauli_phase_exponent(xrow(s), zrow(s), sx.data(), sz.data());
        phase = (phase + 2 * (int)sign_[s] + g) % 4;
        if (symbolic()) xor_sorted(out.coins, sign_coins_[s]);
        for (uint32_t ww = 0; ww < words_; ww++) {
            sx[ww] ^= xrow(s)[ww];
            sz[ww] ^= zrow(s)[ww];
        }
    }
    out.constant = (phase >> 1) & 1;
    return out;
}

AffineBit StabilizerSim::measure_x(uint32_t q) {
    do_h(q);
    AffineBit r = measure_z(q);
    do_h(q);
    return r;
}

void StabilizerSim::conditional_x(uint32_t q, const AffineBit& form) {
    if (form.constant == false && form.coins.empty()) return;
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) {
        if (zrow(r)[w] & m) {
            sign_[r] ^= form.constant;
            if (symbolic()) xor_sorted(sign_coins_[r], form.coins);
        }
    }
}

void StabilizerSim::conditional_z(uint32_t q, const AffineBit& form) {
    if (form.constant == false && form.coins.empty()) return;
    uint32_t w = q / 64;
    uint64_t m = 1ull << (q % 64);
    for (uint32_t r = 0; r < 2 * n_; r++) {
        if (xrow(r)[w] & m) {
            sign_[r] ^= form.constant;
            if (symbolic()) xor_sorted(sign_coins_[r], form.coins);
        }
    }
}

void StabilizerSim::reset_z(uint32_t q) {
    AffineBit m = measure_z(q);
    conditional_x(q, m);
}

void StabilizerSim::reset_to(uint32_t q, bool one) {
    reset_z(q);
    if (one) do_x(q);
}

void StabilizerSim::reset_x(uint32_t q) {
    reset_z(q);
    do_h(q);
}

}  // namespace qloss
