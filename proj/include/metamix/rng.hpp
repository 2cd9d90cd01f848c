#pragma once

#include <array>
#include <cmath>
#include <cstdint>

// Counter-based random number generation (Philox 4x32-10).
//
// Every random quantity in a simulation is drawn from a stream addressed by
// (seed; replicate, study, kind). Streams are stateless functions of their
// address, so a replicate produces identical draws no matter which worker
// runs it or in what order - the property the bit-identical parallel report
// guarantee rests on.
//
// Stream address layout in the 128-bit Philox counter:
//   word 0: running draw index within the stream
//   word 1: kind (what the draws are for, see StreamKind)
//   word 2: study index
//   word 3: replicate index
// The 64-bit seed forms the key.

namespace metamix {

enum class StreamKind : uint32_t {
  proportion = 0,    // treated-arm proportions pi_j
  variance = 1,      // residual / random-effect variance draws
  study_effect = 2,  // per-study random intercepts and slopes
  response = 3,      // individual-level responses
  partition = 4,     // random S1 subset choices
  pilot = 5,         // pilot-study choices
  subsample = 6,     // IPD subsampling (e.g. n_j = 50 cohort draws)
  misc = 7,
};

namespace detail {

// Philox 4x32 round and bump constants.
inline constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> ctr,
                                             uint64_t key) {
  uint32_t k0 = static_cast<uint32_t>(key);
  uint32_t k1 = static_cast<uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * ctr[0];
    uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * ctr[2];
    std::array<uint32_t, 4> next{
        static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
        static_cast<uint32_t>(p1),
        static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
        static_cast<uint32_t>(p0),
    };
    ctr = next;
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return ctr;
}

}  // namespace detail

class RngStream {
 public:
  RngStream(uint64_t seed, uint32_t replicate, uint32_t study, StreamKind kind)
      : key_(seed),
        kind_(static_cast<uint32_t>(kind)),
        study_(study),
        replicate_(replicate) {}

  uint64_t next_u64() {
    if (buffered_ == 0) refill();
    --buffered_;
    uint64_t out = buf_[buffered_];
    return out;
  }

  // Uniform on the open interval (0, 1); never returns an endpoint, so
  // log(u) and Bernoulli comparisons are always well defined.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the pair partner is cached.
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = next_unit();
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * M_PI * u2;
    cached_ = r * std::sin(t);
    have_cached_ = true;
    return r * std::cos(t);
  }

  double next_normal(double mean, double sd) { return mean + sd * next_normal(); }

  // Unbiased-enough integer in [0, n) via 128-bit multiply; n small here.
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Gamma with integer shape: sum of exponentials, -log prod u_i / rate.
  double next_gamma_int(int shape, double rate) {
    double prod = 1.0;
    for (int i = 0; i < shape; ++i) prod *= next_unit();
    return -std::log(prod) / rate;
  }

  // Inverse gamma (shape, scale): 1 / Gamma(shape, rate = scale).
  double next_inv_gamma_int(int shape, double scale) {
    return 1.0 / next_gamma_int(shape, scale);
  }

  // Beta with integer shapes via two gammas.
  double next_beta_int(int a, int b) {
    double ga = next_gamma_int(a, 1.0);
    double gb = next_gamma_int(b, 1.0);
    return ga / (ga + gb);
  }

 private:
  void refill() {
    std::array<uint32_t, 4> ctr{static_cast<uint32_t>(block_), kind_, study_,
                                replicate_};
    auto words = detail::philox4x32_10(ctr, key_);
    buf_[0] = (static_cast<uint64_t>(words[0]) << 32) | words[1];
    buf_[1] = (static_cast<uint64_t>(words[2]) << 32) | words[3];
    buffered_ = 2;
    ++block_;
  }

  uint64_t key_;
  uint32_t kind_, study_, replicate_;
  uint32_t block_ = 0;
  std::array<uint64_t, 2> buf_{};
  int buffered_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace metamix
