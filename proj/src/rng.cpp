#include "cblue/rng.hpp"

#include <cmath>
#include <numbers>

namespace cblue {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t* hi, uint32_t* lo) {
  uint64_t p = static_cast<uint64_t>(a) * b;
  *hi = static_cast<uint32_t>(p >> 32);
  *lo = static_cast<uint32_t>(p);
}

}  // namespace

std::array<uint32_t, 4> Philox::block(uint64_t index) const {
  uint32_t c0 = static_cast<uint32_t>(index);
  uint32_t c1 = static_cast<uint32_t>(index >> 32);
  uint32_t c2 = static_cast<uint32_t>(stream_);
  uint32_t c3 = static_cast<uint32_t>(stream_ >> 32);
  uint32_t k0 = static_cast<uint32_t>(seed_);
  uint32_t k1 = static_cast<uint32_t>(seed_ >> 32);
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c0, &hi0, &lo0);
    mulhilo(kPhiloxM1, c2, &hi1, &lo1);
    uint32_t n0 = hi1 ^ c1 ^ k0;
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ c3 ^ k1;
    uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return {c0, c1, c2, c3};
}

double Philox::uniform(uint64_t index) const {
  auto b = block(index);
  uint64_t bits = (static_cast<uint64_t>(b[0]) << 32) | b[1];
  // 53-bit mantissa in (0, 1); never exactly 0 so log() below is safe.
  return ((bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double Philox::normal(uint64_t index) const {
  auto b = block(index >> 1);
  uint64_t u_bits = (static_cast<uint64_t>(b[0]) << 32) | b[1];
  uint64_t v_bits = (static_cast<uint64_t>(b[2]) << 32) | b[3];
  double u = ((u_bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  double v = ((v_bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  double r = std::sqrt(-2.0 * std::log(u));
  double ang = 2.0 * std::numbers::pi * v;
  return (index & 1) ? r * std::sin(ang) : r * std::cos(ang);
}

}  // namespace cblue
