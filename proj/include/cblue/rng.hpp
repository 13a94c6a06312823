#pragma once

#include <array>
#include <cstdint>

namespace cblue {

// Philox4x32-10 counter-based generator. Stateless: each (seed, stream,
// index) maps to an independent block of randomness, so Monte Carlo
// replicates can be generated in any order with bit-identical results.
class Philox {
 public:
  explicit Philox(uint64_t seed, uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::array<uint32_t, 4> block(uint64_t index) const;

  // Standard normal draws via Box-Muller over the 64-bit uniforms of one
  // block; draw i of the stream is independent of all other draws.
  double normal(uint64_t index) const;

  double uniform(uint64_t index) const;

 private:
  uint64_t seed_;
  uint64_t stream_;
};

}  // namespace cblue
