#pragma once

// Counter-based random streams (Philox4x32-10). Every draw is a pure
// function of (seed, stream label, sample index, block), so streams split
// into chunks and reproduce bit-for-bit under any worker count.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace gconc {

// Independent stream identifiers. Y, Y' and Y'' are the Gaussian copies of
// the interpolation identities; the rest keep estimators on disjoint draws.
enum class StreamLabel : std::uint32_t {
  Y = 0,
  YPrime = 1,
  YDoublePrime = 2,
  Pilot = 3,
  LemmaLhs = 4,
  Variance = 5,
  Tail = 6,
  Mgf = 7,
  ConditionProbe = 8,
  GrowthProbe = 9,
  Auxiliary = 10,
};

namespace detail {

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53U;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace detail

class CounterStream {
 public:
  CounterStream(std::uint64_t seed, StreamLabel label, std::uint32_t offset = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        label_(static_cast<std::uint32_t>(label) << 16 | (offset & 0xFFFFU)) {}

  // Two 64-bit words for (index, block).
  std::array<std::uint64_t, 2> bits(std::uint64_t index, std::uint32_t block) const {
    const auto out = detail::philox4x32_10(
        {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), block, label_},
        key_);
    return {static_cast<std::uint64_t>(out[0]) << 32 | out[1],
            static_cast<std::uint64_t>(out[2]) << 32 | out[3]};
  }

  // Uniform on [0, 1).
  static double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }
  // Uniform on (0, 1].
  static double to_unit_open_zero(std::uint64_t x) {
    return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
  }

  std::array<double, 2> uniform_pair(std::uint64_t index, std::uint32_t block) const {
    const auto b = bits(index, block);
    return {to_unit(b[0]), to_unit(b[1])};
  }

  // Fills `out` with i.i.d. N(0,1) draws belonging to sample `index`
  // (Box-Muller, two coordinates per block).
  void normal_vector(std::uint64_t index, std::span<double> out) const {
    for (std::size_t k = 0; k < out.size(); k += 2) {
      const auto b = bits(index, static_cast<std::uint32_t>(k / 2));
      const double radius = std::sqrt(-2.0 * std::log(to_unit_open_zero(b[0])));
      const double angle = 2.0 * std::numbers::pi * to_unit(b[1]);
      out[k] = radius * std::cos(angle);
      if (k + 1 < out.size()) out[k + 1] = radius * std::sin(angle);
    }
  }

  // Fills `out` with uniforms on [lo, hi) for sample `index`, starting at
  // block `first_block`.
  void uniform_vector(std::uint64_t index, std::span<double> out, double lo, double hi,
                      std::uint32_t first_block = 0) const {
    for (std::size_t k = 0; k < out.size(); k += 2) {
      const auto u = uniform_pair(index, first_block + static_cast<std::uint32_t>(k / 2));
      out[k] = lo + (hi - lo) * u[0];
      if (k + 1 < out.size()) out[k + 1] = lo + (hi - lo) * u[1];
    }
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t label_;
};

}  // namespace gconc
