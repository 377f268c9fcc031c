#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace sflow {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Stateless: output is a pure function of (counter, key).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Standard normal keyed by (seed, a, b, stream). Each key tuple maps to
/// one fixed value regardless of evaluation order.
inline double counter_normal(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint64_t stream) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const Philox4x32::Counter ctr{a, b, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  const auto r = Philox4x32::generate(ctr, key);
  const std::uint64_t w0 = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
  const std::uint64_t w1 = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
  // u1 in (0, 1], u2 in [0, 1).
  const double u1 = (static_cast<double>(w0 >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace sflow
