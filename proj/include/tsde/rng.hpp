#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace tsde {

// Counter-based randomness. Every draw is addressed by
//   (master_seed, stream_tag, path_index, step_index, draw_index)
// so simulations are reproducible for any parallel schedule, and common
// random numbers across parameter changes come for free. The generator is
// Philox-4x32-10; the key is the 64-bit master seed, the counter packs the
// four stream coordinates.

namespace philox {

inline constexpr std::uint32_t kMult0 = 0xD2511F53u;
inline constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t(kMult0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(kMult1) * ctr[2];
    ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
           std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
    if (round < 9) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
  }
  return ctr;
}

}  // namespace philox

/// Stream classes. Distinct tags decouple every ensemble the harness runs.
enum class Stream : std::uint32_t {
  variable_step = 1,
  reference = 2,
  reference_pair = 3,
  one_step = 4,
  tangent = 5,
  projection = 6,
  probe_mc = 7,
};

/// Tags carry an 8-bit class and a 24-bit subchannel (checkpoint ordinal,
/// refinement level, ...).
inline std::uint32_t stream_tag(Stream s, std::uint32_t sub = 0) {
  return (std::uint32_t(s) << 24) | (sub & 0x00FFFFFFu);
}

namespace detail {

inline std::uint64_t to_u64(std::uint32_t hi, std::uint32_t lo) {
  return (std::uint64_t(hi) << 32) | lo;
}

// 53-bit mantissa uniforms; u_open in (0, 1] keeps log() finite.
inline double unit_open(std::uint64_t z) { return double((z >> 11) + 1) * 0x1.0p-53; }
inline double unit_half_open(std::uint64_t z) { return double(z >> 11) * 0x1.0p-53; }

}  // namespace detail

/// One Philox block mapped to a pair of standard normals by Box-Muller.
/// This transform is the repository-wide contract: changing it changes every
/// simulated number.
inline std::array<double, 2> normal_pair(std::uint64_t master_seed, std::uint32_t tag,
                                         std::uint32_t path_index, std::uint32_t step_index,
                                         std::uint32_t draw_index) {
  const auto words = philox::block(
      {tag, path_index, step_index, draw_index},
      {std::uint32_t(master_seed), std::uint32_t(master_seed >> 32)});
  const double u1 = detail::unit_open(detail::to_u64(words[0], words[1]));
  const double u2 = detail::unit_half_open(detail::to_u64(words[2], words[3]));
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Fills out[0..n) with standard normals for one (path, step) address.
inline void normal_fill(std::uint64_t master_seed, std::uint32_t tag, std::uint32_t path_index,
                        std::uint32_t step_index, double* out, int n) {
  int i = 0;
  std::uint32_t draw = 0;
  while (i < n) {
    const auto z = normal_pair(master_seed, tag, path_index, step_index, draw++);
    out[i++] = z[0];
    if (i < n) out[i++] = z[1];
  }
}

/// Single uniform in [0, 1) at a counter address; used by quasi-independent
/// auxiliary choices that should not consume the normal stream.
inline double uniform_at(std::uint64_t master_seed, std::uint32_t tag, std::uint32_t path_index,
                         std::uint32_t step_index, std::uint32_t draw_index) {
  const auto words = philox::block(
      {tag, path_index, step_index, draw_index},
      {std::uint32_t(master_seed), std::uint32_t(master_seed >> 32)});
  return detail::unit_half_open(detail::to_u64(words[0], words[1]));
}

}  // namespace tsde
