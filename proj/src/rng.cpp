#include "mfl/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mfl/errors.hpp"

namespace mfl {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// Uniform in the open interval (0, 1) with 53 bits of resolution.
inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

NormalStream::NormalStream(PhiloxKey key, StreamDomain domain,
                           std::uint32_t index, std::uint32_t step) noexcept
    : key_(key),
      counter_{0u, index, step, static_cast<std::uint32_t>(domain)} {}

void NormalStream::refill() {
  const PhiloxCounter block = philox4x32_10(counter_, key_);
  ++counter_[0];
  // Box-Muller on two independent uniforms gives two independent normals.
  const double u1 = to_unit_open(block[0], block[1]);
  const double u2 = to_unit_open(block[2], block[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  buffer_[0] = radius * std::cos(angle);
  buffer_[1] = radius * std::sin(angle);
  buffered_ = 2;
}

double NormalStream::next() {
  if (buffered_ == 0) refill();
  return buffer_[2 - buffered_--];
}

void NormalStream::fill(std::span<double> out) {
  for (double& value : out) value = next();
}

RngStreams::RngStreams(std::uint64_t master_seed) noexcept
    : seed_(master_seed),
      key_{static_cast<std::uint32_t>(master_seed),
           static_cast<std::uint32_t>(master_seed >> 32)} {}

NormalStream RngStreams::stream(StreamDomain domain, std::uint64_t index,
                                std::uint64_t step) const {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (index > kMax || step > kMax) {
    throw ConfigError("rng substream index out of range: index=" +
                      std::to_string(index) + " step=" + std::to_string(step));
  }
  return NormalStream(key_, domain, static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(step));
}

}  // namespace mfl
