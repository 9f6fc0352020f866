#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mfl {

// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as easy
// as 1, 2, 3"). Stateless: the output is a pure function of counter and key.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

// Independent purposes draw from disjoint counter spaces.
enum class StreamDomain : std::uint32_t {
  kStepNoise = 0,
  kInit = 1,
  kData = 2,
  kOracle = 3,
};

// Sequential standard-normal generator over one (domain, index, step) substream.
class NormalStream {
 public:
  NormalStream(PhiloxKey key, StreamDomain domain, std::uint32_t index,
               std::uint32_t step) noexcept;

  double next();
  void fill(std::span<double> out);

 private:
  void refill();

  PhiloxKey key_;
  PhiloxCounter counter_;
  std::array<double, 2> buffer_{};
  int buffered_ = 0;
};

// Counter-based random streams keyed by a master seed. The noise drawn for
// (domain, index, step) never depends on evaluation order.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t master_seed) noexcept;

  std::uint64_t master_seed() const noexcept { return seed_; }

  NormalStream stream(StreamDomain domain, std::uint64_t index,
                      std::uint64_t step) const;

  // Step noise for one particle at one integrator step.
  NormalStream particle_step(std::uint64_t particle, std::uint64_t step) const {
    return stream(StreamDomain::kStepNoise, particle, step);
  }

 private:
  std::uint64_t seed_;
  PhiloxKey key_;
};

}  // namespace mfl
