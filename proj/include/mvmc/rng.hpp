#pragma once

#include <cstdint>
#include <random>

namespace mvmc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Per-path random substream keyed by (experiment seed, stream index). Each
// path draws only from its own stream, so results are bitwise reproducible
// no matter how paths are scheduled across workers.
class RngStream {
 public:
  RngStream(std::uint64_t experiment_seed, std::uint64_t stream_index) {
    std::uint64_t s = experiment_seed;
    splitmix64(s);
    s ^= 0xD1B54A32D192ED03ULL * (stream_index + 1);
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace mvmc
