#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <vector>

namespace dapolab {

// Stateless 64-bit mixer used to derive independent stream seeds from a
// global seed plus a list of integer coordinates (prompt id, rollout step,
// response index, ...). Streams derived from distinct coordinate tuples are
// decorrelated, so concurrent rollouts stay bitwise-reproducible no matter
// how they are scheduled.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t seed, Parts... parts) {
  return derive_seed({seed, static_cast<std::uint64_t>(parts)...});
}

// Deterministic random stream. All draws are built from raw mt19937_64
// output words (whose sequence the standard pins down exactly), not from
// std::uniform_*_distribution, which is implementation-defined. This keeps
// every sampled trajectory byte-identical across compilers and platforms.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RandomStream::below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  // Fisher-Yates with our own bounded draws (std::shuffle is
  // implementation-defined).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Fixed tags for the independent stream families used across a run.
namespace stream_tag {
inline constexpr std::uint64_t init_params = 1;
inline constexpr std::uint64_t dataset = 2;
inline constexpr std::uint64_t eval_set = 3;
inline constexpr std::uint64_t prompt_order = 4;
inline constexpr std::uint64_t partition = 5;
inline constexpr std::uint64_t rollout = 6;
inline constexpr std::uint64_t eval_sampling = 7;
}  // namespace stream_tag

}  // namespace dapolab
