#pragma once

#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace sophia {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

namespace detail {
inline std::uint64_t mix_part(std::uint64_t h, std::string_view part) {
  return splitmix64(h ^ fnv1a64(part));
}
template <std::integral T>
std::uint64_t mix_part(std::uint64_t h, T part) {
  return splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(part) + 0x51ed27a1ULL));
}
inline std::uint64_t mix_part(std::uint64_t h, const std::string& part) {
  return mix_part(h, std::string_view(part));
}
inline std::uint64_t mix_part(std::uint64_t h, const char* part) {
  return mix_part(h, std::string_view(part));
}
}  // namespace detail

/// Derives an independent stream seed from a base seed and a key path such as
/// (task_id, "caption", k). Keys are hashed, so item order never matters.
template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t base, const Parts&... parts) {
  std::uint64_t h = splitmix64(base);
  ((h = detail::mix_part(h, parts)), ...);
  return h;
}

/// mt19937_64 with explicitly defined draws, so streams are identical across
/// standard library implementations (std distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_below(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sophia
