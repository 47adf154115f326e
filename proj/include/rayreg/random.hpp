#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace rayreg {

/// SplitMix64 finalizer; used only to derive seeds, never as a generator.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a sequence of tags into one seed. Order matters.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t t : tags) h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

/// FNV-1a, for turning scenario names into substream tags.
constexpr std::uint64_t hash_name(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Caller-owned random stream. Output is identical on every platform because
/// the uniform mapping is done here rather than by std::uniform_real_distribution.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1): (k + 1/2) / 2^52 for k in [0, 2^52).
  /// Every value is exact in double, the largest being 1 - 2^-53.
  double uniform_open() noexcept {
    const std::uint64_t k = engine_() >> 12;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-52;
  }

  std::uint64_t next_u64() noexcept { return engine_(); }

  /// Independent stream keyed by (this stream's seed, tags).
  static RandomStream substream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    return RandomStream(derive_seed(seed, tags));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rayreg
