#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ndgan {

using Rng = std::mt19937_64;

/// Derives independent generators from one master seed. Each named stream is a
/// pure function of (seed, name), so adding a consumer never shifts the draws
/// another consumer sees.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  Rng stream(std::string_view name) const { return Rng(derive(name, 0)); }
  Rng stream(std::string_view name, std::uint64_t index) const { return Rng(derive(name, index + 1)); }

  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

 private:
  std::uint64_t derive(std::string_view name, std::uint64_t index) const {
    return derive_seed(seed_, name, index);
  }
  std::uint64_t seed_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t RngStreams::derive_seed(std::uint64_t seed, std::string_view name,
                                             std::uint64_t index) {
  // FNV-1a over the stream name, then mixed with the seed and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed ^ h) + index);
}

}  // namespace ndgan
