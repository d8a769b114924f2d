#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace ndgan {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  return fnv1a64({reinterpret_cast<const unsigned char*>(s.data()), s.size()}, h);
}

inline std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t h = kFnvOffset) {
  for (double v : values) {
    unsigned char b[8];
    std::memcpy(b, &v, 8);
    h = fnv1a64(std::span<const unsigned char>(b, 8), h);
  }
  return h;
}

}  // namespace ndgan
