#pragma once

#include <cstdint>

namespace cas {

/// Selects the serial reference loop or the OpenMP kernel. Both produce
/// identical results; the serial path exists for testing and benchmarking.
enum class Execution { serial, parallel };

/// SplitMix64 finalizer; used to derive independent per-stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix_seed(mix_seed(base) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

}  // namespace cas
