#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace apt {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed derivation. A stream is identified by the master seed
/// followed by any number of counters (stream tag, round, row, chain...).
/// The result depends only on the counter values, never on call order, so
/// parallel or reordered evaluation reproduces the same draws.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = mix64(master);
  for (auto c : counters) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> counters) {
  return Rng(derive_seed(master, counters));
}

/// Stream tags used with derive_seed.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kProposal = 2;
inline constexpr std::uint64_t kSimulate = 3;
inline constexpr std::uint64_t kTrain = 4;
inline constexpr std::uint64_t kPosterior = 5;
inline constexpr std::uint64_t kMcmc = 6;
inline constexpr std::uint64_t kEval = 7;
inline constexpr std::uint64_t kObserved = 8;
inline constexpr std::uint64_t kSimulatorSetup = 9;
inline constexpr std::uint64_t kAbc = 10;
inline constexpr std::uint64_t kPermutation = 11;
}  // namespace stream

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
inline double std_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace apt
