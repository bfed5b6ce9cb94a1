#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "lars/matrix.hpp"

namespace lars {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// 64-bit FNV-1a over bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Seeded pseudo-random stream. All randomness in the library flows through
// one root seed: named substreams (data, init, train, eval, ...) and
// numbered shards are derived by hashing, so adding a consumer never
// shifts the draws of another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng substream(std::string_view name) const { return Rng(mix64(seed_ ^ fnv1a64(name))); }
  Rng shard(std::uint64_t index) const { return Rng(mix64(seed_ + mix64(index + 0x9e3779b97f4a7c15ULL))); }

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t next_u64() { return engine_(); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  Matrix normal_matrix(std::size_t rows, std::size_t cols);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace lars
