#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace pgdro {

// Seeded random source with platform-independent derived distributions.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The standard library's distributions are not, so uniform reals,
// bounded integers and Gaussians are derived here:
//   uniform()        53 high bits of one draw, scaled into [0, 1)
//   uniform_index(n) modulo after rejecting the low 2^64 mod n draws
//   normal()         Box-Muller, both variates used (the second is cached)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform();

  std::size_t uniform_index(std::size_t n);

  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates, last to first.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Counter-based seed derivation: splitmix64 finalizer applied to
// master + (stream + 1) * golden-ratio increment. Stages of a run draw their
// seeds from fixed stream ids, so any stage can be rerun in isolation.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace pgdro
