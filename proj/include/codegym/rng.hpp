#pragma once

#include <cstdint>
#include <string_view>

namespace codegym {

// splitmix64. Chosen over <random> because the standard distributions are
// implementation-defined, and generated manifests must not depend on the
// standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [lo, hi], inclusive. Rejection sampling, no modulo bias.
  std::int64_t uniform(std::int64_t lo, std::int64_t hi);

  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return unit() < p; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a parent seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                          std::uint64_t index = 0);

}  // namespace codegym
