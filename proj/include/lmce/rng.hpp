#ifndef LMCE_RNG_HPP
#define LMCE_RNG_HPP

#include <cstdint>
#include <random>

namespace lmce {

/// Deterministic uniform/normal draws on top of std::mt19937_64. The standard
/// distributions are implementation-defined, so the mappings are spelled out
/// here to keep outputs identical across library versions.
struct Rng {
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  double uniform01() { // [0, 1)
    return double(eng() >> 11) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }
  std::uint64_t integer(std::uint64_t n) { // [0, n)
    return eng() % n;
  }
  double normal() { // Box-Muller, one value per call pair kept simple
    double u1 = uniform01(), u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  std::mt19937_64 eng;
};

} // namespace lmce

#endif
