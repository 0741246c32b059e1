#pragma once

#include "mthin/geometry.hpp"

#include <cstdint>
#include <random>

namespace mthin {

/// Uniform double in (0, 1) built from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Halton sequence with per-base random digit permutations (0 kept fixed).
class ScrambledHalton {
 public:
  ScrambledHalton(int dim, std::uint64_t seed);
  Point next();

 private:
  std::vector<int> bases_;
  std::vector<std::vector<int>> perms_;
  std::uint64_t index_ = 0;
};

/// n quasi-uniform points in a bounded region. The first d-1 coordinates come
/// from the sequence, the last is placed along the fibers, and a rejection step
/// on fiber length restores uniformity. Throws NumericError with fewer than 50
/// accepted points.
PointList sample_region(const Region& region, int n, std::uint64_t seed);

}  // namespace mthin
