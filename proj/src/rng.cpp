//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/rng.hpp"

#include <cmath>

namespace pmol {

double Rng::uniform() {
  // 53-bit mantissa resolution, strictly inside [0, 1).
  return (engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int Rng::uniform_int(int n) {
  if (n < 1) fail_runtime("uniform_int requires n >= 1, got ", n);
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<int>(x % bound);
}

int Rng::categorical(const RowVec& probs) {
  const double total = probs.sum();
  if (!(total > 0.0) || !probs.allFinite() || probs.minCoeff() < -1e-12)
    fail_runtime("categorical draw needs a non-negative row with positive mass");
  double u = uniform() * total;
  for (int k = 0; k < probs.size(); ++k) {
    u -= probs[k];
    if (u < 0.0) return k;
  }
  return static_cast<int>(probs.size()) - 1;
}

Mat Rng::normal_matrix(int rows, int cols) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

Rng Rng::spawn(std::uint64_t child_id) const {
  return Rng(mix64(seed_ ^ mix64(child_id + 0x9e3779b97f4a7c15ULL)));
}

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer; stable across platforms.
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ (mix64(value) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

}  // namespace pmol
