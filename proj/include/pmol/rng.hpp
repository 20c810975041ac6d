//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_RNG_HPP
#define PMOL_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "pmol/common.hpp"

namespace pmol {

// Deterministic random stream.  Gaussian draws go through an explicit
// Box-Muller transform so the stream does not depend on the standard
// library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  double uniform();                       // [0, 1)
  double normal();                        // standard normal
  int uniform_int(int n);                 // {0, ..., n-1}, n >= 1
  int categorical(const RowVec& probs);   // index by probability row

  // Matrix of i.i.d. standard normals.
  Mat normal_matrix(int rows, int cols);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[i], v[uniform_int(i + 1)]);
  }

  // Independent child stream; distinct ids give decorrelated streams.
  Rng spawn(std::uint64_t child_id) const;

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
  std::uint64_t seed_ = 0;
};

// Stateless 64-bit mix used for child-stream derivation and hashing.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

}  // namespace pmol

#endif  // PMOL_RNG_HPP
