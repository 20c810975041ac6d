//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_COMMON_HPP
#define PMOL_COMMON_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmol {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Raised for malformed inputs: bad configs, bad documents, contract
// violations at module boundaries.  Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised for failures of otherwise well-formed runs (I/O, numerical
// blow-ups, missing checkpoints).  Maps to CLI exit code 3.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

template <typename... Args>
[[noreturn]] void fail_config(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw ConfigError(os.str());
}

template <typename... Args>
[[noreturn]] void fail_runtime(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw RuntimeError(os.str());
}

// Adds the values in sorted order, so any permutation of the same multiset
// gives a bit-identical result.  Reductions over atoms use this to keep
// model outputs exactly permutation equivariant.
inline double canonical_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

template <typename... Args>
void log_warn(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  std::cerr << "[promptmol] warning: " << os.str() << "\n";
}

template <typename... Args>
void log_info(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  std::cerr << "[promptmol] " << os.str() << "\n";
}

}  // namespace pmol

#endif  // PMOL_COMMON_HPP
