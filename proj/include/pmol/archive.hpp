//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_ARCHIVE_HPP
#define PMOL_ARCHIVE_HPP

#include <map>
#include <string>

#include "pmol/common.hpp"

namespace pmol {

// Named-array container: a JSON index (names and shapes) followed by raw
// little-endian doubles.  Round trips are bit exact.
void write_archive(const std::string& path,
                   const std::map<std::string, Mat>& arrays);
std::map<std::string, Mat> read_archive(const std::string& path);

}  // namespace pmol

#endif  // PMOL_ARCHIVE_HPP
