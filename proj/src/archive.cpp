//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/archive.hpp"

#include <cstdint>
#include <fstream>

#include <json.hpp>

namespace pmol {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'P', 'M', 'A', 'R', '0', '0', '1', '\n'};
}

void write_archive(const std::string& path,
                   const std::map<std::string, Mat>& arrays) {
  json index = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : arrays) {
    index[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}};
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
  }
  const std::string header = index.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail_runtime("cannot write archive ", path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t header_len = header.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, m] : arrays) {
    (void)name;
    for (long r = 0; r < m.rows(); ++r) {
      const RowVec row = m.row(r);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
  }
  if (!out) fail_runtime("failed writing archive ", path);
}

std::map<std::string, Mat> read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_runtime("cannot open archive ", path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, sizeof(magic)) != std::string(kMagic, sizeof(kMagic)))
    fail_runtime("not an array archive: ", path);
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) fail_runtime("truncated archive header in ", path);
  json index;
  try {
    index = json::parse(header);
  } catch (const json::parse_error& e) {
    fail_runtime("bad archive index in ", path, ": ", e.what());
  }

  std::map<std::string, Mat> arrays;
  const std::streampos data_start = in.tellg();
  for (const auto& [name, entry] : index.items()) {
    const long rows = entry.at("rows").get<long>();
    const long cols = entry.at("cols").get<long>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    Mat m(rows, cols);
    in.seekg(data_start + static_cast<std::streamoff>(offset));
    for (long r = 0; r < rows; ++r) {
      RowVec row(cols);
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(cols * sizeof(double)));
      m.row(r) = row;
    }
    if (!in) fail_runtime("truncated array ", name, " in ", path);
    arrays.emplace(name, std::move(m));
  }
  return arrays;
}

}  // namespace pmol
