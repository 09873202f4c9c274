// Copyright 2026 The crossdim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// On-disk fixtures assembled byte by byte, independent of the library writers.
#pragma once

#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace crossdim::oracle {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "crossdim") {
    static int counter = 0;
    path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

template <typename V>
inline void put(std::string& b, std::size_t at, V v) {
  std::memcpy(b.data() + at, &v, sizeof(V));  // host is little-endian
}

/// NIfTI-1 single-file image: 348-byte header, 4 extension bytes, payload at 352.
inline std::string nifti_fixture(std::vector<std::int16_t> dims, std::int16_t datatype, std::int16_t bitpix,
                                 std::vector<float> pixdim, const std::string& payload, float slope = 0, float inter = 0) {
  std::string b(352, '\0');
  put<std::int32_t>(b, 0, 348);
  put<std::int16_t>(b, 40, static_cast<std::int16_t>(dims.size()));
  for (std::size_t i = 0; i < dims.size(); ++i) put<std::int16_t>(b, 42 + 2 * i, dims[i]);
  for (std::size_t i = dims.size() + 1; i < 8; ++i) put<std::int16_t>(b, 40 + 2 * i, 1);
  put<std::int16_t>(b, 70, datatype);
  put<std::int16_t>(b, 72, bitpix);
  put<float>(b, 76, 1.0f);
  for (std::size_t i = 0; i < pixdim.size(); ++i) put<float>(b, 80 + 4 * i, pixdim[i]);
  put<float>(b, 108, 352.0f);
  put<float>(b, 112, slope);
  put<float>(b, 116, inter);
  std::memcpy(b.data() + 344, "n+1\0", 4);
  return b + payload;
}

template <typename V>
std::string raw(const std::vector<V>& values) {
  std::string s(values.size() * sizeof(V), '\0');
  std::memcpy(s.data(), values.data(), s.size());
  return s;
}

inline void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace crossdim::oracle
