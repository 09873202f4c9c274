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

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "crossdim/atomic_io.hpp"
#include "crossdim/weight_store.hpp"
#include "json.hpp"

namespace crossdim {

namespace fs = std::filesystem;
using json = nlohmann::json;

// --- atomic file helpers -------------------------------------------------------

fs::path staging_path(const fs::path& target) {
  static std::atomic<unsigned> counter{0};
  fs::path parent = target.parent_path();
  if (parent.empty()) parent = ".";
  return parent / ("." + target.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                   std::to_string(counter++));
}

void commit_staged(const fs::path& staged, const fs::path& target) {
  std::error_code ec;
  if (fs::is_directory(target)) {
    fs::path old = staging_path(target);
    fs::rename(target, old, ec);
    if (ec) throw IoError("cannot replace " + target.string() + ": " + ec.message());
    fs::rename(staged, target, ec);
    if (ec) {
      fs::rename(old, target);
      throw IoError("cannot move " + staged.string() + " to " + target.string() + ": " + ec.message());
    }
    fs::remove_all(old);
    return;
  }
  fs::rename(staged, target, ec);
  if (ec) throw IoError("cannot move " + staged.string() + " to " + target.string() + ": " + ec.message());
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  fs::path tmp = staging_path(path);
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
      os.close();
      fs::remove(tmp);
      throw IoError("write failed for " + path.string());
    }
  }
  commit_staged(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// --- scalar payloads ------------------------------------------------------------

namespace {

template <typename U>
void append_le(std::string& out, U v) {
  unsigned char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  out.append(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U read_le(const char* p) {
  unsigned char buf[sizeof(U)];
  std::memcpy(buf, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  U v;
  std::memcpy(&v, buf, sizeof(U));
  return v;
}

template <typename T>
std::string encode_blob(const Tensor<T>& t, Dtype dtype) {
  std::string out;
  const std::size_t width = dtype == Dtype::float32 ? 4 : 8;
  out.reserve(t.numel() * width);
  for (T v : t.data()) {
    if (dtype == Dtype::float32) {
      append_le<float>(out, static_cast<float>(v));
    } else {
      append_le<double>(out, static_cast<double>(v));
    }
  }
  return out;
}

template <typename T>
Tensor<T> decode_blob(const std::string& bytes, const Shape& shape, Dtype dtype, const std::string& name) {
  const std::size_t width = dtype == Dtype::float32 ? 4 : 8;
  const auto count = static_cast<std::size_t>(shape_numel(shape));
  if (bytes.size() != count * width) {
    throw FormatError("payload for '" + name + "' has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(count * width));
  }
  std::vector<T> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (dtype == Dtype::float32) {
      data[i] = static_cast<T>(read_le<float>(bytes.data() + i * 4));
    } else {
      data[i] = static_cast<T>(read_le<double>(bytes.data() + i * 8));
    }
  }
  return Tensor<T>(shape, std::move(data));
}

// --- minimal ustar archive -------------------------------------------------------

void put_octal(char* field, std::size_t width, std::uint64_t value) {
  std::string s(width - 1, '0');
  for (std::size_t i = width - 1; i-- > 0 && value;) {
    s[i] = static_cast<char>('0' + (value & 7));
    value >>= 3;
  }
  std::memcpy(field, s.data(), width - 1);
  field[width - 1] = '\0';
}

std::string tar_archive(const std::vector<std::pair<std::string, std::string>>& files) {
  std::string out;
  for (const auto& [name, body] : files) {
    if (name.size() >= 100) throw IoError("archive member name too long: " + name);
    char h[512] = {};
    std::memcpy(h, name.data(), name.size());
    put_octal(h + 100, 8, 0644);
    put_octal(h + 108, 8, 0);
    put_octal(h + 116, 8, 0);
    put_octal(h + 124, 12, body.size());
    put_octal(h + 136, 12, 0);
    h[156] = '0';
    std::memcpy(h + 257, "ustar", 6);
    std::memcpy(h + 263, "00", 2);
    std::memset(h + 148, ' ', 8);
    unsigned sum = 0;
    for (unsigned char c : h) sum += c;
    put_octal(h + 148, 7, sum);
    h[155] = ' ';
    out.append(h, 512);
    out += body;
    out.append((512 - body.size() % 512) % 512, '\0');
  }
  out.append(1024, '\0');
  return out;
}

std::map<std::string, std::string> tar_extract(const std::string& bytes, const std::string& origin) {
  std::map<std::string, std::string> files;
  std::size_t pos = 0;
  while (pos + 512 <= bytes.size()) {
    const char* h = bytes.data() + pos;
    if (std::all_of(h, h + 512, [](char c) { return c == '\0'; })) break;
    std::string name(h, strnlen(h, 100));
    std::uint64_t size = 0;
    for (int i = 0; i < 12 && h[124 + i] >= '0' && h[124 + i] <= '7'; ++i) size = size * 8 + (h[124 + i] - '0');
    pos += 512;
    if (pos + size > bytes.size()) throw IoError("truncated archive member '" + name + "' in " + origin);
    if (h[156] == '0' || h[156] == '\0') files[name] = bytes.substr(pos, size);
    pos += (size + 511) / 512 * 512;
  }
  return files;
}

bool is_archive_path(const fs::path& p) { return p.extension() == ".tar"; }

}  // namespace

template <typename T>
std::string manifest_json(const WeightStore<T>& store) {
  json j;
  j["format"] = "crossdim-checkpoint";
  j["version"] = 1;
  j["dtype"] = to_string(store.dtype());
  json meta;
  meta["source"] = store.meta().source;
  meta["inflation"] = to_string(store.meta().inflation);
  meta["depth_used"] = store.meta().depth_used ? json(*store.meta().depth_used) : json(nullptr);
  j["meta"] = meta;
  json entries = json::array();
  for (std::size_t i = 0; i < store.entries().size(); ++i) {
    const auto& e = store.entries()[i];
    entries.push_back({{"index", i},
                       {"name", e.name},
                       {"role", to_string(e.role)},
                       {"rank", e.rank},
                       {"shape", e.value.shape()},
                       {"norm", e.norm ? json(to_string(*e.norm)) : json(nullptr)},
                       {"file", std::to_string(i) + ".bin"}});
  }
  j["entries"] = entries;
  return j.dump(2) + "\n";
}

template <typename T>
void save_checkpoint(const WeightStore<T>& store, const fs::path& path) {
  store.validate();
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("manifest.json", manifest_json(store));
  for (std::size_t i = 0; i < store.entries().size(); ++i) {
    files.emplace_back(std::to_string(i) + ".bin", encode_blob(store.entries()[i].value, store.dtype()));
  }
  if (is_archive_path(path)) {
    write_file_atomic(path, tar_archive(files));
    return;
  }
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  fs::path tmp = staging_path(path);
  try {
    fs::create_directories(tmp);
    for (const auto& [name, body] : files) {
      std::ofstream os(tmp / name, std::ios::binary);
      os.write(body.data(), static_cast<std::streamsize>(body.size()));
      if (!os) throw IoError("write failed for " + (tmp / name).string());
    }
    commit_staged(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

template <typename T>
WeightStore<T> load_checkpoint(const fs::path& path) {
  std::map<std::string, std::string> archive;
  const bool archived = is_archive_path(path) && fs::is_regular_file(path);
  if (archived) {
    archive = tar_extract(read_file(path), path.string());
  } else if (!fs::is_directory(path)) {
    throw IoError("checkpoint " + path.string() + " is neither a directory nor a .tar archive");
  }
  auto member = [&](const std::string& name) -> std::string {
    if (archived) {
      auto it = archive.find(name);
      if (it == archive.end()) throw IoError("checkpoint " + path.string() + " lacks " + name);
      return it->second;
    }
    if (!fs::exists(path / name)) throw IoError("checkpoint " + path.string() + " lacks " + name);
    return read_file(path / name);
  };

  json j;
  try {
    j = json::parse(member("manifest.json"));
  } catch (const json::parse_error& e) {
    throw FormatError("malformed manifest in " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "crossdim-checkpoint") {
      throw FormatError("unrecognized checkpoint format in " + path.string());
    }
    const Dtype dtype = dtype_from_string(j.at("dtype").get<std::string>());
    WeightStore<T> store;
    store.set_dtype(dtype);
    const json& meta = j.at("meta");
    store.meta().source = meta.at("source").get<std::string>();
    store.meta().inflation = inflation_mode_from_string(meta.at("inflation").get<std::string>());
    if (!meta.at("depth_used").is_null()) store.meta().depth_used = meta.at("depth_used").get<int>();
    for (const json& e : j.at("entries")) {
      const std::string name = e.at("name").get<std::string>();
      const Shape shape = e.at("shape").get<Shape>();
      const std::string file = e.at("file").get<std::string>();
      Tensor<T> value = decode_blob<T>(member(file), shape, dtype, name);
      std::optional<NormMode> norm;
      if (e.contains("norm") && !e.at("norm").is_null()) norm = norm_mode_from_string(e.at("norm").get<std::string>());
      store.add(name, param_role_from_string(e.at("role").get<std::string>()), e.at("rank").get<int>(),
                std::move(value), norm);
    }
    store.validate();
    return store;
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest in " + path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid checkpoint contents: ") + e.what());
  }
}

template void save_checkpoint(const WeightStore<float>&, const fs::path&);
template void save_checkpoint(const WeightStore<double>&, const fs::path&);
template WeightStore<float> load_checkpoint(const fs::path&);
template WeightStore<double> load_checkpoint(const fs::path&);
template std::string manifest_json(const WeightStore<float>&);
template std::string manifest_json(const WeightStore<double>&);

}  // namespace crossdim
