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

#include "crossdim/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "crossdim/atomic_io.hpp"

namespace crossdim {

namespace fs = std::filesystem;

Extents LabeledVolume::extents() const {
  if (image.rank() == 3) return {1, image.dim(1), image.dim(2)};
  if (image.rank() == 4) return {image.dim(1), image.dim(2), image.dim(3)};
  throw DimensionError("image must be [C, H, W] or [C, D, H, W], got " + shape_to_string(image.shape()));
}

void LabeledVolume::validate() const {
  const Extents e = extents();
  for (double s : spacing)
    if (!(s > 0) || !std::isfinite(s)) throw ValidationError(case_id + ": voxel spacing must be positive and finite");
  if (labels && !(labels->extents == e)) {
    throw ValidationError(case_id + ": label extents " + labels->extents.str() + " differ from image " + e.str());
  }
}

namespace {

// --- byte helpers ------------------------------------------------------------

template <typename U>
U load_scalar(const char* p, bool swap) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, p, sizeof(U));
  if (swap) std::reverse(b, b + sizeof(U));
  U v;
  std::memcpy(&v, b, sizeof(U));
  return v;
}

template <typename U>
void store_le(char* p, U v) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
  std::memcpy(p, b, sizeof(U));
}

constexpr bool kLittleHost = std::endian::native == std::endian::little;

std::size_t voxel_bytes(VoxelType t) {
  switch (t) {
    case VoxelType::uint8: return 1;
    case VoxelType::int16: return 2;
    case VoxelType::int32: return 4;
    case VoxelType::float32: return 4;
    case VoxelType::float64: return 8;
  }
  return 1;
}

std::optional<VoxelType> voxel_type_from_code(int code) {
  switch (code) {
    case 2: return VoxelType::uint8;
    case 4: return VoxelType::int16;
    case 8: return VoxelType::int32;
    case 16: return VoxelType::float32;
    case 64: return VoxelType::float64;
    default: return std::nullopt;
  }
}

/// Decodes `count` scalars stored with the given byte order.
std::vector<double> decode(const char* p, std::size_t count, VoxelType t, bool big_endian_data) {
  const bool swap = big_endian_data == kLittleHost;
  std::vector<double> out(count);
  const std::size_t w = voxel_bytes(t);
  for (std::size_t i = 0; i < count; ++i, p += w) {
    switch (t) {
      case VoxelType::uint8: out[i] = static_cast<unsigned char>(*p); break;
      case VoxelType::int16: out[i] = load_scalar<std::int16_t>(p, swap); break;
      case VoxelType::int32: out[i] = load_scalar<std::int32_t>(p, swap); break;
      case VoxelType::float32: out[i] = load_scalar<float>(p, swap); break;
      case VoxelType::float64: out[i] = load_scalar<double>(p, swap); break;
    }
  }
  return out;
}

std::string encode_le(const std::vector<double>& values, VoxelType t) {
  std::string out(values.size() * voxel_bytes(t), '\0');
  char* p = out.data();
  for (double v : values) {
    switch (t) {
      case VoxelType::uint8:
      case VoxelType::int16:
      case VoxelType::int32: {
        const double lo = t == VoxelType::uint8 ? 0 : t == VoxelType::int16 ? -32768.0 : -2147483648.0;
        const double hi = t == VoxelType::uint8 ? 255 : t == VoxelType::int16 ? 32767.0 : 2147483647.0;
        if (v != std::round(v) || v < lo || v > hi) {
          throw ValidationError("value " + std::to_string(v) + " is not representable in the integer voxel type");
        }
        if (t == VoxelType::uint8) {
          *p = static_cast<char>(static_cast<unsigned char>(v));
        } else if (t == VoxelType::int16) {
          store_le<std::int16_t>(p, static_cast<std::int16_t>(v));
        } else {
          store_le<std::int32_t>(p, static_cast<std::int32_t>(v));
        }
        break;
      }
      case VoxelType::float32: store_le<float>(p, static_cast<float>(v)); break;
      case VoxelType::float64: store_le<double>(p, v); break;
    }
    p += voxel_bytes(t);
  }
  return out;
}

std::string read_maybe_gzip(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = 0;
  const char* msg = gzerror(f, &err);
  const std::string detail = msg ? msg : "";
  gzclose(f);
  if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) throw IoError("read error in " + path.string() + ": " + detail);
  return out;
}

bool has_suffix(const fs::path& p, const std::string& suffix) {
  const std::string s = p.string();
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_gzip_atomic(const fs::path& path, const std::string& bytes) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = staging_path(path);
  gzFile f = gzopen(tmp.string().c_str(), "wb6");
  if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
  const int n = bytes.empty() ? 0 : gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  const int rc = gzclose(f);
  if (n != static_cast<int>(bytes.size()) || rc != Z_OK) {
    fs::remove(tmp);
    throw IoError("write failed for " + path.string());
  }
  commit_staged(tmp, path);
}

/// Assembles [C, (D,) H, W] from channel-major voxel data.
Tensor<double> make_image(std::vector<double> data, std::int64_t c, std::int64_t nz, std::int64_t ny, std::int64_t nx) {
  if (nz == 1) return Tensor<double>({c, ny, nx}, std::move(data));
  return Tensor<double>({c, nz, ny, nx}, std::move(data));
}

// --- NIfTI-1 ---------------------------------------------------------------------

LabeledVolume read_nifti(const fs::path& path) {
  const std::string bytes = read_maybe_gzip(path);
  const std::string where = path.string();
  if (bytes.size() < 348) throw IoError(where + ": truncated NIfTI header (" + std::to_string(bytes.size()) + " bytes)");
  const char* h = bytes.data();
  bool swap = false;
  if (load_scalar<std::int32_t>(h, false) != 348) {
    if (load_scalar<std::int32_t>(h, true) != 348) throw FormatError(where + ": sizeof_hdr is not 348");
    swap = true;
  }
  if (std::memcmp(h + 344, "n+1\0", 4) != 0) {
    if (std::memcmp(h + 344, "ni1\0", 4) == 0) throw FormatError(where + ": magic 'ni1' (split header/image pair) is not supported");
    throw FormatError(where + ": magic is not 'n+1'");
  }
  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = load_scalar<std::int16_t>(h + 40 + 2 * i, swap);
  if (dim[0] < 2 || dim[0] > 7) throw FormatError(where + ": dim[0] = " + std::to_string(dim[0]) + " outside 2..7");
  for (int i = 5; i <= dim[0]; ++i)
    if (dim[i] != 1) throw FormatError(where + ": dim[" + std::to_string(i) + "] must be 1 (at most 4 axes supported)");
  std::int64_t n[4] = {1, 1, 1, 1};
  for (int i = 1; i <= std::min<int>(dim[0], 4); ++i) {
    if (dim[i] < 1) throw FormatError(where + ": dim[" + std::to_string(i) + "] = " + std::to_string(dim[i]));
    n[i - 1] = dim[i];
  }
  const std::int16_t code = load_scalar<std::int16_t>(h + 70, swap);
  const auto type = voxel_type_from_code(code);
  if (!type) throw FormatError(where + ": datatype " + std::to_string(code) + " is not supported (uint8, int16, int32, float32, float64)");
  const std::int16_t bitpix = load_scalar<std::int16_t>(h + 72, swap);
  if (bitpix != static_cast<std::int16_t>(8 * voxel_bytes(*type))) {
    throw FormatError(where + ": bitpix " + std::to_string(bitpix) + " inconsistent with datatype " + std::to_string(code));
  }
  float pixdim[8];
  for (int i = 0; i < 8; ++i) pixdim[i] = load_scalar<float>(h + 76 + 4 * i, swap);
  const float vox_offset = load_scalar<float>(h + 108, swap);
  const float slope = load_scalar<float>(h + 112, swap);
  const float inter = load_scalar<float>(h + 116, swap);
  if (!(vox_offset >= 348) || vox_offset != std::floor(vox_offset)) {
    throw FormatError(where + ": vox_offset " + std::to_string(vox_offset) + " is invalid");
  }
  const std::size_t count = static_cast<std::size_t>(n[0] * n[1] * n[2] * n[3]);
  const std::size_t offset = static_cast<std::size_t>(vox_offset);
  const std::size_t need = offset + count * voxel_bytes(*type);
  if (bytes.size() < need) {
    throw IoError(where + ": truncated payload (" + std::to_string(bytes.size()) + " of " + std::to_string(need) + " bytes)");
  }
  const bool data_big_endian = swap ? kLittleHost : !kLittleHost;
  std::vector<double> data = decode(h + offset, count, *type, data_big_endian);
  if (slope != 0 && std::isfinite(slope) && !(slope == 1 && inter == 0)) {
    for (double& v : data) v = v * static_cast<double>(slope) + static_cast<double>(inter);
  }
  LabeledVolume v;
  v.image = make_image(std::move(data), n[3], n[2], n[1], n[0]);
  auto spacing = [](float s) { return s > 0 && std::isfinite(s) ? static_cast<double>(s) : 1.0; };
  v.spacing = {n[2] > 1 ? spacing(pixdim[3]) : 1.0, spacing(pixdim[2]), spacing(pixdim[1])};
  v.case_id = path.filename().string();
  return v;
}

std::string nifti_bytes(const LabeledVolume& v, VoxelType type) {
  const Extents e = v.extents();
  const std::int64_t c = v.channels();
  char h[352] = {};
  store_le<std::int32_t>(h, 348);
  std::int16_t dim[8] = {0, 1, 1, 1, 1, 1, 1, 1};
  dim[1] = static_cast<std::int16_t>(e.width);
  dim[2] = static_cast<std::int16_t>(e.height);
  dim[3] = static_cast<std::int16_t>(e.depth);
  dim[4] = static_cast<std::int16_t>(c);
  dim[0] = c > 1 ? 4 : (e.depth > 1 ? 3 : 2);
  for (std::int64_t x : {e.width, e.height, e.depth, c})
    if (x > 32767) throw ValidationError("extent " + std::to_string(x) + " exceeds the NIfTI-1 limit");
  for (int i = 0; i < 8; ++i) store_le<std::int16_t>(h + 40 + 2 * i, dim[i]);
  store_le<std::int16_t>(h + 70, static_cast<std::int16_t>(type));
  store_le<std::int16_t>(h + 72, static_cast<std::int16_t>(8 * voxel_bytes(type)));
  const float pixdim[8] = {1.0f, static_cast<float>(v.spacing[2]), static_cast<float>(v.spacing[1]),
                           static_cast<float>(v.spacing[0]), 1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) store_le<float>(h + 76 + 4 * i, pixdim[i]);
  store_le<float>(h + 108, 352.0f);
  store_le<float>(h + 112, 1.0f);
  store_le<float>(h + 116, 0.0f);
  h[123] = 10;  // xyzt_units: mm, s
  std::memcpy(h + 344, "n+1\0", 4);
  std::string out(h, sizeof(h));
  out += encode_le(v.image.storage(), type);
  return out;
}

// --- MetaImage -----------------------------------------------------------------

std::map<std::string, std::string> parse_mhd(const std::string& text, std::size_t& header_end) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  header_end = text.size();
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    kv[key] = trim(line.substr(eq + 1));
    if (key == "ElementDataFile") {
      header_end = std::min(pos, text.size());
      break;
    }
  }
  return kv;
}

std::vector<double> parse_numbers(const std::string& s, const std::string& field, const std::string& where) {
  std::istringstream is(s);
  std::vector<double> out;
  double x;
  while (is >> x) out.push_back(x);
  if (!is.eof() || out.empty()) throw FormatError(where + ": cannot parse " + field + " '" + s + "'");
  return out;
}

LabeledVolume read_mhd(const fs::path& path) {
  const std::string where = path.string();
  const std::string text = read_file(path);
  std::size_t header_end = 0;
  const auto kv = parse_mhd(text, header_end);
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(where + ": missing " + key);
    return it->second;
  };
  if (auto it = kv.find("CompressedData"); it != kv.end() && (it->second == "True" || it->second == "true")) {
    throw FormatError(where + ": CompressedData True is not supported");
  }
  const int ndims = static_cast<int>(parse_numbers(get("NDims"), "NDims", where)[0]);
  if (ndims != 2 && ndims != 3) throw FormatError(where + ": NDims " + std::to_string(ndims) + " is not 2 or 3");
  const auto dims = parse_numbers(get("DimSize"), "DimSize", where);
  if (static_cast<int>(dims.size()) != ndims) throw FormatError(where + ": DimSize has " + std::to_string(dims.size()) + " values");
  std::vector<double> spacing(static_cast<std::size_t>(ndims), 1.0);
  if (kv.count("ElementSpacing")) spacing = parse_numbers(kv.at("ElementSpacing"), "ElementSpacing", where);
  if (static_cast<int>(spacing.size()) != ndims) throw FormatError(where + ": ElementSpacing has " + std::to_string(spacing.size()) + " values");
  std::int64_t channels = 1;
  if (kv.count("ElementNumberOfChannels")) {
    channels = static_cast<std::int64_t>(parse_numbers(kv.at("ElementNumberOfChannels"), "ElementNumberOfChannels", where)[0]);
  }
  static const std::map<std::string, VoxelType> types{{"MET_UCHAR", VoxelType::uint8},
                                                      {"MET_SHORT", VoxelType::int16},
                                                      {"MET_INT", VoxelType::int32},
                                                      {"MET_FLOAT", VoxelType::float32},
                                                      {"MET_DOUBLE", VoxelType::float64}};
  const std::string& et = get("ElementType");
  auto tit = types.find(et);
  if (tit == types.end()) throw FormatError(where + ": ElementType " + et + " is not supported");
  bool msb = false;
  for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"}) {
    if (auto it = kv.find(key); it != kv.end()) msb = it->second == "True" || it->second == "true";
  }
  const std::string& file = get("ElementDataFile");
  std::string payload;
  if (file == "LOCAL") {
    payload = text.substr(header_end);
  } else {
    fs::path data_path = fs::path(file).is_absolute() ? fs::path(file) : path.parent_path() / file;
    payload = read_file(data_path);
  }
  if (auto it = kv.find("HeaderSize"); it != kv.end()) {
    const double skip = parse_numbers(it->second, "HeaderSize", where)[0];
    if (skip < 0) throw FormatError(where + ": HeaderSize -1 is not supported");
    if (static_cast<std::size_t>(skip) > payload.size()) throw IoError(where + ": truncated payload");
    payload.erase(0, static_cast<std::size_t>(skip));
  }
  const std::int64_t nx = static_cast<std::int64_t>(dims[0]), ny = static_cast<std::int64_t>(dims[1]);
  const std::int64_t nz = ndims == 3 ? static_cast<std::int64_t>(dims[2]) : 1;
  if (nx < 1 || ny < 1 || nz < 1 || channels < 1) throw FormatError(where + ": non-positive DimSize");
  const std::size_t plane = static_cast<std::size_t>(nx * ny * nz);
  const std::size_t count = plane * static_cast<std::size_t>(channels);
  if (payload.size() < count * voxel_bytes(tit->second)) {
    throw IoError(where + ": truncated payload (" + std::to_string(payload.size()) + " of " +
                  std::to_string(count * voxel_bytes(tit->second)) + " bytes)");
  }
  const std::vector<double> interleaved = decode(payload.data(), count, tit->second, msb);
  std::vector<double> data(count);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::int64_t c = 0; c < channels; ++c)
      data[static_cast<std::size_t>(c) * plane + i] = interleaved[i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
  LabeledVolume v;
  v.image = make_image(std::move(data), channels, nz, ny, nx);
  v.spacing = {ndims == 3 ? spacing[2] : 1.0, spacing[1], spacing[0]};
  v.case_id = path.filename().string();
  return v;
}

void write_mhd(const fs::path& path, const LabeledVolume& v, VoxelType type) {
  const Extents e = v.extents();
  const bool planar = v.spatial_rank() == 2;
  const std::int64_t c = v.channels();
  const std::size_t plane = static_cast<std::size_t>(e.numel());
  std::vector<double> interleaved(v.image.numel());
  for (std::size_t i = 0; i < plane; ++i)
    for (std::int64_t k = 0; k < c; ++k)
      interleaved[i * static_cast<std::size_t>(c) + static_cast<std::size_t>(k)] = v.image[static_cast<std::size_t>(k) * plane + i];
  static const std::map<VoxelType, std::string> names{{VoxelType::uint8, "MET_UCHAR"},
                                                      {VoxelType::int16, "MET_SHORT"},
                                                      {VoxelType::int32, "MET_INT"},
                                                      {VoxelType::float32, "MET_FLOAT"},
                                                      {VoxelType::float64, "MET_DOUBLE"}};
  fs::path raw = path;
  raw.replace_extension(".raw");
  std::ostringstream os;
  os.precision(17);
  os << "ObjectType = Image\n";
  os << "NDims = " << (planar ? 2 : 3) << "\n";
  os << "BinaryData = True\nBinaryDataByteOrderMSB = False\nCompressedData = False\n";
  os << "DimSize = " << e.width << ' ' << e.height;
  if (!planar) os << ' ' << e.depth;
  os << "\nElementSpacing = " << v.spacing[2] << ' ' << v.spacing[1];
  if (!planar) os << ' ' << v.spacing[0];
  os << "\n";
  if (c > 1) os << "ElementNumberOfChannels = " << c << "\n";
  os << "ElementType = " << names.at(type) << "\n";
  os << "ElementDataFile = " << raw.filename().string() << "\n";
  write_file_atomic(raw, encode_le(interleaved, type));
  write_file_atomic(path, os.str());
}

}  // namespace

LabeledVolume load_volume(const fs::path& path) {
  LabeledVolume v;
  if (has_suffix(path, ".mhd")) {
    v = read_mhd(path);
  } else if (has_suffix(path, ".nii") || has_suffix(path, ".nii.gz")) {
    v = read_nifti(path);
  } else {
    throw FormatError(path.string() + ": unrecognized extension (expected .nii, .nii.gz or .mhd)");
  }
  v.validate();
  return v;
}

LabelMap load_label_map(const fs::path& path, Spacing* spacing) {
  const LabeledVolume v = load_volume(path);
  if (v.channels() != 1) throw FormatError(path.string() + ": label file has " + std::to_string(v.channels()) + " channels");
  LabelMap m(v.extents());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double x = v.image[i];
    if (x != std::round(x) || std::abs(x) > 2147483647.0) {
      throw FormatError(path.string() + ": label value " + std::to_string(x) + " is not an integer");
    }
    m.data[i] = static_cast<std::int32_t>(x);
  }
  if (spacing) *spacing = v.spacing;
  return m;
}

void save_volume(const fs::path& path, const LabeledVolume& v, VoxelType type) {
  v.validate();
  if (has_suffix(path, ".mhd")) {
    write_mhd(path, v, type);
  } else if (has_suffix(path, ".nii.gz")) {
    write_gzip_atomic(path, nifti_bytes(v, type));
  } else if (has_suffix(path, ".nii")) {
    write_file_atomic(path, nifti_bytes(v, type));
  } else {
    throw FormatError(path.string() + ": unrecognized extension (expected .nii, .nii.gz or .mhd)");
  }
}

void save_label_map(const fs::path& path, const LabelMap& labels, const Spacing& spacing) {
  LabeledVolume v;
  const Extents& e = labels.extents;
  std::vector<double> data(labels.data.begin(), labels.data.end());
  v.image = make_image(std::move(data), 1, e.depth, e.height, e.width);
  v.spacing = spacing;
  const auto [lo, hi] = std::minmax_element(labels.data.begin(), labels.data.end());
  const bool fits_u8 = labels.data.empty() || (*lo >= 0 && *hi <= 255);
  save_volume(path, v, fits_u8 ? VoxelType::uint8 : VoxelType::int32);
}

// --- manifest ------------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line)) throw FormatError(path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "case_id,images,label,split") {
    throw FormatError(path.string() + ": manifest header must be 'case_id,images,label,split'");
  }
  std::vector<ManifestRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    if (f[0].empty() || f[1].empty()) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty case id or image list");
    rows.push_back({f[0], split(f[1], ';'), f[2], f[3]});
  }
  return rows;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
  std::ostringstream os;
  os << "case_id,images,label,split\n";
  for (const auto& r : rows) {
    os << r.case_id << ',';
    for (std::size_t i = 0; i < r.images.size(); ++i) os << (i ? ";" : "") << r.images[i];
    os << ',' << r.label << ',' << r.split << '\n';
  }
  write_file_atomic(path, os.str());
}

LabeledVolume load_case(const ManifestRow& row, const fs::path& base_dir) {
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  std::vector<LabeledVolume> parts;
  for (const auto& img : row.images) parts.push_back(load_volume(resolve(img)));
  LabeledVolume v = parts.front();
  if (parts.size() > 1) {
    const Extents e = v.extents();
    std::int64_t channels = 0;
    std::vector<double> data;
    for (const auto& p : parts) {
      if (!(p.extents() == e)) throw ValidationError(row.case_id + ": channel files have differing extents");
      channels += p.channels();
      data.insert(data.end(), p.image.storage().begin(), p.image.storage().end());
    }
    v.image = make_image(std::move(data), channels, e.depth, e.height, e.width);
    if (v.spatial_rank() != parts.front().spatial_rank()) throw ValidationError(row.case_id + ": inconsistent rank");
  }
  if (!row.label.empty()) v.labels = load_label_map(resolve(row.label));
  v.case_id = row.case_id;
  v.validate();
  return v;
}

}  // namespace crossdim
