// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Binary tensor container used for checkpoints and lattice dumps.
//
//   magic "MSDT" | version u32 | count u32 |
//   count × { name_len u16 | name bytes | rank u8 | dims u32[rank] | f64[numel] }
//
// All integers and floats are little-endian.
#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "msdkws/error.hpp"
#include "msdkws/tensor.hpp"

namespace msdkws {

inline constexpr char kContainerMagic[4] = {'M', 'S', 'D', 'T'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char b[sizeof(T)];
    std::memcpy(b, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(what_ + ": truncated at byte offset " + std::to_string(pos_) + ": expected " +
                        std::to_string(pos_ + n) + " bytes, file has " + std::to_string(bytes_.size()));
    }
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Writes via a temporary sibling and rename, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline std::string encode_container(const std::vector<NamedTensor>& tensors) {
  std::string out(kContainerMagic, 4);
  detail::put_le<std::uint32_t>(out, kContainerVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    if (nt.name.size() > 0xffff) throw FormatError("tensor name too long: " + nt.name.substr(0, 32));
    if (nt.tensor.rank() > 0xff) throw FormatError("tensor rank too large: " + nt.name);
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(nt.name.size()));
    out += nt.name;
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(nt.tensor.rank()));
    for (auto d : nt.tensor.shape()) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : nt.tensor.data()) detail::put_le<double>(out, v);
  }
  return out;
}

inline std::vector<NamedTensor> decode_container(const std::string& bytes, const std::string& what = "container") {
  detail::ByteReader r(bytes, what);
  if (r.get_bytes(4) != std::string(kContainerMagic, 4)) throw FormatError(what + ": bad magic at byte offset 0");
  const auto version = r.get<std::uint32_t>();
  if (version != kContainerVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const auto len = r.get<std::uint16_t>();
    nt.name = r.get_bytes(len);
    const auto rank = r.get<std::uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.get<std::uint32_t>();
      if (d == 0) throw FormatError(what + ": zero dimension in tensor " + nt.name);
    }
    const std::size_t n = shape_numel(shape);
    r.need(n * sizeof(double));
    std::vector<double> data(n);
    for (auto& v : data) v = r.get<double>();
    nt.tensor = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(nt));
  }
  if (r.remaining() != 0) {
    throw FormatError(what + ": " + std::to_string(r.remaining()) + " trailing bytes at offset " +
                      std::to_string(r.pos()));
  }
  return out;
}

inline void save_container(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  detail::write_file_atomic(path, encode_container(tensors));
}

inline std::vector<NamedTensor> load_container(const std::filesystem::path& path) {
  return decode_container(detail::read_file(path), path.string());
}

}  // namespace msdkws
