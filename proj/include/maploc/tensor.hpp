// Copyright 2026 The maploc Authors. All Rights Reserved.
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

// MLTF binary tensor files.
//
// Layout (all integers little-endian):
//
//   offset  size      field
//   0       4         magic "MLTF"
//   4       4         format version (u32, currently 1)
//   8       1         dtype code (u8)
//   9       1         rank (u8)
//   10      8*rank    dimensions (u64 each)
//   ...               row-major element data, little-endian
//
// Dtype codes: 0=f32, 1=f64, 2=u8, 3=i32, 4=u16.

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "maploc/error.hpp"

namespace maploc {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, U8 = 2, I32 = 3, U16 = 4 };

inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr char kTensorMagic[4] = {'M', 'L', 'T', 'F'};

constexpr std::size_t dtype_size(DType dt) {
  switch (dt) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
    case DType::I32: return 4;
    case DType::U16: return 2;
  }
  return 0;
}

constexpr const char* dtype_name(DType dt) {
  switch (dt) {
    case DType::F32: return "f32";
    case DType::F64: return "f64";
    case DType::U8: return "u8";
    case DType::I32: return "i32";
    case DType::U16: return "u16";
  }
  return "?";
}

template <class T> struct dtype_of;
template <> struct dtype_of<float> { static constexpr DType value = DType::F32; };
template <> struct dtype_of<double> { static constexpr DType value = DType::F64; };
template <> struct dtype_of<std::uint8_t> { static constexpr DType value = DType::U8; };
template <> struct dtype_of<std::int32_t> { static constexpr DType value = DType::I32; };
template <> struct dtype_of<std::uint16_t> { static constexpr DType value = DType::U16; };

template <class T>
concept TensorElement = requires { dtype_of<T>::value; };

namespace detail {

/// Element count of `shape`, or throws on overflow or an empty/zero shape.
inline std::uint64_t checked_count(std::span<const std::uint64_t> shape,
                                   std::size_t elem_size) {
  if (shape.empty()) throw Error(Errc::InvalidShape, "rank must be >= 1");
  if (shape.size() > 255) throw Error(Errc::InvalidShape, "rank exceeds 255");
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) {
    if (d == 0) throw Error(Errc::InvalidShape, "zero-sized dimension");
    if (n > std::numeric_limits<std::uint64_t>::max() / d)
      throw Error(Errc::ElementCountOverflow, "element count overflows u64");
    n *= d;
  }
  if (n > std::numeric_limits<std::uint64_t>::max() / elem_size)
    throw Error(Errc::ElementCountOverflow, "payload size overflows u64");
  return n;
}

template <class T>
void store_le(std::byte* dst, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::memcpy(dst, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(dst, dst + sizeof(T));
}

template <class T>
T load_le(const std::byte* src) {
  std::byte tmp[sizeof(T)];
  std::memcpy(tmp, src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(tmp, tmp + sizeof(T));
  T value;
  std::memcpy(&value, tmp, sizeof(T));
  return value;
}

}  // namespace detail

/// A dense row-major tensor. `data` always holds little-endian element bytes,
/// so equality is bitwise equality of the stored payload.
struct Tensor {
  DType dtype = DType::F32;
  std::vector<std::uint64_t> shape;
  std::vector<std::byte> data;

  std::uint64_t element_count() const {
    return detail::checked_count(shape, dtype_size(dtype));
  }
  std::size_t rank() const { return shape.size(); }

  template <TensorElement T>
  static Tensor from(std::vector<std::uint64_t> shape, std::span<const T> values) {
    Tensor t;
    t.dtype = dtype_of<T>::value;
    t.shape = std::move(shape);
    const std::uint64_t n = t.element_count();
    if (n != values.size())
      throw Error(Errc::ShapeMismatch,
                  "shape holds " + std::to_string(n) + " elements, got " +
                      std::to_string(values.size()));
    t.data.resize(n * sizeof(T));
    for (std::size_t i = 0; i < values.size(); ++i)
      detail::store_le(t.data.data() + i * sizeof(T), values[i]);
    return t;
  }

  template <TensorElement T>
  static Tensor from(std::vector<std::uint64_t> shape, const std::vector<T>& values) {
    return from<T>(std::move(shape), std::span<const T>(values));
  }

  /// Decoded copy of the elements; the dtype must match exactly.
  template <TensorElement T>
  std::vector<T> values() const {
    if (dtype != dtype_of<T>::value)
      throw Error(Errc::DtypeMismatch, std::string("tensor is ") +
                                           dtype_name(dtype) + ", requested " +
                                           dtype_name(dtype_of<T>::value));
    const std::size_t n = data.size() / sizeof(T);
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = detail::load_le<T>(data.data() + i * sizeof(T));
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::vector<std::byte> encode_tensor(const Tensor& t) {
  const std::uint64_t n = t.element_count();
  const std::uint64_t payload = n * dtype_size(t.dtype);
  if (payload != t.data.size())
    throw Error(Errc::ShapeMismatch, "payload size does not match shape");
  std::vector<std::byte> out(10 + 8 * t.shape.size() + payload);
  std::memcpy(out.data(), kTensorMagic, 4);
  detail::store_le<std::uint32_t>(out.data() + 4, kTensorFormatVersion);
  out[8] = static_cast<std::byte>(t.dtype);
  out[9] = static_cast<std::byte>(t.shape.size());
  std::byte* p = out.data() + 10;
  for (std::uint64_t d : t.shape) {
    detail::store_le<std::uint64_t>(p, d);
    p += 8;
  }
  if (payload) std::memcpy(p, t.data.data(), payload);
  return out;
}

inline Tensor decode_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < 10)
    throw Error(Errc::TruncatedHeader, "file shorter than fixed header");
  if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
    throw Error(Errc::BadMagic, "expected magic \"MLTF\"");
  const auto version = detail::load_le<std::uint32_t>(bytes.data() + 4);
  if (version != kTensorFormatVersion)
    throw Error(Errc::UnsupportedVersion,
                "format version " + std::to_string(version));
  const auto code = static_cast<std::uint8_t>(bytes[8]);
  if (code > static_cast<std::uint8_t>(DType::U16))
    throw Error(Errc::UnknownDtype, "dtype code " + std::to_string(code));
  Tensor t;
  t.dtype = static_cast<DType>(code);
  const std::size_t rank = static_cast<std::uint8_t>(bytes[9]);
  const std::size_t header = 10 + 8 * rank;
  if (bytes.size() < header)
    throw Error(Errc::TruncatedHeader, "file ends inside the dimension list");
  t.shape.resize(rank);
  for (std::size_t i = 0; i < rank; ++i)
    t.shape[i] = detail::load_le<std::uint64_t>(bytes.data() + 10 + 8 * i);
  const std::uint64_t payload = t.element_count() * dtype_size(t.dtype);
  const std::uint64_t available = bytes.size() - header;
  if (available < payload)
    throw Error(Errc::TruncatedPayload,
                "declared " + std::to_string(payload) + " payload bytes, found " +
                    std::to_string(available));
  if (available > payload)
    throw Error(Errc::TrailingData,
                std::to_string(available - payload) + " bytes after payload");
  t.data.assign(bytes.begin() + header, bytes.begin() + header + payload);
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(Errc::Io, "write failed: " + path.string());
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<std::byte> bytes;
  is.seekg(0, std::ios::end);
  const auto size = is.tellg();
  if (size < 0) throw Error(Errc::Io, "cannot size " + path.string());
  is.seekg(0, std::ios::beg);
  bytes.resize(static_cast<std::size_t>(size));
  is.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!is) throw Error(Errc::Io, "read failed: " + path.string());
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

}  // namespace maploc
