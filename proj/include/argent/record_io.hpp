#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "argent/errors.hpp"
#include "argent/tensor.hpp"

namespace argent {

/// Binary record layout (all integers and reals little-endian):
///   "ARGT" | u32 version | u32 array count |
///   per array: u32 name length | name bytes | u32 rank | u64 extent × rank | f64 × size
using NamedArrays = std::vector<std::pair<std::string, Tensor<double>>>;

inline constexpr char kRecordMagic[4] = {'A', 'R', 'G', 'T'};
inline constexpr std::uint32_t kRecordVersion = 1;

namespace detail {

template <class U>
U byte_swap(U v) {
  U out;
  auto* src = reinterpret_cast<const unsigned char*>(&v);
  auto* dst = reinterpret_cast<unsigned char*>(&out);
  for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
  return out;
}

template <class U>
void put_le(std::string& out, U v) {
  if constexpr (std::endian::native == std::endian::big) v = byte_swap(v);
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <class U>
U get_le(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(U) > in.size()) throw FormatError(path + ": truncated record at byte " + std::to_string(pos));
  U v;
  std::memcpy(&v, in.data() + pos, sizeof(U));
  pos += sizeof(U);
  if constexpr (std::endian::native == std::endian::big) v = byte_swap(v);
  return v;
}

}  // namespace detail

inline std::string encode_record(const NamedArrays& arrays) {
  std::string out(kRecordMagic, 4);
  detail::put_le<std::uint32_t>(out, kRecordVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) detail::put_le<std::uint64_t>(out, e);
    for (double v : t.data()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline NamedArrays decode_record(const std::string& bytes, const std::string& path = "<record>") {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kRecordMagic, 4) != 0)
    throw FormatError(path + ": bad magic, not an ARGT record");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(bytes, pos, path);
  if (version != kRecordVersion) throw FormatError(path + ": unsupported record version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(bytes, pos, path);
  NamedArrays out;
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto len = detail::get_le<std::uint32_t>(bytes, pos, path);
    if (pos + len > bytes.size()) throw FormatError(path + ": truncated array name");
    std::string name = bytes.substr(pos, len);
    pos += len;
    const auto rank = detail::get_le<std::uint32_t>(bytes, pos, path);
    Shape shape(rank);
    for (auto& e : shape) e = detail::get_le<std::uint64_t>(bytes, pos, path);
    std::vector<double> data(shape_size(shape));
    for (auto& v : data) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos, path));
    out.emplace_back(std::move(name), Tensor<double>(std::move(shape), std::move(data)));
  }
  if (pos != bytes.size()) throw FormatError(path + ": trailing bytes after last array");
  return out;
}

inline void write_record(const std::string& path, const NamedArrays& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  const auto bytes = encode_record(arrays);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline NamedArrays read_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_record(bytes, path);
}

inline const Tensor<double>& find_array(const NamedArrays& arrays, const std::string& name, const std::string& path = "") {
  for (const auto& [n, t] : arrays)
    if (n == name) return t;
  throw FormatError(path + ": record has no array '" + name + "'");
}

}  // namespace argent
