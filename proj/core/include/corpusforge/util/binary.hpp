#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "corpusforge/util/error.hpp"

namespace corpusforge::binary {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swapping");

using Magic = std::array<char, 8>;

constexpr Magic make_magic(const char (&text)[9]) {
  Magic m{};
  for (int i = 0; i < 8; ++i) m[i] = text[i];
  return m;
}

template <class T>
  requires std::is_trivially_copyable_v<T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
  requires std::is_trivially_copyable_v<T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("unexpected end of binary stream");
  return value;
}

template <class T>
  requires std::is_trivially_copyable_v<T>
void write_array(std::ostream& os, std::span<const T> values) {
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size_bytes()));
}

template <class T>
  requires std::is_trivially_copyable_v<T>
void read_array(std::istream& is, std::span<T> out) {
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
  if (!is) throw IoError("unexpected end of binary stream");
}

inline void write_string(std::ostream& os, std::string_view s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError("unexpected end of binary stream");
  return s;
}

inline void write_header(std::ostream& os, const Magic& magic, std::uint32_t version) {
  os.write(magic.data(), magic.size());
  write_pod(os, version);
}

/// Reads and checks the magic; returns the version.
inline std::uint32_t read_header(std::istream& is, const Magic& magic, std::string_view what) {
  Magic got{};
  is.read(got.data(), got.size());
  if (!is || got != magic) throw IoError(std::string("not a ") + std::string(what) + " file");
  return read_pod<std::uint32_t>(is);
}

}  // namespace corpusforge::binary
