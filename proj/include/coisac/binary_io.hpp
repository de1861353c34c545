// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "coisac/types.hpp"

namespace coisac::io {

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

// Little-endian writer over an ostream.
class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    v = byteswap_if_big(v);
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  void raw(const char* data, std::size_t n) { os_.write(data, static_cast<std::streamsize>(n)); }

  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  bool ok() const { return static_cast<bool>(os_); }

 private:
  std::ostream& os_;
};

// Little-endian reader; throws FormatError on short reads.
class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T v;
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (is_.gcount() != static_cast<std::streamsize>(sizeof(T))) {
      throw FormatError("unexpected end of file");
    }
    return byteswap_if_big(v);
  }

  void raw(char* data, std::size_t n) {
    is_.read(data, static_cast<std::streamsize>(n));
    if (is_.gcount() != static_cast<std::streamsize>(n)) throw FormatError("unexpected end of file");
  }

  std::string str(std::size_t max_len = 1 << 16) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) throw FormatError("string field too long");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  bool at_eof() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& is_;
};

}  // namespace coisac::io
