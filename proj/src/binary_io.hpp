#pragma once

// Little-endian primitives shared by the binary containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bst/error.hpp"

namespace bst::io {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void write_array(std::ostream& os, std::span<const T> values) {
  if (!values.empty()) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size_bytes()));
  }
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw FormatError(std::string("unexpected end of stream while reading ") + what);
  }
  return value;
}

template <typename T>
std::vector<T> read_array(std::istream& is, std::size_t count, const char* what) {
  std::vector<T> out(count);
  if (count != 0 &&
      !is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(T)))) {
    throw FormatError(std::string("unexpected end of stream while reading ") + what);
  }
  return out;
}

}  // namespace bst::io
