#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>

#include "wcgnn/error.hpp"

namespace wcgnn::binio {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; add byte swapping for this host");

template <typename T>
void write_pod(std::ostream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw IoError("unexpected end of binary block");
    return value;
}

inline void write_doubles(std::ostream& os, std::span<const double> values) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size_bytes()));
}

inline void read_doubles(std::istream& is, std::span<double> out) {
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
    if (!is) throw IoError("unexpected end of binary block");
}

}  // namespace wcgnn::binio
