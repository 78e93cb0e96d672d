#pragma once

// Little-endian primitives for the dataset and tag files.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace josnc::detail {

inline constexpr std::array<char, 5> kMagic{'J', 'S', 'N', 'C', '1'};
inline constexpr std::uint8_t kSectionSamples = 0;
inline constexpr std::uint8_t kSectionTags = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

inline void put_f32(std::ostream& out, float value) { put_le(out, std::bit_cast<std::uint32_t>(value)); }

template <typename T>
T get_le(std::istream& in) {
  static_assert(std::is_integral_v<T>);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw std::runtime_error("unexpected end of file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }

struct Header {
  std::uint8_t section = 0;
  std::uint64_t count = 0;
  std::uint32_t n_classes = 0;
  std::uint32_t dim = 0;
};

inline void write_header(std::ostream& out, const Header& h) {
  out.write(kMagic.data(), kMagic.size());
  put_le(out, h.section);
  put_le(out, h.count);
  put_le(out, h.n_classes);
  put_le(out, h.dim);
}

inline Header read_header(std::istream& in, std::uint8_t expected_section, const std::string& path) {
  std::array<char, 5> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error(path + ": bad magic, not a JSNC1 file");
  Header h;
  h.section = get_le<std::uint8_t>(in);
  if (h.section != expected_section) {
    throw std::runtime_error(path + ": unexpected section " + std::to_string(h.section));
  }
  h.count = get_le<std::uint64_t>(in);
  h.n_classes = get_le<std::uint32_t>(in);
  h.dim = get_le<std::uint32_t>(in);
  return h;
}

}  // namespace josnc::detail
