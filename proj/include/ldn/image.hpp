#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ldn {

// 8-bit RGB image, row-major interleaved.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t ch) {
    return pixels[(y * width + x) * 3 + ch];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t ch) const {
    return pixels[(y * width + x) * 3 + ch];
  }
};

namespace detail {

// Reads one whitespace-delimited token, skipping '#' comments to end of line.
inline std::string ppm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (std::isspace(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#')
    tok.push_back(static_cast<char>(bytes[pos++]));
  if (tok.empty()) throw std::runtime_error("ppm: truncated header");
  return tok;
}

inline std::size_t ppm_number(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  const std::string tok = ppm_token(bytes, pos);
  std::size_t value = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') throw std::runtime_error("ppm: non-numeric header field");
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

}  // namespace detail

// Binary P6 with maxval 255; the only raster format this project speaks.
inline ImageBuffer parse_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (detail::ppm_token(bytes, pos) != "P6") throw std::runtime_error("ppm: not a P6 file");
  ImageBuffer img;
  img.width = detail::ppm_number(bytes, pos);
  img.height = detail::ppm_number(bytes, pos);
  const std::size_t maxval = detail::ppm_number(bytes, pos);
  if (img.width == 0 || img.height == 0) throw std::runtime_error("ppm: empty dimensions");
  if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw std::runtime_error("ppm: missing raster separator");
  ++pos;  // exactly one whitespace byte before the raster
  const std::size_t need = img.width * img.height * 3;
  if (bytes.size() - pos < need) throw std::runtime_error("ppm: truncated raster");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

inline std::vector<std::uint8_t> serialize_ppm(const ImageBuffer& img) {
  if (img.pixels.size() != img.width * img.height * 3)
    throw std::invalid_argument("ppm: pixel count does not match dimensions");
  std::string header = "P6\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

inline ImageBuffer read_ppm(const std::string& path) { return parse_ppm(read_file_bytes(path)); }

inline void write_ppm(const std::string& path, const ImageBuffer& img) {
  write_file_bytes(path, serialize_ppm(img));
}

}  // namespace ldn
