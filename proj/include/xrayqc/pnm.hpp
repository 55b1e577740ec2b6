#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "xrayqc/errors.hpp"
#include "xrayqc/image.hpp"

// Binary PNM containers: P5 with maxval 65535 (16-bit grayscale, MSB first)
// and P6 with maxval 255 (8-bit RGB). The writers emit one canonical header
// form so save/load round-trips are byte identical.

namespace xrayqc {

namespace detail {

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return buf;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path + "'");
}

inline bool pnm_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

// Skips whitespace and '#' comment lines between header tokens.
inline void skip_header_space(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (pnm_space(buf[pos])) {
      ++pos;
    } else if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
}

inline std::uint64_t parse_header_uint(const std::string& buf, std::size_t& pos,
                                       const char* what) {
  skip_header_space(buf, pos);
  if (pos >= buf.size() || buf[pos] < '0' || buf[pos] > '9')
    throw ParseError(std::string("expected ") + what, pos);
  std::uint64_t v = 0;
  while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
    v = v * 10 + static_cast<std::uint64_t>(buf[pos] - '0');
    if (v > 0xFFFFFFFFull) throw ParseError(std::string(what) + " out of range", pos);
    ++pos;
  }
  return v;
}

struct PnmHeader {
  int width = 0;
  int height = 0;
  std::uint64_t maxval = 0;
  std::size_t payload_offset = 0;
};

inline PnmHeader parse_pnm_header(const std::string& buf, char digit, const char* magic_name) {
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != digit)
    throw ParseError(std::string("not a binary ") + magic_name + " file (bad magic)", 0);
  std::size_t pos = 2;
  PnmHeader h;
  const std::uint64_t w = parse_header_uint(buf, pos, "width");
  const std::uint64_t ht = parse_header_uint(buf, pos, "height");
  h.maxval = parse_header_uint(buf, pos, "maxval");
  if (w < 1 || ht < 1) throw ParseError("dimensions must be >= 1", pos);
  if (w > 1000000 || ht > 1000000) throw ParseError("implausible dimensions", pos);
  h.width = static_cast<int>(w);
  h.height = static_cast<int>(ht);
  // exactly one whitespace byte separates maxval from the payload
  if (pos >= buf.size() || !pnm_space(buf[pos]))
    throw ParseError("expected single whitespace before payload", pos);
  h.payload_offset = pos + 1;
  return h;
}

}  // namespace detail

inline RawImage16 load_pgm16(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  const detail::PnmHeader h = detail::parse_pnm_header(buf, '5', "PGM (P5)");
  if (h.maxval != 65535)
    throw UnsupportedDepthError("maxval is " + std::to_string(h.maxval) +
                                ", only 65535 (16-bit) is supported");
  RawImage16 img(h.width, h.height);
  const std::size_t expected = img.npixels() * 2;
  const std::size_t actual = buf.size() - h.payload_offset;
  if (actual != expected)
    throw SizeMismatchError("payload of '" + path + "': expected " + std::to_string(expected) +
                            " bytes, got " + std::to_string(actual));
  const unsigned char* src =
      reinterpret_cast<const unsigned char*>(buf.data()) + h.payload_offset;
  for (std::size_t i = 0; i < img.npixels(); ++i) {
    img.pixels[i] = static_cast<std::uint16_t>((static_cast<unsigned>(src[2 * i]) << 8) |
                                               static_cast<unsigned>(src[2 * i + 1]));
  }
  return img;
}

inline void save_pgm16(const RawImage16& img, const std::string& path) {
  check_valid(img);
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n65535\n";
  out.reserve(out.size() + img.npixels() * 2);
  for (std::uint16_t v : img.pixels) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  detail::write_file_bytes(path, out);
}

inline void save_ppm8(const Image8x3& img, const std::string& path) {
  check_valid(img);
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.reserve(out.size() + img.npixels() * 3);
  for (std::size_t i = 0; i < img.npixels(); ++i) {
    out.push_back(static_cast<char>(img.planes[0][i]));
    out.push_back(static_cast<char>(img.planes[1][i]));
    out.push_back(static_cast<char>(img.planes[2][i]));
  }
  detail::write_file_bytes(path, out);
}

inline Image8x3 load_ppm8(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  const detail::PnmHeader h = detail::parse_pnm_header(buf, '6', "PPM (P6)");
  if (h.maxval != 255)
    throw UnsupportedDepthError("maxval is " + std::to_string(h.maxval) +
                                ", only 255 (8-bit) is supported");
  Image8x3 img(h.width, h.height);
  const std::size_t expected = img.npixels() * 3;
  const std::size_t actual = buf.size() - h.payload_offset;
  if (actual != expected)
    throw SizeMismatchError("payload of '" + path + "': expected " + std::to_string(expected) +
                            " bytes, got " + std::to_string(actual));
  const unsigned char* src =
      reinterpret_cast<const unsigned char*>(buf.data()) + h.payload_offset;
  for (std::size_t i = 0; i < img.npixels(); ++i) {
    img.planes[0][i] = src[3 * i];
    img.planes[1][i] = src[3 * i + 1];
    img.planes[2][i] = src[3 * i + 2];
  }
  return img;
}

}  // namespace xrayqc
