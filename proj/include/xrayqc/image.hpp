#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "xrayqc/errors.hpp"

namespace xrayqc {

// Single-channel 16-bit radiograph, row-major detector counts.
struct RawImage16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;  // row-major, size width*height

  RawImage16() = default;
  RawImage16(int w, int h, std::uint16_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t npixels() const { return static_cast<std::size_t>(width) * height; }

  std::uint16_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const RawImage16&) const = default;
};

inline void check_valid(const RawImage16& img) {
  if (img.width < 1 || img.height < 1)
    throw ArgumentError("image dimensions must be >= 1");
  if (img.pixels.size() != img.npixels())
    throw ArgumentError("pixel count does not equal width*height");
}

// 3-plane 8-bit image as fed to the feature extractor. Planes are kept
// separate; interleaving happens only at the PPM boundary.
struct Image8x3 {
  int width = 0;
  int height = 0;
  std::array<std::vector<std::uint8_t>, 3> planes;

  Image8x3() = default;
  Image8x3(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
    for (auto& p : planes) p.assign(static_cast<std::size_t>(w) * h, fill);
  }

  std::size_t npixels() const { return static_cast<std::size_t>(width) * height; }

  std::uint8_t& at(int c, int x, int y) {
    return planes[c][static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int c, int x, int y) const {
    return planes[c][static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const Image8x3&) const = default;
};

inline void check_valid(const Image8x3& img) {
  if (img.width < 1 || img.height < 1)
    throw ArgumentError("image dimensions must be >= 1");
  for (const auto& p : img.planes)
    if (p.size() != img.npixels())
      throw ArgumentError("plane size does not equal width*height");
}

struct ImageStats {
  std::uint16_t min = 0;
  std::uint16_t max = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<std::uint64_t> histogram;  // uniform bins over [0,65535]
};

// Descriptive statistics with a 256-bin histogram (bin k covers
// [k*256, k*256+255]). Sums are integer-exact; variance uses the exact
// (n*sumsq - sum^2) numerator.
inline ImageStats image_stats(const RawImage16& img) {
  check_valid(img);
  ImageStats s;
  s.histogram.assign(256, 0);
  std::uint16_t mn = 65535, mx = 0;
  std::uint64_t sum = 0, sumsq = 0;
  for (std::uint16_t v : img.pixels) {
    mn = v < mn ? v : mn;
    mx = v > mx ? v : mx;
    sum += v;
    sumsq += static_cast<std::uint64_t>(v) * v;
    s.histogram[v >> 8]++;
  }
  const std::uint64_t n = img.npixels();
  s.min = mn;
  s.max = mx;
  s.mean = static_cast<double>(sum) / static_cast<double>(n);
  const __int128 num =
      static_cast<__int128>(n) * static_cast<__int128>(sumsq) -
      static_cast<__int128>(sum) * static_cast<__int128>(sum);
  s.stddev = std::sqrt(static_cast<double>(num)) / static_cast<double>(n);
  return s;
}

// Full-resolution 65536-bin histogram, exported behind a CLI flag.
inline std::vector<std::uint64_t> full_histogram(const RawImage16& img) {
  check_valid(img);
  std::vector<std::uint64_t> h(65536, 0);
  for (std::uint16_t v : img.pixels) h[v]++;
  return h;
}

// Nearest-rank percentile: the element at rank ceil(p/100 * N) of the sorted
// pixel sequence, 1-indexed. Implemented as a counting pass over the 16-bit
// value range; the sort-based definition lives in the tests as the oracle.
// The 1e-9 nudge keeps ceil exact when p*N/100 is an integer that floating
// point would land marginally above.
inline std::uint16_t percentile(const RawImage16& img, double p) {
  check_valid(img);
  if (!(p > 0.0) || !(p <= 100.0))
    throw ArgumentError("percentile p must be in (0,100]");
  const std::uint64_t n = img.npixels();
  const long double exact = static_cast<long double>(p) * static_cast<long double>(n) / 100.0L;
  std::uint64_t rank = static_cast<std::uint64_t>(std::ceil(static_cast<double>(exact - 1e-9L)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  std::vector<std::uint32_t> counts(65536, 0);
  for (std::uint16_t v : img.pixels) counts[v]++;
  std::uint64_t seen = 0;
  for (std::uint32_t v = 0; v < 65536; ++v) {
    seen += counts[v];
    if (seen >= rank) return static_cast<std::uint16_t>(v);
  }
  return 65535;
}

}  // namespace xrayqc
