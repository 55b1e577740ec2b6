#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xrayqc/errors.hpp"
#include "xrayqc/image.hpp"

// The four 16-bit to 8-bit conversion methods. Methods 2 and 3 are a linear
// contrast stretch of clamped values between lower/upper bounds; method 1 is
// plain truncating division by 256; method 4 stacks the three single-plane
// methods into the three channels.

namespace xrayqc {

struct GlobalBounds {
  std::uint16_t g_min = 0;
  std::uint16_t g_max = 0;
};

inline void check_valid(const GlobalBounds& b) {
  if (b.g_min >= b.g_max) throw DegenerateBoundsError("g_min must be < g_max");
  if (b.g_min % 100 != 0 || b.g_max % 100 != 0)
    throw ArgumentError("global bounds must be multiples of 100");
}

struct LocalBounds {
  std::uint16_t l_min = 0;
  std::uint16_t l_max = 0;
};

enum class MethodKind : int {
  naive = 1,
  global = 2,
  local = 3,
  mixed = 4,
};

inline MethodKind method_kind_from_int(int m) {
  if (m < 1 || m > 4) throw ArgumentError("conversion method must be 1..4");
  return static_cast<MethodKind>(m);
}

// Dispatch value for convert(). Global and mixed always carry valid bounds.
struct ConversionMethod {
  MethodKind kind = MethodKind::naive;
  std::optional<GlobalBounds> bounds;

  static ConversionMethod naive() { return {MethodKind::naive, std::nullopt}; }
  static ConversionMethod global(GlobalBounds b) {
    check_valid(b);
    return {MethodKind::global, b};
  }
  static ConversionMethod local() { return {MethodKind::local, std::nullopt}; }
  static ConversionMethod mixed(GlobalBounds b) {
    check_valid(b);
    return {MethodKind::mixed, b};
  }
};

inline bool method_needs_global_bounds(MethodKind k) {
  return k == MethodKind::global || k == MethodKind::mixed;
}

// Nearest hundred, halves away from zero (values are nonnegative).
inline std::uint32_t round_to_hundred(std::uint32_t v) { return (v + 50) / 100 * 100; }

// ---- scalar conversions -------------------------------------------------

inline std::uint8_t naive_value(std::uint16_t x) { return static_cast<std::uint8_t>(x >> 8); }

// floor((clamp(x,lo,hi) - lo) * 255 / (hi - lo)); exact in 32-bit integers.
inline std::uint8_t stretch_value(std::uint16_t x, std::uint16_t lo, std::uint16_t hi) {
  const std::uint16_t c = x < lo ? lo : (x > hi ? hi : x);
  const std::uint32_t num = static_cast<std::uint32_t>(c - lo) * 255u;
  return static_cast<std::uint8_t>(num / static_cast<std::uint32_t>(hi - lo));
}

// ---- bound estimation ---------------------------------------------------

inline constexpr double kUpperPercentile = 99.99;
inline constexpr double kLowerPercentile = 0.01;

// Streaming form of the global-bounds rule: feed per-image percentiles one
// image at a time, then round the extremes to the nearest hundred.
struct BoundsAccumulator {
  bool any = false;
  std::uint16_t max_side = 0;
  std::uint16_t min_side = 65535;

  void add(const RawImage16& img) {
    const std::uint16_t hi = percentile(img, kUpperPercentile);
    const std::uint16_t lo = percentile(img, kLowerPercentile);
    if (!any) {
      max_side = hi;
      min_side = lo;
      any = true;
    } else {
      if (hi > max_side) max_side = hi;
      if (lo < min_side) min_side = lo;
    }
  }

  GlobalBounds finish() const {
    if (!any) throw ArgumentError("need at least one image to compute global bounds");
    const std::uint32_t g_max = round_to_hundred(max_side);
    const std::uint32_t g_min = round_to_hundred(min_side);
    if (g_min >= g_max)
      throw DegenerateBoundsError("rounded bounds collapse: g_min=" + std::to_string(g_min) +
                                  " g_max=" + std::to_string(g_max));
    return {static_cast<std::uint16_t>(g_min), static_cast<std::uint16_t>(g_max)};
  }
};

// Per-image percentiles first, then the extremes across images, then round
// to the nearest hundred.
inline GlobalBounds compute_global_bounds(std::span<const RawImage16* const> images) {
  BoundsAccumulator acc;
  for (const RawImage16* img : images) acc.add(*img);
  return acc.finish();
}

inline GlobalBounds compute_global_bounds(std::span<const RawImage16> images) {
  BoundsAccumulator acc;
  for (const RawImage16& img : images) acc.add(img);
  return acc.finish();
}

// Per-image stretch bounds; no rounding.
inline LocalBounds compute_local_bounds(const RawImage16& img) {
  const std::uint16_t lo = percentile(img, kLowerPercentile);
  const std::uint16_t hi = percentile(img, kUpperPercentile);
  if (lo == hi)
    throw DegenerateBoundsError("image has constant percentile bounds (" + std::to_string(lo) +
                                ")");
  return {lo, hi};
}

// ---- whole-image conversions --------------------------------------------

namespace detail {

inline Image8x3 replicate_plane(int w, int h, std::vector<std::uint8_t>&& plane) {
  Image8x3 out;
  out.width = w;
  out.height = h;
  out.planes[1] = plane;
  out.planes[2] = plane;
  out.planes[0] = std::move(plane);
  return out;
}

inline std::vector<std::uint8_t> naive_plane(const RawImage16& img) {
  std::vector<std::uint8_t> p(img.npixels());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = naive_value(img.pixels[i]);
  return p;
}

inline std::vector<std::uint8_t> stretch_plane(const RawImage16& img, std::uint16_t lo,
                                               std::uint16_t hi) {
  std::vector<std::uint8_t> p(img.npixels());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = stretch_value(img.pixels[i], lo, hi);
  return p;
}

}  // namespace detail

inline Image8x3 convert_naive(const RawImage16& img) {
  check_valid(img);
  return detail::replicate_plane(img.width, img.height, detail::naive_plane(img));
}

inline Image8x3 convert_global(const RawImage16& img, const GlobalBounds& b) {
  check_valid(img);
  check_valid(b);
  return detail::replicate_plane(img.width, img.height,
                                 detail::stretch_plane(img, b.g_min, b.g_max));
}

inline Image8x3 convert_local(const RawImage16& img) {
  check_valid(img);
  const LocalBounds lb = compute_local_bounds(img);
  return detail::replicate_plane(img.width, img.height,
                                 detail::stretch_plane(img, lb.l_min, lb.l_max));
}

// Channel 1 = method 1, channel 2 = method 2, channel 3 = method 3.
inline Image8x3 convert_mixed(const RawImage16& img, const GlobalBounds& b) {
  check_valid(img);
  check_valid(b);
  const LocalBounds lb = compute_local_bounds(img);
  Image8x3 out;
  out.width = img.width;
  out.height = img.height;
  out.planes[0] = detail::naive_plane(img);
  out.planes[1] = detail::stretch_plane(img, b.g_min, b.g_max);
  out.planes[2] = detail::stretch_plane(img, lb.l_min, lb.l_max);
  return out;
}

inline Image8x3 convert(const RawImage16& img, const ConversionMethod& m) {
  switch (m.kind) {
    case MethodKind::naive:
      return convert_naive(img);
    case MethodKind::global:
      if (!m.bounds) throw ArgumentError("method 2 requires global bounds");
      return convert_global(img, *m.bounds);
    case MethodKind::local:
      return convert_local(img);
    case MethodKind::mixed:
      if (!m.bounds) throw ArgumentError("method 4 requires global bounds");
      return convert_mixed(img, *m.bounds);
  }
  throw ArgumentError("unknown conversion method");
}

}  // namespace xrayqc
