#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "xrayqc/errors.hpp"
#include "xrayqc/image.hpp"
#include "xrayqc/rng.hpp"

// Training-time augmentation: optional horizontal/vertical mirroring followed
// by a bilinear resize to the network input size. Flips happen before the
// resize, and the two coin flips are always drawn in h-then-v order so a
// given rng stream yields the same variant everywhere.

namespace xrayqc {

struct AugmentParams {
  double flip_h_prob = 0.5;
  double flip_v_prob = 0.5;
  int target_width = 0;
  int target_height = 0;
};

inline void check_valid(const AugmentParams& p) {
  if (p.flip_h_prob < 0.0 || p.flip_h_prob > 1.0 || p.flip_v_prob < 0.0 || p.flip_v_prob > 1.0)
    throw ArgumentError("flip probabilities must lie in [0, 1]");
  if (p.target_width < 1 || p.target_height < 1)
    throw ArgumentError("resize target must be at least 1x1");
}

inline Image8x3 flip_h(const Image8x3& img) {
  check_valid(img);
  Image8x3 out;
  out.width = img.width;
  out.height = img.height;
  for (int c = 0; c < 3; ++c) {
    out.planes[c].resize(img.planes[c].size());
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.planes[c][static_cast<std::size_t>(y) * img.width + x] =
            img.at(c, img.width - 1 - x, y);
  }
  return out;
}

inline Image8x3 flip_v(const Image8x3& img) {
  check_valid(img);
  Image8x3 out;
  out.width = img.width;
  out.height = img.height;
  for (int c = 0; c < 3; ++c) {
    out.planes[c].resize(img.planes[c].size());
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.planes[c][static_cast<std::size_t>(y) * img.width + x] =
            img.at(c, x, img.height - 1 - y);
  }
  return out;
}

inline Image8x3 apply_flips(const Image8x3& img, bool do_h, bool do_v) {
  if (do_h && do_v) return flip_v(flip_h(img));
  if (do_h) return flip_h(img);
  if (do_v) return flip_v(img);
  return img;
}

// Corner-aligned bilinear resize; output intensities round half away from
// zero. A 1-wide (or 1-tall) output samples the first column (row).
inline Image8x3 resize_bilinear(const Image8x3& img, int target_width, int target_height) {
  check_valid(img);
  if (target_width < 1 || target_height < 1)
    throw ArgumentError("resize target must be at least 1x1");
  Image8x3 out;
  out.width = target_width;
  out.height = target_height;

  const double sx_step =
      target_width > 1 ? static_cast<double>(img.width - 1) / (target_width - 1) : 0.0;
  const double sy_step =
      target_height > 1 ? static_cast<double>(img.height - 1) / (target_height - 1) : 0.0;

  for (int c = 0; c < 3; ++c) {
    out.planes[c].resize(static_cast<std::size_t>(target_width) * target_height);
    for (int y = 0; y < target_height; ++y) {
      const double sy = sy_step * y;
      int y0 = static_cast<int>(sy);
      if (y0 > img.height - 1) y0 = img.height - 1;
      const int y1 = y0 + 1 < img.height ? y0 + 1 : img.height - 1;
      const double fy = sy - y0;
      for (int x = 0; x < target_width; ++x) {
        const double sx = sx_step * x;
        int x0 = static_cast<int>(sx);
        if (x0 > img.width - 1) x0 = img.width - 1;
        const int x1 = x0 + 1 < img.width ? x0 + 1 : img.width - 1;
        const double fx = sx - x0;
        const double top = (1.0 - fx) * img.at(c, x0, y0) + fx * img.at(c, x1, y0);
        const double bot = (1.0 - fx) * img.at(c, x0, y1) + fx * img.at(c, x1, y1);
        const double v = (1.0 - fy) * top + fy * bot;
        out.planes[c][static_cast<std::size_t>(y) * target_width + x] =
            static_cast<std::uint8_t>(std::floor(v + 0.5));
      }
    }
  }
  return out;
}

// Draws u_h then u_v from the stream, mirrors when u < prob, then resizes.
inline Image8x3 apply_augment(const Image8x3& img, const AugmentParams& p, Rng& rng) {
  check_valid(p);
  const bool do_h = rng.uniform() < p.flip_h_prob;
  const bool do_v = rng.uniform() < p.flip_v_prob;
  return resize_bilinear(apply_flips(img, do_h, do_v), p.target_width, p.target_height);
}

}  // namespace xrayqc
