// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_IMAGE_HPP
#define MMSL_IMAGE_HPP

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "mmsl/errors.hpp"

namespace mmsl {

inline constexpr int kChannels = 3;

/// Owned 8-bit RGB pixel buffer, row-major, 3 bytes per pixel.
/// data.size() == width * height * 3 always holds.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;

  Image(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
      throw OutOfBounds("image dimensions must be positive, got " +
                        std::to_string(w) + "x" + std::to_string(h));
    }
    data.assign(static_cast<std::size_t>(w) * h * kChannels, fill);
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }

  std::uint8_t* px(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * kChannels;
  }
  const std::uint8_t* px(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * kChannels;
  }

  bool operator==(const Image&) const = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const Rect&) const = default;
};

inline Rect full_rect(const Image& img) { return {0, 0, img.width, img.height}; }

inline bool contains(const Image& img, const Rect& r) {
  return r.w > 0 && r.h > 0 && r.x >= 0 && r.y >= 0 && r.x + r.w <= img.width &&
         r.y + r.h <= img.height;
}

namespace detail {
inline std::string rect_str(const Rect& r) {
  return "[" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
         std::to_string(r.w) + "," + std::to_string(r.h) + "]";
}
}  // namespace detail

/// Copies exactly the pixels of `r` into a new r.w x r.h image.
inline Image crop(const Image& img, const Rect& r) {
  if (!contains(img, r)) {
    throw OutOfBounds("crop rect " + detail::rect_str(r) + " outside " +
                      std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  Image out(r.w, r.h);
  const std::size_t row_bytes = static_cast<std::size_t>(r.w) * kChannels;
  for (int y = 0; y < r.h; ++y) {
    std::memcpy(out.px(0, y), img.px(r.x, r.y + y), row_bytes);
  }
  return out;
}

/// Returns a copy of `dst` with `src` written over the `at` rect. Pixels
/// outside `at` are byte-identical to `dst`; inputs are never mutated.
inline Image paste(const Image& dst, const Image& src, const Rect& at) {
  if (src.width != at.w || src.height != at.h) {
    throw SizeMismatch("paste source " + std::to_string(src.width) + "x" +
                       std::to_string(src.height) + " does not match rect " +
                       detail::rect_str(at));
  }
  if (!contains(dst, at)) {
    throw OutOfBounds("paste rect " + detail::rect_str(at) + " outside " +
                      std::to_string(dst.width) + "x" + std::to_string(dst.height));
  }
  Image out = dst;
  const std::size_t row_bytes = static_cast<std::size_t>(at.w) * kChannels;
  for (int y = 0; y < at.h; ++y) {
    std::memcpy(out.px(at.x, at.y + y), src.px(0, y), row_bytes);
  }
  return out;
}

}  // namespace mmsl

#endif  // MMSL_IMAGE_HPP
