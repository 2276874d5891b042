// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_OPS_HPP
#define MMSL_OPS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "mmsl/errors.hpp"
#include "mmsl/image.hpp"
#include "mmsl/random.hpp"

namespace mmsl {

enum class OpKind : std::uint8_t {
  ShearX,
  ShearY,
  TranslateX,
  TranslateY,
  Rotate,
  Color,
  Posterize,
  Solarize,
  Contrast,
  Sharpness,
  Brightness,
  AutoContrast,
  Equalize,
  Invert,
};

inline constexpr std::array<OpKind, 14> kAllOpKinds = {
    OpKind::ShearX,    OpKind::ShearY,   OpKind::TranslateX,
    OpKind::TranslateY, OpKind::Rotate,  OpKind::Color,
    OpKind::Posterize, OpKind::Solarize, OpKind::Contrast,
    OpKind::Sharpness, OpKind::Brightness, OpKind::AutoContrast,
    OpKind::Equalize,  OpKind::Invert,
};

inline const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::ShearX: return "ShearX";
    case OpKind::ShearY: return "ShearY";
    case OpKind::TranslateX: return "TranslateX";
    case OpKind::TranslateY: return "TranslateY";
    case OpKind::Rotate: return "Rotate";
    case OpKind::Color: return "Color";
    case OpKind::Posterize: return "Posterize";
    case OpKind::Solarize: return "Solarize";
    case OpKind::Contrast: return "Contrast";
    case OpKind::Sharpness: return "Sharpness";
    case OpKind::Brightness: return "Brightness";
    case OpKind::AutoContrast: return "AutoContrast";
    case OpKind::Equalize: return "Equalize";
    case OpKind::Invert: return "Invert";
  }
  return "?";
}

inline OpKind op_kind_from_name(std::string_view name) {
  for (OpKind k : kAllOpKinds) {
    if (name == op_name(k)) return k;
  }
  throw FormatError("unknown op name: " + std::string(name));
}

/// Magnitude contract per kind. `integral` kinds only accept whole numbers;
/// kinds with `used == false` take no magnitude at all.
struct MagnitudeRange {
  double lo = 0.0;
  double hi = 0.0;
  bool integral = false;
  bool used = false;
};

inline constexpr MagnitudeRange magnitude_range(OpKind kind) {
  switch (kind) {
    case OpKind::ShearX:
    case OpKind::ShearY:
      return {-0.3, 0.3, false, true};  // shear factor
    case OpKind::TranslateX:
    case OpKind::TranslateY:
      return {-0.45, 0.45, false, true};  // fraction of width/height
    case OpKind::Rotate:
      return {-30.0, 30.0, false, true};  // degrees
    case OpKind::Posterize:
      return {4.0, 8.0, true, true};  // bits kept
    case OpKind::Solarize:
      return {0.0, 256.0, false, true};  // inversion threshold
    case OpKind::Color:
    case OpKind::Contrast:
    case OpKind::Sharpness:
    case OpKind::Brightness:
      return {0.1, 1.9, false, true};  // blend factor, 1.0 = identity
    case OpKind::AutoContrast:
    case OpKind::Equalize:
    case OpKind::Invert:
      return {};
  }
  return {};
}

/// One transform from the 14-op library plus its magnitude.
struct AugOp {
  OpKind kind = OpKind::Invert;
  double magnitude = 0.0;

  static AugOp make(OpKind kind, double magnitude = 0.0) {
    const MagnitudeRange range = magnitude_range(kind);
    if (!range.used) return {kind, 0.0};
    if (!(magnitude >= range.lo && magnitude <= range.hi)) {
      throw InvalidMagnitude(std::string(op_name(kind)) + " magnitude " +
                             std::to_string(magnitude) + " outside [" +
                             std::to_string(range.lo) + ", " +
                             std::to_string(range.hi) + "]");
    }
    if (range.integral && magnitude != std::floor(magnitude)) {
      throw InvalidMagnitude(std::string(op_name(kind)) +
                             " magnitude must be a whole number, got " +
                             std::to_string(magnitude));
    }
    return {kind, magnitude};
  }

  bool operator==(const AugOp&) const = default;
};

namespace detail {

inline constexpr std::uint8_t kGeomFill = 128;

inline std::uint8_t clamp_u8(long v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
}

/// Inverse-maps every output pixel through `src_of` (continuous source
/// coordinates), samples the nearest source pixel, and fills out-of-support
/// pixels with the fixed gray fill.
template <typename MapFn>
Image warp_nearest(const Image& img, MapFn src_of) {
  Image out(img.width, img.height, kGeomFill);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto [sx, sy] = src_of(static_cast<double>(x), static_cast<double>(y));
      const long ix = std::lround(sx);
      const long iy = std::lround(sy);
      if (ix >= 0 && ix < img.width && iy >= 0 && iy < img.height) {
        const std::uint8_t* s = img.px(static_cast<int>(ix), static_cast<int>(iy));
        std::uint8_t* d = out.px(x, y);
        d[0] = s[0];
        d[1] = s[1];
        d[2] = s[2];
      }
    }
  }
  return out;
}

inline Image shear_x(const Image& img, double factor) {
  return warp_nearest(img, [factor](double x, double y) {
    return std::pair{x + factor * y, y};
  });
}

inline Image shear_y(const Image& img, double factor) {
  return warp_nearest(img, [factor](double x, double y) {
    return std::pair{x, y + factor * x};
  });
}

inline Image translate_x(const Image& img, double fraction) {
  const double dx = static_cast<double>(std::lround(fraction * img.width));
  return warp_nearest(img, [dx](double x, double y) { return std::pair{x + dx, y}; });
}

inline Image translate_y(const Image& img, double fraction) {
  const double dy = static_cast<double>(std::lround(fraction * img.height));
  return warp_nearest(img, [dy](double x, double y) { return std::pair{x, y + dy}; });
}

inline Image rotate(const Image& img, double degrees) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double cx = img.width / 2.0;
  const double cy = img.height / 2.0;
  return warp_nearest(img, [=](double x, double y) {
    const double px = x + 0.5 - cx;
    const double py = y + 0.5 - cy;
    return std::pair{c * px - s * py + cx - 0.5, s * px + c * py + cy - 0.5};
  });
}

inline Image apply_lut(const Image& img, const std::array<std::uint8_t, 256>& lut) {
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = lut[img.data[i]];
  return out;
}

/// Per-channel 256-bin histograms.
inline std::array<std::array<std::uint32_t, 256>, 3> histograms(const Image& img) {
  std::array<std::array<std::uint32_t, 256>, 3> hist{};
  for (std::size_t i = 0; i < img.data.size(); i += kChannels) {
    ++hist[0][img.data[i]];
    ++hist[1][img.data[i + 1]];
    ++hist[2][img.data[i + 2]];
  }
  return hist;
}

inline Image invert(const Image& img) {
  std::array<std::uint8_t, 256> lut;
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(255 - i);
  return apply_lut(img, lut);
}

inline Image posterize(const Image& img, int bits) {
  const auto mask = static_cast<std::uint8_t>(0xFF << (8 - bits));
  std::array<std::uint8_t, 256> lut;
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i & mask);
  return apply_lut(img, lut);
}

inline Image solarize(const Image& img, double threshold) {
  std::array<std::uint8_t, 256> lut;
  for (int i = 0; i < 256; ++i) {
    lut[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(i < threshold ? i : 255 - i);
  }
  return apply_lut(img, lut);
}

inline Image auto_contrast(const Image& img) {
  const auto hist = histograms(img);
  Image out(img.width, img.height);
  for (int ch = 0; ch < kChannels; ++ch) {
    int lo = 0;
    while (lo < 256 && hist[static_cast<std::size_t>(ch)][static_cast<std::size_t>(lo)] == 0) ++lo;
    int hi = 255;
    while (hi >= 0 && hist[static_cast<std::size_t>(ch)][static_cast<std::size_t>(hi)] == 0) --hi;

    std::array<std::uint8_t, 256> lut;
    if (hi <= lo) {
      for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    } else {
      const double scale = 255.0 / (hi - lo);
      const double offset = -lo * scale;
      for (int i = 0; i < 256; ++i) {
        lut[static_cast<std::size_t>(i)] = clamp_u8(std::lround(i * scale + offset));
      }
    }
    for (std::size_t i = static_cast<std::size_t>(ch); i < img.data.size(); i += kChannels) {
      out.data[i] = lut[img.data[i]];
    }
  }
  return out;
}

// Per-channel histogram remap: step = (pixels - count[last nonzero bin]) / 255;
// when step is zero the channel is left alone, otherwise
// lut[i] = (cumsum_before(i) + step/2) / step, clamped to 255.
inline Image equalize(const Image& img) {
  const auto hist = histograms(img);
  const auto total = static_cast<std::int64_t>(img.pixel_count());
  Image out(img.width, img.height);
  for (int ch = 0; ch < kChannels; ++ch) {
    const auto& h = hist[static_cast<std::size_t>(ch)];
    int last_nz = 255;
    while (last_nz > 0 && h[static_cast<std::size_t>(last_nz)] == 0) --last_nz;
    const std::int64_t step = (total - h[static_cast<std::size_t>(last_nz)]) / 255;

    std::array<std::uint8_t, 256> lut;
    if (step == 0) {
      for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    } else {
      std::int64_t n = step / 2;
      for (int i = 0; i < 256; ++i) {
        lut[static_cast<std::size_t>(i)] = clamp_u8(static_cast<long>(n / step));
        n += h[static_cast<std::size_t>(i)];
      }
    }
    for (std::size_t i = static_cast<std::size_t>(ch); i < img.data.size(); i += kChannels) {
      out.data[i] = lut[img.data[i]];
    }
  }
  return out;
}

inline int luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<int>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

}  // namespace detail

/// Degenerate image used by the four enhancer blends: Color fades toward the
/// per-pixel luminance gray, Contrast toward a uniform mean-luminance image,
/// Brightness toward black, Sharpness toward a 3x3-smoothed copy (kernel
/// 1,1,1 / 1,5,1 / 1,1,1 over 13; edge pixels untouched).
inline Image smooth_blend_base(const Image& img, OpKind kind) {
  switch (kind) {
    case OpKind::Brightness:
      return Image(img.width, img.height, 0);

    case OpKind::Color: {
      Image out(img.width, img.height);
      for (std::size_t i = 0; i < img.data.size(); i += kChannels) {
        const auto l = static_cast<std::uint8_t>(
            detail::luminance(img.data[i], img.data[i + 1], img.data[i + 2]));
        out.data[i] = out.data[i + 1] = out.data[i + 2] = l;
      }
      return out;
    }

    case OpKind::Contrast: {
      std::int64_t sum = 0;
      for (std::size_t i = 0; i < img.data.size(); i += kChannels) {
        sum += detail::luminance(img.data[i], img.data[i + 1], img.data[i + 2]);
      }
      const auto mean = static_cast<std::uint8_t>(std::lround(
          static_cast<double>(sum) / static_cast<double>(img.pixel_count())));
      return Image(img.width, img.height, mean);
    }

    case OpKind::Sharpness: {
      Image out = img;
      for (int y = 1; y + 1 < img.height; ++y) {
        for (int x = 1; x + 1 < img.width; ++x) {
          for (int ch = 0; ch < kChannels; ++ch) {
            int sum = 0;
            for (int dy = -1; dy <= 1; ++dy) {
              for (int dx = -1; dx <= 1; ++dx) {
                const int weight = (dx == 0 && dy == 0) ? 5 : 1;
                sum += weight * img.px(x + dx, y + dy)[ch];
              }
            }
            out.px(x, y)[ch] = detail::clamp_u8(std::lround(sum / 13.0));
          }
        }
      }
      return out;
    }

    default:
      throw InvalidMagnitude(std::string("no blend base for ") + op_name(kind));
  }
}

namespace detail {

inline Image enhance(const Image& img, OpKind kind, double factor) {
  const Image base = smooth_blend_base(img, kind);
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = base.data[i] + factor * (static_cast<double>(img.data[i]) -
                                              static_cast<double>(base.data[i]));
    out.data[i] = clamp_u8(std::lround(v));
  }
  return out;
}

}  // namespace detail

/// Applies one library op. The result has the same dimensions as the input;
/// the input buffer is never touched.
inline Image apply_op(const Image& img, const AugOp& op) {
  // Re-validate so ops deserialized or built by hand obey the range contract.
  const AugOp checked = AugOp::make(op.kind, op.magnitude);
  switch (checked.kind) {
    case OpKind::ShearX: return detail::shear_x(img, checked.magnitude);
    case OpKind::ShearY: return detail::shear_y(img, checked.magnitude);
    case OpKind::TranslateX: return detail::translate_x(img, checked.magnitude);
    case OpKind::TranslateY: return detail::translate_y(img, checked.magnitude);
    case OpKind::Rotate: return detail::rotate(img, checked.magnitude);
    case OpKind::Posterize:
      return detail::posterize(img, static_cast<int>(checked.magnitude));
    case OpKind::Solarize: return detail::solarize(img, checked.magnitude);
    case OpKind::Color:
    case OpKind::Contrast:
    case OpKind::Sharpness:
    case OpKind::Brightness:
      return detail::enhance(img, checked.kind, checked.magnitude);
    case OpKind::AutoContrast: return detail::auto_contrast(img);
    case OpKind::Equalize: return detail::equalize(img);
    case OpKind::Invert: return detail::invert(img);
  }
  throw InvalidMagnitude("unreachable op kind");
}

/// Uniform draw from the library: kind uniform over the 14 kinds, magnitude
/// uniform over that kind's range.
inline AugOp sample_op(RandomStream& rng) {
  const OpKind kind = kAllOpKinds[static_cast<std::size_t>(rng.next_below(kAllOpKinds.size()))];
  const MagnitudeRange range = magnitude_range(kind);
  if (!range.used) return AugOp::make(kind);
  double magnitude;
  if (range.integral) {
    magnitude = static_cast<double>(rng.next_int(static_cast<std::int64_t>(range.lo),
                                                 static_cast<std::int64_t>(range.hi)));
  } else {
    magnitude = rng.next_real(range.lo, range.hi);
  }
  return AugOp::make(kind, magnitude);
}

/// One applied op plus where it landed, in application order.
struct OpLogEntry {
  AugOp op;
  bool global = true;
  Rect region;  // full-image rect for global entries

  bool operator==(const OpLogEntry&) const = default;
};

inline nlohmann::json to_json(const OpLogEntry& entry) {
  nlohmann::json j{{"op", op_name(entry.op.kind)}, {"magnitude", entry.op.magnitude}};
  if (entry.global) {
    j["region"] = "global";
  } else {
    j["region"] = {entry.region.x, entry.region.y, entry.region.w, entry.region.h};
  }
  return j;
}

inline OpLogEntry op_log_entry_from_json(const nlohmann::json& j,
                                         const Rect& image_rect) {
  if (!j.is_object() || !j.contains("op") || !j.contains("magnitude") ||
      !j.contains("region")) {
    throw FormatError("op log entry must have op, magnitude and region");
  }
  OpLogEntry entry;
  entry.op = AugOp::make(op_kind_from_name(j.at("op").get<std::string>()),
                         j.at("magnitude").get<double>());
  const auto& region = j.at("region");
  if (region.is_string() && region.get<std::string>() == "global") {
    entry.global = true;
    entry.region = image_rect;
  } else if (region.is_array() && region.size() == 4) {
    entry.global = false;
    entry.region = {region[0].get<int>(), region[1].get<int>(),
                    region[2].get<int>(), region[3].get<int>()};
  } else {
    throw FormatError("op log region must be \"global\" or [x,y,w,h]");
  }
  return entry;
}

}  // namespace mmsl

#endif  // MMSL_OPS_HPP
