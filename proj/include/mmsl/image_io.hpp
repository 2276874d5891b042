// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_IMAGE_IO_HPP
#define MMSL_IMAGE_IO_HPP

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "mmsl/errors.hpp"
#include "mmsl/image.hpp"

namespace mmsl {
namespace detail {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

inline FilePtr open_file(const std::string& path, const char* mode) {
  return FilePtr(std::fopen(path.c_str(), mode), &std::fclose);
}

inline Image load_png(std::FILE* fp, const std::string& path) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DecodeError(path + ": png reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError(path + ": png info allocation failed");
  }

  // Locals that must outlive a longjmp back to the setjmp point.
  Image out;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError(path + ": corrupt or unsupported PNG");
  }

  png_init_io(png, fp);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  // Normalize everything to 8-bit RGB: expand palettes and low-depth gray,
  // strip 16-bit down, replicate gray across channels, drop alpha.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const auto w = static_cast<int>(png_get_image_width(png, info));
  const auto h = static_cast<int>(png_get_image_height(png, info));
  if (w <= 0 || h <= 0 ||
      png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * kChannels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError(path + ": unexpected PNG layout");
  }

  out = Image(w, h);
  rows.resize(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = out.px(0, y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

struct JpegErrorTrap {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* trap = reinterpret_cast<JpegErrorTrap*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, trap->message);
  std::longjmp(trap->jump, 1);
}

inline void jpeg_silence(j_common_ptr, int) {}

inline Image load_jpeg(std::FILE* fp, const std::string& path) {
  jpeg_decompress_struct cinfo;
  JpegErrorTrap trap;
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = &jpeg_error_exit;
  trap.mgr.emit_message = &jpeg_silence;

  Image out;
  if (setjmp(trap.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError(path + ": " + trap.message);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;  // grayscale sources come back replicated
  jpeg_start_decompress(&cinfo);

  out = Image(static_cast<int>(cinfo.output_width),
              static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.px(0, static_cast<int>(cinfo.output_scanline));
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace detail

/// Decodes a PNG or JPEG file (sniffed by magic bytes, not extension) into an
/// 8-bit RGB image. Grayscale sources are replicated across channels and any
/// alpha channel is dropped.
inline Image load_image(const std::string& path) {
  auto fp = detail::open_file(path, "rb");
  if (!fp) throw IoError(path + ": cannot open for reading");

  unsigned char magic[8] = {};
  const std::size_t got = std::fread(magic, 1, sizeof magic, fp.get());
  std::rewind(fp.get());

  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) {
    return detail::load_png(fp.get(), path);
  }
  if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) {
    return detail::load_jpeg(fp.get(), path);
  }
  throw DecodeError(path + ": not a PNG or JPEG file");
}

/// Writes `img` as an 8-bit RGB PNG. Lossless: load_image(save_image(img))
/// returns a bit-identical buffer.
inline void save_image(const Image& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0) {
    throw IoError(path + ": refusing to write an empty image");
  }
  auto fp = detail::open_file(path, "wb");
  if (!fp) throw IoError(path + ": cannot open for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError(path + ": png writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError(path + ": png info allocation failed");
  }

  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path + ": PNG write failed");
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(img.px(0, y));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace mmsl

#endif  // MMSL_IMAGE_IO_HPP
