#pragma once

// In-memory RGB PNG encode/decode on top of libpng. The encoder writes only
// IHDR/IDAT/IEND with fixed settings, so equal images give equal bytes.

#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "craft/error.hpp"

namespace craft {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major

  Image() = default;
  Image(int w, int h, Rgb fill = {}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Rgb& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  void fill_rect(int x0, int y0, int w, int h, Rgb c) {
    for (int y = std::max(0, y0); y < std::min(height, y0 + h); ++y)
      for (int x = std::max(0, x0); x < std::min(width, x0 + w); ++x) at(x, y) = c;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

inline void png_error_fn(png_structp, png_const_charp msg) { throw Error(std::string("png: ") + msg); }
inline void png_warning_fn(png_structp, png_const_charp) {}

struct ReadCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.width <= 0 || img.height <= 0 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
    throw InvalidArgument("cannot encode an empty or malformed image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn, detail::png_warning_fn);
  if (!png) throw Error("png: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  try {
    if (!info) throw Error("png: cannot allocate info struct");
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t len) {
          auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
          buf->insert(buf->end(), data, data + len);
        },
        nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 9);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const Rgb& c = img.at(x, y);
        row[3 * x] = c.r, row[3 * x + 1] = c.g, row[3 * x + 2] = c.b;
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

/// Decodes any 8-bit or 16-bit PNG to RGB.
inline Image decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ParseError("not a PNG image");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn, detail::png_warning_fn);
  if (!png) throw Error("png: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  Image img;
  detail::ReadCursor cur{bytes.data(), bytes.size(), 0};
  try {
    if (!info) throw Error("png: cannot allocate info struct");
    png_set_read_fn(png, &cur, [](png_structp p, png_bytep data, png_size_t len) {
      auto* c = static_cast<detail::ReadCursor*>(png_get_io_ptr(p));
      if (c->pos + len > c->size) png_error(p, "truncated data");
      std::memcpy(data, c->data + c->pos, len);
      c->pos += len;
    });
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    img = Image(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
    std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
    for (int y = 0; y < img.height; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < img.width; ++x) img.at(x, y) = {row[3 * x], row[3 * x + 1], row[3 * x + 2]};
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace craft
