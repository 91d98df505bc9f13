#pragma once

// Gridded top-down images of clay states and goals, plus the per-cell binary
// array view of the same occupancy.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "craft/clay.hpp"
#include "craft/error.hpp"
#include "craft/goals.hpp"
#include "craft/grid.hpp"
#include "craft/png.hpp"
#include "craft/raster.hpp"

namespace craft {

struct RenderSpec {
  int image_px = 512;      // side of the gridded clay area
  int label_font_px = 14;  // glyph height, rounded down to a multiple of 7
  Rgb clay_color{196, 120, 64};
  Rgb background_color{255, 255, 255};
  Rgb gridline_color{40, 40, 40};
  Rgb label_color{0, 0, 0};

  int glyph_scale() const { return std::max(1, label_font_px / 7); }
  /// Width of the label band along the top and left edges.
  int margin_px() const { return 2 * (6 * glyph_scale()) + 4 * glyph_scale(); }
  /// Pixel block per subcell.
  int block_px(const GridSpec& grid) const { return image_px / (grid.cols * grid.subdiv); }
  /// Full canvas side: margin, clay area, closing gridline.
  int canvas_px() const { return margin_px() + image_px + 1; }

  void validate(const GridSpec& grid) const {
    grid.validate();
    if (image_px <= 0) throw InvalidArgument("image_px must be positive");
    if (label_font_px < 7) throw InvalidArgument("label_font_px must be at least 7");
    const int raster = grid.cols * grid.subdiv;
    if (image_px % raster != 0)
      throw InvalidArgument("image_px " + std::to_string(image_px) + " is not divisible by the subcell raster width " +
                            std::to_string(raster));
    if (image_px / raster < 2) throw InvalidArgument("image_px leaves less than 2 pixels per subcell");
  }
};

/// Largest image size <= limit whose subcell blocks are whole pixels.
inline int fitted_image_px(const GridSpec& grid, int limit = 512) {
  const int raster = grid.cols * grid.subdiv;
  const int px = (limit / raster) * raster;
  if (px < 2 * raster) throw InvalidArgument("grid too fine to render at " + std::to_string(limit) + "px");
  return px;
}

/// Per-cell rows x cols occupancy.
using BinaryCellArray = Raster<std::uint8_t>;

/// Cell is 1 iff strictly more than half its subcells are occupied.
inline BinaryCellArray binary_array_from_mask(const Mask& occ, const GridSpec& grid) {
  if (occ.rows() != grid.raster_rows() || occ.cols() != grid.raster_cols())
    throw InvalidArgument("mask dimensions do not match the grid");
  BinaryCellArray out(grid.rows, grid.cols, 0);
  const int half2 = grid.subdiv * grid.subdiv;  // compare 2 * count > subdiv^2
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      int count = 0;
      for (int i = 0; i < grid.subdiv; ++i)
        for (int j = 0; j < grid.subdiv; ++j) count += occ(r * grid.subdiv + i, c * grid.subdiv + j) ? 1 : 0;
      out(r, c) = 2 * count > half2 ? 1 : 0;
    }
  return out;
}

inline BinaryCellArray binary_array(const ClayField& field) {
  return binary_array_from_mask(occupancy_mask(field), field.grid());
}

/// Rows of 0/1 digits, one line per grid row, e.g. "0110\n0110\n".
inline std::string format_binary_array(const BinaryCellArray& a) {
  std::string s;
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      if (c) s += ' ';
      s += a(r, c) ? '1' : '0';
    }
    s += '\n';
  }
  return s;
}

namespace detail {

// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
inline const std::array<std::uint8_t, 7>* glyph(char ch) {
  static const std::array<std::array<std::uint8_t, 7>, 10> digits{{
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
      {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
      {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
      {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
      {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
      {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
  }};
  static const std::array<std::array<std::uint8_t, 7>, 16> letters{{
      {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // A
      {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},  // B
      {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E},  // C
      {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},  // D
      {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F},  // E
      {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},  // F
      {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F},  // G
      {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // H
      {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // I
      {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},  // J
      {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11},  // K
      {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},  // L
      {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11},  // M
      {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},  // N
      {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // O
      {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},  // P
  }};
  if (ch >= '0' && ch <= '9') return &digits[static_cast<std::size_t>(ch - '0')];
  if (ch >= 'A' && ch <= 'P') return &letters[static_cast<std::size_t>(ch - 'A')];
  return nullptr;
}

inline int text_width(const std::string& s, int scale) { return s.empty() ? 0 : static_cast<int>(s.size()) * 6 * scale - scale; }

inline void draw_text(Image& img, int x, int y, const std::string& s, int scale, Rgb color) {
  for (char ch : s) {
    if (const auto* g = glyph(ch)) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if ((*g)[row] & (0x10 >> col)) img.fill_rect(x + col * scale, y + row * scale, scale, scale, color);
    }
    x += 6 * scale;
  }
}

inline Image render_mask(const Mask& occ, const GridSpec& grid, const RenderSpec& spec) {
  spec.validate(grid);
  if (occ.rows() != grid.raster_rows() || occ.cols() != grid.raster_cols())
    throw InvalidArgument("mask dimensions do not match the grid");
  const int m = spec.margin_px();
  const int k = spec.block_px(grid);
  const int cell_px = k * grid.subdiv;
  const int scale = spec.glyph_scale();
  Image img(spec.canvas_px(), spec.canvas_px(), spec.background_color);
  for (int r = 0; r < occ.rows(); ++r)
    for (int c = 0; c < occ.cols(); ++c)
      if (occ(r, c)) img.fill_rect(m + c * k, m + r * k, k, k, spec.clay_color);
  for (int i = 0; i <= grid.cols; ++i) img.fill_rect(m + i * cell_px, m, 1, spec.image_px + 1, spec.gridline_color);
  for (int i = 0; i <= grid.rows; ++i) img.fill_rect(m, m + i * cell_px, spec.image_px + 1, 1, spec.gridline_color);
  const int glyph_h = 7 * scale;
  for (int c = 0; c < grid.cols; ++c) {
    const std::string label(1, static_cast<char>('A' + c));
    draw_text(img, m + c * cell_px + (cell_px - text_width(label, scale)) / 2, (m - glyph_h) / 2, label, scale,
              spec.label_color);
  }
  for (int r = 0; r < grid.rows; ++r) {
    const std::string label = std::to_string(r + 1);
    draw_text(img, (m - text_width(label, scale)) / 2, m + r * cell_px + (cell_px - glyph_h) / 2, label, scale,
              spec.label_color);
  }
  return img;
}

}  // namespace detail

inline Image render_state_image(const ClayField& field, const RenderSpec& spec = {}) {
  return detail::render_mask(occupancy_mask(field), field.grid(), spec);
}

inline std::vector<std::uint8_t> render_state(const ClayField& field, const RenderSpec& spec = {}) {
  return encode_png(render_state_image(field, spec));
}

inline Image render_goal_image(const GoalSpec& goal, const GridSpec& grid, const RenderSpec& spec = {}) {
  if (!goal.mask) throw InvalidArgument("goal '" + goal.text_description + "' has no raster form to render");
  return detail::render_mask(*goal.mask, grid, spec);
}

inline std::vector<std::uint8_t> render_goal(const GoalSpec& goal, const GridSpec& grid, const RenderSpec& spec = {}) {
  return encode_png(render_goal_image(goal, grid, spec));
}

/// Recovers the subcell occupancy from a rendered image by sampling the
/// center pixel of each subcell block.
inline Mask mask_from_image(const Image& img, const GridSpec& grid, const RenderSpec& spec = {}) {
  spec.validate(grid);
  if (img.width != spec.canvas_px() || img.height != spec.canvas_px())
    throw InvalidArgument("image size does not match the render spec");
  const int m = spec.margin_px();
  const int k = spec.block_px(grid);
  Mask occ(grid.raster_rows(), grid.raster_cols(), 0);
  for (int r = 0; r < occ.rows(); ++r)
    for (int c = 0; c < occ.cols(); ++c) occ(r, c) = img.at(m + c * k + k / 2, m + r * k + k / 2) == spec.clay_color;
  return occ;
}

}  // namespace craft
