#pragma once

// Letter goals as stroked polylines in the unit square, rasterized onto the
// subcell raster of a workspace.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "craft/clay.hpp"
#include "craft/error.hpp"
#include "craft/grid.hpp"
#include "craft/raster.hpp"

namespace craft {

using Polyline = std::vector<Point>;  // normalized [0,1]^2 coordinates

struct StrokeDef {
  std::vector<Polyline> polylines;
  double stroke_width_mm = 15.0;

  void validate() const {
    if (polylines.empty()) throw InvalidArgument("stroke definition needs at least one polyline");
    for (const auto& pl : polylines)
      if (pl.empty()) throw InvalidArgument("stroke polyline must have at least one point");
    if (!(stroke_width_mm > 0.0)) throw InvalidArgument("stroke width must be positive");
  }
};

inline double point_segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

/// Subcell is set iff its center is within half the stroke width of a
/// polyline segment, polylines scaled from the unit square to the workspace.
inline Mask rasterize_goal(const StrokeDef& def, const GridSpec& grid) {
  def.validate();
  grid.validate();
  const double span = grid.workspace_mm();
  const double half_width = def.stroke_width_mm / 2.0;
  std::vector<std::pair<Point, Point>> segments;
  for (const auto& pl : def.polylines) {
    if (pl.size() == 1) segments.emplace_back(span * pl[0], span * pl[0]);
    for (std::size_t i = 1; i < pl.size(); ++i) segments.emplace_back(span * pl[i - 1], span * pl[i]);
  }
  Mask mask(grid.raster_rows(), grid.raster_cols(), 0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      const Point p = grid.subcell_center(r, c);
      for (const auto& [a, b] : segments) {
        if (point_segment_distance(p, a, b) <= half_width) {
          mask(r, c) = 1;
          break;
        }
      }
    }
  }
  return mask;
}

using LetterLibrary = std::map<std::string, StrokeDef>;

namespace detail {

// Open arc around (cx, 0.5), leaving a gap of +-open radians on the right.
inline Polyline arc(double cx, double r, double open, int segments = 16) {
  Polyline pl;
  for (int i = 0; i <= segments; ++i) {
    const double a = open + (2.0 * std::numbers::pi - 2.0 * open) * i / segments;
    pl.push_back({cx + r * std::cos(a), 0.5 - r * std::sin(a)});
  }
  return pl;
}

}  // namespace detail

// Sized for the default 26mm disc: no letter needs more clay than the disc
// holds at the occupancy threshold.
inline LetterLibrary builtin_letters() {
  LetterLibrary lib;
  lib["I"] = StrokeDef{{{{0.5, 0.232}, {0.5, 0.768}}}, 22.85};
  lib["L"] = StrokeDef{{{{0.398, 0.203}, {0.398, 0.649}, {0.653, 0.649}}}, 22.85};
  lib["T"] = StrokeDef{{{{0.299, 0.398}, {0.701, 0.398}}, {{0.5, 0.398}, {0.5, 0.811}}}, 19.13};
  lib["X"] = StrokeDef{{{{0.155, 0.155}, {0.841, 0.841}}, {{0.845, 0.155}, {0.159, 0.841}}}, 8.64};
  lib["C"] = StrokeDef{{detail::arc(0.569, 0.255, 0.929)}, 15.81};
  return lib;
}

inline void to_json(nlohmann::json& j, const StrokeDef& d) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& pl : d.polylines) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : pl) pts.push_back({p.x, p.y});
    lines.push_back(std::move(pts));
  }
  j = {{"polylines", std::move(lines)}, {"stroke_width_mm", d.stroke_width_mm}};
}

inline void from_json(const nlohmann::json& j, StrokeDef& d) {
  d.polylines.clear();
  for (const auto& line : j.at("polylines")) {
    Polyline pl;
    for (const auto& p : line) pl.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    d.polylines.push_back(std::move(pl));
  }
  d.stroke_width_mm = j.value("stroke_width_mm", 15.0);
  d.validate();
}

/// Loads {"X": {polylines, stroke_width_mm}, ...}; entries override the
/// builtin letters of the same name.
inline LetterLibrary load_letter_library(const std::string& path, LetterLibrary base = builtin_letters()) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open goal library " + path);
  nlohmann::json j;
  try {
    in >> j;
    for (auto it = j.begin(); it != j.end(); ++it) base[it.key()] = it.value().get<StrokeDef>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid goal library " + path + ": " + e.what());
  }
  return base;
}

struct GoalSpec {
  std::string letter;
  std::string text_description;
  std::optional<Mask> mask;
  std::optional<std::vector<Point>> target_points;
  bool provide_image = true;

  bool has_raster() const { return mask.has_value(); }
  /// No goal image may be shown: either the image is withheld on purpose
  /// or there is nothing to render.
  bool text_only() const { return !provide_image || !mask.has_value(); }
};

inline std::string letter_description(const std::string& letter) { return "the capital letter " + letter; }

inline GoalSpec make_letter_goal(const std::string& letter, const GridSpec& grid, bool provide_image = true,
                                 const LetterLibrary& lib = builtin_letters()) {
  const auto it = lib.find(letter);
  if (it == lib.end()) throw InvalidArgument("unknown goal letter '" + letter + "'");
  GoalSpec g;
  g.letter = letter;
  g.text_description = letter_description(letter);
  g.mask = rasterize_goal(it->second, grid);
  g.target_points = mask_points(*g.mask, grid);
  g.provide_image = provide_image;
  return g;
}

/// Goal known only by its description; nothing to render or score against.
inline GoalSpec make_text_goal(std::string description) {
  GoalSpec g;
  g.text_description = std::move(description);
  g.provide_image = false;
  return g;
}

}  // namespace craft
