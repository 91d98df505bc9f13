#pragma once

// Workspace geometry: square cell grids, A1-style cell names, and the
// squeeze action that every planner emits and the simulator executes.

#include <array>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "craft/error.hpp"

namespace craft {

inline constexpr int kMinGridSize = 2;
inline constexpr int kMaxGridSize = 16;

/// A point in the workspace frame, millimetres. Origin at the top-left grid
/// corner, y grows downward so that it matches image rows.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double k, Point p) { return {k * p.x, k * p.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

struct GridSpec {
  int rows = 4;
  int cols = 4;
  double cell_size_mm = 20.0;
  int subdiv = 8;  // subcells per cell side

  void validate() const {
    if (rows != cols) throw InvalidArgument("grid must be square");
    if (rows < kMinGridSize || rows > kMaxGridSize)
      throw InvalidArgument("grid size must be within 2..16, got " + std::to_string(rows));
    if (!(cell_size_mm > 0.0)) throw InvalidArgument("cell_size_mm must be positive");
    if (subdiv < 2) throw InvalidArgument("subdiv must be at least 2");
  }

  static GridSpec square(int n, double cell_size_mm = 20.0, int subdiv = 8) {
    GridSpec g{n, n, cell_size_mm, subdiv};
    g.validate();
    return g;
  }

  double workspace_mm() const { return cols * cell_size_mm; }
  double subcell_mm() const { return cell_size_mm / subdiv; }
  double subcell_area_mm2() const { return subcell_mm() * subcell_mm(); }
  int raster_rows() const { return rows * subdiv; }
  int raster_cols() const { return cols * subdiv; }
  std::size_t cell_count() const { return static_cast<std::size_t>(rows) * cols; }

  /// Center of raster subcell (r, c) in workspace millimetres.
  Point subcell_center(int r, int c) const {
    const double s = subcell_mm();
    return {(c + 0.5) * s, (r + 0.5) * s};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct CellId {
  int col = 0;
  int row = 0;

  // Lexicographic by (col, row); this is the canonical action ordering.
  friend auto operator<=>(const CellId&, const CellId&) = default;
};

inline bool in_grid(CellId c, const GridSpec& g) {
  return c.col >= 0 && c.col < g.cols && c.row >= 0 && c.row < g.rows;
}

inline std::string format_cell(CellId c) {
  std::string s(1, static_cast<char>('A' + c.col));
  s += std::to_string(c.row + 1);
  return s;
}

inline CellId parse_cell(std::string_view text, const GridSpec& grid) {
  const std::string shown(text);
  if (text.empty()) throw ParseError("empty cell name");
  const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(text.front())));
  if (letter < 'A' || letter > 'Z') throw ParseError("cell must start with a column letter: '" + shown + "'");
  const auto digits = text.substr(1);
  if (digits.empty() || digits.size() > 2) throw ParseError("malformed cell row in '" + shown + "'");
  int row = 0;
  for (char ch : digits) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) throw ParseError("malformed cell row in '" + shown + "'");
    row = row * 10 + (ch - '0');
  }
  if (digits.front() == '0') throw ParseError("malformed cell row in '" + shown + "'");
  CellId cell{letter - 'A', row - 1};
  if (!in_grid(cell, grid))
    throw ParseError("cell '" + shown + "' is outside the " + std::to_string(grid.cols) + "x" +
                     std::to_string(grid.rows) + " grid");
  return cell;
}

/// Center of a cell; cell (col, row) spans [col, col+1) x [row, row+1) cells.
inline Point cell_center(CellId c, const GridSpec& g) {
  return {(c.col + 0.5) * g.cell_size_mm, (c.row + 0.5) * g.cell_size_mm};
}

// Enumerator order doubles as the strength component of the canonical
// action ordering.
enum class Strength { min, medium, max, fixed };

inline constexpr std::array<Strength, 3> kVariedStrengths{Strength::min, Strength::medium, Strength::max};

inline std::string_view to_string(Strength s) {
  switch (s) {
    case Strength::min: return "min";
    case Strength::medium: return "medium";
    case Strength::max: return "max";
    case Strength::fixed: return "fixed";
  }
  return "?";
}

inline Strength parse_strength(std::string_view text) {
  std::string t;
  for (char ch : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (t == "min" || t == "minimum") return Strength::min;
  if (t == "medium" || t == "med") return Strength::medium;
  if (t == "max" || t == "maximum") return Strength::max;
  if (t == "fixed") return Strength::fixed;
  throw ParseError("unknown squeeze strength '" + std::string(text) + "'");
}

/// Whether the agent chooses strengths or always closes to the fixed gap.
enum class SqueezeMode { fixed, varied };

inline std::vector<Strength> strengths_for(SqueezeMode mode) {
  if (mode == SqueezeMode::fixed) return {Strength::fixed};
  return {kVariedStrengths.begin(), kVariedStrengths.end()};
}

inline Strength default_strength(SqueezeMode mode) {
  return mode == SqueezeMode::fixed ? Strength::fixed : Strength::medium;
}

inline std::string_view to_string(SqueezeMode m) { return m == SqueezeMode::fixed ? "fixed" : "varied"; }

inline SqueezeMode parse_squeeze_mode(std::string_view text) {
  if (text == "fixed") return SqueezeMode::fixed;
  if (text == "varied") return SqueezeMode::varied;
  throw ParseError("squeeze mode must be 'fixed' or 'varied', got '" + std::string(text) + "'");
}

/// Final fingertip gap per strength, plus the fingertip width that sets the
/// squeeze corridor's lateral extent.
struct StrengthTable {
  double min_mm = 25.0;
  double medium_mm = 15.0;
  double max_mm = 8.0;
  double fixed_mm = 15.0;
  double fingertip_width_mm = 20.0;

  double gap(Strength s) const {
    switch (s) {
      case Strength::min: return min_mm;
      case Strength::medium: return medium_mm;
      case Strength::max: return max_mm;
      case Strength::fixed: return fixed_mm;
    }
    return medium_mm;
  }

  void validate() const {
    if (!(max_mm > 0.0 && fixed_mm > 0.0)) throw InvalidArgument("fingertip gaps must be positive");
    if (!(min_mm > medium_mm && medium_mm > max_mm))
      throw InvalidArgument("gaps must strictly decrease from min to max strength");
    if (!(fingertip_width_mm > 0.0)) throw InvalidArgument("fingertip width must be positive");
  }

  friend bool operator==(const StrengthTable&, const StrengthTable&) = default;
};

struct SqueezeAction {
  CellId a;
  CellId b;
  Strength strength = Strength::fixed;

  friend auto operator<=>(const SqueezeAction&, const SqueezeAction&) = default;
};

inline SqueezeAction canonicalize(SqueezeAction act) {
  if (act.b < act.a) std::swap(act.a, act.b);
  return act;
}

inline bool is_canonical(const SqueezeAction& act) { return !(act.b < act.a); }

inline void validate_action(const SqueezeAction& act, const GridSpec& grid) {
  if (!in_grid(act.a, grid) || !in_grid(act.b, grid))
    throw InvalidAction("action cell outside the grid: " + format_cell(act.a) + ", " + format_cell(act.b));
  if (act.a == act.b) throw InvalidAction("squeeze needs two distinct cells, got " + format_cell(act.a) + " twice");
}

/// Textual form accepted back by the trajectory parser.
inline std::string format_action(const SqueezeAction& act) {
  std::string s = "SQUEEZE " + format_cell(act.a) + " AND " + format_cell(act.b);
  if (act.strength != Strength::fixed) {
    s += " AT ";
    for (char ch : to_string(act.strength)) s += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return s;
}

using Trajectory = std::vector<SqueezeAction>;

inline Trajectory canonicalize(Trajectory t) {
  for (auto& a : t) a = canonicalize(a);
  return t;
}

/// Every unordered pair of distinct cells, each pair canonical, in
/// canonical order.
inline std::vector<std::pair<CellId, CellId>> all_cell_pairs(const GridSpec& grid) {
  std::vector<CellId> cells;
  for (int c = 0; c < grid.cols; ++c)
    for (int r = 0; r < grid.rows; ++r) cells.push_back({c, r});
  std::vector<std::pair<CellId, CellId>> pairs;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j) pairs.emplace_back(cells[i], cells[j]);
  return pairs;
}

}  // namespace craft
