#pragma once

// Deterministic, mass-conserving 2D clay model.
//
// Mass lives on a subcell raster in integer units, so conservation is exact.
// A squeeze closes two fingertips from the centers of two cells toward each
// other. Clay in the swept zones is pushed into the final gap between the
// fingertips, which fills up to the density cap; whatever does not fit is
// extruded into the nearest free subcells outside the fingertip corridor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "craft/error.hpp"
#include "craft/grid.hpp"
#include "craft/raster.hpp"

namespace craft {

using Mass = std::int64_t;

inline constexpr Mass kDefaultDensityCap = 1000;
inline constexpr Mass kDefaultInitialDensity = 800;
inline constexpr double kDefaultDiscRadiusMm = 26.0;
inline constexpr double kDefaultOccupancyFraction = 0.5;

class ClayField {
 public:
  ClayField() = default;

  ClayField(GridSpec grid, Mass density_cap) : grid_(grid), density_cap_(density_cap) {
    grid_.validate();
    if (density_cap_ <= 0) throw InvalidArgument("density cap must be positive");
    mass_ = Raster<Mass>(grid_.raster_rows(), grid_.raster_cols(), 0);
  }

  ClayField(GridSpec grid, Mass density_cap, Raster<Mass> mass) : ClayField(grid, density_cap) {
    if (mass.rows() != mass_.rows() || mass.cols() != mass_.cols())
      throw InvalidArgument("mass raster dimensions do not match the grid");
    for (Mass m : mass)
      if (m < 0 || m > density_cap_) throw InvalidArgument("mass value outside [0, density_cap]");
    mass_ = std::move(mass);
    total_ = std::accumulate(mass_.begin(), mass_.end(), Mass{0});
  }

  const GridSpec& grid() const noexcept { return grid_; }
  Mass density_cap() const noexcept { return density_cap_; }
  const Raster<Mass>& mass() const noexcept { return mass_; }
  Mass total_mass() const noexcept { return total_; }
  Mass at(int r, int c) const noexcept { return mass_(r, c); }

  /// Recomputes the raster sum and checks per-subcell bounds.
  bool verify() const {
    Mass sum = 0;
    for (Mass m : mass_) {
      if (m < 0 || m > density_cap_) return false;
      sum += m;
    }
    return sum == total_;
  }

  friend bool operator==(const ClayField&, const ClayField&) = default;

 private:
  friend struct SqueezeKernel;

  GridSpec grid_{};
  Mass density_cap_ = kDefaultDensityCap;
  Raster<Mass> mass_;
  Mass total_ = 0;
};

struct SqueezeOutcome {
  ClayField field;
  Mass displaced_mass = 0;  // mass taken out of the swept zones
  Mass extruded_mass = 0;   // part of it that left the corridor
  bool overflowed = false;  // always false on return; overflow raises OverflowError
};

/// Uniform-density disc centered in the workspace. Subcells whose centers
/// lie within `radius_mm` of the center receive `density`.
inline ClayField initial_disc(const GridSpec& grid, double radius_mm = kDefaultDiscRadiusMm,
                              Mass density = kDefaultInitialDensity, Mass density_cap = kDefaultDensityCap) {
  grid.validate();
  if (radius_mm < 0.0) throw InvalidArgument("disc radius must be non-negative");
  if (2.0 * radius_mm > grid.workspace_mm()) throw InvalidArgument("disc exceeds the workspace");
  if (density < 0 || density > density_cap) throw InvalidArgument("disc density must lie in [0, density_cap]");
  const double half = grid.workspace_mm() / 2.0;
  const Point center{half, half};
  Raster<Mass> mass(grid.raster_rows(), grid.raster_cols(), 0);
  for (int r = 0; r < mass.rows(); ++r)
    for (int c = 0; c < mass.cols(); ++c)
      if (distance(grid.subcell_center(r, c), center) <= radius_mm) mass(r, c) = density;
  return ClayField(grid, density_cap, std::move(mass));
}

/// Geometry of one squeeze in the workspace frame. Along-axis coordinate `s`
/// runs from cell a to cell b, lateral coordinate `t` is perpendicular;
/// both are measured from the midpoint of the two cell centers.
struct SqueezeGeometry {
  // Boundary slack and key resolution; rounding noise must not reorder ties.
  static constexpr double kGeometryEpsMm = 1e-9;
  static double quantize(double mm) { return std::round(mm * 1e6) / 1e6; }

  Point mid;
  Point axis;     // unit vector a -> b
  Point lateral;  // unit vector perpendicular to axis
  double center_distance = 0.0;
  double gap = 0.0;
  double width = 0.0;

  static SqueezeGeometry of(const SqueezeAction& act, const GridSpec& grid, const StrengthTable& strengths) {
    const Point ca = cell_center(act.a, grid);
    const Point cb = cell_center(act.b, grid);
    SqueezeGeometry g;
    g.center_distance = distance(ca, cb);
    g.axis = (1.0 / g.center_distance) * (cb - ca);
    g.lateral = {-g.axis.y, g.axis.x};
    g.mid = 0.5 * (ca + cb);
    g.gap = strengths.gap(act.strength);
    g.width = strengths.fingertip_width_mm;
    return g;
  }

  double along(Point p) const { return dot(p - mid, axis); }
  double across(Point p) const { return dot(p - mid, lateral); }

  bool in_corridor(Point p) const {
    return std::abs(along(p)) <= center_distance / 2.0 + kGeometryEpsMm &&
           std::abs(across(p)) <= width / 2.0 + kGeometryEpsMm;
  }
  bool in_final_region(Point p) const { return in_corridor(p) && std::abs(along(p)) <= gap / 2.0 + kGeometryEpsMm; }

  /// Euclidean distance from p to the final-region rectangle (0 inside).
  double distance_to_final_region(Point p) const {
    const double ds = std::max(std::abs(along(p)) - gap / 2.0, 0.0);
    const double dt = std::max(std::abs(across(p)) - width / 2.0, 0.0);
    return std::hypot(ds, dt);
  }
};

struct SqueezeKernel {
  static SqueezeOutcome run(const ClayField& field, SqueezeAction act, const StrengthTable& strengths) {
    const GridSpec& grid = field.grid();
    validate_action(act, grid);
    act = canonicalize(act);
    const auto geo = SqueezeGeometry::of(act, grid, strengths);
    if (geo.gap >= geo.center_distance)
      throw InvalidAction("fingertip gap " + std::to_string(geo.gap) + "mm is not smaller than the cell distance " +
                          std::to_string(geo.center_distance) + "mm for " + format_action(act));

    const Mass cap = field.density_cap();
    const int rows = grid.raster_rows(), cols = grid.raster_cols();

    // Pass 1: empty the swept zones and note the final-region subcells.
    ClayField out = field;
    Raster<Mass>& mass = out.mass_;
    Mass swept = 0;
    struct Slot {
      double key;
      std::size_t index;
    };
    std::vector<Slot> final_slots;
    std::vector<std::uint8_t> corridor(mass.size(), 0);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const Point p = grid.subcell_center(r, c);
        if (!geo.in_corridor(p)) continue;
        const std::size_t i = mass.index(r, c);
        corridor[i] = 1;
        if (std::abs(geo.along(p)) <= geo.gap / 2.0 + SqueezeGeometry::kGeometryEpsMm) {
          final_slots.push_back({-SqueezeGeometry::quantize(std::abs(geo.along(p))), i});
        } else {
          swept += mass[i];
          mass[i] = 0;
        }
      }
    }
    SqueezeOutcome result;
    result.displaced_mass = swept;
    if (swept == 0) {
      result.field = std::move(out);
      return result;
    }

    // Pass 2: compact into the final region, nearest the fingertip faces first.
    auto by_key = [](const Slot& x, const Slot& y) { return x.key != y.key ? x.key < y.key : x.index < y.index; };
    std::sort(final_slots.begin(), final_slots.end(), by_key);
    Mass remaining = swept;
    for (const Slot& s : final_slots) {
      if (remaining == 0) break;
      const Mass take = std::min(cap - mass[s.index], remaining);
      mass[s.index] += take;
      remaining -= take;
    }

    // Pass 3: extrude the excess into the nearest free subcells outside the corridor.
    result.extruded_mass = remaining;
    if (remaining > 0) {
      std::vector<Slot> free_slots;
      Mass capacity = 0;
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const std::size_t i = mass.index(r, c);
          if (corridor[i] || mass[i] >= cap) continue;
          free_slots.push_back({SqueezeGeometry::quantize(geo.distance_to_final_region(grid.subcell_center(r, c))), i});
          capacity += cap - mass[i];
        }
      }
      if (capacity < remaining) throw OverflowError("workspace has no free capacity for the displaced clay");
      std::sort(free_slots.begin(), free_slots.end(), by_key);
      for (const Slot& s : free_slots) {
        if (remaining == 0) break;
        const Mass take = std::min(cap - mass[s.index], remaining);
        mass[s.index] += take;
        remaining -= take;
      }
    }
    result.field = std::move(out);
    return result;
  }
};

inline SqueezeOutcome apply_squeeze(const ClayField& field, const SqueezeAction& act,
                                    const StrengthTable& strengths = {}) {
  return SqueezeKernel::run(field, act, strengths);
}

/// Whether the action is executable at all on this grid (distinct in-grid
/// cells whose centers are farther apart than the strength's gap).
inline bool is_executable(const SqueezeAction& act, const GridSpec& grid, const StrengthTable& strengths = {}) {
  if (!in_grid(act.a, grid) || !in_grid(act.b, grid) || act.a == act.b) return false;
  return strengths.gap(act.strength) < distance(cell_center(act.a, grid), cell_center(act.b, grid));
}

inline Mask occupancy_mask(const ClayField& field, double threshold_fraction = kDefaultOccupancyFraction) {
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0))
    throw InvalidArgument("occupancy threshold must lie strictly between 0 and 1");
  const double threshold = threshold_fraction * static_cast<double>(field.density_cap());
  const auto& mass = field.mass();
  Mask m(mass.rows(), mass.cols(), 0);
  for (std::size_t i = 0; i < mass.size(); ++i) m[i] = static_cast<double>(mass[i]) >= threshold ? 1 : 0;
  return m;
}

/// Centers of the set subcells of a mask, row-major.
inline std::vector<Point> mask_points(const Mask& mask, const GridSpec& grid) {
  std::vector<Point> pts;
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c)
      if (mask(r, c)) pts.push_back(grid.subcell_center(r, c));
  return pts;
}

inline std::vector<Point> point_set(const ClayField& field) {
  return mask_points(occupancy_mask(field, kDefaultOccupancyFraction), field.grid());
}

// --- JSON -------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const GridSpec& g) {
  j = {{"rows", g.rows}, {"cols", g.cols}, {"cell_size_mm", g.cell_size_mm}, {"subdiv", g.subdiv}};
}

inline void from_json(const nlohmann::json& j, GridSpec& g) {
  g.rows = j.at("rows").get<int>();
  g.cols = j.value("cols", g.rows);
  g.cell_size_mm = j.value("cell_size_mm", 20.0);
  g.subdiv = j.value("subdiv", 8);
  g.validate();
}

inline nlohmann::json field_to_json(const ClayField& f) {
  nlohmann::json mass = nlohmann::json::array();
  for (Mass m : f.mass()) mass.push_back(m);
  return {{"grid", f.grid()}, {"density_cap", f.density_cap()}, {"mass", std::move(mass)}};
}

inline ClayField field_from_json(const nlohmann::json& j) {
  try {
    const auto grid = j.at("grid").get<GridSpec>();
    const Mass cap = j.at("density_cap").get<Mass>();
    const auto& arr = j.at("mass");
    std::vector<Mass> values;
    values.reserve(arr.size());
    for (const auto& v : arr) values.push_back(v.get<Mass>());
    return ClayField(grid, cap, Raster<Mass>(grid.raster_rows(), grid.raster_cols(), std::move(values)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid clay field JSON: ") + e.what());
  }
}

}  // namespace craft
