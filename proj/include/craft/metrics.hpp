#pragma once

// Shape metrics: Chamfer distance, Earth Mover's Distance, mean contour
// curvature and perimeter-to-area ratio. Everything is in millimetres.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <span>
#include <vector>

#include "json.hpp"

#include "craft/assignment.hpp"
#include "craft/clay.hpp"
#include "craft/error.hpp"
#include "craft/goals.hpp"
#include "craft/grid.hpp"
#include "craft/raster.hpp"

namespace craft {

namespace detail {

// Exact nearest-neighbour queries over a point set, bucketed on a uniform
// grid. Returns the same distance value a linear scan would.
class NearestIndex {
 public:
  explicit NearestIndex(std::span<const Point> pts) : pts_(pts) {
    double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
    for (const Point& p : pts) {
      minx = std::min(minx, p.x), maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y), maxy = std::max(maxy, p.y);
    }
    origin_ = {minx, miny};
    const double extent = std::max({maxx - minx, maxy - miny, 1e-9});
    const double per_side = std::max(1.0, std::sqrt(static_cast<double>(pts.size())));
    cell_ = extent / per_side;
    nx_ = static_cast<int>((maxx - minx) / cell_) + 1;
    ny_ = static_cast<int>((maxy - miny) / cell_) + 1;
    buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto [bx, by] = bucket_of(pts[i]);
      buckets_[static_cast<std::size_t>(by) * nx_ + bx].push_back(i);
    }
  }

  double nearest_distance(Point q) const {
    const auto [qx, qy] = bucket_of(q);
    double best = std::numeric_limits<double>::infinity();
    // Any point in ring k is at least (k - 1) * cell away from q.
    for (int ring = 0;; ++ring) {
      if (ring > 0 && (ring - 1) * cell_ > best) break;
      bool any_bucket = false;
      for (int by = qy - ring; by <= qy + ring; ++by) {
        for (int bx = qx - ring; bx <= qx + ring; ++bx) {
          if (std::max(std::abs(bx - qx), std::abs(by - qy)) != ring) continue;
          if (bx < 0 || by < 0 || bx >= nx_ || by >= ny_) continue;
          any_bucket = true;
          for (std::size_t i : buckets_[static_cast<std::size_t>(by) * nx_ + bx]) best = std::min(best, distance(q, pts_[i]));
        }
      }
      if (!any_bucket && ring > nx_ + ny_ + std::max(std::abs(qx), std::abs(qy))) break;
    }
    return best;
  }

 private:
  std::pair<int, int> bucket_of(Point p) const {
    const int bx = static_cast<int>(std::floor((p.x - origin_.x) / cell_));
    const int by = static_cast<int>(std::floor((p.y - origin_.y) / cell_));
    return {std::clamp(bx, 0, nx_ - 1), std::clamp(by, 0, ny_ - 1)};
  }

  std::span<const Point> pts_;
  Point origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

inline double mean_nearest(std::span<const Point> from, std::span<const Point> to) {
  const NearestIndex index(to);
  double sum = 0.0;
  for (const Point& p : from) sum += index.nearest_distance(p);
  return sum / static_cast<double>(from.size());
}

}  // namespace detail

/// Symmetric Chamfer distance: the average of both directed mean
/// nearest-neighbour distances.
inline double chamfer(std::span<const Point> p, std::span<const Point> q) {
  if (p.empty() || q.empty()) throw InvalidArgument("chamfer distance needs two non-empty point sets");
  return (detail::mean_nearest(p, q) + detail::mean_nearest(q, p)) / 2.0;
}

/// Farthest-point sampling seeded at the point closest to the centroid.
/// Ties go to the lower index. Returns min(n, |pts|) points.
inline std::vector<Point> farthest_point_sample(std::span<const Point> pts, std::size_t n) {
  std::vector<Point> out;
  if (pts.empty() || n == 0) return out;
  Point centroid{};
  for (const Point& p : pts) centroid = centroid + p;
  centroid = (1.0 / static_cast<double>(pts.size())) * centroid;
  std::size_t seed = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (distance(pts[i], centroid) < distance(pts[seed], centroid)) seed = i;
  const std::size_t m = std::min(n, pts.size());
  std::vector<double> dist(pts.size(), std::numeric_limits<double>::infinity());
  std::size_t next = seed;
  for (std::size_t k = 0; k < m; ++k) {
    out.push_back(pts[next]);
    dist[next] = -1.0;
    std::size_t far = next;
    double far_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (dist[i] < 0.0) continue;
      dist[i] = std::min(dist[i], distance(pts[i], pts[next]));
      if (dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    }
    next = far;
  }
  return out;
}

inline constexpr std::size_t kDefaultEmdSamples = 128;

/// Mean matched distance of the optimal one-to-one matching between the two
/// (farthest-point downsampled) sets.
inline double emd(std::span<const Point> p, std::span<const Point> q, std::size_t n = kDefaultEmdSamples) {
  if (p.empty() || q.empty()) throw InvalidArgument("EMD needs two non-empty point sets");
  if (n == 0) throw InvalidArgument("EMD sample count must be at least 1");
  const std::size_t m = std::min({n, p.size(), q.size()});
  // Sets already at the sample size are used as given, in input order.
  const auto ps = m == p.size() ? std::vector<Point>(p.begin(), p.end()) : farthest_point_sample(p, m);
  const auto qs = m == q.size() ? std::vector<Point>(q.begin(), q.end()) : farthest_point_sample(q, m);
  std::vector<double> cost(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = distance(ps[i], qs[j]);
  const auto match = solve_assignment<double>(cost, m);
  return match.total / static_cast<double>(m);
}

// --- contours ---------------------------------------------------------------

inline constexpr std::size_t kDefaultContourSamples = 200;
inline constexpr std::size_t kMinComponentSubcells = 8;
inline constexpr double kSpeedEpsilon = 1e-9;

/// Closed curve sampled at N points with per-sample first and second
/// derivatives (cyclic indexing, so sample N wraps to sample 0).
struct Contour {
  std::vector<Point> points;
  std::vector<double> dx, dy, ddx, ddy;
  double param_step = 1.0;  // arc length / N
  double perimeter_mm = 0.0;
  double area_mm2 = 0.0;  // area of the traced component

  std::size_t size() const { return points.size(); }
};

/// 8-connected components; returns the largest (first in scan order on ties).
inline Mask largest_component(const Mask& mask) {
  Mask best(mask.rows(), mask.cols(), 0);
  std::size_t best_size = 0;
  Raster<int> label(mask.rows(), mask.cols(), 0);
  int next_label = 0;
  for (int r0 = 0; r0 < mask.rows(); ++r0) {
    for (int c0 = 0; c0 < mask.cols(); ++c0) {
      if (!mask(r0, c0) || label(r0, c0)) continue;
      ++next_label;
      std::vector<std::pair<int, int>> cells;
      std::deque<std::pair<int, int>> queue{{r0, c0}};
      label(r0, c0) = next_label;
      while (!queue.empty()) {
        const auto [r, c] = queue.front();
        queue.pop_front();
        cells.emplace_back(r, c);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if ((dr || dc) && mask.contains(rr, cc) && mask(rr, cc) && !label(rr, cc)) {
              label(rr, cc) = next_label;
              queue.emplace_back(rr, cc);
            }
          }
      }
      if (cells.size() > best_size) {
        best_size = cells.size();
        best = Mask(mask.rows(), mask.cols(), 0);
        for (auto [r, c] : cells) best(r, c) = 1;
      }
    }
  }
  return best;
}

/// Moore-neighbour tracing of the outer boundary of a single component.
/// Starts at the topmost-then-leftmost set subcell and walks clockwise (on
/// screen, rows growing downward). Returns (row, col) pairs.
inline std::vector<std::pair<int, int>> trace_boundary(const Mask& component) {
  // Clockwise on screen starting at north.
  static constexpr int kDr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
  static constexpr int kDc[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  std::pair<int, int> start{-1, -1};
  for (int r = 0; r < component.rows() && start.first < 0; ++r)
    for (int c = 0; c < component.cols(); ++c)
      if (component(r, c)) {
        start = {r, c};
        break;
      }
  if (start.first < 0) return {};
  auto set = [&](int r, int c) { return component.contains(r, c) && component(r, c) != 0; };

  std::vector<std::pair<int, int>> out{start};
  auto cur = start;
  int back = 6;  // entered from the west: nothing set above or left of start
  std::pair<int, int> first_step{-1, -1};
  const std::size_t limit = 4 * component.size() + 8;
  while (out.size() < limit) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (set(cur.first + kDr[d], cur.second + kDc[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated subcell
    const std::pair<int, int> nxt{cur.first + kDr[found], cur.second + kDc[found]};
    // The last background neighbour examined becomes the new backtrack point.
    const int prev = (found + 7) % 8;
    const int br = cur.first + kDr[prev] - nxt.first, bc = cur.second + kDc[prev] - nxt.second;
    for (int d = 0; d < 8; ++d)
      if (kDr[d] == br && kDc[d] == bc) back = d;
    if (first_step.first < 0) {
      first_step = nxt;
    } else if (cur == start && nxt == first_step) {
      break;
    }
    cur = nxt;
    out.push_back(cur);
  }
  if (out.size() > 1 && out.back() == start) out.pop_back();
  return out;
}

namespace detail {

inline double closed_length(std::span<const Point> pts) {
  double len = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) len += distance(pts[i], pts[(i + 1) % pts.size()]);
  return len;
}

inline double signed_area(std::span<const Point> pts) {
  double a = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point p = pts[i], q = pts[(i + 1) % pts.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return a / 2.0;
}

/// Uniform arc-length resampling of a closed polyline.
inline std::vector<Point> resample_closed(std::span<const Point> pts, std::size_t n) {
  const double total = closed_length(pts);
  std::vector<Point> out;
  out.reserve(n);
  if (pts.size() == 1 || total == 0.0) {
    out.assign(n, pts[0]);
    return out;
  }
  std::size_t seg = 0;
  double seg_start = 0.0;
  double seg_len = distance(pts[0], pts[1 % pts.size()]);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg_start + seg_len < t && seg + 1 < pts.size()) {
      seg_start += seg_len;
      ++seg;
      seg_len = distance(pts[seg], pts[(seg + 1) % pts.size()]);
    }
    const Point a = pts[seg], b = pts[(seg + 1) % pts.size()];
    const double f = seg_len > 0.0 ? std::clamp((t - seg_start) / seg_len, 0.0, 1.0) : 0.0;
    out.push_back(a + f * (b - a));
  }
  return out;
}

/// One pass of the cyclic moving average over 5 samples.
inline std::vector<Point> smooth5(std::span<const Point> pts) {
  const std::size_t n = pts.size();
  std::vector<Point> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point acc{};
    for (int k = -2; k <= 2; ++k) acc = acc + pts[(i + n + static_cast<std::size_t>(k + static_cast<int>(n))) % n];
    out[i] = 0.2 * acc;
  }
  return out;
}

struct Derivatives {
  std::vector<double> dx, dy, ddx, ddy;
};

inline Derivatives central_differences(std::span<const Point> pts, double h) {
  const std::size_t n = pts.size();
  Derivatives d;
  d.dx.resize(n), d.dy.resize(n), d.ddx.resize(n), d.ddy.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point prev = pts[(i + n - 1) % n], cur = pts[i], next = pts[(i + 1) % n];
    d.dx[i] = (next.x - prev.x) / (2.0 * h);
    d.dy[i] = (next.y - prev.y) / (2.0 * h);
    d.ddx[i] = (next.x - 2.0 * cur.x + prev.x) / (h * h);
    d.ddy[i] = (next.y - 2.0 * cur.y + prev.y) / (h * h);
  }
  return d;
}

// The traced polyline runs through subcell centers, half a subcell inside
// the true outline. Push the curve out along its normals by the distance
// that makes its enclosed area equal the subcell area, using
// area(d) = a + L d + pi d^2 for a parallel curve.
inline std::vector<Point> offset_to_area(std::span<const Point> pts, double target_area, double max_offset) {
  const std::size_t n = pts.size();
  const double len = closed_length(pts);
  const double area = signed_area(pts);
  const double a = std::abs(area);
  double d = 0.0;
  if (target_area > a && len > 0.0)
    d = (-len + std::sqrt(len * len + 4.0 * M_PI * (target_area - a))) / (2.0 * M_PI);
  d = std::clamp(d, 0.0, max_offset);
  const double orient = area >= 0.0 ? 1.0 : -1.0;
  std::vector<Point> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point t = pts[(i + 1) % n] - pts[(i + n - 1) % n];
    const double sp = norm(t);
    out[i] = sp > 0.0 ? pts[i] + Point{orient * d * t.y / sp, -orient * d * t.x / sp} : pts[i];
  }
  return out;
}

}  // namespace detail

/// Outline of the largest 8-connected component, resampled to `samples`
/// uniform arc-length points.
///
/// Sample positions get one pass of the 5-tap cyclic moving average.
/// Derivatives come from a copy regularized at the scale of the digitization
/// staircase: the raw outline is densified to four samples per subcell and
/// smoothed with repeated 5-tap passes up to a Gaussian width of
/// 0.5*sqrt(subcell * radius), where radius = length / 2pi. Both curves are
/// then offset outward to the component area.
inline Contour extract_contour(const Mask& mask, const GridSpec& grid, std::size_t samples = kDefaultContourSamples) {
  if (samples < 8) throw InvalidArgument("contour needs at least 8 samples");
  if (popcount(mask) == 0) throw InvalidArgument("cannot extract a contour from an empty mask");
  const Mask comp = largest_component(mask);
  const std::size_t comp_size = popcount(comp);
  if (comp_size < kMinComponentSubcells)
    throw InvalidArgument("largest component has " + std::to_string(comp_size) + " subcells, need at least " +
                          std::to_string(kMinComponentSubcells));
  std::vector<Point> raw;
  for (auto [r, c] : trace_boundary(comp)) raw.push_back(grid.subcell_center(r, c));
  const double s = grid.subcell_mm();
  const double area = static_cast<double>(comp_size) * grid.subcell_area_mm2();
  const double raw_len = detail::closed_length(raw);
  if (raw.size() < 2 || raw_len == 0.0) throw InvalidArgument("degenerate component outline");

  Contour c;
  c.area_mm2 = area;
  c.points = detail::offset_to_area(detail::smooth5(detail::resample_closed(raw, samples)), area, s);
  c.perimeter_mm = detail::closed_length(c.points);
  c.param_step = c.perimeter_mm / static_cast<double>(samples);

  const double sigma = 0.5 * std::sqrt(s * raw_len / (2.0 * M_PI));
  const std::size_t dense_n = std::max(samples, static_cast<std::size_t>(std::ceil(raw_len / (s / 4.0))));
  auto reg = detail::resample_closed(raw, dense_n);
  const double dense_h = raw_len / static_cast<double>(dense_n);
  // Each 5-tap pass adds a variance of 2 samples^2.
  const auto passes = static_cast<std::size_t>(std::ceil(std::pow(sigma / dense_h, 2) / 2.0));
  for (std::size_t i = 0; i < passes; ++i) reg = detail::smooth5(reg);
  reg = detail::offset_to_area(detail::smooth5(detail::resample_closed(reg, samples)), area, s);
  auto d = detail::central_differences(reg, c.param_step);
  c.dx = std::move(d.dx), c.dy = std::move(d.dy), c.ddx = std::move(d.ddx), c.ddy = std::move(d.ddy);
  return c;
}

/// Central-difference derivatives of already-sampled closed points, no
/// smoothing.
inline Contour contour_from_samples(std::vector<Point> pts) {
  if (pts.size() < 8) throw InvalidArgument("contour needs at least 8 samples");
  Contour c;
  c.perimeter_mm = detail::closed_length(pts);
  c.area_mm2 = std::abs(detail::signed_area(pts));
  c.param_step = c.perimeter_mm / static_cast<double>(pts.size());
  auto d = detail::central_differences(pts, c.param_step);
  c.points = std::move(pts);
  c.dx = std::move(d.dx), c.dy = std::move(d.dy), c.ddx = std::move(d.ddx), c.ddy = std::move(d.ddy);
  return c;
}

/// Mean over samples of |x''y' - y''x'| / (x'^2 + y'^2)^(3/2).
inline double mean_curvature(const Contour& c) {
  const std::size_t n = c.dx.size();
  if (n < 8 || c.dy.size() != n || c.ddx.size() != n || c.ddy.size() != n)
    throw InvalidArgument("contour derivatives are missing or inconsistent");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double speed2 = c.dx[i] * c.dx[i] + c.dy[i] * c.dy[i];
    if (!(speed2 > kSpeedEpsilon)) throw InvalidArgument("degenerate contour sample " + std::to_string(i));
    sum += std::abs(c.ddx[i] * c.dy[i] - c.ddy[i] * c.dx[i]) / std::pow(speed2, 1.5);
  }
  return sum / static_cast<double>(n);
}

/// Outline length over occupied area.
inline double perimeter_area_ratio(const Mask& mask, const GridSpec& grid,
                                   std::size_t samples = kDefaultContourSamples) {
  const auto c = extract_contour(mask, grid, samples);
  return c.perimeter_mm / (static_cast<double>(popcount(mask)) * grid.subcell_area_mm2());
}

struct MetricsReport {
  double chamfer_mm = 0.0;
  double emd_mm = 0.0;
  double mean_curvature_per_mm = 0.0;
  double par_per_mm = 0.0;
  std::size_t state_points = 0;
  std::size_t goal_points = 0;
  std::size_t emd_samples = 0;
  double iou = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline MetricsReport evaluate_metrics(const ClayField& field, const GoalSpec& goal,
                                      std::size_t emd_samples = kDefaultEmdSamples) {
  if (!goal.target_points || !goal.mask) throw InvalidArgument("goal has no target point set to score against");
  const auto pts = point_set(field);
  if (pts.empty()) throw InvalidArgument("clay field has no occupied subcells");
  const Mask occ = occupancy_mask(field);
  MetricsReport m;
  m.state_points = pts.size();
  m.goal_points = goal.target_points->size();
  m.emd_samples = std::min({emd_samples, pts.size(), goal.target_points->size()});
  m.chamfer_mm = chamfer(pts, *goal.target_points);
  m.emd_mm = emd(pts, *goal.target_points, emd_samples);
  const auto contour = extract_contour(occ, field.grid());
  m.mean_curvature_per_mm = mean_curvature(contour);
  m.par_per_mm = contour.perimeter_mm / (static_cast<double>(popcount(occ)) * field.grid().subcell_area_mm2());
  m.iou = iou(occ, *goal.mask);
  return m;
}

inline void to_json(nlohmann::json& j, const MetricsReport& m) {
  j = {{"chamfer_mm", m.chamfer_mm},     {"emd_mm", m.emd_mm},           {"curvature", m.mean_curvature_per_mm},
       {"par", m.par_per_mm},            {"iou", m.iou},                 {"state_points", m.state_points},
       {"goal_points", m.goal_points},   {"emd_samples", m.emd_samples}};
}

inline void from_json(const nlohmann::json& j, MetricsReport& m) {
  m.chamfer_mm = j.at("chamfer_mm").get<double>();
  m.emd_mm = j.at("emd_mm").get<double>();
  m.mean_curvature_per_mm = j.at("curvature").get<double>();
  m.par_per_mm = j.at("par").get<double>();
  m.iou = j.value("iou", 0.0);
  m.state_points = j.value("state_points", std::size_t{0});
  m.goal_points = j.value("goal_points", std::size_t{0});
  m.emd_samples = j.value("emd_samples", std::size_t{0});
}

}  // namespace craft
