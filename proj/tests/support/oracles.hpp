#pragma once

// Slow, direct implementations used to check the library's answers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <tuple>
#include <vector>

#include "craft/clay.hpp"
#include "craft/goals.hpp"

namespace craft::oracle {

inline double naive_chamfer(const std::vector<Point>& p, const std::vector<Point>& q) {
  auto one_way = [](const std::vector<Point>& a, const std::vector<Point>& b) {
    double sum = 0.0;
    for (const auto& x : a) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : b) best = std::min(best, std::hypot(x.x - y.x, x.y - y.y));
      sum += best;
    }
    return sum / static_cast<double>(a.size());
  };
  return 0.5 * (one_way(p, q) + one_way(q, p));
}

/// Minimum mean matching distance over every permutation (|p| == |q|).
inline double permutation_emd(const std::vector<Point>& p, const std::vector<Point>& q) {
  std::vector<std::size_t> perm(q.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += std::hypot(p[i].x - q[perm[i]].x, p[i].y - q[perm[i]].y);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(p.size());
}

inline std::vector<Point> random_points(std::mt19937& rng, std::size_t n, double extent = 80.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point> out(n);
  for (auto& p : out) p = {u(rng), u(rng)};
  return out;
}

/// Subcells with centers within r of (cx, cy).
inline std::size_t disc_count(const GridSpec& g, double cx, double cy, double r) {
  std::size_t n = 0;
  const double s = g.subcell_mm();
  for (int row = 0; row < g.raster_rows(); ++row)
    for (int col = 0; col < g.raster_cols(); ++col)
      if (std::hypot((col + 0.5) * s - cx, (row + 0.5) * s - cy) <= r) ++n;
  return n;
}

/// Squeeze written out in full from the model description: arrays of
/// plain coordinates, no shared geometry helpers.
inline Raster<Mass> reference_squeeze(const ClayField& f, SqueezeAction act, const StrengthTable& st = {}) {
  if (act.b < act.a) std::swap(act.a, act.b);
  const GridSpec& g = f.grid();
  const double cell = g.cell_size_mm, sub = g.subcell_mm();
  const double ax = (act.a.col + 0.5) * cell, ay = (act.a.row + 0.5) * cell;
  const double bx = (act.b.col + 0.5) * cell, by = (act.b.row + 0.5) * cell;
  const double len = std::hypot(bx - ax, by - ay);
  const double ux = (bx - ax) / len, uy = (by - ay) / len;
  const double mx = (ax + bx) / 2, my = (ay + by) / 2;
  const double gap = st.gap(act.strength), half_w = st.fingertip_width_mm / 2;
  const Mass cap = f.density_cap();
  const double eps = 1e-9;
  auto um = [](double mm) { return std::round(mm * 1e6) / 1e6; };  // keys at micrometer resolution

  Raster<Mass> m = f.mass();
  const int rows = m.rows(), cols = m.cols();
  std::vector<int> zone(m.size(), 0);  // 0 outside, 1 swept, 2 final
  std::vector<double> along(m.size()), across(m.size());
  Mass moved = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      const double px = (c + 0.5) * sub - mx, py = (r + 0.5) * sub - my;
      along[i] = px * ux + py * uy;
      across[i] = -px * uy + py * ux;
      if (std::abs(along[i]) <= len / 2 + eps && std::abs(across[i]) <= half_w + eps)
        zone[i] = std::abs(along[i]) <= gap / 2 + eps ? 2 : 1;
      if (zone[i] == 1) moved += m[i], m[i] = 0;
    }
  if (moved == 0) return m;

  std::vector<std::tuple<double, std::size_t>> fin, out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (zone[i] == 2) fin.emplace_back(-um(std::abs(along[i])), i);
    if (zone[i] == 0 && m[i] < cap) {
      const double ds = std::max(std::abs(along[i]) - gap / 2, 0.0);
      const double dt = std::max(std::abs(across[i]) - half_w, 0.0);
      out.emplace_back(um(std::sqrt(ds * ds + dt * dt)), i);
    }
  }
  std::sort(fin.begin(), fin.end());
  std::sort(out.begin(), out.end());
  for (auto* list : {&fin, &out})
    for (auto [key, i] : *list) {
      (void)key;
      const Mass add = std::min(moved, cap - m[i]);
      m[i] += add;
      moved -= add;
    }
  if (moved > 0) throw OverflowError("reference squeeze overflowed");
  return m;
}

/// Random field with mass scattered in [0, cap] at the given fill rate.
inline ClayField random_field(std::mt19937& rng, const GridSpec& g, double fill) {
  Raster<Mass> m(g.raster_rows(), g.raster_cols(), 0);
  std::bernoulli_distribution on(fill);
  std::uniform_int_distribution<Mass> amount(1, kDefaultDensityCap);
  for (auto& v : m)
    if (on(rng)) v = amount(rng);
  return ClayField(g, kDefaultDensityCap, std::move(m));
}

}  // namespace craft::oracle
