#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "craft/metrics.hpp"
#include "support/oracles.hpp"

using namespace craft;

namespace {

Mask disc_mask(const GridSpec& g, double cx, double cy, double r) {
  Mask m(g.raster_rows(), g.raster_cols(), 0);
  for (int row = 0; row < m.rows(); ++row)
    for (int col = 0; col < m.cols(); ++col) m(row, col) = distance(g.subcell_center(row, col), {cx, cy}) <= r;
  return m;
}

Mask square_mask(const GridSpec& g, double x0, double y0, double side) {
  Mask m(g.raster_rows(), g.raster_cols(), 0);
  for (int row = 0; row < m.rows(); ++row)
    for (int col = 0; col < m.cols(); ++col) {
      const auto p = g.subcell_center(row, col);
      m(row, col) = p.x > x0 && p.x < x0 + side && p.y > y0 && p.y < y0 + side;
    }
  return m;
}

std::vector<Point> circle(double r, std::size_t n, double cx = 0, double cy = 0) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    pts.push_back({cx + r * std::cos(t), cy + r * std::sin(t)});
  }
  return pts;
}

}  // namespace

TEST(Chamfer, Examples) {
  const std::vector<Point> p{{0, 0}, {4, 1}, {7, 7}};
  EXPECT_DOUBLE_EQ(chamfer(p, p), 0.0);
  EXPECT_DOUBLE_EQ(chamfer(std::vector<Point>{{0, 0}}, std::vector<Point>{{3, 4}}), 5.0);
  EXPECT_THROW(chamfer(std::vector<Point>{}, p), InvalidArgument);
}

TEST(Chamfer, MatchesNaiveOracle) {
  std::mt19937 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto p = oracle::random_points(rng, 50), q = oracle::random_points(rng, 37);
    EXPECT_DOUBLE_EQ(chamfer(p, q), oracle::naive_chamfer(p, q));
  }
}

TEST(Chamfer, IsSymmetric) {
  std::mt19937 rng(4);
  const auto p = oracle::random_points(rng, 20), q = oracle::random_points(rng, 30);
  EXPECT_DOUBLE_EQ(chamfer(p, q), chamfer(q, p));
}

TEST(Emd, Examples) {
  std::mt19937 rng(5);
  const auto p = oracle::random_points(rng, 40);
  EXPECT_DOUBLE_EQ(emd(p, p, 16), 0.0);
  const std::vector<Point> a{{0, 0}, {10, 0}}, b{{0, 1}, {10, 1}};
  EXPECT_DOUBLE_EQ(emd(a, b, 2), 1.0);
}

TEST(Emd, MatchesPermutationOracle) {
  std::mt19937 rng(6);
  for (int k = 0; k < 40; ++k) {
    const auto p = oracle::random_points(rng, 6), q = oracle::random_points(rng, 6);
    EXPECT_EQ(emd(p, q, 6), oracle::permutation_emd(p, q));
  }
}

TEST(Emd, SubsamplesLargeSets) {
  std::mt19937 rng(8);
  const auto p = oracle::random_points(rng, 300), q = oracle::random_points(rng, 200);
  const double v = emd(p, q, 32);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);
  EXPECT_EQ(farthest_point_sample(p, 32).size(), 32u);
  EXPECT_EQ(farthest_point_sample(p, 32), farthest_point_sample(p, 32));
}

TEST(Contour, SquarePerimeter) {
  const auto g = GridSpec::square(4);
  const auto c = extract_contour(square_mask(g, 20, 20, 40), g);
  EXPECT_NEAR(c.perimeter_mm, 160.0, 0.05 * 160.0);
  EXPECT_EQ(c.size(), kDefaultContourSamples);
}

TEST(Contour, DiscPerimeter) {
  const auto g = GridSpec::square(4);
  const auto c = extract_contour(disc_mask(g, 40, 40, 20), g);
  EXPECT_NEAR(c.perimeter_mm, 2 * std::numbers::pi * 20, 0.05 * 2 * std::numbers::pi * 20);
}

TEST(Contour, FollowsLargestComponent) {
  const auto g = GridSpec::square(4);
  Mask m = disc_mask(g, 24, 24, 14);
  const Mask small = disc_mask(g, 66, 66, 6);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = m[i] || small[i];
  const auto c = extract_contour(m, g);
  for (const auto& p : c.points) EXPECT_LT(distance(p, {24, 24}), 20.0);
  EXPECT_EQ(popcount(largest_component(m)), popcount(disc_mask(g, 24, 24, 14)));
}

TEST(Contour, RejectsEmptyAndTinyMasks) {
  const auto g = GridSpec::square(4);
  EXPECT_THROW(extract_contour(Mask(32, 32, 0), g), InvalidArgument);
  Mask m(32, 32, 0);
  m(3, 3) = m(3, 4) = 1;
  EXPECT_THROW(extract_contour(m, g), InvalidArgument);
}

TEST(Curvature, AnalyticCircle) {
  for (double r : {5.0, 10.0, 25.0}) {
    const auto c = contour_from_samples(circle(r, 400));
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double k = std::abs(c.ddx[i] * c.dy[i] - c.ddy[i] * c.dx[i]) /
                       std::pow(c.dx[i] * c.dx[i] + c.dy[i] * c.dy[i], 1.5);
      EXPECT_NEAR(k, 1.0 / r, 1e-3 / r);
    }
    EXPECT_NEAR(mean_curvature(c), 1.0 / r, 1e-3 / r);
  }
}

TEST(Curvature, RasterizedDiscRadius10) {
  const auto g = GridSpec::square(4);
  const double k = mean_curvature(extract_contour(disc_mask(g, 40, 40, 10), g, 200));
  EXPECT_NEAR(k, 0.1, 0.005);
}

TEST(Curvature, ScalesInversely) {
  const auto base = circle(10, 200);
  std::vector<Point> scaled;
  for (const auto& p : base) scaled.push_back(3.0 * p);
  EXPECT_NEAR(mean_curvature(contour_from_samples(scaled)), mean_curvature(contour_from_samples(base)) / 3.0, 1e-12);
}

TEST(Curvature, ErrorShrinksWithFinerRaster) {
  // Disc r=20 in an 80mm workspace at 5, 2.5 and 1.25mm subcells.
  double last = 1.0;
  for (int subdiv : {4, 8, 16}) {
    const auto g = GridSpec::square(4, 20.0, subdiv);
    const double err = std::abs(mean_curvature(extract_contour(disc_mask(g, 40, 40, 20), g)) - 0.05) / 0.05;
    EXPECT_LT(err, last + 1e-3) << subdiv;
    last = err;
  }
  EXPECT_LT(last, 0.05);
}

TEST(Curvature, DegenerateDerivativesAreRejected) {
  Contour c;
  c.dx.assign(8, 0.0), c.dy.assign(8, 0.0), c.ddx.assign(8, 0.0), c.ddy.assign(8, 0.0);
  EXPECT_THROW(mean_curvature(c), InvalidArgument);
}

TEST(Par, SquareAndDisc) {
  const auto g = GridSpec::square(4);
  EXPECT_NEAR(perimeter_area_ratio(square_mask(g, 20, 20, 40), g), 0.1, 0.008);
  EXPECT_NEAR(perimeter_area_ratio(disc_mask(g, 40, 40, 20), g), 0.1, 0.008);
}

TEST(Par, DiscBeatsSquareOfEqualArea) {
  const auto g = GridSpec::square(4);
  const double side = 40.0, r = side / std::sqrt(std::numbers::pi);
  EXPECT_LE(perimeter_area_ratio(disc_mask(g, 40, 40, r), g), perimeter_area_ratio(square_mask(g, 20, 20, side), g));
}

TEST(EvaluateMetrics, IdenticalStateScoresZeroDistance) {
  const auto g = GridSpec::square(4);
  const auto goal = make_letter_goal("I", g);
  Raster<Mass> m(32, 32, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (*goal.mask)[i] ? 1000 : 0;
  const auto rep = evaluate_metrics(ClayField(g, 1000, m), goal);
  EXPECT_DOUBLE_EQ(rep.chamfer_mm, 0.0);
  EXPECT_DOUBLE_EQ(rep.emd_mm, 0.0);
  EXPECT_DOUBLE_EQ(rep.iou, 1.0);
  EXPECT_GT(rep.mean_curvature_per_mm, 0.0);
  EXPECT_GT(rep.par_per_mm, 0.0);
  nlohmann::json j = rep;
  EXPECT_EQ(j.get<MetricsReport>(), rep);
}

TEST(EvaluateMetrics, NeedsGoalPointsAndClay) {
  const auto g = GridSpec::square(4);
  EXPECT_THROW(evaluate_metrics(initial_disc(g), make_text_goal("a ring")), InvalidArgument);
  EXPECT_THROW(evaluate_metrics(ClayField(g, 1000), make_letter_goal("I", g)), InvalidArgument);
}
