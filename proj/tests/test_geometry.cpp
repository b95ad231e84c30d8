#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <random>

#include "argent/geometry.hpp"

using namespace argent;

namespace {

/// Unsigned distance to a densely sampled boundary.
double dense_boundary_distance(const Polygon& poly, Vec2 p, std::size_t samples) {
  double perimeter = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) perimeter += norm(poly[(i + 1) % poly.size()] - poly[i]);
  double best = INFINITY;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    const auto m = static_cast<std::size_t>(std::ceil(samples * norm(b - a) / perimeter));
    for (std::size_t k = 0; k <= m; ++k) best = std::min(best, norm(p - (a + (double(k) / m) * (b - a))));
  }
  return best;
}

/// Convex CCW polygon membership by edge half-planes.
bool inside_convex(const Polygon& poly, Vec2 p) {
  for (std::size_t i = 0; i < poly.size(); ++i)
    if (cross(poly[(i + 1) % poly.size()] - poly[i], p - poly[i]) <= 0) return false;
  return true;
}

}  // namespace

TEST(Cavity, DegenerateCutoutsGiveUnitSquare) {
  auto sq = make_cavity(1, 0, 0);
  ASSERT_EQ(sq.size(), 4u);
  EXPECT_DOUBLE_EQ(shoelace_area(sq), 1.0);
}

TEST(Cavity, MeetingCutoutsGiveTriangle) {
  for (double depth : {0.5, 1.3, 2.0}) {
    auto tri = make_cavity(depth, 0.5, 0.5);
    ASSERT_EQ(tri.size(), 3u);
    EXPECT_DOUBLE_EQ(tri[1].x, 0.5);
    EXPECT_DOUBLE_EQ(tri[1].y, -depth);
    EXPECT_DOUBLE_EQ(shoelace_area(tri), 0.5 * depth);
  }
  // dL + dR > 1: sides meet above the bottom.
  auto shallow = make_cavity(1.0, 0.8, 0.7);
  ASSERT_EQ(shallow.size(), 3u);
  EXPECT_NEAR(shallow[1].y, -1.0 / 1.5, 1e-15);
}

TEST(Cavity, TrapezoidAreaMatchesShoelace) {
  auto poly = make_cavity(1.0, 0.2, 0.3);
  ASSERT_EQ(poly.size(), 4u);
  // Parallel sides 1 (lid) and 1 − 0.2 − 0.3 (bottom), height 1.
  EXPECT_NEAR(shoelace_area(poly), 0.5 * (1.0 + 0.5) * 1.0, 1e-15);
  EXPECT_GT(shoelace_area(poly), 0);  // counter-clockwise
}

TEST(Cavity, OutOfRangeIsValidationError) {
  EXPECT_THROW(make_cavity(0.4, 0, 0), ValidationError);
  EXPECT_THROW(make_cavity(1, -0.1, 0), ValidationError);
  EXPECT_THROW(make_cavity(1, 0, 1.5), ValidationError);
}

TEST(SdfPolygon, CenterAndBoundary) {
  auto sq = make_cavity(1, 0, 0);
  EXPECT_DOUBLE_EQ(sdf_polygon(sq, {0.5, -0.5}), 0.5);
  for (auto v : sq) EXPECT_EQ(sdf_polygon(sq, v), 0.0);
  EXPECT_LT(sdf_polygon(sq, {1.5, -0.5}), 0);
  EXPECT_DOUBLE_EQ(sdf_polygon(sq, {1.5, -0.5}), -0.5);
}

TEST(SdfPolygon, MatchesDenseBoundaryOracle) {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> ux(-0.3, 1.3), uy(-2.3, 0.3), ud(0.5, 2), uc(0, 1);
  for (int g = 0; g < 5; ++g) {
    auto poly = make_cavity(ud(rng), uc(rng), uc(rng));
    for (int k = 0; k < 40; ++k) {
      const Vec2 p{ux(rng), uy(rng)};
      const double s = sdf_polygon(poly, p);
      EXPECT_NEAR(std::abs(s), dense_boundary_distance(poly, p, 10000), 1e-3);
      if (std::abs(s) > 1e-9) EXPECT_EQ(s > 0, inside_convex(poly, p));
    }
  }
}

TEST(SdfPolygon, EikonalSpotCheck) {
  std::mt19937_64 rng(31);
  auto poly = make_cavity(1.4, 0.3, 0.2);
  std::uniform_real_distribution<double> ux(0, 1), uy(-1.4, 0);
  int checked = 0;
  const double h = 1e-6;
  while (checked < 100) {
    const Vec2 p{ux(rng), uy(rng)};
    if (sdf_polygon(poly, p) < 0.05) continue;
    // Skip points near the medial axis: the two nearest edges must differ clearly.
    std::vector<double> d;
    for (std::size_t i = 0; i < poly.size(); ++i) d.push_back(segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
    std::sort(d.begin(), d.end());
    if (d[1] - d[0] < 0.02) continue;
    const double gx = (sdf_polygon(poly, {p.x + h, p.y}) - sdf_polygon(poly, {p.x - h, p.y})) / (2 * h);
    const double gy = (sdf_polygon(poly, {p.x, p.y + h}) - sdf_polygon(poly, {p.x, p.y - h})) / (2 * h);
    const double g = std::hypot(gx, gy);
    EXPECT_GE(g, 0.99);
    EXPECT_LE(g, 1.01);
    ++checked;
  }
}

TEST(RodDomain, WallsRodsAndBoundary) {
  RodGeometry g;
  g.rods = {{{80, 100}, 7.0}};
  validate(g);
  EXPECT_DOUBLE_EQ(sdf_rod_domain(g, {50, 40}), 40.0);  // nearest wall is y = 0
  EXPECT_DOUBLE_EQ(sdf_rod_domain(g, {80, 100}), -7.0);
  EXPECT_NEAR(sdf_rod_domain(g, {87, 100}), 0.0, 1e-12);
  EXPECT_LT(sdf_rod_domain(g, {-1, 50}), 0);
}

TEST(RodDomain, RandomLayoutsAreValid) {
  std::mt19937_64 rng(32);
  for (int n : {1, 3, 5}) {
    auto g = random_rods(n, rng);
    EXPECT_EQ(static_cast<int>(g.rods.size()), n);
    EXPECT_NO_THROW(validate(g));
    for (const auto& r : g.rods) EXPECT_NEAR(sdf_rod_domain(g, r.center + Vec2{r.radius, 0}), 0.0, 1e-9);
  }
  RodGeometry bad;
  bad.rods = {{{20, 20}, 7}, {{30, 20}, 7}};
  EXPECT_THROW(validate(bad), ValidationError);
}

TEST(Descriptor, TextRecordRoundTrip) {
  std::mt19937_64 rng(33);
  GeometryDescriptor c = CavityGeometry{1.25, 0.125, 0.7};
  auto back = std::get<CavityGeometry>(parse_descriptor(describe(c)));
  EXPECT_EQ(back.depth, 1.25);
  EXPECT_EQ(back.cut_right, 0.7);
  GeometryDescriptor r = random_rods(3, rng);
  EXPECT_EQ(describe(parse_descriptor(describe(r))), describe(r));
  EXPECT_THROW(parse_descriptor("sphere r=1"), FormatError);
}

TEST(SampleInDomain, SignContractAndDeterminism) {
  auto dom = make_domain(CavityGeometry{1, 0, 0});
  std::mt19937_64 a(34), b(34);
  auto s1 = sample_in_domain(dom, 500, a);
  auto s2 = sample_in_domain(dom, 500, b);
  ASSERT_EQ(s1.size(), 500u);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_GT(s1.sdf[i], 0);
    EXPECT_EQ(s1.points[i].x, s2.points[i].x);
    EXPECT_EQ(s1.points[i].y, s2.points[i].y);
  }
}

TEST(SampleInDomain, FillFractionMatchesArea) {
  GeometryDescriptor g = CavityGeometry{1, 0.2, 0.3};
  auto dom = make_domain(g);
  std::mt19937_64 rng(35);
  auto s = sample_in_domain(dom, 20000, rng);
  const double p = shoelace_area(make_cavity(std::get<CavityGeometry>(g))) / dom.box.area();
  const double n = static_cast<double>(s.attempts);
  const double sigma = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(s.size() / n, p, 3 * sigma);
}

TEST(SampleInDomain, DegenerateGeometryRaises) {
  Domain sliver{{{0, 0}, {1, 1}}, [](Vec2 p) { return 1e-6 - std::abs(p.x - 0.5); }};
  std::mt19937_64 rng(36);
  EXPECT_THROW(sample_in_domain(sliver, 10, rng), ValidationError);
}

TEST(SampleLambda, WeightFormula) {
  EXPECT_DOUBLE_EQ(lambda_weight(0.3, 0.0), 1.0 / 101.0);
  EXPECT_DOUBLE_EQ(lambda_weight(-2.0, 1.0), 1.0 / (1.0 + 100.0 * 1e-8));
  EXPECT_NEAR(lambda_weight(0.01, 1.0) / lambda_weight(1.0, 1.0), 50.5, 1e-12);
}

TEST(SampleLambda, SingletonAndEmpty) {
  std::mt19937_64 rng(37);
  EXPECT_EQ(sample_lambda({0.4}, 1.0, 1, rng), std::vector<std::size_t>{0});
  EXPECT_THROW(sample_lambda({}, 1.0, 1, rng), ValidationError);
  EXPECT_THROW(sample_lambda({0.1, 0.2}, 1.0, 3, rng), ValidationError);
}

TEST(SampleLambda, WithoutReplacementHasNoDuplicates) {
  std::mt19937_64 rng(38);
  std::vector<double> sdf(200);
  for (std::size_t i = 0; i < sdf.size(); ++i) sdf[i] = 0.005 * (i + 1);
  auto idx = sample_lambda(sdf, 0.5, 150, rng);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(std::unique(idx.begin(), idx.end()), idx.end());
}

TEST(SampleLambda, MonteCarloFrequencyRatio) {
  // 1e6 draws (tighter than 1e5) keep the 2% band at roughly 3 sigma.
  std::mt19937_64 rng(39);
  auto idx = sample_lambda({0.01, 1.0}, 1.0, 1000000, rng, true);
  double near = 0, far = 0;
  for (auto i : idx) (i == 0 ? near : far) += 1;
  EXPECT_NEAR(near / far, 50.5, 0.02 * 50.5);
}

TEST(SampleLambda, LambdaZeroPreservesCandidateDistribution) {
  std::mt19937_64 rng(40);
  std::vector<double> sdf(25);
  std::uniform_real_distribution<double> u(0, 2);
  for (auto& s : sdf) s = u(rng);
  const std::size_t draws = 100000;
  auto idx = sample_lambda(sdf, 0.0, draws, rng, true);
  std::vector<double> counts(sdf.size());
  for (auto i : idx) counts[i] += 1;
  const double expected = static_cast<double>(draws) / sdf.size();
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(sdf.size() - 1));
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01);
}

TEST(SampleLambda, PositiveLambdaClustersNearBoundary) {
  std::mt19937_64 rng(41);
  std::vector<double> sdf(1000);
  for (std::size_t i = 0; i < sdf.size(); ++i) sdf[i] = 0.001 * (i + 1);
  auto mean_sdf = [&](double lambda) {
    auto idx = sample_lambda(sdf, lambda, 200, rng);
    double m = 0;
    for (auto i : idx) m += sdf[i] / idx.size();
    return m;
  };
  EXPECT_LT(mean_sdf(1.0), mean_sdf(0.0));
  EXPECT_LT(mean_sdf(0.0), mean_sdf(-0.5));
}
