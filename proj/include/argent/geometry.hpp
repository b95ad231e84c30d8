#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "argent/errors.hpp"

namespace argent {

struct Vec2 {
  double x = 0;
  double y = 0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

using Polygon = std::vector<Vec2>;

struct BBox {
  Vec2 lo;
  Vec2 hi;
  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double area() const { return width() * height(); }
};

inline double shoelace_area(const Polygon& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

inline double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  const double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return norm(p - (a + t * ab));
}

/// Even-odd crossing test.
inline bool point_in_polygon(const Polygon& poly, Vec2 p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xc) inside = !inside;
    }
  }
  return inside;
}

/// Signed distance: minimum distance to the edges, positive inside.
inline double sdf_polygon(const Polygon& poly, Vec2 p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i) d = std::min(d, segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  if (d == 0) return 0;
  return point_in_polygon(poly, p) ? d : -d;
}

// ---------------------------------------------------------------------------
// Cavity family: lid along y = 0 from x = 0 to x = 1, depth downward to y = −D.
// Each bottom corner is trimmed by a slanted cut from the lid corner to the
// bottom edge at horizontal offset d_L (left) or d_R (right).

struct CavityGeometry {
  double depth = 1.0;
  double cut_left = 0.0;
  double cut_right = 0.0;

  static constexpr double kLidWidth = 1.0;
};

inline void validate(const CavityGeometry& g) {
  if (!(g.depth >= 0.5 && g.depth <= 2.0) || !(g.cut_left >= 0 && g.cut_left <= 1) ||
      !(g.cut_right >= 0 && g.cut_right <= 1)) {
    std::ostringstream os;
    os << "cavity parameters out of range: D=" << g.depth << " dL=" << g.cut_left << " dR=" << g.cut_right
       << " (need D in [0.5, 2], dL and dR in [0, 1])";
    throw ValidationError(os.str());
  }
}

/// Counter-clockwise vertex list. Four vertices when d_L + d_R < 1
/// (trapezoid), three when d_L + d_R >= 1 (triangle).
inline Polygon make_cavity(double depth, double cut_left, double cut_right) {
  const CavityGeometry g{depth, cut_left, cut_right};
  validate(g);
  const double L = CavityGeometry::kLidWidth;
  const double s = cut_left + cut_right;
  if (s < 1.0) {
    return {{0, 0}, {cut_left, -depth}, {L - cut_right, -depth}, {L, 0}};
  }
  // The two slanted sides meet at depth D / (dL + dR).
  const double apex_depth = depth / s;
  return {{0, 0}, {cut_left * apex_depth / depth, -apex_depth}, {L, 0}};
}

inline Polygon make_cavity(const CavityGeometry& g) { return make_cavity(g.depth, g.cut_left, g.cut_right); }

// ---------------------------------------------------------------------------
// Rod-array family: rectangular channel with circular rods (solid).

struct Rod {
  Vec2 center;
  double radius = 7.0;
};

struct RodGeometry {
  double width = 100.0;
  double height = 120.0;
  std::vector<Rod> rods;

  static constexpr double kRadius = 7.0;
  static constexpr double kMinGap = 2.0;
};

inline void validate(const RodGeometry& g, double min_gap = RodGeometry::kMinGap) {
  for (std::size_t i = 0; i < g.rods.size(); ++i) {
    const auto& r = g.rods[i];
    if (r.center.x - r.radius <= 0 || r.center.x + r.radius >= g.width || r.center.y - r.radius <= 0 ||
        r.center.y + r.radius >= g.height) {
      throw ValidationError("rod " + std::to_string(i) + " is not strictly inside the channel");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (norm(r.center - g.rods[j].center) < r.radius + g.rods[j].radius + min_gap) {
        throw ValidationError("rods " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
      }
    }
  }
}

/// Positive in the electrolyte, negative inside rods or outside the channel.
inline double sdf_rod_domain(const RodGeometry& g, Vec2 p) {
  // Exact SDF of the channel rectangle (positive inside).
  const Vec2 c{0.5 * g.width, 0.5 * g.height};
  const Vec2 q{std::abs(p.x - c.x) - 0.5 * g.width, std::abs(p.y - c.y) - 0.5 * g.height};
  const double outside = norm(Vec2{std::max(q.x, 0.0), std::max(q.y, 0.0)});
  const double inside = std::min(std::max(q.x, q.y), 0.0);
  double d = -(outside + inside);
  for (const auto& r : g.rods) d = std::min(d, norm(p - r.center) - r.radius);
  return d;
}

/// Random non-overlapping rod layout with rods at least `min_gap` from walls and each other.
inline RodGeometry random_rods(int count, std::mt19937_64& rng, double min_gap = RodGeometry::kMinGap) {
  RodGeometry g;
  const double r = RodGeometry::kRadius;
  std::uniform_real_distribution<double> ux(r + min_gap, g.width - r - min_gap);
  std::uniform_real_distribution<double> uy(r + min_gap, g.height - r - min_gap);
  for (int attempt = 0; attempt < 100000 && static_cast<int>(g.rods.size()) < count; ++attempt) {
    Rod cand{{ux(rng), uy(rng)}, r};
    bool ok = true;
    for (const auto& o : g.rods) ok = ok && norm(cand.center - o.center) >= 2 * r + min_gap;
    if (ok) g.rods.push_back(cand);
  }
  if (static_cast<int>(g.rods.size()) != count) throw ValidationError("could not place rods without overlap");
  return g;
}

// ---------------------------------------------------------------------------
// Descriptor: tagged union plus a one-line text record.

using GeometryDescriptor = std::variant<CavityGeometry, RodGeometry>;

inline std::string family_name(const GeometryDescriptor& g) {
  return std::holds_alternative<CavityGeometry>(g) ? "cavity" : "rods";
}

inline std::string describe(const GeometryDescriptor& g) {
  std::ostringstream os;
  os.precision(17);
  if (const auto* c = std::get_if<CavityGeometry>(&g)) {
    os << "cavity D=" << c->depth << " dL=" << c->cut_left << " dR=" << c->cut_right;
  } else {
    const auto& r = std::get<RodGeometry>(g);
    os << "rods W=" << r.width << " H=" << r.height << " n=" << r.rods.size();
    for (const auto& rod : r.rods) os << ' ' << rod.center.x << ',' << rod.center.y << ',' << rod.radius;
  }
  return os.str();
}

inline GeometryDescriptor parse_descriptor(const std::string& text) {
  std::istringstream is(text);
  std::string tag;
  is >> tag;
  auto value_of = [&](const std::string& key) {
    std::string tok;
    if (!(is >> tok) || tok.rfind(key + "=", 0) != 0)
      throw FormatError("geometry record: expected '" + key + "=' in '" + text + "'");
    return std::stod(tok.substr(key.size() + 1));
  };
  if (tag == "cavity") {
    CavityGeometry c;
    c.depth = value_of("D");
    c.cut_left = value_of("dL");
    c.cut_right = value_of("dR");
    validate(c);
    return c;
  }
  if (tag == "rods") {
    RodGeometry r;
    r.width = value_of("W");
    r.height = value_of("H");
    const auto n = static_cast<int>(value_of("n"));
    for (int i = 0; i < n; ++i) {
      std::string tok;
      if (!(is >> tok)) throw FormatError("geometry record: missing rod " + std::to_string(i));
      Rod rod;
      char c1 = 0, c2 = 0;
      std::istringstream ts(tok);
      if (!(ts >> rod.center.x >> c1 >> rod.center.y >> c2 >> rod.radius) || c1 != ',' || c2 != ',')
        throw FormatError("geometry record: malformed rod '" + tok + "'");
      r.rods.push_back(rod);
    }
    validate(r);
    return r;
  }
  throw FormatError("geometry record: unknown type tag '" + tag + "'");
}

/// Uniform view of a geometry for samplers and solvers.
struct Domain {
  BBox box;
  std::function<double(Vec2)> sdf;
};

inline Domain make_domain(const GeometryDescriptor& g) {
  if (const auto* c = std::get_if<CavityGeometry>(&g)) {
    auto poly = make_cavity(*c);
    double lo_y = 0;
    for (auto v : poly) lo_y = std::min(lo_y, v.y);
    return {{{0, lo_y}, {CavityGeometry::kLidWidth, 0}}, [poly](Vec2 p) { return sdf_polygon(poly, p); }};
  }
  const auto r = std::get<RodGeometry>(g);
  return {{{0, 0}, {r.width, r.height}}, [r](Vec2 p) { return sdf_rod_domain(r, p); }};
}

/// Same domain with coordinates divided by `length` (SDF scales alike).
inline Domain scaled(const Domain& d, double length) {
  return {{{d.box.lo.x / length, d.box.lo.y / length}, {d.box.hi.x / length, d.box.hi.y / length}},
          [f = d.sdf, length](Vec2 p) { return f(length * p) / length; }};
}

// ---------------------------------------------------------------------------
// Sampling

struct PointSet {
  std::vector<Vec2> points;
  std::vector<double> sdf;
  /// Bounding-box draws made by the rejection sampler (0 for other sources).
  std::size_t attempts = 0;

  std::size_t size() const { return points.size(); }
};

/// Rejection sampling from the bounding box, keeping SDF > 0.
inline PointSet sample_in_domain(const Domain& dom, std::size_t count, std::mt19937_64& rng) {
  if (!(dom.box.area() > 0)) throw ValidationError("sample_in_domain: empty bounding box");
  std::uniform_real_distribution<double> ux(dom.box.lo.x, dom.box.hi.x), uy(dom.box.lo.y, dom.box.hi.y);
  PointSet out;
  out.points.reserve(count);
  out.sdf.reserve(count);
  constexpr double kMinAcceptance = 1e-4;
  const std::size_t check_after = static_cast<std::size_t>(10.0 / kMinAcceptance);
  std::size_t trials = 0;
  while (out.size() < count) {
    const Vec2 p{ux(rng), uy(rng)};
    ++trials;
    const double d = dom.sdf(p);
    if (d > 0) {
      out.points.push_back(p);
      out.sdf.push_back(d);
    }
    if (trials >= check_after && static_cast<double>(out.size()) < kMinAcceptance * static_cast<double>(trials)) {
      throw ValidationError("sample_in_domain: acceptance rate below 1e-4, degenerate geometry");
    }
  }
  out.attempts = trials;
  return out;
}

/// P ∝ 1 / (1 + 100 · max(SDF, 1e-8)^λ).
inline double lambda_weight(double sdf, double lambda) {
  return 1.0 / (1.0 + 100.0 * std::pow(std::max(sdf, 1e-8), lambda));
}

/// Weighted draw of candidate indices. Without replacement (default) uses
/// exponential keys log(u)/w and keeps the `count` largest.
inline std::vector<std::size_t> sample_lambda(const std::vector<double>& candidate_sdf, double lambda, std::size_t count,
                                              std::mt19937_64& rng, bool with_replacement = false) {
  const std::size_t n = candidate_sdf.size();
  if (n == 0) throw ValidationError("sample_lambda: empty candidate set");
  if (!with_replacement && count > n)
    throw ValidationError("sample_lambda: cannot draw " + std::to_string(count) + " of " + std::to_string(n) +
                          " candidates without replacement");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = lambda_weight(candidate_sdf[i], lambda);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::size_t> out;
  out.reserve(count);
  if (with_replacement) {
    std::vector<double> cum(n);
    std::partial_sum(w.begin(), w.end(), cum.begin());
    for (std::size_t k = 0; k < count; ++k) {
      const double r = u01(rng) * cum.back();
      auto it = std::upper_bound(cum.begin(), cum.end(), r);
      out.push_back(std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), n - 1));
    }
    return out;
  }
  std::vector<std::pair<double, std::size_t>> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = u01(rng);
    while (r <= 0.0) r = u01(rng);
    keys[i] = {std::log(r) / w[i], i};
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(count), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (std::size_t k = 0; k < count; ++k) out.push_back(keys[k].second);
  return out;
}

}  // namespace argent
