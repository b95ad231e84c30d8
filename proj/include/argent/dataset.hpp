#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "argent/deeponet.hpp"
#include "argent/errors.hpp"
#include "argent/geometry.hpp"
#include "argent/ini.hpp"
#include "argent/model.hpp"
#include "argent/parallel.hpp"
#include "argent/params.hpp"
#include "argent/record_io.hpp"
#include "argent/tensor.hpp"

namespace argent {

// ---------------------------------------------------------------------------
// Oracle grid

/// n × n node grid over a domain's bounding box. A node is an unknown when it
/// is off the box edge and strictly inside the domain; every other node is a
/// Dirichlet node held at zero (stair-step boundary).
struct GridField {
  BBox box;
  std::size_t n = 0;
  double hx = 0, hy = 0;
  std::vector<double> u;
  std::vector<std::uint8_t> unknown;
  std::vector<double> sdf;
  std::size_t iterations = 0;
  double residual = 0;

  std::size_t index(std::size_t i, std::size_t j) const { return j * n + i; }

  Vec2 node(std::size_t i, std::size_t j) const {
    // Scaled rather than accumulated so the far edge lands exactly on hi.
    const double den = static_cast<double>(n - 1);
    return {box.lo.x + box.width() * static_cast<double>(i) / den,
            box.lo.y + box.height() * static_cast<double>(j) / den};
  }

  double value(std::size_t i, std::size_t j) const { return u[index(i, j)]; }

  /// Bilinear interpolation of the nodal solution (points outside the box clamp to it).
  double operator()(Vec2 p) const {
    auto locate = [&](double x, double lo, double h, std::size_t& k) {
      double t = (x - lo) / h;
      t = std::clamp(t, 0.0, static_cast<double>(n - 1));
      k = std::min(static_cast<std::size_t>(t), n - 2);
      return t - static_cast<double>(k);
    };
    std::size_t i = 0, j = 0;
    const double tx = locate(p.x, box.lo.x, hx, i);
    const double ty = locate(p.y, box.lo.y, hy, j);
    return (1 - tx) * (1 - ty) * value(i, j) + tx * (1 - ty) * value(i + 1, j) + (1 - tx) * ty * value(i, j + 1) +
           tx * ty * value(i + 1, j + 1);
  }

  std::size_t unknown_count() const {
    return static_cast<std::size_t>(std::count(unknown.begin(), unknown.end(), std::uint8_t{1}));
  }
};

inline GridField make_grid(const Domain& dom, std::size_t n) {
  if (n < 32) throw ValidationError("oracle grid: n must be at least 32, got " + std::to_string(n));
  if (!(dom.box.area() > 0)) throw ValidationError("oracle grid: empty bounding box");
  GridField g;
  g.box = dom.box;
  g.n = n;
  g.hx = dom.box.width() / static_cast<double>(n - 1);
  g.hy = dom.box.height() / static_cast<double>(n - 1);
  g.u.assign(n * n, 0.0);
  g.unknown.assign(n * n, 0);
  g.sdf.assign(n * n, 0.0);
  const double on_boundary = 1e-12 * std::max(dom.box.width(), dom.box.height());
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const double d = dom.sdf(g.node(i, j));
      g.sdf[g.index(i, j)] = d;
      const bool edge = i == 0 || j == 0 || i == n - 1 || j == n - 1;
      g.unknown[g.index(i, j)] = !edge && d > on_boundary;
    }
  if (g.unknown_count() == 0) throw ValidationError("oracle grid: no interior nodes, geometry area is not positive");
  return g;
}

struct PoissonOptions {
  std::size_t n = 64;
  double tol = 1e-8;
  std::size_t max_iter = 200000;
};

namespace detail {

inline double poisson_residual(const GridField& g, const std::vector<double>& f, double cx, double cy) {
  const double diag = 2 * cx + 2 * cy;
  double r = 0;
  for (std::size_t j = 1; j + 1 < g.n; ++j)
    for (std::size_t i = 1; i + 1 < g.n; ++i) {
      const std::size_t k = g.index(i, j);
      if (!g.unknown[k]) continue;
      const double au = diag * g.u[k] - cx * (g.u[k - 1] + g.u[k + 1]) - cy * (g.u[k - g.n] + g.u[k + g.n]);
      r = std::max(r, std::abs(f[k] - au));
    }
  return r;
}

}  // namespace detail

/// Solves −∇²u = f with u = 0 outside the domain by 5-point differences and SOR.
/// Converged when the max-norm residual of the discrete system drops below tol.
inline GridField poisson_oracle(const Domain& dom, const std::function<double(Vec2)>& source,
                                const PoissonOptions& opt = {}) {
  GridField g = make_grid(dom, opt.n);
  const std::size_t n = g.n;
  std::vector<double> f(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (g.unknown[g.index(i, j)]) f[g.index(i, j)] = source(g.node(i, j));
  const double cx = 1.0 / (g.hx * g.hx), cy = 1.0 / (g.hy * g.hy);
  const double diag = 2 * cx + 2 * cy;
  // Optimal SOR factor for the full rectangle; the masked domain converges at least as fast.
  const double rho = (cx * std::cos(std::numbers::pi / static_cast<double>(n - 1)) +
                      cy * std::cos(std::numbers::pi / static_cast<double>(n - 1))) / (cx + cy);
  const double omega = 2.0 / (1.0 + std::sqrt(1.0 - rho * rho));
  constexpr std::size_t kCheckEvery = 10;
  double res = detail::poisson_residual(g, f, cx, cy);
  std::size_t it = 0;
  while (res >= opt.tol) {
    if (it >= opt.max_iter) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "poisson oracle: no convergence after %zu sweeps, residual %.3e (tol %.1e)", it,
                    res, opt.tol);
      throw OracleError(buf);
    }
    for (std::size_t s = 0; s < kCheckEvery; ++s, ++it) {
      for (std::size_t j = 1; j + 1 < n; ++j)
        for (std::size_t i = 1; i + 1 < n; ++i) {
          const std::size_t k = g.index(i, j);
          if (!g.unknown[k]) continue;
          const double gs = (cx * (g.u[k - 1] + g.u[k + 1]) + cy * (g.u[k - n] + g.u[k + n]) + f[k]) / diag;
          g.u[k] += omega * (gs - g.u[k]);
        }
    }
    res = detail::poisson_residual(g, f, cx, cy);
  }
  g.iterations = it;
  g.residual = res;
  return g;
}

/// Parametric source μ₁ sin(πx) sin(π|y|) + μ₂; |y| is the depth below the cavity lid.
inline std::function<double(Vec2)> poisson_source(double mu1, double mu2) {
  return [mu1, mu2](Vec2 p) {
    return mu1 * std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * std::abs(p.y)) + mu2;
  };
}

/// u = a · SDF(x) · sin(kπx) · sin(kπ|y|).
inline double analytic_field(const Domain& dom, double a, double k, Vec2 p) {
  const double s = std::max(dom.sdf(p), 0.0);
  return a * s * std::sin(k * std::numbers::pi * p.x) * std::sin(k * std::numbers::pi * std::abs(p.y));
}

// ---------------------------------------------------------------------------
// Normalization

struct NormEntry {
  std::string name;
  double mean = 0;
  double std = 1;
};

struct NormSpec {
  std::vector<NormEntry> variables;
  /// Raw coordinates are divided by this before entering the model.
  double length_scale = 1;

  const NormEntry& at(const std::string& name) const {
    for (const auto& e : variables)
      if (e.name == name) return e;
    throw ConfigError("normalization: unknown variable '" + name + "'");
  }
};

enum class Direction { Normalize, Denormalize };

inline double zscore(double v, const NormEntry& e, Direction dir) {
  if (!(e.std > 0)) throw ValidationError("zscore: standard deviation of '" + e.name + "' must be positive");
  return dir == Direction::Normalize ? (v - e.mean) / e.std : v * e.std + e.mean;
}

inline Tensor<double> zscore(const Tensor<double>& values, const NormEntry& e, Direction dir) {
  Tensor<double> out = values;
  for (auto& v : out.data()) v = zscore(v, e, dir);
  return out;
}

// ---------------------------------------------------------------------------
// Cases

enum class OracleKind { Poisson, Analytic };

inline const char* oracle_name(OracleKind k) { return k == OracleKind::Poisson ? "poisson" : "analytic"; }

inline OracleKind parse_oracle(const std::string& s) {
  if (s == "poisson") return OracleKind::Poisson;
  if (s == "analytic") return OracleKind::Analytic;
  throw ConfigError("unknown oracle '" + s + "' (expected poisson or analytic)");
}

struct DatasetOptions {
  std::string family = "cavity";
  std::size_t count = 10;
  double split = 0.8;
  OracleKind oracle = OracleKind::Poisson;
  std::uint64_t seed = 0;
  std::size_t grid = 64;
  std::size_t geometry_points = 2000;
  int rods = 3;
  double tol = 1e-8;

  void validate() const {
    if (family != "cavity" && family != "rods") throw ConfigError("dataset: family must be cavity or rods");
    if (count < 2) throw ConfigError("dataset: count must be at least 2");
    if (!(split > 0 && split < 1)) throw ConfigError("dataset: split must lie in (0, 1)");
    if (grid < 32) throw ConfigError("dataset: grid must be at least 32");
    if (geometry_points == 0) throw ConfigError("dataset: geometry_points must be positive");
    if (family == "rods" && (rods < 1 || rods > 5)) throw ConfigError("dataset: rods must be in [1, 5]");
  }
};

/// One geometry with its query set and targets. Coordinates and SDF values are
/// in model units (raw divided by the length scale); targets are raw.
struct GeometryCase {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  GeometryDescriptor geometry;
  Tensor<double> query_coords;  // [N × 2]
  Tensor<double> query_sdf;     // [N]
  Tensor<double> mu;            // [2]
  Tensor<double> geometry_sdf;  // [M], SDF of this geometry at the shared cloud
  std::vector<std::pair<std::string, Tensor<double>>> targets;
  std::size_t grid = 0;

  std::size_t size() const { return query_coords.rows(); }

  const Tensor<double>& target(const std::string& name) const {
    for (const auto& [n, t] : targets)
      if (n == name) return t;
    throw ConfigError("case " + std::to_string(index) + ": no target '" + name + "'");
  }
};

struct Dataset {
  DatasetOptions options;
  std::vector<std::string> variables = {"u"};
  Tensor<double> geometry_coords;  // [M × 2]
  std::vector<GeometryCase> cases;
  std::vector<std::size_t> train;  // positions into cases
  std::vector<std::size_t> test;
  NormSpec norm;
  std::vector<std::string> skipped;

  const GeometryCase& case_at(std::size_t pos) const { return cases.at(pos); }
};

inline constexpr int kDatasetSchema = 1;

/// Enclosing region the shared geometry cloud is drawn from (model units).
inline BBox cloud_region(const DatasetOptions& opt) {
  if (opt.family == "cavity") return {{0, -2}, {1, 0}};
  return {{0, 0}, {1, 1.2}};
}

inline double family_length_scale(const std::string& family) { return family == "rods" ? 100.0 : 1.0; }

/// Targets, query set and geometry SDF for one case (may throw OracleError).
inline GeometryCase make_case(const DatasetOptions& opt, const Tensor<double>& cloud, std::size_t index) {
  GeometryCase c;
  c.index = index;
  c.seed = mix_seed(opt.seed, index + 1);
  c.grid = opt.grid;
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (opt.family == "cavity") {
    CavityGeometry g;
    g.depth = 0.5 + 1.5 * u01(rng);
    g.cut_left = u01(rng);
    g.cut_right = u01(rng);
    c.geometry = g;
  } else {
    c.geometry = random_rods(opt.rods, rng);
  }
  double m1 = 0.5 + 1.5 * u01(rng);
  double m2 = opt.oracle == OracleKind::Poisson ? -1.0 + 2.0 * u01(rng) : 1.0 + u01(rng);
  c.mu = Tensor<double>::vector({m1, m2});

  const Domain dom = scaled(make_domain(c.geometry), family_length_scale(opt.family));
  GridField grid = opt.oracle == OracleKind::Poisson
                       ? poisson_oracle(dom, poisson_source(m1, m2), {opt.grid, opt.tol, 200000})
                       : make_grid(dom, opt.grid);
  const std::size_t n = grid.unknown_count();
  c.query_coords = Tensor<double>({n, 2});
  c.query_sdf = Tensor<double>({n});
  Tensor<double> u({n});
  std::size_t q = 0;
  for (std::size_t j = 0; j < grid.n; ++j)
    for (std::size_t i = 0; i < grid.n; ++i) {
      const std::size_t k = grid.index(i, j);
      if (!grid.unknown[k]) continue;
      const Vec2 p = grid.node(i, j);
      c.query_coords(q, 0) = p.x;
      c.query_coords(q, 1) = p.y;
      c.query_sdf[q] = grid.sdf[k];
      u[q] = opt.oracle == OracleKind::Poisson ? grid.u[k] : analytic_field(dom, m1, m2, p);
      if (!std::isfinite(u[q])) throw OracleError("case " + std::to_string(index) + ": non-finite target");
      ++q;
    }
  c.targets.emplace_back("u", std::move(u));
  c.geometry_sdf = Tensor<double>({cloud.rows()});
  for (std::size_t m = 0; m < cloud.rows(); ++m) c.geometry_sdf[m] = dom.sdf({cloud(m, 0), cloud(m, 1)});
  return c;
}

/// Per-variable mean and population standard deviation over the training split.
inline NormSpec compute_norm(const Dataset& ds) {
  NormSpec spec;
  spec.length_scale = family_length_scale(ds.options.family);
  for (const auto& name : ds.variables) {
    double sum = 0;
    std::size_t count = 0;
    for (auto pos : ds.train)
      for (double v : ds.cases[pos].target(name).data()) {
        sum += v;
        ++count;
      }
    if (count == 0) throw ValidationError("normalization: training split has no target values");
    const double mean = sum / static_cast<double>(count);
    double ss = 0;
    for (auto pos : ds.train)
      for (double v : ds.cases[pos].target(name).data()) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(count));
    if (!(sd > 0)) throw ValidationError("normalization: variable '" + name + "' is constant on the training split");
    spec.variables.push_back({name, mean, sd});
  }
  return spec;
}

inline Dataset build_dataset(const DatasetOptions& opt) {
  opt.validate();
  Dataset ds;
  ds.options = opt;
  std::mt19937_64 cloud_rng(mix_seed(opt.seed, 0));
  const BBox region = cloud_region(opt);
  std::uniform_real_distribution<double> ux(region.lo.x, region.hi.x), uy(region.lo.y, region.hi.y);
  ds.geometry_coords = Tensor<double>({opt.geometry_points, 2});
  for (std::size_t m = 0; m < opt.geometry_points; ++m) {
    ds.geometry_coords(m, 0) = ux(cloud_rng);
    ds.geometry_coords(m, 1) = uy(cloud_rng);
  }

  std::vector<GeometryCase> slots(opt.count);
  std::vector<std::string> failures(opt.count);
  parallel_for(opt.count, [&](std::size_t i) {
    try {
      slots[i] = make_case(opt, ds.geometry_coords, i);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < opt.count; ++i) {
    if (failures[i].empty()) {
      ds.cases.push_back(std::move(slots[i]));
    } else {
      ds.skipped.push_back("case " + std::to_string(i) + ": " + failures[i]);
    }
  }
  if (ds.cases.size() < 2) throw OracleError("dataset: fewer than two cases survived generation");

  std::vector<std::size_t> order(ds.cases.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 split_rng(mix_seed(opt.seed, 0xFFFFFFFFULL));
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_train = static_cast<std::size_t>(std::llround(opt.split * static_cast<double>(order.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
  ds.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.test.begin(), ds.test.end());
  ds.norm = compute_norm(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Model inputs

/// Query rows `idx` of a case (all rows when idx is empty), SDF channel included.
template <class T>
QueryBatch<T> query_batch(const GeometryCase& c, const std::vector<std::size_t>& idx = {}) {
  const std::size_t n = idx.empty() ? c.size() : idx.size();
  QueryBatch<T> q;
  q.coords = Tensor<T>({n, 2});
  Tensor<T> sdf({n});
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t s = idx.empty() ? r : idx[r];
    q.coords(r, 0) = static_cast<T>(c.query_coords(s, 0));
    q.coords(r, 1) = static_cast<T>(c.query_coords(s, 1));
    sdf[r] = static_cast<T>(c.query_sdf[s]);
  }
  q.sdf = std::move(sdf);
  q.mask.assign(n, 0);
  return q;
}

template <class T>
GeometryCloud<T> geometry_cloud(const Dataset& ds, const GeometryCase& c) {
  return {ds.geometry_coords.cast<T>(), c.geometry_sdf.cast<T>(), Mask(ds.geometry_coords.rows(), 0)};
}

template <class T>
std::vector<BranchInput<T>> branch_inputs(const GeometryCase& c) {
  return {BranchInput<T>{BranchKind::ScalarVector, c.mu.cast<T>()}};
}

/// Normalized targets of `variables` (all when empty) for rows `idx`, shape [n × variables].
inline Tensor<double> normalized_targets(const Dataset& ds, const GeometryCase& c,
                                         const std::vector<std::size_t>& idx = {},
                                         const std::vector<std::string>& variables = {}) {
  const auto& vars = variables.empty() ? ds.variables : variables;
  const std::size_t n = idx.empty() ? c.size() : idx.size();
  Tensor<double> out({n, vars.size()});
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const auto& t = c.target(vars[v]);
    const auto& e = ds.norm.at(vars[v]);
    for (std::size_t r = 0; r < n; ++r) out(r, v) = zscore(t[idx.empty() ? r : idx[r]], e, Direction::Normalize);
  }
  return out;
}

/// Pads each query set to n_max rows; padding rows sit at the origin with SDF 0
/// and are flagged in the mask.
template <class T>
std::vector<QueryBatch<T>> pad_batch(const std::vector<QueryBatch<T>>& cases, std::size_t n_max) {
  std::vector<QueryBatch<T>> out;
  out.reserve(cases.size());
  for (std::size_t b = 0; b < cases.size(); ++b) {
    const auto& c = cases[b];
    const std::size_t n = c.size();
    if (n > n_max)
      throw ValidationError("pad_batch: case " + std::to_string(b) + " has " + std::to_string(n) +
                            " points, more than N_max = " + std::to_string(n_max));
    const std::size_t sd = c.coords.cols();
    QueryBatch<T> p;
    p.coords = Tensor<T>({n_max, sd});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < sd; ++k) p.coords(i, k) = c.coords(i, k);
    if (c.sdf) {
      Tensor<T> s({n_max});
      for (std::size_t i = 0; i < n; ++i) s[i] = (*c.sdf)[i];
      p.sdf = std::move(s);
    }
    if (c.extra) {
      Tensor<T> e({n_max, c.extra->cols()});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c.extra->cols(); ++k) e(i, k) = (*c.extra)(i, k);
      p.extra = std::move(e);
    }
    p.mask.assign(n_max, 1);
    for (std::size_t i = 0; i < n; ++i) p.mask[i] = c.mask.empty() ? 0 : c.mask[i];
    out.push_back(std::move(p));
  }
  return out;
}

/// Geometry cloud padded with masked rows at the origin.
template <class T>
GeometryCloud<T> pad_geometry(const GeometryCloud<T>& g, std::size_t m_max) {
  const std::size_t m = g.coords.rows();
  if (m > m_max) throw ValidationError("pad_geometry: cloud larger than M_max");
  GeometryCloud<T> p{Tensor<T>({m_max, g.coords.cols()}), Tensor<T>({m_max}), Mask(m_max, 1)};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < g.coords.cols(); ++k) p.coords(i, k) = g.coords(i, k);
    p.sdf[i] = g.sdf[i];
    p.mask[i] = g.mask.empty() ? 0 : g.mask[i];
  }
  return p;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline std::string join_indices(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

inline std::vector<std::size_t> split_indices(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream is(s);
  std::size_t v;
  while (is >> v) out.push_back(v);
  if (!is.eof()) throw FormatError("malformed index list '" + s + "'");
  return out;
}

inline std::string case_file(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%05zu.bin", index);
  return buf;
}

inline double parse_real(const IniDocument& doc, const std::string& sec, const std::string& key) {
  const auto& s = doc.get(sec, key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw FormatError(doc.position(sec, key) + "'" + key + "' is not a number: '" + s + "'");
  }
}

inline std::uint64_t parse_uint(const IniDocument& doc, const std::string& sec, const std::string& key) {
  const auto& s = doc.get(sec, key);
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw FormatError(doc.position(sec, key) + "'" + key + "' is not a non-negative integer: '" + s + "'");
  }
}

}  // namespace detail

inline void write_norm(IniDocument& doc, const NormSpec& norm) {
  doc.set("norm", "length_scale", format_double(norm.length_scale));
  for (const auto& e : norm.variables) {
    doc.set("norm." + e.name, "mean", format_double(e.mean));
    doc.set("norm." + e.name, "std", format_double(e.std));
  }
}

inline NormSpec read_norm(const IniDocument& doc, const std::vector<std::string>& variables) {
  NormSpec n;
  n.length_scale = detail::parse_real(doc, "norm", "length_scale");
  for (const auto& v : variables)
    n.variables.push_back({v, detail::parse_real(doc, "norm." + v, "mean"), detail::parse_real(doc, "norm." + v, "std")});
  return n;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  IniDocument doc;
  const auto& o = ds.options;
  doc.set("dataset", "schema_version", std::to_string(kDatasetSchema));
  doc.set("dataset", "family", o.family);
  doc.set("dataset", "count", std::to_string(o.count));
  doc.set("dataset", "split", format_double(o.split));
  doc.set("dataset", "oracle", oracle_name(o.oracle));
  doc.set("dataset", "seed", std::to_string(o.seed));
  doc.set("dataset", "grid", std::to_string(o.grid));
  doc.set("dataset", "geometry_points", std::to_string(o.geometry_points));
  doc.set("dataset", "rods", std::to_string(o.rods));
  doc.set("dataset", "tol", format_double(o.tol));
  std::string vars;
  for (const auto& v : ds.variables) vars += (vars.empty() ? "" : " ") + v;
  doc.set("dataset", "variables", vars);
  doc.set("dataset", "skipped", std::to_string(ds.skipped.size()));
  for (std::size_t i = 0; i < ds.skipped.size(); ++i) doc.set("skipped", std::to_string(i), ds.skipped[i]);
  std::vector<std::size_t> train_ids, test_ids;
  for (auto p : ds.train) train_ids.push_back(ds.cases[p].index);
  for (auto p : ds.test) test_ids.push_back(ds.cases[p].index);
  doc.set("split", "train", detail::join_indices(train_ids));
  doc.set("split", "test", detail::join_indices(test_ids));
  write_norm(doc, ds.norm);
  for (const auto& c : ds.cases) {
    const std::string sec = "case." + std::to_string(c.index);
    doc.set(sec, "file", detail::case_file(c.index));
    doc.set(sec, "seed", std::to_string(c.seed));
    doc.set(sec, "grid", std::to_string(c.grid));
    doc.set(sec, "geometry", describe(c.geometry));
  }
  doc.save((dir / "manifest.txt").string());
  write_record((dir / "geometry.bin").string(), {{"coords", ds.geometry_coords}});
  for (const auto& c : ds.cases) {
    NamedArrays arrays = {{"query_coords", c.query_coords},
                          {"query_sdf", c.query_sdf},
                          {"mu", c.mu},
                          {"geometry_sdf", c.geometry_sdf}};
    for (const auto& [name, t] : c.targets) arrays.emplace_back("target." + name, t);
    write_record((dir / detail::case_file(c.index)).string(), arrays);
  }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto doc = IniDocument::load((dir / "manifest.txt").string());
  const auto schema = detail::parse_uint(doc, "dataset", "schema_version");
  if (schema != kDatasetSchema)
    throw FormatError(doc.position("dataset", "schema_version") + "unsupported schema version " + std::to_string(schema));
  Dataset ds;
  auto& o = ds.options;
  o.family = doc.get("dataset", "family");
  o.count = detail::parse_uint(doc, "dataset", "count");
  o.split = detail::parse_real(doc, "dataset", "split");
  o.oracle = parse_oracle(doc.get("dataset", "oracle"));
  o.seed = detail::parse_uint(doc, "dataset", "seed");
  o.grid = detail::parse_uint(doc, "dataset", "grid");
  o.geometry_points = detail::parse_uint(doc, "dataset", "geometry_points");
  o.rods = static_cast<int>(detail::parse_uint(doc, "dataset", "rods"));
  o.tol = detail::parse_real(doc, "dataset", "tol");
  ds.variables.clear();
  {
    std::istringstream is(doc.get("dataset", "variables"));
    std::string v;
    while (is >> v) ds.variables.push_back(v);
  }
  const auto n_skipped = detail::parse_uint(doc, "dataset", "skipped");
  for (std::size_t i = 0; i < n_skipped; ++i) ds.skipped.push_back(doc.get("skipped", std::to_string(i)));
  ds.norm = read_norm(doc, ds.variables);
  ds.geometry_coords = find_array(read_record((dir / "geometry.bin").string()), "coords", "geometry.bin");

  for (const auto& sec : doc.sections()) {
    if (sec.name.rfind("case.", 0) != 0) continue;
    GeometryCase c;
    c.index = std::stoull(sec.name.substr(5));
    c.seed = detail::parse_uint(doc, sec.name, "seed");
    c.grid = detail::parse_uint(doc, sec.name, "grid");
    c.geometry = parse_descriptor(doc.get(sec.name, "geometry"));
    const auto path = (dir / doc.get(sec.name, "file")).string();
    const auto arrays = read_record(path);
    c.query_coords = find_array(arrays, "query_coords", path);
    c.query_sdf = find_array(arrays, "query_sdf", path);
    c.mu = find_array(arrays, "mu", path);
    c.geometry_sdf = find_array(arrays, "geometry_sdf", path);
    for (const auto& v : ds.variables) c.targets.emplace_back(v, find_array(arrays, "target." + v, path));
    ds.cases.push_back(std::move(c));
  }
  auto position_of = [&](std::size_t index) {
    for (std::size_t p = 0; p < ds.cases.size(); ++p)
      if (ds.cases[p].index == index) return p;
    throw FormatError(doc.source() + ": split references unknown case " + std::to_string(index));
  };
  for (auto i : detail::split_indices(doc.get("split", "train"))) ds.train.push_back(position_of(i));
  for (auto i : detail::split_indices(doc.get("split", "test"))) ds.test.push_back(position_of(i));
  return ds;
}

}  // namespace argent
