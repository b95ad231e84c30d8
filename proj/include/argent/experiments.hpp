#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "argent/dataset.hpp"
#include "argent/ini.hpp"
#include "argent/metrics.hpp"
#include "argent/model.hpp"
#include "argent/parallel.hpp"
#include "argent/trainer.hpp"

namespace argent {

/// Plain whitespace-free cells, tab separated, header first.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "\t" : "") + cells[i];
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + path);
    f << str();
  }
};

// ---------------------------------------------------------------------------
// Sampling-sensitivity sweep

inline const std::vector<double> kDefaultLambdas = {-0.5, 0.0, 0.5, 1.0};

struct SweepRow {
  double lambda = 0;
  std::string variant;
  double rel_l2 = 0;
};

template <class T>
struct LabeledModel {
  std::string label;
  const ArgentModel<T>* model = nullptr;
};

/// For each λ, re-draws every test case's scored points with the λ-sampler
/// and reports the per-case-mean relative L2 of the first variable.
template <class T>
std::vector<SweepRow> sampling_sweep(const std::vector<LabeledModel<T>>& models, const Dataset& ds,
                                     const std::vector<double>& lambdas, std::size_t points, std::uint64_t seed) {
  std::vector<SweepRow> rows(lambdas.size() * models.size());
  parallel_for(lambdas.size(), [&](std::size_t li) {
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      EvalOptions opt;
      opt.points = points;
      opt.lambda = lambdas[li];
      opt.seed = seed;
      const auto rep = evaluate(*models[mi].model, ds, ds.test, opt);
      rows[li * models.size() + mi] = {lambdas[li], models[mi].label, rep.variables.front().rel_l2};
    }
  });
  return rows;
}

inline Table sweep_table(const std::vector<SweepRow>& rows) {
  Table t{{"lambda", "variant", "rel_l2"}, {}};
  for (const auto& r : rows) t.rows.push_back({format_double(r.lambda), r.variant, format_double(r.rel_l2)});
  return t;
}

/// max − min of the error across λ for one variant.
inline double sweep_spread(const std::vector<SweepRow>& rows, const std::string& variant) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : rows)
    if (r.variant == variant) {
      lo = std::min(lo, r.rel_l2);
      hi = std::max(hi, r.rel_l2);
    }
  if (lo > hi) throw ConfigError("sweep has no rows for variant '" + variant + "'");
  return hi - lo;
}

// ---------------------------------------------------------------------------
// SDF ablation

/// Feature toggles of the "without SDF" arm: the query SDF is dropped for every
/// variant; cross and hybrid keep the SDF channel of the geometry (key/value) cloud.
inline ModelSpec without_sdf(ModelSpec s) {
  s.use_query_sdf = false;
  s.use_geometry_sdf = uses_geometry(s.variant);
  return s;
}

inline ModelSpec with_sdf(ModelSpec s) {
  s.use_query_sdf = true;
  s.use_geometry_sdf = uses_geometry(s.variant);
  return s;
}

struct AblationRow {
  Variant variant = Variant::Mlp;
  double without = 0;
  double with = 0;
  /// Feature toggles the "without" model was built with.
  bool without_query_sdf = false;
  bool without_geometry_sdf = false;
};

inline std::string ablation_label(Variant v) {
  switch (v) {
    case Variant::Mlp:
      return "deeponet-mlp";
    case Variant::SelfAttn:
      return "self";
    case Variant::CrossAttn:
      return "cross";
    case Variant::Hybrid:
      return "hybrid";
  }
  return "?";
}

template <class T>
using ModelCallback = std::function<void(Variant, bool with_sdf, const TrainState<T>&)>;

/// Trains every variant with and without SDF and scores each on the test split.
template <class T>
std::vector<AblationRow> ablate_sdf(const Dataset& ds, const ModelSpec& base, const TrainConfig& cfg,
                                    const std::vector<Variant>& variants, const EvalOptions& eval = {},
                                    const ModelCallback<T>& on_trained = {}) {
  std::vector<AblationRow> rows;
  for (Variant v : variants) {
    AblationRow row;
    row.variant = v;
    for (bool sdf : {false, true}) {
      ModelSpec spec = base;
      spec.variant = v;
      if (v == Variant::Hybrid) spec.layers = 2;
      spec = sdf ? with_sdf(spec) : without_sdf(spec);
      if (!sdf) {
        row.without_query_sdf = spec.use_query_sdf;
        row.without_geometry_sdf = spec.use_geometry_sdf;
      }
      auto st = init_train_state<T>(spec, cfg);
      train(st, ds, cfg);
      const double err = evaluate(st.model, ds, ds.test, eval).variables.front().rel_l2;
      (sdf ? row.with : row.without) = err;
      if (on_trained) on_trained(v, sdf, st);
    }
    rows.push_back(row);
  }
  return rows;
}

inline Table ablation_table(const std::vector<AblationRow>& rows) {
  Table t{{"model", "without_sdf", "with_sdf", "without_query_sdf", "without_geometry_sdf"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({ablation_label(r.variant), format_double(r.without), format_double(r.with),
                      r.without_query_sdf ? "true" : "false", r.without_geometry_sdf ? "true" : "false"});
  return t;
}

}  // namespace argent
