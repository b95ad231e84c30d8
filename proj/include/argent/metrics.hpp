#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "argent/dataset.hpp"
#include "argent/errors.hpp"
#include "argent/geometry.hpp"
#include "argent/model.hpp"
#include "argent/parallel.hpp"

namespace argent {

/// ‖pred − ref‖₂ / ‖ref‖₂ over one case.
inline double relative_l2(const Tensor<double>& pred, const Tensor<double>& ref) {
  if (pred.size() != ref.size())
    throw DimensionError("relative_l2: " + shape_str(pred.shape()) + " vs " + shape_str(ref.shape()));
  double num = 0, den = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += (pred[i] - ref[i]) * (pred[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  if (!(den > 0)) throw ValidationError("relative_l2: reference has zero norm");
  return std::sqrt(num / den);
}

/// Per-case relative L2, then the mean over cases.
inline double relative_l2(const std::vector<Tensor<double>>& pred, const std::vector<Tensor<double>>& ref) {
  if (pred.size() != ref.size() || ref.empty()) throw DimensionError("relative_l2: case lists differ or are empty");
  double s = 0;
  for (std::size_t c = 0; c < ref.size(); ++c) s += relative_l2(pred[c], ref[c]);
  return s / static_cast<double>(ref.size());
}

/// Relative L2 with numerator and denominator pooled over every point of every case.
inline double relative_l2_pooled(const std::vector<Tensor<double>>& pred, const std::vector<Tensor<double>>& ref) {
  if (pred.size() != ref.size() || ref.empty()) throw DimensionError("relative_l2: case lists differ or are empty");
  double num = 0, den = 0;
  for (std::size_t c = 0; c < ref.size(); ++c) {
    if (pred[c].size() != ref[c].size()) throw DimensionError("relative_l2: case shapes differ");
    for (std::size_t i = 0; i < ref[c].size(); ++i) {
      num += (pred[c][i] - ref[c][i]) * (pred[c][i] - ref[c][i]);
      den += ref[c][i] * ref[c][i];
    }
  }
  if (!(den > 0)) throw ValidationError("relative_l2: reference has zero norm");
  return std::sqrt(num / den);
}

inline double mae(const Tensor<double>& pred, const Tensor<double>& ref) {
  if (pred.size() != ref.size()) throw DimensionError("mae: " + shape_str(pred.shape()) + " vs " + shape_str(ref.shape()));
  if (ref.size() == 0) return 0;
  double s = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) s += std::abs(pred[i] - ref[i]);
  return s / static_cast<double>(ref.size());
}

inline double mean_squared(const Tensor<double>& pred, const Tensor<double>& ref) {
  if (pred.size() != ref.size()) throw DimensionError("mse: shape mismatch");
  if (ref.size() == 0) return 0;
  double s = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) s += (pred[i] - ref[i]) * (pred[i] - ref[i]);
  return s / static_cast<double>(ref.size());
}

// ---------------------------------------------------------------------------
// Evaluation over dataset cases

struct EvalOptions {
  /// Query points scored per case; 0 scores every candidate.
  std::size_t points = 512;
  /// Sampling parameter of the λ-sampler used to pick those points.
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> variables;
};

struct CaseScore {
  std::size_t index = 0;
  std::vector<double> rel_l2;  // per variable
  std::vector<double> mae;
  std::vector<double> mse_norm;
};

struct VariableScore {
  std::string name;
  double rel_l2 = 0;         // per-case mean
  double rel_l2_pooled = 0;  // pooled over points
  double mae = 0;            // denormalized units, mean over all scored points
  double mse_norm = 0;       // normalized units, mean over all scored points
};

struct EvalReport {
  std::vector<VariableScore> variables;
  std::vector<CaseScore> cases;

  const VariableScore& at(const std::string& name) const {
    for (const auto& v : variables)
      if (v.name == name) return v;
    throw ConfigError("evaluation has no variable '" + name + "'");
  }
};

inline std::vector<std::size_t> eval_indices(const GeometryCase& c, const EvalOptions& opt) {
  if (opt.points == 0 || opt.points >= c.size()) {
    std::vector<std::size_t> all(c.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  std::mt19937_64 rng(mix_seed(opt.seed, c.index));
  const std::vector<double> sdf(c.query_sdf.data().begin(), c.query_sdf.data().end());
  return sample_lambda(sdf, opt.lambda, opt.points, rng);
}

/// Denormalized predictions [n × variables] at query rows idx.
template <class T>
Tensor<double> predict_case(const ArgentModel<T>& model, const Dataset& ds, const GeometryCase& c,
                            const std::vector<std::size_t>& idx, const std::vector<std::string>& vars) {
  const auto q = query_batch<T>(c, idx);
  const bool geo = uses_geometry(model.spec().variant);
  GeometryCloud<T> g;
  if (geo) g = geometry_cloud<T>(ds, c);
  const auto mu = model.spec().branches.empty() ? std::vector<BranchInput<T>>{} : branch_inputs<T>(c);
  auto out = model.predict(q, geo ? &g : nullptr, mu).template cast<double>();
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const auto& e = ds.norm.at(vars[v]);
    for (std::size_t r = 0; r < out.rows(); ++r) out(r, v) = zscore(out(r, v), e, Direction::Denormalize);
  }
  return out;
}

template <class T>
EvalReport evaluate(const ArgentModel<T>& model, const Dataset& ds, const std::vector<std::size_t>& positions,
                    const EvalOptions& opt = {}) {
  const auto vars = opt.variables.empty() ? ds.variables : opt.variables;
  if (static_cast<std::size_t>(model.spec().n_outputs) != vars.size())
    throw ConfigError("evaluate: model has " + std::to_string(model.spec().n_outputs) + " outputs for " +
                      std::to_string(vars.size()) + " variables");
  if (positions.empty()) throw ValidationError("evaluate: no cases to score");
  const std::size_t nv = vars.size();
  std::vector<std::vector<Tensor<double>>> preds(nv, std::vector<Tensor<double>>(positions.size()));
  std::vector<std::vector<Tensor<double>>> refs = preds;
  std::vector<std::vector<Tensor<double>>> preds_n = preds, refs_n = preds;
  parallel_for(positions.size(), [&](std::size_t k) {
    const auto& c = ds.cases[positions[k]];
    const auto idx = eval_indices(c, opt);
    const auto out = predict_case(model, ds, c, idx, vars);
    for (std::size_t v = 0; v < nv; ++v) {
      const auto& e = ds.norm.at(vars[v]);
      Tensor<double> p({idx.size()}), r({idx.size()}), pn({idx.size()}), rn({idx.size()});
      const auto& t = c.target(vars[v]);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        p[i] = out(i, v);
        r[i] = t[idx[i]];
        pn[i] = zscore(p[i], e, Direction::Normalize);
        rn[i] = zscore(r[i], e, Direction::Normalize);
      }
      preds[v][k] = std::move(p);
      refs[v][k] = std::move(r);
      preds_n[v][k] = std::move(pn);
      refs_n[v][k] = std::move(rn);
    }
  });
  EvalReport rep;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    CaseScore cs;
    cs.index = ds.cases[positions[k]].index;
    for (std::size_t v = 0; v < nv; ++v) {
      cs.rel_l2.push_back(relative_l2(preds[v][k], refs[v][k]));
      cs.mae.push_back(mae(preds[v][k], refs[v][k]));
      cs.mse_norm.push_back(mean_squared(preds_n[v][k], refs_n[v][k]));
    }
    rep.cases.push_back(std::move(cs));
  }
  for (std::size_t v = 0; v < nv; ++v) {
    VariableScore s;
    s.name = vars[v];
    s.rel_l2 = relative_l2(preds[v], refs[v]);
    s.rel_l2_pooled = relative_l2_pooled(preds[v], refs[v]);
    double abs_sum = 0, sq_sum = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < positions.size(); ++k) {
      abs_sum += mae(preds[v][k], refs[v][k]) * static_cast<double>(refs[v][k].size());
      sq_sum += mean_squared(preds_n[v][k], refs_n[v][k]) * static_cast<double>(refs[v][k].size());
      n += refs[v][k].size();
    }
    s.mae = abs_sum / static_cast<double>(n);
    s.mse_norm = sq_sum / static_cast<double>(n);
    rep.variables.push_back(s);
  }
  return rep;
}

}  // namespace argent
