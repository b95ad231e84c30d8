#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "argent/autodiff.hpp"
#include "argent/dataset.hpp"
#include "argent/errors.hpp"
#include "argent/model.hpp"
#include "argent/parallel.hpp"
#include "argent/params.hpp"

namespace argent {

enum class Precision { Float32, Float64 };

inline const char* precision_name(Precision p) { return p == Precision::Float32 ? "float32" : "float64"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "float32") return Precision::Float32;
  if (s == "float64") return Precision::Float64;
  throw ConfigError("unknown precision '" + s + "' (expected float32 or float64)");
}

struct TrainConfig {
  std::uint64_t steps = 5000;
  double lr0 = 1e-3;
  double decay = 0.99;
  std::uint64_t decay_every = 200;
  std::size_t query_batch = 512;
  std::size_t case_batch = 1;
  std::uint64_t seed = 0;
  Precision precision = Precision::Float64;
  /// Loss is recorded every `log_every` steps.
  std::uint64_t log_every = 1;
  std::uint64_t checkpoint_every = 500;
  /// Output variables to fit; empty means every dataset variable.
  std::vector<std::string> variables;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr0 > 0)) throw ConfigError("train: lr0 must be positive");
    if (!(decay > 0 && decay <= 1)) throw ConfigError("train: decay must lie in (0, 1]");
    if (decay_every == 0) throw ConfigError("train: decay_every must be positive");
    if (query_batch == 0 || case_batch == 0) throw ConfigError("train: query_batch and case_batch must be positive");
    if (log_every == 0) throw ConfigError("train: log_every must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0))
      throw ConfigError("train: Adam needs beta1, beta2 in [0, 1) and eps > 0");
  }
};

/// lr0 · decay^⌊step / decay_every⌋.
inline double lr_at(std::uint64_t step, const TrainConfig& cfg = {}) {
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(step / cfg.decay_every));
}

template <class T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update. Gradients are checked for finiteness before
/// anything is modified.
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, const std::vector<Tensor<T>>& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (grads.size() != params.size())
    throw DimensionError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  for (std::size_t p = 0; p < grads.size(); ++p) {
    if (grads[p].shape() != params.value(p).shape())
      throw DimensionError("adam_step: gradient shape mismatch for " + params.name(p));
    for (T g : grads[p].data())
      if (!std::isfinite(static_cast<double>(g)))
        throw TrainingError("non-finite gradient in parameter '" + params.name(p) + "'");
  }
  if (state.m.empty()) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      state.m.emplace_back(params.value(p).shape());
      state.v.emplace_back(params.value(p).shape());
    }
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params.value(p).data();
    auto m = state.m[p].data();
    auto v = state.v[p].data();
    auto g = grads[p].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
      const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
  }
}

/// Mean over unmasked rows (and all columns) of the squared difference.
template <class T>
Var<T> mse_loss(const Var<T>& pred, const Tensor<T>& target, const Mask& mask = {}) {
  if (pred.value().size() != target.size())
    throw DimensionError("mse_loss: prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  const std::size_t rows = pred.rows();
  const std::size_t cols = pred.value().size() / std::max<std::size_t>(rows, 1);
  const std::size_t live = mask.empty() ? rows : count_unmasked(mask, rows);
  if (live == 0) throw DegenerateMaskError("mse_loss: every row is masked, nothing to average");
  auto& tape = pred.tape();
  auto p = pred.value().rank() == 2 ? pred : reshape(pred, Shape{rows, 1});
  auto t = tape.constant(Tensor<T>(Shape{rows, cols}, std::vector<T>(target.data().begin(), target.data().end())));
  auto diff = sub(p, t);
  if (!mask.empty()) diff = mask_rows(diff, mask);
  return scale(sum(mul(diff, diff)), static_cast<T>(1.0 / static_cast<double>(live * cols)));
}

template <class T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& target, const Mask& mask = {}) {
  Tape<T> tape;
  return mse_loss(tape.constant(pred), target, mask).value().item();
}

template <class T>
struct TrainState {
  ArgentModel<T> model;
  AdamState<T> adam;
  std::uint64_t step = 0;
  std::mt19937_64 rng;
  std::vector<std::uint64_t> loss_steps;
  std::vector<double> losses;
  /// Best evaluation seen so far (NaN until an evaluation is recorded).
  double best_eval = std::nan("");
  std::uint64_t best_eval_step = 0;
};

template <class T>
TrainState<T> init_train_state(const ModelSpec& spec, const TrainConfig& cfg) {
  TrainState<T> st;
  st.model = ArgentModel<T>(spec, mix_seed(cfg.seed, 1));
  st.rng.seed(mix_seed(cfg.seed, 2));
  return st;
}

template <class T>
struct TrainHooks {
  std::function<void(const std::string&)> warn;
  std::function<void(std::uint64_t step, double loss)> progress;
  /// Writes a checkpoint and returns a reference to it (path or label).
  std::function<std::string(const TrainState<T>&)> checkpoint;
};

/// Query rows used for one case in one step.
inline std::vector<std::size_t> draw_query_subset(std::size_t n, std::size_t batch, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch >= n) return idx;
  for (std::size_t i = 0; i < batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(batch);
  return idx;
}

namespace detail {

template <class T>
struct CaseGrad {
  double loss = 0;
  std::vector<Tensor<T>> grads;
};

template <class T>
CaseGrad<T> case_gradient(const ArgentModel<T>& model, const Dataset& ds, const GeometryCase& c,
                          const std::vector<std::size_t>& idx, const std::vector<std::string>& vars) {
  Tape<T> tape;
  ParamBinding<T> b(tape, model.params(), true);
  const auto q = query_batch<T>(c, idx);
  const bool geo = uses_geometry(model.spec().variant);
  GeometryCloud<T> g;
  if (geo) g = geometry_cloud<T>(ds, c);
  const auto mu = model.spec().branches.empty() ? std::vector<BranchInput<T>>{} : branch_inputs<T>(c);
  auto pred = model.forward(tape, b, q, geo ? &g : nullptr, mu);
  const auto target = normalized_targets(ds, c, idx, vars).template cast<T>();
  auto loss = mse_loss(pred, target);
  CaseGrad<T> out;
  out.loss = static_cast<double>(loss.value().item());
  auto table = tape.backward(loss);
  out.grads = b.collect(table);
  return out;
}

}  // namespace detail

inline std::vector<std::string> train_variables(const Dataset& ds, const TrainConfig& cfg) {
  if (cfg.variables.empty()) return ds.variables;
  for (const auto& v : cfg.variables) ds.norm.at(v);
  return cfg.variables;
}

/// Runs steps [state.step, cfg.steps). Each step draws case_batch training cases
/// and a query subset per case, uses the full geometry cloud, and applies one
/// Adam update on the mean normalized-space MSE.
template <class T>
void train(TrainState<T>& st, const Dataset& ds, const TrainConfig& cfg, const TrainHooks<T>& hooks = {}) {
  cfg.validate();
  if (ds.train.empty()) throw TrainingError("train: dataset has no training cases");
  const auto vars = train_variables(ds, cfg);
  if (static_cast<std::size_t>(st.model.spec().n_outputs) != vars.size())
    throw ConfigError("train: model has " + std::to_string(st.model.spec().n_outputs) + " outputs for " +
                      std::to_string(vars.size()) + " target variables");
  std::set<std::size_t> warned;
  std::string last_good = "none";
  std::uniform_int_distribution<std::size_t> pick_case(0, ds.train.size() - 1);
  while (st.step < cfg.steps) {
    std::vector<std::size_t> cases(cfg.case_batch);
    std::vector<std::vector<std::size_t>> subsets(cfg.case_batch);
    for (std::size_t k = 0; k < cfg.case_batch; ++k) {
      cases[k] = ds.train[pick_case(st.rng)];
      const auto& c = ds.cases[cases[k]];
      if (cfg.query_batch >= c.size() && hooks.warn && warned.insert(cases[k]).second)
        hooks.warn("query_batch " + std::to_string(cfg.query_batch) + " >= case " + std::to_string(c.index) +
                   " size " + std::to_string(c.size()) + ", using the full case");
      subsets[k] = draw_query_subset(c.size(), cfg.query_batch, st.rng);
    }
    std::vector<detail::CaseGrad<T>> parts(cfg.case_batch);
    parallel_for(cfg.case_batch, [&](std::size_t k) {
      parts[k] = detail::case_gradient(st.model, ds, ds.cases[cases[k]], subsets[k], vars);
    });
    double loss = 0;
    std::vector<Tensor<T>> grads = std::move(parts[0].grads);
    loss += parts[0].loss;
    for (std::size_t k = 1; k < parts.size(); ++k) {
      loss += parts[k].loss;
      for (std::size_t p = 0; p < grads.size(); ++p) {
        auto dst = grads[p].data();
        auto src = parts[k].grads[p].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
    if (cfg.case_batch > 1) {
      const T inv = static_cast<T>(1.0 / static_cast<double>(cfg.case_batch));
      loss /= static_cast<double>(cfg.case_batch);
      for (auto& g : grads)
        for (auto& v : g.data()) v *= inv;
    }
    if (!std::isfinite(loss))
      throw TrainingError("loss is not finite at step " + std::to_string(st.step) + "; last good checkpoint: " +
                          last_good);
    adam_step(st.model.params(), st.adam, grads, lr_at(st.step, cfg), cfg.beta1, cfg.beta2, cfg.eps);
    if (st.step % cfg.log_every == 0) {
      st.loss_steps.push_back(st.step);
      st.losses.push_back(loss);
    }
    if (hooks.progress) hooks.progress(st.step, loss);
    ++st.step;
    if (hooks.checkpoint && cfg.checkpoint_every > 0 && st.step % cfg.checkpoint_every == 0 && st.step < cfg.steps)
      last_good = hooks.checkpoint(st);
  }
  if (hooks.checkpoint) hooks.checkpoint(st);
}

}  // namespace argent
