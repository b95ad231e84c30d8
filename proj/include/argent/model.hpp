#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "argent/attention.hpp"
#include "argent/autodiff.hpp"
#include "argent/deeponet.hpp"
#include "argent/params.hpp"

namespace argent {

enum class Variant { Mlp, SelfAttn, CrossAttn, Hybrid };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Mlp:
      return "mlp";
    case Variant::SelfAttn:
      return "self";
    case Variant::CrossAttn:
      return "cross";
    case Variant::Hybrid:
      return "hybrid";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "mlp") return Variant::Mlp;
  if (s == "self") return Variant::SelfAttn;
  if (s == "cross") return Variant::CrossAttn;
  if (s == "hybrid") return Variant::Hybrid;
  throw ConfigError("unknown model variant '" + s + "'");
}

inline bool uses_geometry(Variant v) { return v == Variant::CrossAttn || v == Variant::Hybrid; }

struct BranchSpec {
  std::string name = "mu";
  BranchKind kind = BranchKind::ScalarVector;
  int input_dim = 1;
  std::vector<int> hidden = {128, 128, 128, 128};
};

/// Full trunk + branch description.
struct ModelSpec {
  Variant variant = Variant::CrossAttn;
  /// Attention layers; the hybrid variant is always one cross plus one self layer.
  int layers = 2;
  AttentionConfig attention;
  std::vector<int> input_hidden = {128, 128, 128, 128};
  std::vector<int> output_hidden = {128, 128, 128};
  /// Trunk/branch output width J per output variable.
  int trunk_out = 128;
  int n_outputs = 1;
  bool use_query_sdf = true;
  bool use_geometry_sdf = true;
  int extra_features = 0;
  std::vector<BranchSpec> branches;

  int spatial_dim() const { return attention.spatial_dim; }
  int query_input_dim() const { return spatial_dim() + (use_query_sdf ? 1 : 0) + extra_features; }
  int geometry_input_dim() const { return spatial_dim() + (use_geometry_sdf ? 1 : 0); }
  int trunk_width() const { return trunk_out * n_outputs; }

  void validate() const {
    if (variant != Variant::Mlp) attention.validate();
    if (layers < 1 || layers > 4) throw ConfigError("model: layers must be in [1, 4]");
    if (variant == Variant::Hybrid && layers != 2)
      throw ConfigError("model: hybrid variant is one cross layer followed by one self layer (layers = 2)");
    if (trunk_out <= 0 || n_outputs <= 0) throw ConfigError("model: trunk_out and n_outputs must be positive");
    if (branches.empty() && trunk_out != 1)
      throw ConfigError("model: branch-free trunk needs trunk_out = 1 (one value per output)");
    for (int w : input_hidden)
      if (w <= 0) throw ConfigError("model: MLP widths must be positive");
    for (int w : output_hidden)
      if (w <= 0) throw ConfigError("model: MLP widths must be positive");
    for (const auto& b : branches)
      if (b.input_dim <= 0) throw ConfigError("model: branch '" + b.name + "' needs a positive input width");
  }
};

/// Query points x̃ = (x, d, extra). mask nonzero marks padding rows.
template <class T>
struct QueryBatch {
  Tensor<T> coords;  // [N × spatial_dim]
  std::optional<Tensor<T>> sdf;    // [N]
  std::optional<Tensor<T>> extra;  // [N × k]
  Mask mask;

  std::size_t size() const { return coords.rows(); }
};

/// Fixed geometry point cloud with per-case SDF values.
template <class T>
struct GeometryCloud {
  Tensor<T> coords;  // [M × spatial_dim]
  Tensor<T> sdf;     // [M]
  Mask mask;
};

namespace detail {

template <class T>
void add_mlp(ParamStore<T>& store, const std::string& prefix, int in, const std::vector<int>& hidden, int out,
             std::mt19937_64& rng) {
  int prev = in;
  std::size_t k = 0;
  for (int w : hidden) {
    store.add(prefix + "." + std::to_string(k) + ".weight", glorot_uniform<T>(prev, w, rng));
    store.add(prefix + "." + std::to_string(k) + ".bias", Tensor<T>({static_cast<std::size_t>(w)}));
    prev = w;
    ++k;
  }
  store.add(prefix + "." + std::to_string(k) + ".weight", glorot_uniform<T>(prev, out, rng));
  store.add(prefix + "." + std::to_string(k) + ".bias", Tensor<T>({static_cast<std::size_t>(out)}));
}

template <class T>
std::vector<DenseLayer<T>> bind_mlp(const ParamBinding<T>& b, const std::string& prefix, std::size_t hidden,
                                    Activation hidden_act, Activation out_act) {
  std::vector<DenseLayer<T>> layers;
  for (std::size_t k = 0; k <= hidden; ++k) {
    const std::string base = prefix + "." + std::to_string(k);
    layers.push_back({b[base + ".weight"], b[base + ".bias"], k < hidden ? hidden_act : out_act});
  }
  return layers;
}

template <class T>
Tensor<T> feature_matrix(const Tensor<T>& coords, const Tensor<T>* sdf, const Tensor<T>* extra) {
  const std::size_t n = coords.rows();
  const std::size_t width = coords.cols() + (sdf ? 1 : 0) + (extra ? extra->cols() : 0);
  Tensor<T> f({n, width});
  for (std::size_t i = 0; i < n; ++i) {
    auto r = f.row(i);
    std::size_t c = 0;
    for (auto v : coords.row(i)) r[c++] = v;
    if (sdf) r[c++] = (*sdf)[i];
    if (extra)
      for (auto v : extra->row(i)) r[c++] = v;
  }
  return f;
}

}  // namespace detail

/// ArGEnT trunk plus optional DeepONet branches.
template <class T>
class ArgentModel {
 public:
  ArgentModel() = default;

  ArgentModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::mt19937_64 rng(seed);
    const int d = spec_.variant == Variant::Mlp ? width_without_attention() : spec_.attention.embed_dim;
    detail::add_mlp(params_, "query_lift", spec_.query_input_dim(), spec_.input_hidden, d, rng);
    if (uses_geometry(spec_.variant))
      detail::add_mlp(params_, "geometry_lift", spec_.geometry_input_dim(), spec_.input_hidden, d, rng);
    for (std::size_t l = 0; l < layer_kinds().size(); ++l)
      add_attention_params(params_, "layer." + std::to_string(l), spec_.attention, rng);
    detail::add_mlp(params_, "output_block", d, spec_.output_hidden, d, rng);
    detail::add_mlp(params_, "projection", d, {}, spec_.trunk_width(), rng);
    for (const auto& b : spec_.branches)
      detail::add_mlp(params_, "branch." + b.name, b.input_dim, b.hidden, spec_.trunk_width(), rng);
  }

  ArgentModel(ModelSpec spec, ParamStore<T> params) : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
  }

  const ModelSpec& spec() const { return spec_; }
  const ParamStore<T>& params() const { return params_; }
  ParamStore<T>& params() { return params_; }

  /// true = cross layer, false = self layer, in application order.
  std::vector<bool> layer_kinds() const {
    switch (spec_.variant) {
      case Variant::Mlp:
        return {};
      case Variant::SelfAttn:
        return std::vector<bool>(spec_.layers, false);
      case Variant::CrossAttn:
        return std::vector<bool>(spec_.layers, true);
      case Variant::Hybrid:
        return {true, false};
    }
    return {};
  }

  /// Trunk basis values f_i^j, shape [N × J·n_outputs].
  Var<T> trunk(Tape<T>& tape, const ParamBinding<T>& b, const QueryBatch<T>& q,
               const GeometryCloud<T>* geom) const {
    check_inputs(q, geom);
    const std::size_t n_hidden_in = spec_.input_hidden.size();
    const Tensor<T>* qsdf = spec_.use_query_sdf ? &*q.sdf : nullptr;
    const Tensor<T>* qextra = spec_.extra_features > 0 ? &*q.extra : nullptr;
    auto qfeat = tape.constant(detail::feature_matrix(q.coords, qsdf, qextra));
    Var<T> h = mlp_forward(qfeat, detail::bind_mlp(b, "query_lift", n_hidden_in, Activation::Relu,
                                                    Activation::Identity));
    Var<T> g;
    if (geom) {
      auto gfeat = tape.constant(
          detail::feature_matrix(geom->coords, spec_.use_geometry_sdf ? &geom->sdf : nullptr,
                                 static_cast<const Tensor<T>*>(nullptr)));
      g = mlp_forward(gfeat, detail::bind_mlp(b, "geometry_lift", n_hidden_in, Activation::Relu,
                                              Activation::Identity));
    }
    const auto kinds = layer_kinds();
    for (std::size_t l = 0; l < kinds.size(); ++l) {
      const auto p = bind_attention(b, "layer." + std::to_string(l), spec_.attention);
      if (kinds[l]) {
        h = add(h, multi_head(h, g, g, q.coords, geom->coords, spec_.attention, geom->mask, p));
      } else {
        h = add(h, multi_head(h, h, h, q.coords, q.coords, spec_.attention, q.mask, p));
      }
    }
    // Residual output block: skip connection from the representation entering it.
    auto block = mlp_forward(h, detail::bind_mlp(b, "output_block", spec_.output_hidden.size(),
                                                 Activation::Relu, Activation::Identity));
    auto z = add(h, block);
    const Activation proj_act = spec_.branches.empty() ? Activation::Identity : Activation::Tanh;
    return mlp_forward(z, detail::bind_mlp(b, "projection", 0, Activation::Identity, proj_act));
  }

  /// Predictions u, shape [N × n_outputs].
  Var<T> forward(Tape<T>& tape, const ParamBinding<T>& b, const QueryBatch<T>& q, const GeometryCloud<T>* geom,
                 const std::vector<BranchInput<T>>& mu) const {
    auto f = trunk(tape, b, q, geom);
    if (spec_.branches.empty()) {
      if (!mu.empty()) throw ConfigError("model: branch inputs given to a branch-free model");
      return f;
    }
    if (mu.size() != spec_.branches.size()) {
      throw ConfigError("model: expected " + std::to_string(spec_.branches.size()) + " branch inputs, got " +
                        std::to_string(mu.size()));
    }
    std::vector<Var<T>> coeffs;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const auto& bs = spec_.branches[k];
      auto net = detail::bind_mlp(b, "branch." + bs.name, bs.hidden.size(), Activation::Relu, Activation::Identity);
      coeffs.push_back(branch_forward(tape.constant(mu[k].values), net));
    }
    const std::size_t j = spec_.trunk_out;
    std::vector<Var<T>> cols;
    for (int v = 0; v < spec_.n_outputs; ++v) {
      auto fv = spec_.n_outputs == 1 ? f : slice_cols(f, v * j, j);
      std::vector<Var<T>> cv;
      for (auto& c : coeffs) cv.push_back(spec_.n_outputs == 1 ? c : slice_cols(c, v * j, j));
      cols.push_back(reshape(combine(fv, cv), Shape{f.rows(), 1}));
    }
    return cols.size() == 1 ? cols[0] : concat_cols(cols);
  }

  /// Inference without gradient tracking.
  Tensor<T> predict(const QueryBatch<T>& q, const GeometryCloud<T>* geom, const std::vector<BranchInput<T>>& mu) const {
    Tape<T> tape;
    ParamBinding<T> b(tape, params_, false);
    return forward(tape, b, q, geom, mu).value();
  }

 private:
  int width_without_attention() const { return spec_.attention.embed_dim; }

  void check_inputs(const QueryBatch<T>& q, const GeometryCloud<T>* geom) const {
    const auto sd = static_cast<std::size_t>(spec_.spatial_dim());
    if (q.coords.rank() != 2 || q.coords.cols() != sd)
      throw DimensionError("model: query coordinates must be [N x " + std::to_string(sd) + "]");
    if (!q.mask.empty() && q.mask.size() != q.coords.rows())
      throw DimensionError("model: query mask length mismatch");
    if (spec_.use_query_sdf && (!q.sdf || q.sdf->size() != q.coords.rows()))
      throw ConfigError("model: query SDF channel required by use_query_sdf");
    if (spec_.extra_features > 0 &&
        (!q.extra || q.extra->rows() != q.coords.rows() ||
         q.extra->cols() != static_cast<std::size_t>(spec_.extra_features)))
      throw ConfigError("model: extra query features of width " + std::to_string(spec_.extra_features) + " required");
    if (uses_geometry(spec_.variant)) {
      if (!geom) throw ConfigError(std::string("model: ") + variant_name(spec_.variant) +
                                   " variant requires a geometry cloud");
      if (geom->coords.rank() != 2 || geom->coords.cols() != sd || geom->sdf.size() != geom->coords.rows())
        throw DimensionError("model: geometry cloud coordinates/SDF shape mismatch");
      if (!geom->mask.empty() && geom->mask.size() != geom->coords.rows())
        throw DimensionError("model: geometry mask length mismatch");
    } else if (geom) {
      throw ConfigError(std::string("model: ") + variant_name(spec_.variant) +
                        " variant does not take a geometry cloud");
    }
  }

  ModelSpec spec_;
  ParamStore<T> params_;
};

}  // namespace argent
