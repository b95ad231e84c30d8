#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "argent/autodiff.hpp"
#include "argent/params.hpp"

namespace argent {

enum class Kernel { Standard, Fourier, Galerkin };

inline const char* kernel_name(Kernel k) {
  switch (k) {
    case Kernel::Standard:
      return "standard";
    case Kernel::Fourier:
      return "fourier";
    case Kernel::Galerkin:
      return "galerkin";
  }
  return "?";
}

inline Kernel parse_kernel(const std::string& s) {
  if (s == "standard") return Kernel::Standard;
  if (s == "fourier") return Kernel::Fourier;
  if (s == "galerkin") return Kernel::Galerkin;
  throw ConfigError("unknown attention kernel '" + s + "'");
}

struct AttentionConfig {
  Kernel kernel = Kernel::Galerkin;
  int heads = 4;
  int embed_dim = 128;
  int spatial_dim = 2;
  /// RoPE wavelength per spatial axis; empty means 1 on every axis.
  std::vector<double> rope_wavelengths;
  bool use_rope = true;
  double norm_eps = 1e-5;

  int head_dim() const { return embed_dim / heads; }

  void validate() const {
    if (heads <= 0 || embed_dim <= 0) throw ConfigError("attention: heads and embed_dim must be positive");
    if (spatial_dim != 2 && spatial_dim != 3 && spatial_dim != 1)
      throw ConfigError("attention: spatial_dim must be 1, 2 or 3");
    if (embed_dim % heads != 0)
      throw ConfigError("attention: embed_dim " + std::to_string(embed_dim) +
                        " not divisible by heads " + std::to_string(heads));
    if (use_rope && embed_dim % (2 * heads * spatial_dim) != 0)
      throw ConfigError("attention: embed_dim " + std::to_string(embed_dim) +
                        " must be divisible by 2*heads*spatial_dim = " +
                        std::to_string(2 * heads * spatial_dim));
    if (!rope_wavelengths.empty() && rope_wavelengths.size() != static_cast<std::size_t>(spatial_dim))
      throw ConfigError("attention: need one RoPE wavelength per spatial axis");
    for (double w : rope_wavelengths)
      if (!(w > 0)) throw ConfigError("attention: RoPE wavelengths must be positive");
    if (!(norm_eps > 0)) throw ConfigError("attention: norm_eps must be positive");
  }
};

// ---------------------------------------------------------------------------
// Rotary position embedding

struct RopeSpec {
  int spatial_dim = 2;
  int head_dim = 8;
  std::vector<double> wavelengths;  // one per axis

  int axis_dim() const { return head_dim / spatial_dim; }

  void validate() const {
    if (spatial_dim <= 0 || head_dim % (2 * spatial_dim) != 0) {
      throw ConfigError("rope: head width " + std::to_string(head_dim) +
                        " not divisible by 2*spatial_dim = " + std::to_string(2 * spatial_dim));
    }
    if (wavelengths.size() != static_cast<std::size_t>(spatial_dim)) {
      throw ConfigError("rope: need one wavelength per spatial axis");
    }
  }

  /// θ_l = 10000^(−2(l−1)/axis_dim), l = 1..axis_dim/2.
  std::vector<double> frequencies() const {
    const int n = axis_dim() / 2;
    std::vector<double> theta(n);
    for (int l = 0; l < n; ++l) theta[l] = std::pow(10000.0, -2.0 * l / axis_dim());
    return theta;
  }
};

inline RopeSpec rope_spec_for(const AttentionConfig& cfg) {
  RopeSpec s;
  s.spatial_dim = cfg.spatial_dim;
  s.head_dim = cfg.head_dim();
  s.wavelengths = cfg.rope_wavelengths.empty() ? std::vector<double>(cfg.spatial_dim, 1.0)
                                               : cfg.rope_wavelengths;
  return s;
}

/// Precomputed per-row rotation angles for one coordinate set.
template <class T>
struct RopeTable {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  Tensor<T> cos;
  Tensor<T> sin;
};

/// The head embedding is split into spatial_dim equal chunks; chunk a rotates
/// adjacent pairs by angle λ_a · x_a · θ_l.
template <class T>
RopeTable<T> rope_table(const Tensor<T>& coords, const RopeSpec& spec) {
  spec.validate();
  require_matrix(coords, "rope_table");
  if (coords.cols() != static_cast<std::size_t>(spec.spatial_dim)) {
    throw DimensionError("rope: coordinates " + shape_str(coords.shape()) + " for spatial_dim " +
                         std::to_string(spec.spatial_dim));
  }
  const auto theta = spec.frequencies();
  const std::size_t chunk = spec.axis_dim();
  RopeTable<T> tab;
  for (int a = 0; a < spec.spatial_dim; ++a)
    for (std::size_t l = 0; l < theta.size(); ++l)
      tab.pairs.emplace_back(a * chunk + 2 * l, a * chunk + 2 * l + 1);
  const std::size_t n = coords.rows();
  tab.cos = Tensor<T>({n, tab.pairs.size()});
  tab.sin = Tensor<T>({n, tab.pairs.size()});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t p = 0;
    for (int a = 0; a < spec.spatial_dim; ++a) {
      const double pos = spec.wavelengths[a] * static_cast<double>(coords(i, a));
      for (double th : theta) {
        const double ang = pos * th;
        tab.cos(i, p) = static_cast<T>(std::cos(ang));
        tab.sin(i, p) = static_cast<T>(std::sin(ang));
        ++p;
      }
    }
  }
  return tab;
}

template <class T>
Var<T> rope_rotate(const Var<T>& x, const RopeTable<T>& table) {
  return rotate_pairs(x, table.pairs, table.cos, table.sin);
}

template <class T>
Tensor<T> rope_rotate(const Tensor<T>& x, const Tensor<T>& coords, const RopeSpec& spec) {
  require_matrix(x, "rope_rotate");
  if (x.cols() != static_cast<std::size_t>(spec.head_dim)) {
    throw DimensionError("rope_rotate: width " + std::to_string(x.cols()) + " vs head_dim " +
                         std::to_string(spec.head_dim));
  }
  Tape<T> tape;
  return rope_rotate(tape.constant(x), rope_table(coords, spec)).value();
}

/// Dense block-diagonal Θ(x) for a single position.
inline Tensor<double> rope_matrix(const std::vector<double>& position, const RopeSpec& spec) {
  Tensor<double> coords({1, position.size()}, position);
  auto tab = rope_table(coords, spec);
  Tensor<double> m({static_cast<std::size_t>(spec.head_dim), static_cast<std::size_t>(spec.head_dim)});
  for (std::size_t p = 0; p < tab.pairs.size(); ++p) {
    const auto [a, b] = tab.pairs[p];
    m(a, a) = tab.cos(0, p);
    m(a, b) = -tab.sin(0, p);
    m(b, a) = tab.sin(0, p);
    m(b, b) = tab.cos(0, p);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

template <class T>
void check_qkv(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Mask& mask) {
  require_matrix(q.value(), "attention Q");
  require_matrix(k.value(), "attention K");
  require_matrix(v.value(), "attention V");
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw DimensionError("attention: incompatible Q " + shape_str(q.shape()) + ", K " +
                         shape_str(k.shape()) + ", V " + shape_str(v.shape()));
  }
  if (!mask.empty() && mask.size() != k.rows()) {
    throw DimensionError("attention: mask length " + std::to_string(mask.size()) + " vs " +
                         std::to_string(k.rows()) + " keys");
  }
  if (count_unmasked(mask, k.rows()) == 0) {
    throw DegenerateMaskError("attention: every key/value row is masked");
  }
}

template <class T>
RowNorm<T> resolve_norm(Tape<T>& tape, const std::optional<RowNorm<T>>& norm, std::size_t width) {
  if (norm) return *norm;
  return RowNorm<T>{tape.constant(Tensor<T>({width}, T{1})), tape.constant(Tensor<T>({width}, T{0})),
                    T(1e-5)};
}

}  // namespace detail

/// softmax(QKᵀ/√d_k)V with masked keys excluded.
template <class T>
Var<T> standard_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Mask& mask = {}) {
  detail::check_qkv(q, k, v, mask);
  const T s = T{1} / std::sqrt(static_cast<T>(q.cols()));
  auto scores = scale(matmul(q, transpose(k)), s);
  return matmul(row_softmax(scores, mask), v);
}

/// (Q̃K̃ᵀ)V / n over the unmasked keys.
template <class T>
Var<T> fourier_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Mask& mask = {},
                         const std::optional<RowNorm<T>>& q_norm = {},
                         const std::optional<RowNorm<T>>& k_norm = {}) {
  detail::check_qkv(q, k, v, mask);
  auto& tape = q.tape();
  const auto n = static_cast<T>(count_unmasked(mask, k.rows()));
  auto qt = layer_normalize(q, detail::resolve_norm(tape, q_norm, q.cols()));
  auto kt = mask_rows(layer_normalize(k, detail::resolve_norm(tape, k_norm, k.cols())), mask);
  auto vm = mask_rows(v, mask);
  return scale(matmul(matmul(qt, transpose(kt)), vm), T{1} / n);
}

/// Q(K̃ᵀṼ) / n over the unmasked keys; cost linear in n.
template <class T>
Var<T> galerkin_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Mask& mask = {},
                          const std::optional<RowNorm<T>>& k_norm = {},
                          const std::optional<RowNorm<T>>& v_norm = {}) {
  detail::check_qkv(q, k, v, mask);
  auto& tape = q.tape();
  const auto n = static_cast<T>(count_unmasked(mask, k.rows()));
  auto kt = mask_rows(layer_normalize(k, detail::resolve_norm(tape, k_norm, k.cols())), mask);
  auto vt = mask_rows(layer_normalize(v, detail::resolve_norm(tape, v_norm, v.cols())), mask);
  return matmul(q, scale(matmul(transpose(kt), vt), T{1} / n));
}

// ---------------------------------------------------------------------------
// Multi-head block

template <class T>
struct MultiHeadParams {
  Var<T> wq, wk, wv;  // [d × d], no bias
  Var<T> wo;          // [d × d]
  Var<T> bo;          // [d]
  std::vector<RowNorm<T>> q_norm, k_norm, v_norm;  // per head; empty when unused
};

/// Registers the projection and per-head normalization parameters of one block.
template <class T>
void add_attention_params(ParamStore<T>& store, const std::string& prefix, const AttentionConfig& cfg,
                          std::mt19937_64& rng) {
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  for (const char* w : {"wq", "wk", "wv", "wo"}) store.add(prefix + "." + w, glorot_uniform<T>(d, d, rng));
  store.add(prefix + ".bo", Tensor<T>({d}));
  auto add_norms = [&](const char* role) {
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string base = prefix + "." + role + "_norm." + std::to_string(h);
      store.add(base + ".gain", Tensor<T>({dh}, T{1}));
      store.add(base + ".bias", Tensor<T>({dh}));
    }
  };
  if (cfg.kernel == Kernel::Fourier) {
    add_norms("q");
    add_norms("k");
  } else if (cfg.kernel == Kernel::Galerkin) {
    add_norms("k");
    add_norms("v");
  }
}

template <class T>
MultiHeadParams<T> bind_attention(const ParamBinding<T>& b, const std::string& prefix,
                                  const AttentionConfig& cfg) {
  MultiHeadParams<T> p{b[prefix + ".wq"], b[prefix + ".wk"], b[prefix + ".wv"], b[prefix + ".wo"],
                       b[prefix + ".bo"], {}, {}, {}};
  auto norms = [&](const char* role) {
    std::vector<RowNorm<T>> out;
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string base = prefix + "." + role + "_norm." + std::to_string(h);
      out.push_back(RowNorm<T>{b[base + ".gain"], b[base + ".bias"], static_cast<T>(cfg.norm_eps)});
    }
    return out;
  };
  if (cfg.kernel == Kernel::Fourier) {
    p.q_norm = norms("q");
    p.k_norm = norms("k");
  } else if (cfg.kernel == Kernel::Galerkin) {
    p.k_norm = norms("k");
    p.v_norm = norms("v");
  }
  return p;
}

/// Projects Q/K/V, splits heads, rotates per-head Q and K by their own
/// coordinates, applies the configured kernel, merges heads and projects out.
template <class T>
Var<T> multi_head(const Var<T>& q_in, const Var<T>& k_in, const Var<T>& v_in, const Tensor<T>& coords_q,
                  const Tensor<T>& coords_k, const AttentionConfig& cfg, const Mask& mask,
                  const MultiHeadParams<T>& p) {
  cfg.validate();
  if (q_in.cols() != static_cast<std::size_t>(cfg.embed_dim) ||
      k_in.cols() != static_cast<std::size_t>(cfg.embed_dim) ||
      v_in.cols() != static_cast<std::size_t>(cfg.embed_dim)) {
    throw DimensionError("multi_head: inputs must have width " + std::to_string(cfg.embed_dim));
  }
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  auto q = matmul(q_in, p.wq);
  auto k = matmul(k_in, p.wk);
  auto v = matmul(v_in, p.wv);
  std::optional<RopeTable<T>> tq, tk;
  if (cfg.use_rope) {
    const auto spec = rope_spec_for(cfg);
    tq = rope_table(coords_q, spec);
    tk = rope_table(coords_k, spec);
  }
  std::vector<Var<T>> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    auto qh = slice_cols(q, h * dh, dh);
    auto kh = slice_cols(k, h * dh, dh);
    auto vh = slice_cols(v, h * dh, dh);
    if (cfg.use_rope) {
      qh = rope_rotate(qh, *tq);
      kh = rope_rotate(kh, *tk);
    }
    switch (cfg.kernel) {
      case Kernel::Standard:
        heads.push_back(standard_attention(qh, kh, vh, mask));
        break;
      case Kernel::Fourier:
        heads.push_back(fourier_attention(qh, kh, vh, mask, std::optional<RowNorm<T>>(p.q_norm.at(h)),
                                          std::optional<RowNorm<T>>(p.k_norm.at(h))));
        break;
      case Kernel::Galerkin:
        heads.push_back(galerkin_attention(qh, kh, vh, mask, std::optional<RowNorm<T>>(p.k_norm.at(h)),
                                           std::optional<RowNorm<T>>(p.v_norm.at(h))));
        break;
    }
  }
  auto merged = heads.size() == 1 ? heads[0] : concat_cols(heads);
  return add_bias(matmul(merged, p.wo), p.bo);
}

}  // namespace argent
