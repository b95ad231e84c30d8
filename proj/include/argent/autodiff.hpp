#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "argent/errors.hpp"
#include "argent/tensor.hpp"

namespace argent {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MutMap = Eigen::Map<RowMat<T>>;

template <class T>
ConstMap<T> as_map(const Tensor<T>& t) {
  return ConstMap<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

template <class T>
MutMap<T> as_map(Tensor<T>& t) {
  return MutMap<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

/// a·b
template <class T>
Tensor<T> gemm_nn(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> c({a.rows(), b.cols()});
  as_map(c).noalias() = as_map(a) * as_map(b);
  return c;
}

/// aᵀ·b
template <class T>
Tensor<T> gemm_tn(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> c({a.cols(), b.cols()});
  as_map(c).noalias() = as_map(a).transpose() * as_map(b);
  return c;
}

/// a·bᵀ
template <class T>
Tensor<T> gemm_nt(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> c({a.rows(), b.rows()});
  as_map(c).noalias() = as_map(a) * as_map(b).transpose();
  return c;
}

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace detail

template <class T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid until the
/// owning tape is reset.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const;
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape<T>& tape() const { return *tape_; }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients of the leaves that required them, keyed by node id.
template <class T>
using GradientTable = std::map<std::size_t, Tensor<T>>;

/// Append-only record of primitive applications for one forward pass.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  struct Node {
    const char* op = "";
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool leaf = false;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push("constant", std::move(value), false, true, {}); }

  Var<T> leaf(Tensor<T> value, bool requires_grad = true) {
    return push("leaf", std::move(value), requires_grad, true, {});
  }

  /// Records an op. The backward closure is dropped when no input needs a
  /// gradient, so constant-only subgraphs never become differentiable nodes.
  Var<T> record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                BackwardFn fn) {
    bool rg = false;
    for (const auto& v : inputs) rg = rg || v.requires_grad();
    return push(op, std::move(value), rg, false, rg ? std::move(fn) : BackwardFn{});
  }

  Var<T> record(const char* op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                BackwardFn fn) {
    bool rg = false;
    for (const auto& v : inputs) rg = rg || v.requires_grad();
    return push(op, std::move(value), rg, false, rg ? std::move(fn) : BackwardFn{});
  }

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  /// Sums a gradient contribution into a node. No-op for non-differentiable nodes.
  void accumulate(std::size_t id, Tensor<T> g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = std::move(g);
    } else {
      detail::add_into(n.grad, g);
    }
  }

  /// Reverse sweep from a scalar loss. Returns gradients of every leaf that
  /// requires one (zeros when the loss does not depend on it) and resets the tape.
  GradientTable<T> backward(const Var<T>& loss) {
    if (&loss.tape() != this) throw ContractError("backward: loss recorded on another tape");
    if (loss.value().size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " +
                          shape_str(loss.value().shape()));
    }
    if (!loss.requires_grad()) {
      throw ContractError("backward: loss does not depend on any differentiable leaf");
    }
    accumulate(loss.id(), Tensor<T>(loss.value().shape(), T{1}));
    for (std::size_t k = nodes_.size(); k-- > 0;) {
      Node& n = nodes_[k];
      if (!n.requires_grad || n.leaf || n.grad.size() == 0) continue;
      Tensor<T> g = std::move(n.grad);
      n.backward(*this, g);
      n.grad = Tensor<T>();
    }
    GradientTable<T> out;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      Node& n = nodes_[k];
      if (!(n.leaf && n.requires_grad)) continue;
      out.emplace(k, n.grad.size() ? std::move(n.grad) : Tensor<T>(n.value.shape()));
    }
    reset();
    return out;
  }

  void reset() { nodes_.clear(); }

 private:
  Var<T> push(const char* op, Tensor<T> value, bool rg, bool leaf, BackwardFn fn) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.requires_grad = rg;
    n.leaf = leaf;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
};

template <class T>
const Tensor<T>& Var<T>::value() const {
  return tape_->node(id_).value;
}

template <class T>
bool Var<T>::requires_grad() const {
  return tape_->node(id_).requires_grad;
}

// ---------------------------------------------------------------------------
// Primitives

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_str(av.shape()) + " by " +
                         shape_str(bv.shape()));
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape().record("matmul", detail::gemm_nn(av, bv), {a, b},
                         [ia, ib](Tape<T>& t, const Tensor<T>& g) {
                           if (t.node(ia).requires_grad)
                             t.accumulate(ia, detail::gemm_nt(g, t.node(ib).value));
                           if (t.node(ib).requires_grad)
                             t.accumulate(ib, detail::gemm_tn(t.node(ia).value, g));
                         });
}

template <class T>
Var<T> transpose(const Var<T>& a) {
  const auto& av = a.value();
  require_matrix(av, "transpose");
  Tensor<T> out({av.cols(), av.rows()});
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
  const auto ia = a.id();
  return a.tape().record("transpose", std::move(out), {a},
                         [ia](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> gt({g.cols(), g.rows()});
                           for (std::size_t i = 0; i < g.rows(); ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j) gt(j, i) = g(i, j);
                           t.accumulate(ia, std::move(gt));
                         });
}

template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  Tensor<T> out(shape, a.value().values());
  const auto ia = a.id();
  const Shape orig = a.shape();
  return a.tape().record("reshape", std::move(out), {a},
                         [ia, orig](Tape<T>& t, const Tensor<T>& g) {
                           t.accumulate(ia, Tensor<T>(orig, g.values()));
                         });
}

namespace detail {

template <class T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

}  // namespace detail

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "add");
  Tensor<T> out = a.value();
  detail::add_into(out, b.value());
  const auto ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {a, b},
                         [ia, ib](Tape<T>& t, const Tensor<T>& g) {
                           t.accumulate(ia, g);
                           t.accumulate(ib, g);
                         });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "sub");
  Tensor<T> out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(out), {a, b},
                         [ia, ib](Tape<T>& t, const Tensor<T>& g) {
                           t.accumulate(ia, g);
                           Tensor<T> neg = g;
                           for (auto& x : neg.data()) x = -x;
                           t.accumulate(ib, std::move(neg));
                         });
}

/// Elementwise (Hadamard) product.
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "mul");
  Tensor<T> out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {a, b},
                         [ia, ib](Tape<T>& t, const Tensor<T>& g) {
                           auto grad_for = [&](std::size_t other) {
                             Tensor<T> r = g;
                             auto rv = r.data();
                             auto ov = t.node(other).value.data();
                             for (std::size_t i = 0; i < rv.size(); ++i) rv[i] *= ov[i];
                             return r;
                           };
                           if (t.node(ia).requires_grad) t.accumulate(ia, grad_for(ib));
                           if (t.node(ib).requires_grad) t.accumulate(ib, grad_for(ia));
                         });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& x : out.data()) x *= s;
  const auto ia = a.id();
  return a.tape().record("scale", std::move(out), {a},
                         [ia, s](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> r = g;
                           for (auto& x : r.data()) x *= s;
                           t.accumulate(ia, std::move(r));
                         });
}

/// x[m×n] + b[n] broadcast over rows.
template <class T>
Var<T> add_bias(const Var<T>& x, const Var<T>& b) {
  const auto& xv = x.value();
  require_matrix(xv, "add_bias");
  if (b.value().size() != xv.cols()) {
    throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " vs input " +
                         shape_str(xv.shape()));
  }
  Tensor<T> out = xv;
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv[j];
  }
  const auto ix = x.id(), ib = b.id();
  return x.tape().record("add_bias", std::move(out), {x, b},
                         [ix, ib](Tape<T>& t, const Tensor<T>& g) {
                           t.accumulate(ix, g);
                           if (!t.node(ib).requires_grad) return;
                           Tensor<T> gb(t.node(ib).value.shape());
                           for (std::size_t i = 0; i < g.rows(); ++i) {
                             auto r = g.row(i);
                             for (std::size_t j = 0; j < r.size(); ++j) gb[j] += r[j];
                           }
                           t.accumulate(ib, std::move(gb));
                         });
}

/// x[m×n] ⊙ g[n] broadcast over rows.
template <class T>
Var<T> mul_cols(const Var<T>& x, const Var<T>& gain) {
  const auto& xv = x.value();
  require_matrix(xv, "mul_cols");
  if (gain.value().size() != xv.cols()) {
    throw DimensionError("mul_cols: gain " + shape_str(gain.shape()) + " vs input " +
                         shape_str(xv.shape()));
  }
  Tensor<T> out = xv;
  const auto gv = gain.value().data();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= gv[j];
  }
  const auto ix = x.id(), ig = gain.id();
  return x.tape().record("mul_cols", std::move(out), {x, gain},
                         [ix, ig](Tape<T>& t, const Tensor<T>& g) {
                           const auto& gainv = t.node(ig).value;
                           if (t.node(ix).requires_grad) {
                             Tensor<T> gx = g;
                             for (std::size_t i = 0; i < gx.rows(); ++i) {
                               auto r = gx.row(i);
                               for (std::size_t j = 0; j < r.size(); ++j) r[j] *= gainv[j];
                             }
                             t.accumulate(ix, std::move(gx));
                           }
                           if (t.node(ig).requires_grad) {
                             const auto& xin = t.node(ix).value;
                             Tensor<T> gg(gainv.shape());
                             for (std::size_t i = 0; i < g.rows(); ++i) {
                               auto gr = g.row(i);
                               auto xr = xin.row(i);
                               for (std::size_t j = 0; j < gr.size(); ++j) gg[j] += gr[j] * xr[j];
                             }
                             t.accumulate(ig, std::move(gg));
                           }
                         });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  const auto ix = x.id();
  const auto io = x.tape().size();
  return x.tape().record("relu", std::move(out), {x},
                         [ix, io](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> r = g;
                           const auto y = t.node(io).value.data();
                           auto rv = r.data();
                           for (std::size_t i = 0; i < rv.size(); ++i)
                             if (!(y[i] > T{0})) rv[i] = T{0};
                           t.accumulate(ix, std::move(r));
                         });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  const auto ix = x.id();
  const auto io = x.tape().size();
  return x.tape().record("tanh", std::move(out), {x},
                         [ix, io](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> r = g;
                           const auto y = t.node(io).value.data();
                           auto rv = r.data();
                           for (std::size_t i = 0; i < rv.size(); ++i) rv[i] *= T{1} - y[i] * y[i];
                           t.accumulate(ix, std::move(r));
                         });
}

template <class T>
Var<T> sum(const Var<T>& x) {
  T s{0};
  for (auto v : x.value().data()) s += v;
  const auto ix = x.id();
  const Shape shape = x.shape();
  return x.tape().record("sum", Tensor<T>::scalar(s), {x},
                         [ix, shape](Tape<T>& t, const Tensor<T>& g) {
                           t.accumulate(ix, Tensor<T>(shape, g.item()));
                         });
}

/// Zeroes the rows flagged in `mask` (nonzero = padding).
template <class T>
Var<T> mask_rows(const Var<T>& x, const Mask& mask) {
  if (mask.empty()) return x;
  const auto& xv = x.value();
  if (mask.size() != xv.rows()) {
    throw DimensionError("mask_rows: mask length " + std::to_string(mask.size()) +
                         " vs " + std::to_string(xv.rows()) + " rows");
  }
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    if (mask[i])
      for (auto& v : out.row(i)) v = T{0};
  const auto ix = x.id();
  return x.tape().record("mask_rows", std::move(out), {x},
                         [ix, mask](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> r = g;
                           for (std::size_t i = 0; i < r.rows(); ++i)
                             if (mask[i])
                               for (auto& v : r.row(i)) v = T{0};
                           t.accumulate(ix, std::move(r));
                         });
}

template <class T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  require_matrix(xv, "slice_cols");
  if (begin + count > xv.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + shape_str(xv.shape()));
  }
  Tensor<T> out({xv.rows(), count});
  for (std::size_t i = 0; i < xv.rows(); ++i)
    std::copy_n(xv.row(i).begin() + begin, count, out.row(i).begin());
  const auto ix = x.id();
  const std::size_t total = xv.cols();
  return x.tape().record("slice_cols", std::move(out), {x},
                         [ix, begin, count, total](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> r({g.rows(), total});
                           for (std::size_t i = 0; i < g.rows(); ++i)
                             std::copy_n(g.row(i).begin(), count, r.row(i).begin() + begin);
                           t.accumulate(ix, std::move(r));
                         });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_matrix(p.value(), "concat_cols");
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor<T> out({m, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    for (std::size_t i = 0; i < m; ++i)
      std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + off);
    off += pv.cols();
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts[0].tape().record(
      "concat_cols", std::move(out), parts,
      [ids, widths](Tape<T>& t, const Tensor<T>& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.node(ids[k]).requires_grad) {
            Tensor<T> r({g.rows(), widths[k]});
            for (std::size_t i = 0; i < g.rows(); ++i)
              std::copy_n(g.row(i).begin() + off, widths[k], r.row(i).begin());
            t.accumulate(ids[k], std::move(r));
          }
          off += widths[k];
        }
      });
}

/// Per-row standardization over the last axis: (x − mean) / sqrt(var + eps).
template <class T>
Var<T> normalize_rows(const Var<T>& x, T eps) {
  const auto& xv = x.value();
  require_matrix(xv, "normalize_rows");
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor<T> out({m, n});
  std::vector<T> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = xv.row(i);
    T mean{0};
    for (auto v : r) mean += v;
    mean /= static_cast<T>(n);
    T var{0};
    for (auto v : r) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    inv_std[i] = T{1} / std::sqrt(var + eps);
    auto o = out.row(i);
    for (std::size_t j = 0; j < n; ++j) o[j] = (r[j] - mean) * inv_std[i];
  }
  const auto ix = x.id();
  const auto io = x.tape().size();
  return x.tape().record("normalize_rows", std::move(out), {x},
                         [ix, io, inv_std](Tape<T>& t, const Tensor<T>& g) {
                           const auto& y = t.node(io).value;
                           const std::size_t n = y.cols();
                           Tensor<T> r(g.shape());
                           for (std::size_t i = 0; i < g.rows(); ++i) {
                             auto gr = g.row(i);
                             auto yr = y.row(i);
                             T mg{0}, mgy{0};
                             for (std::size_t j = 0; j < n; ++j) {
                               mg += gr[j];
                               mgy += gr[j] * yr[j];
                             }
                             mg /= static_cast<T>(n);
                             mgy /= static_cast<T>(n);
                             auto rr = r.row(i);
                             for (std::size_t j = 0; j < n; ++j)
                               rr[j] = inv_std[i] * (gr[j] - mg - yr[j] * mgy);
                           }
                           t.accumulate(ix, std::move(r));
                         });
}

/// Row-wise softmax over columns; masked columns (nonzero mask entries) get
/// an additive −inf sentinel and therefore exactly zero weight.
template <class T>
Var<T> row_softmax(const Var<T>& scores, const Mask& mask = {}) {
  const auto& sv = scores.value();
  require_matrix(sv, "row_softmax");
  const std::size_t m = sv.rows(), n = sv.cols();
  if (!mask.empty() && mask.size() != n) {
    throw DimensionError("row_softmax: mask length " + std::to_string(mask.size()) +
                         " vs " + std::to_string(n) + " columns");
  }
  if (count_unmasked(mask, n) == 0) {
    throw DegenerateMaskError("row_softmax: every column is masked");
  }
  constexpr T neg_inf = -std::numeric_limits<T>::infinity();
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    auto s = sv.row(i);
    auto o = out.row(i);
    T mx = neg_inf;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = (!mask.empty() && mask[j]) ? neg_inf : s[j];
      mx = std::max(mx, o[j]);
    }
    T z{0};
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = o[j] == neg_inf ? T{0} : std::exp(o[j] - mx);
      z += o[j];
    }
    for (auto& v : o) v /= z;
  }
  const auto is = scores.id();
  const auto io = scores.tape().size();
  return scores.tape().record("row_softmax", std::move(out), {scores},
                              [is, io](Tape<T>& t, const Tensor<T>& g) {
                                const auto& y = t.node(io).value;
                                Tensor<T> r(g.shape());
                                for (std::size_t i = 0; i < g.rows(); ++i) {
                                  auto gr = g.row(i);
                                  auto yr = y.row(i);
                                  T dot{0};
                                  for (std::size_t j = 0; j < gr.size(); ++j) dot += gr[j] * yr[j];
                                  auto rr = r.row(i);
                                  for (std::size_t j = 0; j < gr.size(); ++j)
                                    rr[j] = yr[j] * (gr[j] - dot);
                                }
                                t.accumulate(is, std::move(r));
                              });
}

/// Pairwise planar rotation: for each listed column pair (c0, c1) and row i,
/// (y0, y1) = (cos·x0 − sin·x1, sin·x0 + cos·x1) with angles[i][p].
template <class T>
Var<T> rotate_pairs(const Var<T>& x, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                    const Tensor<T>& cos_table, const Tensor<T>& sin_table) {
  const auto& xv = x.value();
  require_matrix(xv, "rotate_pairs");
  if (cos_table.rows() != xv.rows() || cos_table.cols() != pairs.size()) {
    throw DimensionError("rotate_pairs: angle table " + shape_str(cos_table.shape()) +
                         " vs input " + shape_str(xv.shape()));
  }
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    auto xr = xv.row(i);
    auto o = out.row(i);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const T c = cos_table(i, p), s = sin_table(i, p);
      const auto [c0, c1] = pairs[p];
      o[c0] = c * xr[c0] - s * xr[c1];
      o[c1] = s * xr[c0] + c * xr[c1];
    }
  }
  const auto ix = x.id();
  return x.tape().record("rotate_pairs", std::move(out), {x},
                         [ix, pairs, cos_table, sin_table](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T> r = g;
                           for (std::size_t i = 0; i < g.rows(); ++i) {
                             auto gr = g.row(i);
                             auto rr = r.row(i);
                             for (std::size_t p = 0; p < pairs.size(); ++p) {
                               const T c = cos_table(i, p), s = sin_table(i, p);
                               const auto [c0, c1] = pairs[p];
                               rr[c0] = c * gr[c0] + s * gr[c1];
                               rr[c1] = -s * gr[c0] + c * gr[c1];
                             }
                           }
                           t.accumulate(ix, std::move(r));
                         });
}

// ---------------------------------------------------------------------------
// Composite layers

template <class T>
struct RowNorm {
  Var<T> gain;
  Var<T> bias;
  T eps = T(1e-5);
};

/// Layer normalization over the last axis followed by per-feature gain/bias.
template <class T>
Var<T> layer_normalize(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  return add_bias(mul_cols(normalize_rows(x, eps), gain), bias);
}

template <class T>
Var<T> layer_normalize(const Var<T>& x, const RowNorm<T>& norm) {
  return layer_normalize(x, norm.gain, norm.bias, norm.eps);
}

enum class Activation { Relu, Tanh, Identity };

template <class T>
struct DenseLayer {
  Var<T> weight;  // [in × out]
  Var<T> bias;    // [out]
  Activation activation = Activation::Identity;
};

template <class T>
Var<T> apply_activation(const Var<T>& x, Activation a) {
  switch (a) {
    case Activation::Relu:
      return relu(x);
    case Activation::Tanh:
      return tanh(x);
    case Activation::Identity:
      break;
  }
  return x;
}

/// Pointwise MLP along the row (point) axis.
template <class T>
Var<T> mlp_forward(const Var<T>& x, const std::vector<DenseLayer<T>>& layers) {
  Var<T> h = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (h.cols() != l.weight.rows()) {
      throw DimensionError("mlp_forward: layer " + std::to_string(k) + " expects width " +
                           std::to_string(l.weight.rows()) + ", got " + shape_str(h.shape()));
    }
    h = apply_activation(add_bias(matmul(h, l.weight), l.bias), l.activation);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Verification oracle

/// Central differences (f(θ+h·eᵢ) − f(θ−h·eᵢ)) / 2h for every coordinate.
template <class T, class F>
Tensor<T> finite_diff_grad(F&& f, const Tensor<T>& theta, T h) {
  if (!(h > T{0})) throw ValidationError("finite_diff_grad: step must be positive");
  Tensor<T> grad(theta.shape());
  Tensor<T> probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + h;
    const T fp = f(static_cast<const Tensor<T>&>(probe));
    probe[i] = orig - h;
    const T fm = f(static_cast<const Tensor<T>&>(probe));
    probe[i] = orig;
    grad[i] = (fp - fm) / (T{2} * h);
  }
  return grad;
}

}  // namespace argent
