#pragma once

#include <string>
#include <vector>

#include "argent/autodiff.hpp"

namespace argent {

enum class BranchKind { ScalarVector, FunctionSamples };

inline const char* branch_kind_name(BranchKind k) {
  return k == BranchKind::ScalarVector ? "scalar" : "function";
}

inline BranchKind parse_branch_kind(const std::string& s) {
  if (s == "scalar") return BranchKind::ScalarVector;
  if (s == "function") return BranchKind::FunctionSamples;
  throw ConfigError("unknown branch kind '" + s + "'");
}

/// Non-geometric inputs μ for one branch network. FunctionSamples inputs hold
/// values at sensor locations that are fixed across every case.
template <class T>
struct BranchInput {
  BranchKind kind = BranchKind::ScalarVector;
  Tensor<T> values;  // [p], already normalized
};

/// Coefficients c^j(μ) for one branch: row vector [1 × J].
template <class T>
Var<T> branch_forward(const Var<T>& input, const std::vector<DenseLayer<T>>& net) {
  if (net.empty()) throw ConfigError("branch_forward: empty branch network");
  Var<T> x = input.value().rank() == 1 ? reshape(input, Shape{1, input.value().size()}) : input;
  if (x.cols() != net.front().weight.rows()) {
    throw DimensionError("branch_forward: input width " + std::to_string(x.cols()) +
                         " vs branch input width " + std::to_string(net.front().weight.rows()));
  }
  return mlp_forward(x, net);
}

/// u_i = Σ_j (Π_b c_b^j) f_i^j. Branch coefficients are fused by elementwise
/// product before the inner product with every trunk row. Returns [N].
template <class T>
Var<T> combine(const Var<T>& trunk, const std::vector<Var<T>>& branches) {
  if (branches.empty()) throw ConfigError("combine: no branch outputs supplied");
  require_matrix(trunk.value(), "combine trunk");
  const std::size_t j = trunk.cols();
  std::vector<Var<T>> flat;
  for (const auto& b : branches) {
    if (b.value().size() != j) {
      throw DimensionError("combine: branch width " + std::to_string(b.value().size()) +
                           " vs trunk width " + std::to_string(j));
    }
    flat.push_back(b.shape() == Shape{j, 1} ? b : reshape(b, Shape{j, 1}));
  }
  Var<T> fused = flat[0];
  for (std::size_t k = 1; k < flat.size(); ++k) fused = mul(fused, flat[k]);
  return reshape(matmul(trunk, fused), Shape{trunk.rows()});
}

/// Branch-free mode: the trunk output is the prediction itself.
template <class T>
Var<T> trunk_only(const Var<T>& trunk) {
  require_matrix(trunk.value(), "trunk_only");
  if (trunk.cols() == 1) return reshape(trunk, Shape{trunk.rows()});
  return trunk;
}

template <class T>
Tensor<T> combine(const Tensor<T>& trunk, const std::vector<Tensor<T>>& branches) {
  Tape<T> tape;
  std::vector<Var<T>> bs;
  for (const auto& b : branches) bs.push_back(tape.constant(b));
  return combine(tape.constant(trunk), bs).value();
}

}  // namespace argent
