#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <functional>
#include <random>
#include <vector>

#include "argent/autodiff.hpp"
#include "argent/params.hpp"

namespace argent::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// |analytic − numeric| / max(1, |analytic|), maximized over entries.
inline double grad_rel_error(const Tensor<double>& analytic, const Tensor<double>& numeric) {
  double m = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    m = std::max(m, std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i])));
  return m;
}

/// Reverse-mode gradients of a scalar function of several leaf tensors.
using ScalarFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

inline std::vector<Tensor<double>> reverse_grads(const ScalarFn& f, const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  auto loss = f(tape, vars);
  auto table = tape.backward(loss);
  std::vector<Tensor<double>> out;
  for (const auto& v : vars) out.push_back(table.at(v.id()));
  return out;
}

/// Worst relative error over all inputs between reverse mode and central differences.
inline double check_gradients(const ScalarFn& f, const std::vector<Tensor<double>>& inputs, double h = 1e-5) {
  const auto analytic = reverse_grads(f, inputs);
  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto eval = [&](const Tensor<double>& probe) {
      Tape<double> tape;
      std::vector<Var<double>> vars;
      for (std::size_t j = 0; j < inputs.size(); ++j) vars.push_back(tape.constant(j == k ? probe : inputs[j]));
      return f(tape, vars).value().item();
    };
    const auto numeric = finite_diff_grad<double>(eval, inputs[k], h);
    worst = std::max(worst, grad_rel_error(analytic[k], numeric));
  }
  return worst;
}

/// Sums the output against a fixed random weighting so every entry matters.
inline Var<double> weighted_sum(const Var<double>& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  auto w = random_tensor(y.shape(), rng);
  return sum(mul(y, y.tape().constant(w)));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("argent_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// True when both directories hold the same file names with identical bytes.
inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::string> na, nb;
  for (const auto& e : std::filesystem::directory_iterator(a)) na.push_back(e.path().filename().string());
  for (const auto& e : std::filesystem::directory_iterator(b)) nb.push_back(e.path().filename().string());
  std::sort(na.begin(), na.end());
  std::sort(nb.begin(), nb.end());
  if (na != nb) return false;
  for (const auto& n : na)
    if (file_bytes(a / n) != file_bytes(b / n)) return false;
  return true;
}

}  // namespace argent::testing
