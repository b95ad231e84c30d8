#pragma once

// Naive per-element reference kernels. Deliberately written as plain loops
// over std::vector so they share no code path with the tape implementation.

#include <cmath>
#include <vector>

#include "argent/tensor.hpp"

namespace argent::testing {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor<double>& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline Tensor<double> from_mat(const Mat& m) {
  Tensor<double> t({m.size(), m.empty() ? 0 : m[0].size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t(i, j) = m[i][j];
  return t;
}

inline std::vector<double> naive_layer_norm(const std::vector<double>& r, const std::vector<double>& gain,
                                            const std::vector<double>& bias, double eps) {
  double mean = 0;
  for (double v : r) mean += v;
  mean /= r.size();
  double var = 0;
  for (double v : r) var += (v - mean) * (v - mean);
  var /= r.size();
  std::vector<double> out(r.size());
  for (std::size_t j = 0; j < r.size(); ++j) out[j] = gain[j] * (r[j] - mean) / std::sqrt(var + eps) + bias[j];
  return out;
}

inline bool is_masked(const Mask& mask, std::size_t j) { return !mask.empty() && mask[j]; }

inline Mat naive_standard(const Mat& q, const Mat& k, const Mat& v, const Mask& mask) {
  const std::size_t d = q[0].size();
  Mat out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> s(k.size(), 0.0);
    double mx = -INFINITY;
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (is_masked(mask, j)) continue;
      for (std::size_t c = 0; c < d; ++c) s[j] += q[i][c] * k[j][c];
      s[j] /= std::sqrt(static_cast<double>(d));
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (std::size_t j = 0; j < k.size(); ++j)
      if (!is_masked(mask, j)) z += std::exp(s[j] - mx);
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (is_masked(mask, j)) continue;
      const double w = std::exp(s[j] - mx) / z;
      for (std::size_t c = 0; c < v[j].size(); ++c) out[i][c] += w * v[j][c];
    }
  }
  return out;
}

struct NaiveNorm {
  std::vector<double> gain, bias;
  double eps;
};

inline NaiveNorm unit_norm(std::size_t d, double eps = 1e-5) {
  return {std::vector<double>(d, 1.0), std::vector<double>(d, 0.0), eps};
}

inline Mat naive_fourier(const Mat& q, const Mat& k, const Mat& v, const Mask& mask, const NaiveNorm& qn,
                         const NaiveNorm& kn) {
  double n = 0;
  for (std::size_t j = 0; j < k.size(); ++j) n += is_masked(mask, j) ? 0 : 1;
  Mat out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto qt = naive_layer_norm(q[i], qn.gain, qn.bias, qn.eps);
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (is_masked(mask, j)) continue;
      const auto kt = naive_layer_norm(k[j], kn.gain, kn.bias, kn.eps);
      double s = 0;
      for (std::size_t c = 0; c < kt.size(); ++c) s += qt[c] * kt[c];
      for (std::size_t c = 0; c < v[j].size(); ++c) out[i][c] += s * v[j][c] / n;
    }
  }
  return out;
}

inline Mat naive_galerkin(const Mat& q, const Mat& k, const Mat& v, const Mask& mask, const NaiveNorm& kn,
                          const NaiveNorm& vn) {
  double n = 0;
  for (std::size_t j = 0; j < k.size(); ++j) n += is_masked(mask, j) ? 0 : 1;
  Mat out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t c = 0; c < v[0].size(); ++c) {
      double acc = 0;
      for (std::size_t e = 0; e < q[i].size(); ++e) {
        double kv = 0;
        for (std::size_t j = 0; j < k.size(); ++j) {
          if (is_masked(mask, j)) continue;
          kv += naive_layer_norm(k[j], kn.gain, kn.bias, kn.eps)[e] * naive_layer_norm(v[j], vn.gain, vn.bias, vn.eps)[c];
        }
        acc += q[i][e] * kv;
      }
      out[i][c] = acc / n;
    }
  }
  return out;
}

}  // namespace argent::testing
