#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "argent/attention.hpp"
#include "attention_oracles.hpp"
#include "test_util.hpp"

using namespace argent;
using namespace argent::testing;

namespace {

RowNorm<double> const_norm(Tape<double>& t, std::size_t d, double eps) {
  return {t.constant(Tensor<double>({d}, 1.0)), t.constant(Tensor<double>({d}, 0.0)), eps};
}

Tensor<double> run_kernel(Kernel k, const Tensor<double>& q, const Tensor<double>& key, const Tensor<double>& v,
                          const Mask& mask = {}) {
  Tape<double> t;
  auto Q = t.constant(q), K = t.constant(key), V = t.constant(v);
  switch (k) {
    case Kernel::Standard:
      return standard_attention(Q, K, V, mask).value();
    case Kernel::Fourier:
      return fourier_attention(Q, K, V, mask).value();
    case Kernel::Galerkin:
      return galerkin_attention(Q, K, V, mask).value();
  }
  return {};
}

Tensor<double> run_oracle(Kernel k, const Tensor<double>& q, const Tensor<double>& key, const Tensor<double>& v,
                          const Mask& mask = {}) {
  const auto d = q.cols();
  switch (k) {
    case Kernel::Standard:
      return from_mat(naive_standard(to_mat(q), to_mat(key), to_mat(v), mask));
    case Kernel::Fourier:
      return from_mat(naive_fourier(to_mat(q), to_mat(key), to_mat(v), mask, unit_norm(d), unit_norm(d)));
    case Kernel::Galerkin:
      return from_mat(naive_galerkin(to_mat(q), to_mat(key), to_mat(v), mask, unit_norm(d), unit_norm(d)));
  }
  return {};
}

Tensor<double> append_rows(const Tensor<double>& a, std::size_t extra, double fill) {
  Tensor<double> out({a.rows() + extra, a.cols()}, fill);
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  return out;
}

Tensor<double> permute_rows(const Tensor<double>& a, const std::vector<std::size_t>& perm) {
  Tensor<double> out(a.shape());
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy(a.row(perm[i]).begin(), a.row(perm[i]).end(), out.row(i).begin());
  return out;
}

constexpr Kernel kAllKernels[] = {Kernel::Standard, Kernel::Fourier, Kernel::Galerkin};

}  // namespace

TEST(StandardAttention, SingletonAndUniformWeights) {
  std::mt19937_64 rng(10);
  auto q = random_tensor({3, 4}, rng);
  auto v = random_tensor({1, 4}, rng);
  auto out = run_kernel(Kernel::Standard, q, random_tensor({1, 4}, rng), v);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(i, c), v(0, c), 1e-15);

  // Q orthogonal to every key: scores 0, output is the mean of unmasked V rows.
  auto qo = Tensor<double>::matrix({{1, 0, 0, 0}});
  auto k = Tensor<double>::matrix({{0, 1, 0, 0}, {0, 0, 2, 0}, {0, 3, 0, -1}});
  auto vv = random_tensor({3, 4}, rng);
  auto o = run_kernel(Kernel::Standard, qo, k, vv, Mask{0, 1, 0});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(o(0, c), 0.5 * (vv(0, c) + vv(2, c)), 1e-15);
}

TEST(FourierAttention, SingleKeyHandUnroll) {
  Tape<double> t;
  // LN([3,1]) = [1,-1], LN([0,2]) = [-1,1]; score -2; n = 1.
  auto out = fourier_attention(t.constant(Tensor<double>::matrix({{3, 1}})), t.constant(Tensor<double>::matrix({{0, 2}})),
                               t.constant(Tensor<double>::matrix({{5, 7}})), Mask{},
                               std::optional<RowNorm<double>>(const_norm(t, 2, 0.0)),
                               std::optional<RowNorm<double>>(const_norm(t, 2, 0.0)))
                 .value();
  EXPECT_DOUBLE_EQ(out(0, 0), -10.0);
  EXPECT_DOUBLE_EQ(out(0, 1), -14.0);
}

TEST(GalerkinAttention, SingleKeyHandComputation) {
  Tape<double> t;
  auto out = galerkin_attention(t.constant(Tensor<double>::matrix({{1, 0}})), t.constant(Tensor<double>::matrix({{1, -1}})),
                                t.constant(Tensor<double>::matrix({{1, -1}})), Mask{},
                                std::optional<RowNorm<double>>(const_norm(t, 2, 0.0)),
                                std::optional<RowNorm<double>>(const_norm(t, 2, 0.0)))
                 .value();
  EXPECT_DOUBLE_EQ(out(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out(0, 1), -1.0);
}

TEST(LinearAttention, Annihilation) {
  std::mt19937_64 rng(11);
  auto q = random_tensor({3, 4}, rng), k = random_tensor({5, 4}, rng);
  const auto zero_v = run_kernel(Kernel::Fourier, q, k, Tensor<double>({5, 4}));
  for (auto v : zero_v.data()) EXPECT_EQ(v, 0.0);
  const auto zero_q = run_kernel(Kernel::Galerkin, Tensor<double>({3, 4}), k, random_tensor({5, 4}, rng));
  for (auto v : zero_q.data()) EXPECT_EQ(v, 0.0);
}

TEST(Attention, AllMaskedKeysAreDegenerate) {
  std::mt19937_64 rng(12);
  auto q = random_tensor({2, 4}, rng), k = random_tensor({2, 4}, rng);
  for (auto kern : kAllKernels) EXPECT_THROW(run_kernel(kern, q, k, k, Mask{1, 1}), DegenerateMaskError);
}

TEST(Attention, KernelsMatchNaiveOracles) {
  std::mt19937_64 rng(13);
  auto gq = random_tensor({5, 8}, rng), gk = random_tensor({7, 8}, rng), gv = random_tensor({7, 8}, rng);
  EXPECT_LT(max_abs_diff(run_kernel(Kernel::Galerkin, gq, gk, gv), run_oracle(Kernel::Galerkin, gq, gk, gv)), 1e-12);
  auto sq = random_tensor({2, 4}, rng), sk = random_tensor({3, 4}, rng), sv = random_tensor({3, 4}, rng);
  EXPECT_LT(max_abs_diff(run_kernel(Kernel::Standard, sq, sk, sv), run_oracle(Kernel::Standard, sq, sk, sv)), 1e-12);

  std::uniform_int_distribution<std::size_t> ext(1, 16);
  std::bernoulli_distribution coin(0.25);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = ext(rng), n = ext(rng), d = ext(rng) + 1;
    auto q = random_tensor({m, d}, rng), k = random_tensor({n, d}, rng), v = random_tensor({n, d}, rng);
    Mask mask(n);
    for (auto& b : mask) b = coin(rng);
    mask[rng() % n] = 0;
    for (auto kern : kAllKernels)
      EXPECT_LT(max_abs_diff(run_kernel(kern, q, k, v, mask), run_oracle(kern, q, k, v, mask)), 1e-12)
          << kernel_name(kern);
  }
}

TEST(Attention, PaddingInvariance) {
  std::mt19937_64 rng(14);
  auto q = random_tensor({4, 6}, rng), k = random_tensor({5, 6}, rng), v = random_tensor({5, 6}, rng);
  Mask padded(8, 0);
  std::fill(padded.begin() + 5, padded.end(), 1);
  for (auto kern : kAllKernels) {
    auto base = run_kernel(kern, q, k, v);
    auto pad = run_kernel(kern, q, append_rows(k, 3, 123.0), append_rows(v, 3, -55.0), padded);
    EXPECT_LT(max_abs_diff(base, pad), 1e-12) << kernel_name(kern);
  }
}

TEST(Attention, QueryRowsAreIndependentBitwise) {
  std::mt19937_64 rng(15);
  auto q = random_tensor({4, 6}, rng), k = random_tensor({7, 6}, rng), v = random_tensor({7, 6}, rng);
  for (auto kern : kAllKernels) {
    auto base = run_kernel(kern, q, k, v);
    auto q2 = q;
    for (auto& x : q2.row(2)) x += 3.0;
    auto changed = run_kernel(kern, q2, k, v);
    for (std::size_t i : {0u, 1u, 3u})
      for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(base(i, c), changed(i, c)) << kernel_name(kern);
  }
}

// --- RoPE ---------------------------------------------------------------

TEST(Rope, ZeroCoordinatesAreIdentity) {
  RopeSpec spec{2, 8, {1.0, 2.0}};
  std::mt19937_64 rng(16);
  auto x = random_tensor({3, 8}, rng);
  EXPECT_EQ(rope_rotate(x, Tensor<double>({3, 2}), spec), x);
  auto theta0 = rope_matrix({0.0, 0.0}, spec);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_LE(std::abs(theta0(i, j) - (i == j ? 1.0 : 0.0)), 1e-15);
}

TEST(Rope, BlocksAreOrthogonalAndPreserveNorm) {
  RopeSpec spec{2, 16, {1.3, 0.7}};
  std::mt19937_64 rng(17);
  auto coords = random_tensor({10, 2}, rng, -5, 5);
  auto x = random_tensor({10, 16}, rng);
  auto y = rope_rotate(x, coords, spec);
  for (std::size_t i = 0; i < 10; ++i) {
    double nx = 0, ny = 0;
    for (std::size_t c = 0; c < 16; ++c) {
      nx += x(i, c) * x(i, c);
      ny += y(i, c) * y(i, c);
    }
    EXPECT_NEAR(std::sqrt(nx), std::sqrt(ny), 1e-12);
  }
  auto m = rope_matrix({coords(0, 0), coords(0, 1)}, spec);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) {
      double s = 0;
      for (std::size_t r = 0; r < 16; ++r) s += m(r, i) * m(r, j);
      EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-12);
    }
}

TEST(Rope, FrequenciesFollowGeometricSchedule) {
  RopeSpec spec{2, 16, {1.0, 1.0}};
  auto th = spec.frequencies();
  ASSERT_EQ(th.size(), 4u);
  for (std::size_t l = 0; l < th.size(); ++l) EXPECT_DOUBLE_EQ(th[l], std::pow(10000.0, -2.0 * l / 8.0));
}

TEST(Rope, RelativeDisplacementIdentity1D) {
  RopeSpec spec{1, 8, {1.0}};
  std::mt19937_64 rng(18);
  auto q = random_tensor({1, 8}, rng), k = random_tensor({1, 8}, rng);
  auto dot = [&](double xi, double xj) {
    auto a = rope_rotate(q, Tensor<double>({1, 1}, xi), spec);
    auto b = rope_rotate(k, Tensor<double>({1, 1}, xj), spec);
    double s = 0;
    for (std::size_t c = 0; c < 8; ++c) s += a(0, c) * b(0, c);
    return s;
  };
  EXPECT_NEAR(dot(3, 5), dot(10, 12), 1e-10);
}

TEST(Rope, RelativeDisplacementIdentityPerAxis) {
  RopeSpec spec{2, 8, {2.0, 0.5}};
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    auto q = random_tensor({1, 8}, rng), k = random_tensor({1, 8}, rng);
    auto xi = random_tensor({1, 2}, rng, -3, 3), xj = random_tensor({1, 2}, rng, -3, 3);
    auto a = rope_rotate(q, xi, spec), b = rope_rotate(k, xj, spec);
    double lhs = 0;
    for (std::size_t c = 0; c < 8; ++c) lhs += a(0, c) * b(0, c);
    // Θ(xi)ᵀΘ(xj) = Θ(xj − xi) for the counter-clockwise block convention.
    auto m = rope_matrix({xj(0, 0) - xi(0, 0), xj(0, 1) - xi(0, 1)}, spec);
    double rhs = 0;
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) rhs += q(0, r) * m(r, c) * k(0, c);
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Rope, IndivisibleWidthIsConfigError) {
  RopeSpec spec{2, 6, {1.0, 1.0}};
  std::mt19937_64 rng(20);
  EXPECT_THROW(rope_rotate(random_tensor({1, 6}, rng), Tensor<double>({1, 2}), spec), ConfigError);
}

// --- Multi-head ---------------------------------------------------------

namespace {

struct HeadFixture {
  AttentionConfig cfg;
  ParamStore<double> store;

  explicit HeadFixture(Kernel kernel, int d = 16, int heads = 4, std::uint64_t seed = 21) {
    cfg.kernel = kernel;
    cfg.embed_dim = d;
    cfg.heads = heads;
    cfg.rope_wavelengths = {1.0, 1.5};
    std::mt19937_64 rng(seed);
    add_attention_params(store, "mh", cfg, rng);
    // Non-trivial normalization parameters so they are exercised.
    for (std::size_t i = 0; i < store.size(); ++i)
      if (store.name(i).find("_norm") != std::string::npos)
        for (auto& v : store.value(i).data()) v += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
  }

  Tensor<double> run(const Tensor<double>& q, const Tensor<double>& kv, const Tensor<double>& cq,
                     const Tensor<double>& ck, const Mask& mask = {}) const {
    Tape<double> t;
    ParamBinding<double> b(t, store, false);
    return multi_head(t.constant(q), t.constant(kv), t.constant(kv), cq, ck, cfg, mask, bind_attention(b, "mh", cfg))
        .value();
  }
};

}  // namespace

TEST(MultiHead, SingleHeadIdentityProjectionsReduceToKernel) {
  std::mt19937_64 rng(22);
  auto q = random_tensor({3, 4}, rng), kv = random_tensor({6, 4}, rng);
  for (auto kern : kAllKernels) {
    HeadFixture f(kern, 4, 1);
    f.cfg.use_rope = false;
    for (const char* w : {"mh.wq", "mh.wk", "mh.wv", "mh.wo"}) {
      auto& m = f.store.value(f.store.index_of(w));
      m = Tensor<double>({4, 4});
      for (std::size_t i = 0; i < 4; ++i) m(i, i) = 1.0;
    }
    for (std::size_t i = 0; i < f.store.size(); ++i) {
      const auto& nm = f.store.name(i);
      if (nm.find(".gain") != std::string::npos) f.store.value(i) = Tensor<double>({4}, 1.0);
      if (nm.find(".bias") != std::string::npos) f.store.value(i) = Tensor<double>({4}, 0.0);
    }
    auto out = f.run(q, kv, Tensor<double>({3, 2}), Tensor<double>({6, 2}));
    EXPECT_LT(max_abs_diff(out, run_kernel(kern, q, kv, kv)), 1e-15) << kernel_name(kern);
  }
}

TEST(MultiHead, OutputShape) {
  std::mt19937_64 rng(23);
  HeadFixture f(Kernel::Galerkin, 16, 4);
  auto out = f.run(random_tensor({5, 16}, rng), random_tensor({9, 16}, rng), random_tensor({5, 2}, rng),
                   random_tensor({9, 2}, rng));
  EXPECT_EQ(out.shape(), (Shape{5, 16}));
}

TEST(MultiHead, KeyPermutationInvariance) {
  std::mt19937_64 rng(24);
  auto q = random_tensor({5, 16}, rng), kv = random_tensor({9, 16}, rng);
  auto cq = random_tensor({5, 2}, rng), ck = random_tensor({9, 2}, rng);
  Mask mask{0, 0, 1, 0, 0, 0, 1, 0, 0};
  for (auto kern : kAllKernels) {
    HeadFixture f(kern);
    auto base = f.run(q, kv, cq, ck, mask);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<std::size_t> perm(9);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Mask pm(9);
      for (std::size_t i = 0; i < 9; ++i) pm[i] = mask[perm[i]];
      auto out = f.run(q, permute_rows(kv, perm), cq, permute_rows(ck, perm), pm);
      EXPECT_LT(max_abs_diff(base, out), 1e-12) << kernel_name(kern);
    }
  }
}

TEST(MultiHead, PaddedKeysNeverChangeOutput) {
  std::mt19937_64 rng(25);
  auto q = random_tensor({4, 16}, rng), kv = random_tensor({6, 16}, rng);
  auto cq = random_tensor({4, 2}, rng), ck = random_tensor({6, 2}, rng);
  Mask mask(10, 0);
  std::fill(mask.begin() + 6, mask.end(), 1);
  for (auto kern : kAllKernels) {
    HeadFixture f(kern);
    auto base = f.run(q, kv, cq, ck);
    auto pad = f.run(q, append_rows(kv, 4, 9.0), cq, append_rows(ck, 4, 1.0), mask);
    EXPECT_LT(max_abs_diff(base, pad), 1e-12) << kernel_name(kern);
  }
}

TEST(MultiHead, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(26);
  auto q = random_tensor({3, 8}, rng), kv = random_tensor({5, 8}, rng);
  auto cq = random_tensor({3, 2}, rng), ck = random_tensor({5, 2}, rng);
  for (auto kern : kAllKernels) {
    HeadFixture f(kern, 8, 2);
    std::vector<Tensor<double>> in{q, kv};
    for (std::size_t i = 0; i < f.store.size(); ++i) in.push_back(f.store.value(i));
    auto fn = [&](Tape<double>&, const std::vector<Var<double>>& v) {
      MultiHeadParams<double> p{v[2], v[3], v[4], v[5], v[6], {}, {}, {}};
      std::size_t idx = 7;
      auto take = [&](std::vector<RowNorm<double>>& dst) {
        for (int h = 0; h < f.cfg.heads; ++h, idx += 2) dst.push_back({v[idx], v[idx + 1], 1e-5});
      };
      if (kern == Kernel::Fourier) {
        take(p.q_norm);
        take(p.k_norm);
      } else if (kern == Kernel::Galerkin) {
        take(p.k_norm);
        take(p.v_norm);
      }
      return weighted_sum(multi_head(v[0], v[1], v[1], cq, ck, f.cfg, Mask{0, 0, 0, 1, 0}, p));
    };
    EXPECT_LT(check_gradients(fn, in), 1e-4) << kernel_name(kern);
  }
}
