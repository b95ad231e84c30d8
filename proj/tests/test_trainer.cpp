#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "argent/checkpoint.hpp"
#include "argent/metrics.hpp"
#include "argent/trainer.hpp"
#include "model_checks.hpp"

using namespace argent;
using namespace argent::testing;

namespace {

/// One case whose target is linear in the coordinates.
Dataset linear_dataset(std::size_t n = 40, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.options.geometry_points = 6;
  ds.geometry_coords = random_tensor({6, 2}, rng, 0.0, 1.0);
  GeometryCase c;
  c.query_coords = random_tensor({n, 2}, rng, 0.0, 1.0);
  c.query_sdf = random_tensor({n}, rng, 0.05, 0.5);
  c.mu = Tensor<double>::vector({1.0, 0.0});
  c.geometry_sdf = random_tensor({6}, rng, -0.5, 0.5);
  Tensor<double> u({n});
  for (std::size_t i = 0; i < n; ++i) u[i] = 2.0 * c.query_coords(i, 0) - c.query_coords(i, 1) + 0.5;
  c.targets.emplace_back("u", u);
  ds.cases.push_back(c);
  ds.train = {0};
  ds.test = {0};
  ds.norm = compute_norm(ds);
  return ds;
}

TrainConfig quick_config(std::uint64_t steps) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.query_batch = 1000;
  cfg.seed = 5;
  return cfg;
}

double reference_loss(const ArgentModel<double>& model, const Dataset& ds) {
  const auto& c = ds.cases[0];
  const auto q = query_batch<double>(c);
  const auto g = geometry_cloud<double>(ds, c);
  const auto pred = model.predict(q, uses_geometry(model.spec().variant) ? &g : nullptr, branch_inputs<double>(c));
  return mse_loss(pred, normalized_targets(ds, c));
}

}  // namespace

TEST(LearningRate, PublishedSchedule) {
  EXPECT_EQ(lr_at(0), 0.001);
  EXPECT_DOUBLE_EQ(lr_at(200), 0.00099);
  EXPECT_EQ(lr_at(199), 0.001);
  EXPECT_DOUBLE_EQ(lr_at(400), 0.001 * 0.99 * 0.99);
}

TEST(LearningRate, ClosedFormOverFullRange) {
  double expected = 0.001;
  for (std::uint64_t step = 0; step <= 100000; ++step) {
    if (step > 0 && step % 200 == 0) expected *= 0.99;
    ASSERT_NEAR(lr_at(step), expected, 1e-12 * expected) << step;
  }
}

TEST(Adam, FirstStepHandValue) {
  ParamStore<double> ps;
  ps.add("w", Tensor<double>::vector({0.0}));
  AdamState<double> st;
  adam_step(ps, st, {Tensor<double>::vector({1.0})}, 1e-3);
  EXPECT_NEAR(ps.value(0)[0], -1e-3, 1e-6);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::mt19937_64 rng(1);
  ParamStore<double> ps;
  ps.add("a", random_tensor({3, 2}, rng));
  ps.add("b", random_tensor({4}, rng));
  const auto before = ps;
  AdamState<double> st;
  for (int i = 0; i < 3; ++i) adam_step(ps, st, {Tensor<double>({3, 2}), Tensor<double>({4})}, 1e-2);
  for (std::size_t p = 0; p < ps.size(); ++p) EXPECT_EQ(ps.value(p), before.value(p));
}

TEST(Adam, MatchesScalarReference) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  ParamStore<double> ps;
  ps.add("x", random_tensor({5}, rng));
  std::vector<double> theta(ps.value(0).data().begin(), ps.value(0).data().end());
  std::vector<double> m(5, 0.0), v(5, 0.0);
  AdamState<double> st;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 100; ++t) {
    Tensor<double> g({5});
    for (auto& x : g.data()) x = nd(rng);
    const double lr = 1e-3 * (1 + nd(rng) * 0.1);
    adam_step(ps, st, {g}, lr);
    for (int i = 0; i < 5; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      theta[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(ps.value(0)[i], theta[i], 1e-12);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ParamStore<double> ps;
  ps.add("layer.0.weight", Tensor<double>::vector({1.0, 2.0}));
  AdamState<double> st;
  try {
    adam_step(ps, st, {Tensor<double>::vector({0.0, NAN})}, 1e-3);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.0.weight"), std::string::npos);
  }
  EXPECT_EQ(ps.value(0)[0], 1.0);
}

TEST(MseLoss, HandValues) {
  const auto t = Tensor<double>::vector({1.0, -2.0, 3.5});
  EXPECT_EQ(mse_loss(t, t), 0.0);
  auto off = t;
  for (auto& v : off.data()) v += 0.1;
  EXPECT_NEAR(mse_loss(off, t), 0.01, 1e-15);
  const auto pred = Tensor<double>::vector({1.0, 100.0});
  const auto target = Tensor<double>::vector({0.0, 0.0});
  EXPECT_EQ(mse_loss(pred, target, Mask{0, 1}), 1.0);
  EXPECT_THROW(mse_loss(pred, target, Mask{1, 1}), DegenerateMaskError);
  EXPECT_THROW(mse_loss(pred, t), DimensionError);
}

TEST(MseLoss, InvariantUnderConsistentRecentering) {
  std::mt19937_64 rng(3);
  const auto raw_p = random_tensor({50}, rng, -10, 10), raw_t = random_tensor({50}, rng, -10, 10);
  const NormEntry a{"u", 1.5, 2.0}, b{"u", -7.25, 2.0};
  const double la = mse_loss(zscore(raw_p, a, Direction::Normalize), zscore(raw_t, a, Direction::Normalize));
  const double lb = mse_loss(zscore(raw_p, b, Direction::Normalize), zscore(raw_t, b, Direction::Normalize));
  EXPECT_NEAR(la, lb, 1e-10);
}

TEST(MseLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const auto target = random_tensor({6, 2}, rng);
  const Mask mask = {0, 1, 0, 0, 1, 0};
  ScalarFn f = [&](Tape<double>&, const std::vector<Var<double>>& v) { return mse_loss(v[0], target, mask); };
  EXPECT_LT(check_gradients(f, {random_tensor({6, 2}, rng)}), 1e-8);
}

TEST(Train, LinearTargetLossDecreases) {
  const auto ds = linear_dataset();
  auto spec = tiny_spec(Variant::Mlp);
  auto cfg = quick_config(60);
  auto st = init_train_state<double>(spec, cfg);
  train(st, ds, cfg);
  ASSERT_EQ(st.losses.size(), 60u);
  auto smooth = [&](std::size_t i) { return (st.losses[i - 2] + st.losses[i - 1] + st.losses[i] + st.losses[i + 1] + st.losses[i + 2]) / 5; };
  for (std::size_t i = 6; i <= 55; ++i) EXPECT_LE(smooth(i), smooth(i - 1)) << i;
  EXPECT_LT(st.losses.back(), 0.5 * st.losses[5]);
}

TEST(Train, BitwiseDeterministic) {
  const auto ds = linear_dataset(80);
  auto cfg = quick_config(15);
  cfg.query_batch = 16;
  for (Variant v : {Variant::SelfAttn, Variant::CrossAttn}) {
    auto a = init_train_state<double>(tiny_spec(v), cfg);
    auto b = init_train_state<double>(tiny_spec(v), cfg);
    train(a, ds, cfg);
    train(b, ds, cfg);
    EXPECT_EQ(a.losses, b.losses);
    for (std::size_t p = 0; p < a.model.params().size(); ++p)
      EXPECT_EQ(a.model.params().value(p), b.model.params().value(p));
  }
}

TEST(Train, OversizedQueryBatchFallsBackWithWarning) {
  const auto ds = linear_dataset(30);
  auto cfg = quick_config(1);
  cfg.query_batch = 500;
  auto st = init_train_state<double>(tiny_spec(Variant::CrossAttn), cfg);
  const double expected = reference_loss(st.model, ds);
  std::vector<std::string> warnings;
  TrainHooks<double> hooks;
  hooks.warn = [&](const std::string& w) { warnings.push_back(w); };
  train(st, ds, cfg, hooks);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("full case"), std::string::npos);
  EXPECT_NEAR(st.losses[0], expected, 1e-12);
}

TEST(Train, NanLossAbortsWithCheckpointReference) {
  auto ds = linear_dataset(20);
  auto cfg = quick_config(10);
  cfg.checkpoint_every = 3;
  auto st = init_train_state<double>(tiny_spec(Variant::Mlp), cfg);
  TrainHooks<double> hooks;
  hooks.checkpoint = [&](const TrainState<double>& s) {
    if (s.step == 6) ds.cases[0].targets[0].second[3] = NAN;  // poison after the second checkpoint
    return "ckpt-" + std::to_string(s.step);
  };
  try {
    train(st, ds, cfg, hooks);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("ckpt-6"), std::string::npos) << e.what();
  }
}

TEST(Train, ModelOutputCountMustMatchVariables) {
  const auto ds = linear_dataset();
  auto spec = tiny_spec(Variant::Mlp);
  spec.n_outputs = 2;
  auto cfg = quick_config(1);
  auto st = init_train_state<double>(spec, cfg);
  EXPECT_THROW(train(st, ds, cfg), ConfigError);
}

TEST(Checkpoint, RoundTripAndResume) {
  const auto ds = linear_dataset(60);
  auto cfg = quick_config(20);
  cfg.query_batch = 10;
  const auto spec = tiny_spec(Variant::Hybrid);

  auto full = init_train_state<double>(spec, cfg);
  train(full, ds, cfg);

  auto half_cfg = cfg;
  half_cfg.steps = 8;
  auto half = init_train_state<double>(spec, cfg);
  train(half, ds, half_cfg);
  const auto dir = scratch_dir("ckpt");
  save_checkpoint(dir, half, cfg);
  auto loaded = load_checkpoint<double>(dir);
  EXPECT_EQ(loaded.state.step, 8u);
  EXPECT_EQ(loaded.state.losses, half.losses);
  for (std::size_t p = 0; p < half.model.params().size(); ++p)
    EXPECT_EQ(loaded.state.model.params().value(p), half.model.params().value(p));
  train(loaded.state, ds, loaded.config);
  EXPECT_EQ(loaded.state.losses, full.losses);
  for (std::size_t p = 0; p < full.model.params().size(); ++p)
    EXPECT_EQ(loaded.state.model.params().value(p), full.model.params().value(p));
}

TEST(Checkpoint, FloatPrecisionRoundTrip) {
  const auto ds = linear_dataset(30);
  auto cfg = quick_config(3);
  cfg.precision = Precision::Float32;
  auto st = init_train_state<float>(tiny_spec(Variant::CrossAttn), cfg);
  train(st, ds, cfg);
  const auto dir = scratch_dir("ckpt32");
  save_checkpoint(dir, st, cfg);
  EXPECT_EQ(checkpoint_precision(dir), Precision::Float32);
  const auto back = load_checkpoint<float>(dir);
  for (std::size_t p = 0; p < st.model.params().size(); ++p)
    EXPECT_EQ(back.state.model.params().value(p), st.model.params().value(p));
  EvalOptions eo;
  eo.points = 0;
  EXPECT_EQ(evaluate(back.state.model, ds, ds.test, eo).variables[0].rel_l2,
            evaluate(st.model, ds, ds.test, eo).variables[0].rel_l2);
}

TEST(DrawQuerySubset, DistinctAndDeterministic) {
  std::mt19937_64 a(9), b(9);
  const auto s = draw_query_subset(100, 30, a);
  EXPECT_EQ(s, draw_query_subset(100, 30, b));
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_EQ(draw_query_subset(5, 30, a).size(), 5u);
}
