#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "argent/checkpoint.hpp"
#include "argent/config.hpp"
#include "argent/dataset.hpp"
#include "argent/experiments.hpp"
#include "argent/metrics.hpp"
#include "argent/parallel.hpp"
#include "argent/svg.hpp"
#include "argent/trainer.hpp"

namespace argent {

namespace fs = std::filesystem;

/// Desk-scale model defaults used by the command line: d = 64 and 64-wide MLPs.
inline ModelSpec desk_model_spec() {
  ModelSpec s;
  s.variant = Variant::CrossAttn;
  s.layers = 2;
  s.attention.embed_dim = 64;
  s.attention.heads = 4;
  s.input_hidden = {64, 64, 64, 64};
  s.output_hidden = {64, 64, 64};
  s.trunk_out = 64;
  s.branches = {BranchSpec{"mu", BranchKind::ScalarVector, 2, {64, 64, 64, 64}}};
  return s;
}

namespace cli_detail {

struct ModelFlags {
  std::string config;
  std::string variant, kernel, precision, mode = "independent";
  int layers = 0, heads = 0, embed_dim = 0, width = 0, input_depth = -1, output_depth = -1, trunk_out = 0;
  bool no_query_sdf = false, no_rope = false;
  std::uint64_t steps = 0, checkpoint_every = 0, log_every = 0, seed = 0;
  std::size_t query_batch = 0, case_batch = 0;
  double lr = 0;
  std::vector<CLI::Option*> opts;

  void attach(CLI::App* app, bool training) {
    app->add_option("--config", config, "Structured-text config with [model]/[train] sections")->check(CLI::ExistingFile);
    opts.push_back(app->add_option("--variant", variant, "Trunk variant: mlp, self, cross, hybrid"));
    opts.push_back(app->add_option("--kernel", kernel, "Attention kernel: standard, fourier, galerkin"));
    opts.push_back(app->add_option("--layers", layers, "Attention layers"));
    opts.push_back(app->add_option("--heads", heads, "Attention heads"));
    opts.push_back(app->add_option("--embed-dim", embed_dim, "Embedding width d"));
    opts.push_back(app->add_option("--width", width, "Hidden width of every MLP"));
    opts.push_back(app->add_option("--input-depth", input_depth, "Hidden layers of the input lifts and branch"));
    opts.push_back(app->add_option("--output-depth", output_depth, "Hidden layers of the output block"));
    opts.push_back(app->add_option("--trunk-out", trunk_out, "Trunk/branch basis size J"));
    app->add_flag("--no-query-sdf", no_query_sdf, "Drop the SDF channel from the query features");
    app->add_flag("--no-rope", no_rope, "Disable rotary position embedding");
    opts.push_back(app->add_option("--seed", seed, "Root seed"));
    if (!training) return;
    opts.push_back(app->add_option("--precision", precision, "float32 or float64"));
    opts.push_back(app->add_option("--steps", steps, "Training steps"));
    opts.push_back(app->add_option("--query-batch", query_batch, "Query points per case per step"));
    opts.push_back(app->add_option("--case-batch", case_batch, "Cases per step"));
    opts.push_back(app->add_option("--lr", lr, "Initial learning rate"));
    opts.push_back(app->add_option("--checkpoint-every", checkpoint_every, "Checkpoint cadence in steps"));
    opts.push_back(app->add_option("--log-every", log_every, "Loss recording cadence in steps"));
    app->add_option("--mode", mode, "Output handling: independent (one model per variable) or multi")
        ->check(CLI::IsMember({"independent", "multi"}));
  }

  bool given(const std::string& name) const {
    for (auto* o : opts)
      if (o->get_name() == name) return o->count() > 0;
    return false;
  }

  IniDocument document() const { return config.empty() ? IniDocument{} : IniDocument::load(config); }

  ModelSpec model(const IniDocument& doc, std::size_t mu_dim) const {
    check_sections(doc, {"", "run", "model", "train", "data", "eval", "result"});
    ModelSpec s = read_model_spec(doc, desk_model_spec());
    try {
      if (given("--variant")) s.variant = parse_variant(variant);
      if (given("--kernel")) s.attention.kernel = parse_kernel(kernel);
    } catch (const ConfigError& e) {
      throw CLI::ValidationError(e.what());
    }
    if (given("--layers")) s.layers = layers;
    if (s.variant == Variant::Hybrid) s.layers = 2;
    if (given("--heads")) s.attention.heads = heads;
    if (given("--embed-dim")) s.attention.embed_dim = embed_dim;
    const int w = given("--width") ? width : (s.input_hidden.empty() ? 64 : s.input_hidden.front());
    const auto in_depth = given("--input-depth") ? static_cast<std::size_t>(input_depth) : s.input_hidden.size();
    const auto out_depth = given("--output-depth") ? static_cast<std::size_t>(output_depth) : s.output_hidden.size();
    if (given("--width") || given("--input-depth")) s.input_hidden.assign(in_depth, w);
    if (given("--width") || given("--output-depth")) s.output_hidden.assign(out_depth, w);
    if (given("--trunk-out")) s.trunk_out = trunk_out;
    if (no_query_sdf) s.use_query_sdf = false;
    if (no_rope) s.attention.use_rope = false;
    for (auto& b : s.branches) {
      b.input_dim = static_cast<int>(mu_dim);
      if (given("--width") || given("--input-depth")) b.hidden.assign(in_depth, w);
    }
    s.validate();
    return s;
  }

  TrainConfig train(const IniDocument& doc) const {
    TrainConfig c = read_train_config(doc);
    if (given("--steps")) c.steps = steps;
    if (given("--query-batch")) c.query_batch = query_batch;
    if (given("--case-batch")) c.case_batch = case_batch;
    if (given("--lr")) c.lr0 = lr;
    if (given("--seed")) c.seed = seed;
    if (given("--checkpoint-every")) c.checkpoint_every = checkpoint_every;
    if (given("--log-every")) c.log_every = log_every;
    if (given("--precision")) c.precision = parse_precision(precision);
    c.validate();
    return c;
  }
};

struct EvalFlags {
  std::size_t points = 512;
  double lambda = 0;
  std::uint64_t eval_seed = 0;
  std::string split = "test";

  void attach(CLI::App* app) {
    app->add_option("--eval-points", points, "Scored query points per case (0 = all candidates)")->capture_default_str();
    app->add_option("--eval-lambda", lambda, "Sampling parameter for scored points")->capture_default_str();
    app->add_option("--eval-seed", eval_seed, "Seed for scored-point selection")->capture_default_str();
    app->add_option("--split", split, "Cases to score: test, train or all")->capture_default_str()
        ->check(CLI::IsMember({"test", "train", "all"}));
  }

  EvalOptions options() const {
    EvalOptions o;
    o.points = points;
    o.lambda = lambda;
    o.seed = eval_seed;
    return o;
  }

  std::vector<std::size_t> positions(const Dataset& ds) const {
    if (split == "train") return ds.train;
    if (split == "test") return ds.test;
    std::vector<std::size_t> all(ds.cases.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
};

/// Self-describing record of a run: command line, thread count and every
/// resolved setting, loadable again through --config.
inline IniDocument run_manifest(const std::string& command, const std::vector<std::string>& args) {
  IniDocument doc;
  doc.set("run", "command", command);
  std::string line;
  for (const auto& a : args) line += (line.empty() ? "" : " ") + a;
  doc.set("run", "argv", line);
  doc.set("run", "threads", std::to_string(thread_count()));
  return doc;
}

inline Table eval_table(const EvalReport& rep, const std::vector<std::string>& metrics) {
  Table t{{"variable", "metric", "value"}, {}};
  for (const auto& v : rep.variables)
    for (const auto& m : metrics) {
      double x = 0;
      if (m == "rel-l2") {
        x = v.rel_l2;
      } else if (m == "rel-l2-pooled") {
        x = v.rel_l2_pooled;
      } else if (m == "mae") {
        x = v.mae;
      } else if (m == "mse-norm") {
        x = v.mse_norm;
      }
      t.rows.push_back({v.name, m, format_double(x)});
    }
  return t;
}

inline Table case_table(const EvalReport& rep) {
  Table t{{"case", "variable", "rel_l2", "mae", "mse_norm"}, {}};
  for (const auto& c : rep.cases)
    for (std::size_t v = 0; v < rep.variables.size(); ++v)
      t.rows.push_back({std::to_string(c.index), rep.variables[v].name, format_double(c.rel_l2[v]),
                        format_double(c.mae[v]), format_double(c.mse_norm[v])});
  return t;
}

template <class T>
void write_losses(const fs::path& dir, const TrainState<T>& st, bool plots) {
  Table t{{"step", "loss"}, {}};
  for (std::size_t i = 0; i < st.losses.size(); ++i)
    t.rows.push_back({std::to_string(st.loss_steps[i]), format_double(st.losses[i])});
  t.save((dir / "losses.tsv").string());
  if (plots && !st.losses.empty()) {
    Series s{"loss", {}, st.losses};
    for (auto k : st.loss_steps) s.x.push_back(static_cast<double>(k));
    save_text((dir / "losses.svg").string(), svg_line_chart({s}, "Training loss", "step", "MSE (normalized)", true));
  }
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> args;
};

inline std::size_t mu_width(const Dataset& ds) { return ds.cases.empty() ? 2 : ds.cases.front().mu.size(); }

// ---------------------------------------------------------------------------
// Runners

template <class T>
void train_runner(Context& ctx, const Dataset& ds, ModelSpec spec, TrainConfig cfg, const std::string& mode,
                  const EvalFlags& ef, bool plots, const fs::path& out) {
  std::vector<std::vector<std::string>> groups;
  const auto vars = train_variables(ds, cfg);
  if (mode == "multi" || vars.size() == 1) {
    groups.push_back(vars);
  } else {
    for (const auto& v : vars) groups.push_back({v});
  }
  for (const auto& group : groups) {
    const fs::path dir = groups.size() == 1 ? out : out / group.front();
    fs::create_directories(dir);
    TrainConfig gcfg = cfg;
    gcfg.variables = group;
    ModelSpec gspec = spec;
    gspec.n_outputs = static_cast<int>(group.size());
    auto st = init_train_state<T>(gspec, gcfg);
    TrainHooks<T> hooks;
    hooks.warn = [&](const std::string& w) { ctx.err << "warning: " << w << '\n'; };
    const auto t0 = std::chrono::steady_clock::now();
    hooks.progress = [&](std::uint64_t step, double loss) {
      if ((step + 1) % 500 == 0 || step + 1 == gcfg.steps) {
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ctx.err << "step " << step + 1 << "/" << gcfg.steps << " loss " << loss << " (" << sec << " s)\n";
      }
    };
    hooks.checkpoint = [&](const TrainState<T>& s) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06llu", static_cast<unsigned long long>(s.step));
      const fs::path p = s.step >= gcfg.steps ? dir / "checkpoint" : dir / "checkpoints" / name;
      save_checkpoint(p, s, gcfg);
      return p.string();
    };
    train(st, ds, gcfg, hooks);
    write_losses(dir, st, plots);
    auto eo = ef.options();
    eo.variables = group;
    const auto rep = evaluate(st.model, ds, ef.positions(ds), eo);
    eval_table(rep, {"rel-l2", "rel-l2-pooled", "mae", "mse-norm"}).save((dir / "eval.tsv").string());
    case_table(rep).save((dir / "eval_cases.tsv").string());
    auto manifest = run_manifest("train", ctx.args);
    write_model_spec(manifest, gspec);
    write_train_config(manifest, gcfg);
    manifest.set("eval", "points", std::to_string(ef.points));
    manifest.set("eval", "lambda", format_double(ef.lambda));
    manifest.set("eval", "seed", std::to_string(ef.eval_seed));
    manifest.set("eval", "split", ef.split);
    for (const auto& v : rep.variables) manifest.set("result", "rel_l2." + v.name, format_double(v.rel_l2));
    manifest.save((dir / "run.txt").string());
    for (const auto& v : rep.variables)
      ctx.out << v.name << " test rel_l2 " << format_double(v.rel_l2) << " mae " << format_double(v.mae) << '\n';
  }
}

template <class T>
void eval_runner(Context& ctx, const Dataset& ds, const ArgentModel<T>& model, const std::vector<std::string>& vars,
                 const EvalFlags& ef, const std::vector<std::string>& metrics, const fs::path& out) {
  auto eo = ef.options();
  eo.variables = vars;
  const auto rep = evaluate(model, ds, ef.positions(ds), eo);
  fs::create_directories(out);
  const auto table = eval_table(rep, metrics);
  table.save((out / "eval.tsv").string());
  case_table(rep).save((out / "eval_cases.tsv").string());
  auto manifest = run_manifest("eval", ctx.args);
  write_model_spec(manifest, model.spec());
  manifest.save((out / "run.txt").string());
  ctx.out << table.str();
}

inline std::vector<std::string> checkpoint_variables(const fs::path& dir, const Dataset& ds) {
  const auto doc = IniDocument::load((dir / "manifest.txt").string());
  auto vars = read_train_config(doc).variables;
  return vars.empty() ? ds.variables : vars;
}

template <class T>
std::vector<TrainState<T>> load_states(const std::vector<std::string>& dirs) {
  std::vector<TrainState<T>> out;
  for (const auto& d : dirs) out.push_back(load_checkpoint<T>(d).state);
  return out;
}

template <class T>
void sweep_runner(Context& ctx, const Dataset& ds, const std::vector<std::string>& ckpts,
                  const std::vector<double>& lambdas, const EvalFlags& ef, bool plots, const fs::path& out) {
  const auto states = load_states<T>(ckpts);
  std::vector<LabeledModel<T>> models;
  std::map<std::string, int> seen;
  for (const auto& s : states) {
    std::string label = variant_name(s.model.spec().variant);
    if (seen[label]++) label += "#" + std::to_string(seen[label]);
    models.push_back({label, &s.model});
  }
  const auto rows = sampling_sweep(models, ds, lambdas, ef.points, ef.eval_seed);
  fs::create_directories(out);
  const auto table = sweep_table(rows);
  table.save((out / "sweep.tsv").string());
  if (plots) {
    std::vector<Series> series;
    for (const auto& m : models) {
      Series s{m.label, {}, {}};
      for (const auto& r : rows)
        if (r.variant == m.label) {
          s.x.push_back(r.lambda);
          s.y.push_back(r.rel_l2);
        }
      series.push_back(s);
    }
    save_text((out / "sweep.svg").string(), svg_line_chart(series, "Sampling sensitivity", "lambda", "relative L2"));
  }
  auto manifest = run_manifest("sweep", ctx.args);
  manifest.save((out / "run.txt").string());
  ctx.out << table.str();
}

template <class T>
void ablate_runner(Context& ctx, const Dataset& ds, const ModelSpec& spec, const TrainConfig& cfg,
                   const std::vector<Variant>& variants, const EvalFlags& ef, bool save_models, const fs::path& out) {
  fs::create_directories(out);
  ModelCallback<T> cb;
  if (save_models) {
    cb = [&](Variant v, bool sdf, const TrainState<T>& st) {
      save_checkpoint(out / "models" / (ablation_label(v) + (sdf ? "_with_sdf" : "_without_sdf")), st, cfg);
    };
  }
  auto eo = ef.options();
  const auto rows = ablate_sdf<T>(ds, spec, cfg, variants, eo, cb);
  const auto table = ablation_table(rows);
  table.save((out / "ablation.tsv").string());
  auto manifest = run_manifest("ablate", ctx.args);
  write_model_spec(manifest, spec);
  write_train_config(manifest, cfg);
  manifest.save((out / "run.txt").string());
  ctx.out << table.str();
}

inline std::vector<double> parse_lambdas(const std::string& s) {
  std::vector<double> out;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--lambdas", "malformed number '" + tok + "'");
    }
  }
  if (out.empty()) throw CLI::ValidationError("--lambdas", "empty list");
  return out;
}

inline void inspect_dataset(std::ostream& os, const Dataset& ds) {
  os << "dataset family=" << ds.options.family << " oracle=" << oracle_name(ds.options.oracle)
     << " cases=" << ds.cases.size() << " train=" << ds.train.size() << " test=" << ds.test.size()
     << " grid=" << ds.options.grid << " geometry_points=" << ds.geometry_coords.rows() << '\n';
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& c : ds.cases) {
    lo = std::min(lo, c.size());
    hi = std::max(hi, c.size());
  }
  os << "query candidates per case: " << lo << ".." << hi << '\n';
  for (const auto& e : ds.norm.variables)
    os << "norm " << e.name << " mean=" << format_double(e.mean) << " std=" << format_double(e.std) << '\n';
  os << "length_scale=" << format_double(ds.norm.length_scale) << '\n';
  for (const auto& s : ds.skipped) os << "skipped " << s << '\n';
}

template <class T>
void inspect_checkpoint(std::ostream& os, const fs::path& dir) {
  const auto ck = load_checkpoint<T>(dir);
  const auto& st = ck.state;
  IniDocument doc;
  write_model_spec(doc, st.model.spec());
  write_train_config(doc, ck.config);
  os << "checkpoint step=" << st.step << " parameters=" << st.model.params().scalar_count()
     << " tensors=" << st.model.params().size();
  if (!st.losses.empty()) os << " last_loss=" << format_double(st.losses.back());
  os << '\n' << doc.str();
}

}  // namespace cli_detail

/// Entry point of the argent command-line tool. Returns 0 on success, 2 for
/// usage or configuration errors and 1 for runtime failures.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  Context ctx{out, err, std::vector<std::string>(argv, argv + argc)};
  CLI::App app{"Geometry-encoded transformer operator learning"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string out_dir, data_dir;
  bool plots = false;
  std::function<void()> action;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  DatasetOptions dopt;
  std::string gen_config, oracle = "poisson";
  gen->add_option("--out", out_dir, "Dataset directory to write")->required();
  gen->add_option("--config", gen_config, "Config with a [data] section")->check(CLI::ExistingFile);
  gen->add_option("--family", dopt.family, "cavity or rods")->check(CLI::IsMember({"cavity", "rods"}));
  gen->add_option("--count", dopt.count, "Number of geometries");
  gen->add_option("--split", dopt.split, "Training fraction");
  gen->add_option("--oracle", oracle, "poisson or analytic")->check(CLI::IsMember({"poisson", "analytic"}));
  gen->add_option("--seed", dopt.seed, "Root seed");
  gen->add_option("--grid", dopt.grid, "Oracle grid size n");
  gen->add_option("--geometry-points", dopt.geometry_points, "Size of the shared geometry cloud");
  gen->add_option("--rods", dopt.rods, "Rods per geometry (rods family)");
  gen->callback([&] {
    action = [&] {
      DatasetOptions o = dopt;
      o.oracle = parse_oracle(oracle);
      if (!gen_config.empty()) {
        const auto doc = IniDocument::load(gen_config);
        check_sections(doc, {"", "run", "model", "train", "data", "eval", "result"});
        o = read_dataset_options(doc, o);
        // Explicit flags win over the file.
        if (gen->count("--family")) o.family = dopt.family;
        if (gen->count("--count")) o.count = dopt.count;
        if (gen->count("--split")) o.split = dopt.split;
        if (gen->count("--oracle")) o.oracle = parse_oracle(oracle);
        if (gen->count("--seed")) o.seed = dopt.seed;
        if (gen->count("--grid")) o.grid = dopt.grid;
        if (gen->count("--geometry-points")) o.geometry_points = dopt.geometry_points;
        if (gen->count("--rods")) o.rods = dopt.rods;
      }
      o.validate();
      const auto ds = build_dataset(o);
      save_dataset(ds, out_dir);
      for (const auto& s : ds.skipped) err << "warning: skipped " << s << '\n';
      out << "wrote " << ds.cases.size() << " cases (" << ds.train.size() << " train, " << ds.test.size()
          << " test) to " << out_dir << '\n';
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  ModelFlags tflags;
  EvalFlags tef;
  tr->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out_dir, "Run directory")->required();
  tr->add_flag("--plots", plots, "Also write SVG plots");
  tflags.attach(tr, true);
  tef.attach(tr);
  tr->callback([&] {
    action = [&] {
      const auto ds = load_dataset(data_dir);
      const auto doc = tflags.document();
      const auto spec = tflags.model(doc, mu_width(ds));
      const auto cfg = tflags.train(doc);
      if (cfg.precision == Precision::Float32) {
        train_runner<float>(ctx, ds, spec, cfg, tflags.mode, tef, plots, out_dir);
      } else {
        train_runner<double>(ctx, ds, spec, cfg, tflags.mode, tef, plots, out_dir);
      }
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint (or a freshly initialized model)");
  std::string ckpt;
  bool untrained = false;
  std::vector<std::string> metrics = {"rel-l2", "rel-l2-pooled", "mae", "mse-norm"};
  ModelFlags eflags;
  EvalFlags eef;
  ev->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", out_dir, "Output directory")->required();
  ev->add_option("--checkpoint", ckpt, "Checkpoint directory")->check(CLI::ExistingDirectory);
  ev->add_flag("--untrained", untrained, "Score a freshly initialized model built from the model flags");
  ev->add_option("--metric", metrics, "rel-l2, rel-l2-pooled, mae, mse-norm")
      ->check(CLI::IsMember({"rel-l2", "rel-l2-pooled", "mae", "mse-norm"}));
  eflags.attach(ev, false);
  eef.attach(ev);
  ev->callback([&] {
    if (ckpt.empty() == !untrained) throw CLI::ValidationError("eval", "give exactly one of --checkpoint or --untrained");
    action = [&] {
      const auto ds = load_dataset(data_dir);
      if (untrained) {
        const auto doc = eflags.document();
        auto spec = eflags.model(doc, mu_width(ds));
        spec.n_outputs = static_cast<int>(ds.variables.size());
        TrainConfig cfg;
        cfg.seed = eflags.seed;
        const auto st = init_train_state<double>(spec, cfg);
        eval_runner(ctx, ds, st.model, ds.variables, eef, metrics, out_dir);
        return;
      }
      const auto vars = checkpoint_variables(ckpt, ds);
      if (checkpoint_precision(ckpt) == Precision::Float32) {
        eval_runner(ctx, ds, load_checkpoint<float>(ckpt).state.model, vars, eef, metrics, out_dir);
      } else {
        eval_runner(ctx, ds, load_checkpoint<double>(ckpt).state.model, vars, eef, metrics, out_dir);
      }
    };
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "Relative L2 versus the query sampling parameter lambda");
  std::vector<std::string> sweep_ckpts;
  std::string lambdas = "-0.5,0,0.5,1";
  EvalFlags sef;
  sw->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  sw->add_option("--out", out_dir, "Output directory")->required();
  sw->add_option("--checkpoint", sweep_ckpts, "Checkpoint directories (repeatable)")
      ->required()
      ->check(CLI::ExistingDirectory);
  sw->add_option("--lambdas", lambdas, "Comma-separated lambda grid")->capture_default_str();
  sw->add_flag("--plots", plots, "Also write an SVG plot");
  sef.attach(sw);
  sw->callback([&] {
    const auto grid = parse_lambdas(lambdas);
    action = [&, grid] {
      const auto ds = load_dataset(data_dir);
      Precision p = checkpoint_precision(sweep_ckpts.front());
      for (const auto& c : sweep_ckpts)
        if (checkpoint_precision(c) != p) throw ConfigError("sweep: checkpoints mix float32 and float64");
      if (p == Precision::Float32) {
        sweep_runner<float>(ctx, ds, sweep_ckpts, grid, sef, plots, out_dir);
      } else {
        sweep_runner<double>(ctx, ds, sweep_ckpts, grid, sef, plots, out_dir);
      }
    };
  });

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train every variant with and without the SDF input");
  ModelFlags aflags;
  EvalFlags aef;
  std::vector<std::string> variant_names = {"mlp", "self", "cross", "hybrid"};
  bool save_models = false;
  ab->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ab->add_option("--out", out_dir, "Output directory")->required();
  ab->add_option("--variants", variant_names, "Variants to include")
      ->delimiter(',')
      ->check(CLI::IsMember({"mlp", "self", "cross", "hybrid"}));
  ab->add_flag("--save-models", save_models, "Keep a checkpoint of every trained model");
  aflags.attach(ab, true);
  aef.attach(ab);
  ab->callback([&] {
    action = [&] {
      const auto ds = load_dataset(data_dir);
      const auto doc = aflags.document();
      auto spec = aflags.model(doc, mu_width(ds));
      auto cfg = aflags.train(doc);
      if (ds.variables.size() != 1 && cfg.variables.size() != 1)
        throw ConfigError("ablate: select one variable with [train] variables");
      spec.n_outputs = 1;
      std::vector<Variant> variants;
      for (const auto& v : variant_names) variants.push_back(parse_variant(v));
      if (cfg.precision == Precision::Float32) {
        ablate_runner<float>(ctx, ds, spec, cfg, variants, aef, save_models, out_dir);
      } else {
        ablate_runner<double>(ctx, ds, spec, cfg, variants, aef, save_models, out_dir);
      }
    };
  });

  // inspect
  auto* in = app.add_subcommand("inspect", "Summarize a dataset or checkpoint");
  std::string inspect_data, inspect_ckpt;
  in->add_option("--data", inspect_data, "Dataset directory")->check(CLI::ExistingDirectory);
  in->add_option("--checkpoint", inspect_ckpt, "Checkpoint directory")->check(CLI::ExistingDirectory);
  in->add_option("--out", out_dir, "Also write the summary to <out>/inspect.txt");
  in->callback([&] {
    if (inspect_data.empty() && inspect_ckpt.empty())
      throw CLI::ValidationError("inspect", "give --data and/or --checkpoint");
    action = [&] {
      std::ostringstream os;
      if (!inspect_data.empty()) inspect_dataset(os, load_dataset(inspect_data));
      if (!inspect_ckpt.empty()) {
        if (checkpoint_precision(inspect_ckpt) == Precision::Float32) {
          inspect_checkpoint<float>(os, inspect_ckpt);
        } else {
          inspect_checkpoint<double>(os, inspect_ckpt);
        }
      }
      out << os.str();
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        save_text((fs::path(out_dir) / "inspect.txt").string(), os.str());
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    err << "run with --help for usage\n";
    return 2;
  }
  try {
    if (action) action();
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace argent
