#pragma once

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "argent/attention.hpp"
#include "argent/dataset.hpp"
#include "argent/errors.hpp"
#include "argent/ini.hpp"
#include "argent/model.hpp"
#include "argent/trainer.hpp"

namespace argent {

namespace detail {

/// Typed reads from one section with positioned errors and unknown-key detection.
class SectionReader {
 public:
  SectionReader(const IniDocument& doc, std::string section, std::set<std::string> allowed)
      : doc_(doc), section_(std::move(section)) {
    const auto* s = doc.find_section(section_);
    if (!s) return;
    for (const auto& e : s->entries)
      if (!allowed.count(e.key))
        throw ConfigError(IniDocument::where(doc.source(), e.line) + "unknown key '" + e.key + "' in [" + section_ +
                          "]");
  }

  bool has(const std::string& key) const { return doc_.find(section_, key) != nullptr; }

  std::string text(const std::string& key, const std::string& fallback) const {
    return doc_.get_or(section_, key, fallback);
  }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& s = doc_.get(section_, key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw ConfigError(doc_.position(section_, key) + "'" + key + "' expects a number, got '" + s + "'");
  }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const auto& s = doc_.get(section_, key);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw ConfigError(doc_.position(section_, key) + "'" + key + "' expects an integer, got '" + s + "'");
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& s = doc_.get(section_, key);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used == s.size() && s.front() != '-') return v;
    } catch (const std::logic_error&) {
    }
    throw ConfigError(doc_.position(section_, key) + "'" + key + "' expects a non-negative integer, got '" + s + "'");
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& s = doc_.get(section_, key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(doc_.position(section_, key) + "'" + key + "' expects true or false, got '" + s + "'");
  }

  std::vector<std::string> words(const std::string& key, const std::vector<std::string>& fallback) const {
    if (!has(key)) return fallback;
    std::string s = doc_.get(section_, key);
    for (auto& c : s)
      if (c == ',') c = ' ';
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
  }

  std::vector<int> ints(const std::string& key, const std::vector<int>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    for (const auto& w : words(key, {})) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(w, &used);
        if (used != w.size()) throw std::invalid_argument(w);
        out.push_back(v);
      } catch (const std::logic_error&) {
        throw ConfigError(doc_.position(section_, key) + "'" + key + "' expects a list of integers");
      }
    }
    return out;
  }

  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& w : words(key, {})) {
      try {
        std::size_t used = 0;
        const double v = std::stod(w, &used);
        if (used != w.size()) throw std::invalid_argument(w);
        out.push_back(v);
      } catch (const std::logic_error&) {
        throw ConfigError(doc_.position(section_, key) + "'" + key + "' expects a list of numbers");
      }
    }
    return out;
  }

  /// Runs a parser on the value and re-throws its ConfigError with the entry's position.
  template <class F>
  auto parsed(const std::string& key, F&& parse, decltype(parse(std::string{})) fallback) const {
    if (!has(key)) return fallback;
    try {
      return parse(doc_.get(section_, key));
    } catch (const ConfigError& e) {
      throw ConfigError(doc_.position(section_, key) + e.what());
    }
  }

  std::string position(const std::string& key) const { return doc_.position(section_, key); }

 private:
  const IniDocument& doc_;
  std::string section_;
};

template <class V>
std::string join_list(const std::vector<V>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    if constexpr (std::is_floating_point_v<V>) {
      os << format_double(v[i]);
    } else {
      os << v[i];
    }
  }
  return os.str();
}

inline std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// ModelSpec

inline void write_model_spec(IniDocument& doc, const ModelSpec& s) {
  doc.set("model", "variant", variant_name(s.variant));
  doc.set("model", "layers", std::to_string(s.layers));
  doc.set("model", "kernel", kernel_name(s.attention.kernel));
  doc.set("model", "heads", std::to_string(s.attention.heads));
  doc.set("model", "embed_dim", std::to_string(s.attention.embed_dim));
  doc.set("model", "spatial_dim", std::to_string(s.attention.spatial_dim));
  doc.set("model", "rope", detail::bool_text(s.attention.use_rope));
  doc.set("model", "rope_wavelengths", detail::join_list(s.attention.rope_wavelengths));
  doc.set("model", "norm_eps", format_double(s.attention.norm_eps));
  doc.set("model", "input_hidden", detail::join_list(s.input_hidden));
  doc.set("model", "output_hidden", detail::join_list(s.output_hidden));
  doc.set("model", "trunk_out", std::to_string(s.trunk_out));
  doc.set("model", "n_outputs", std::to_string(s.n_outputs));
  doc.set("model", "query_sdf", detail::bool_text(s.use_query_sdf));
  doc.set("model", "geometry_sdf", detail::bool_text(s.use_geometry_sdf));
  doc.set("model", "extra_features", std::to_string(s.extra_features));
  std::vector<std::string> names;
  for (const auto& b : s.branches) names.push_back(b.name);
  doc.set("model", "branches", detail::join_list(names));
  for (const auto& b : s.branches) {
    const std::string sec = "branch." + b.name;
    doc.set(sec, "kind", branch_kind_name(b.kind));
    doc.set(sec, "input_dim", std::to_string(b.input_dim));
    doc.set(sec, "hidden", detail::join_list(b.hidden));
  }
}

/// Reads [model] (and [branch.<name>]) over `base`; absent keys keep base values.
inline ModelSpec read_model_spec(const IniDocument& doc, ModelSpec base = {}) {
  detail::SectionReader r(doc, "model",
                          {"variant", "layers", "kernel", "heads", "embed_dim", "spatial_dim", "rope",
                           "rope_wavelengths", "norm_eps", "input_hidden", "output_hidden", "trunk_out", "n_outputs",
                           "query_sdf", "geometry_sdf", "extra_features", "branches"});
  ModelSpec s = base;
  s.variant = r.parsed("variant", parse_variant, s.variant);
  s.layers = static_cast<int>(r.integer("layers", s.layers));
  s.attention.kernel = r.parsed("kernel", parse_kernel, s.attention.kernel);
  s.attention.heads = static_cast<int>(r.integer("heads", s.attention.heads));
  s.attention.embed_dim = static_cast<int>(r.integer("embed_dim", s.attention.embed_dim));
  s.attention.spatial_dim = static_cast<int>(r.integer("spatial_dim", s.attention.spatial_dim));
  s.attention.use_rope = r.boolean("rope", s.attention.use_rope);
  s.attention.rope_wavelengths = r.reals("rope_wavelengths", s.attention.rope_wavelengths);
  s.attention.norm_eps = r.real("norm_eps", s.attention.norm_eps);
  s.input_hidden = r.ints("input_hidden", s.input_hidden);
  s.output_hidden = r.ints("output_hidden", s.output_hidden);
  s.trunk_out = static_cast<int>(r.integer("trunk_out", s.trunk_out));
  s.n_outputs = static_cast<int>(r.integer("n_outputs", s.n_outputs));
  s.use_query_sdf = r.boolean("query_sdf", s.use_query_sdf);
  s.use_geometry_sdf = r.boolean("geometry_sdf", s.use_geometry_sdf);
  s.extra_features = static_cast<int>(r.integer("extra_features", s.extra_features));
  if (r.has("branches")) {
    s.branches.clear();
    for (const auto& name : r.words("branches", {})) {
      const std::string sec = "branch." + name;
      detail::SectionReader br(doc, sec, {"kind", "input_dim", "hidden"});
      BranchSpec b;
      b.name = name;
      b.kind = br.parsed("kind", parse_branch_kind, b.kind);
      b.input_dim = static_cast<int>(br.integer("input_dim", b.input_dim));
      b.hidden = br.ints("hidden", b.hidden);
      s.branches.push_back(b);
    }
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(doc.source() + ": " + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// TrainConfig

inline void write_train_config(IniDocument& doc, const TrainConfig& c) {
  doc.set("train", "steps", std::to_string(c.steps));
  doc.set("train", "lr0", format_double(c.lr0));
  doc.set("train", "decay", format_double(c.decay));
  doc.set("train", "decay_every", std::to_string(c.decay_every));
  doc.set("train", "query_batch", std::to_string(c.query_batch));
  doc.set("train", "case_batch", std::to_string(c.case_batch));
  doc.set("train", "seed", std::to_string(c.seed));
  doc.set("train", "precision", precision_name(c.precision));
  doc.set("train", "log_every", std::to_string(c.log_every));
  doc.set("train", "checkpoint_every", std::to_string(c.checkpoint_every));
  doc.set("train", "variables", detail::join_list(c.variables));
  doc.set("train", "beta1", format_double(c.beta1));
  doc.set("train", "beta2", format_double(c.beta2));
  doc.set("train", "eps", format_double(c.eps));
}

inline TrainConfig read_train_config(const IniDocument& doc, TrainConfig base = {}) {
  detail::SectionReader r(doc, "train",
                          {"steps", "lr0", "decay", "decay_every", "query_batch", "case_batch", "seed", "precision",
                           "log_every", "checkpoint_every", "variables", "beta1", "beta2", "eps"});
  TrainConfig c = base;
  c.steps = r.count("steps", c.steps);
  c.lr0 = r.real("lr0", c.lr0);
  c.decay = r.real("decay", c.decay);
  c.decay_every = r.count("decay_every", c.decay_every);
  c.query_batch = r.count("query_batch", c.query_batch);
  c.case_batch = r.count("case_batch", c.case_batch);
  c.seed = r.count("seed", c.seed);
  c.precision = r.parsed("precision", parse_precision, c.precision);
  c.log_every = r.count("log_every", c.log_every);
  c.checkpoint_every = r.count("checkpoint_every", c.checkpoint_every);
  c.variables = r.words("variables", c.variables);
  c.beta1 = r.real("beta1", c.beta1);
  c.beta2 = r.real("beta2", c.beta2);
  c.eps = r.real("eps", c.eps);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(doc.source() + ": " + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// DatasetOptions

inline DatasetOptions read_dataset_options(const IniDocument& doc, DatasetOptions base = {}) {
  detail::SectionReader r(doc, "data",
                          {"family", "count", "split", "oracle", "seed", "grid", "geometry_points", "rods", "tol"});
  DatasetOptions o = base;
  o.family = r.text("family", o.family);
  o.count = r.count("count", o.count);
  o.split = r.real("split", o.split);
  o.oracle = r.parsed("oracle", parse_oracle, o.oracle);
  o.seed = r.count("seed", o.seed);
  o.grid = r.count("grid", o.grid);
  o.geometry_points = r.count("geometry_points", o.geometry_points);
  o.rods = static_cast<int>(r.integer("rods", o.rods));
  o.tol = r.real("tol", o.tol);
  return o;
}

/// Rejects sections outside `allowed` (plus branch.* sections) so typos surface.
inline void check_sections(const IniDocument& doc, const std::set<std::string>& allowed) {
  for (const auto& s : doc.sections()) {
    if (allowed.count(s.name) || s.name.rfind("branch.", 0) == 0) continue;
    throw ConfigError(IniDocument::where(doc.source(), s.line) + "unknown section [" + s.name + "]");
  }
}

}  // namespace argent
