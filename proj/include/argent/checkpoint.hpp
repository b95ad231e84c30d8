#pragma once

#include <filesystem>
#include <sstream>
#include <string>

#include "argent/config.hpp"
#include "argent/ini.hpp"
#include "argent/record_io.hpp"
#include "argent/trainer.hpp"

namespace argent {

inline constexpr int kCheckpointSchema = 1;

/// Directory holding manifest.txt (spec, config, step, RNG state) and
/// state.bin (parameters, Adam moments, loss history).
template <class T>
void save_checkpoint(const std::filesystem::path& dir, const TrainState<T>& st, const TrainConfig& cfg) {
  std::filesystem::create_directories(dir);
  IniDocument doc;
  doc.set("checkpoint", "schema_version", std::to_string(kCheckpointSchema));
  doc.set("checkpoint", "step", std::to_string(st.step));
  doc.set("checkpoint", "adam_t", std::to_string(st.adam.t));
  doc.set("checkpoint", "best_eval", format_double(st.best_eval));
  doc.set("checkpoint", "best_eval_step", std::to_string(st.best_eval_step));
  std::ostringstream rng;
  rng << st.rng;
  doc.set("checkpoint", "rng", rng.str());
  write_model_spec(doc, st.model.spec());
  write_train_config(doc, cfg);
  doc.save((dir / "manifest.txt").string());

  NamedArrays arrays;
  const auto& ps = st.model.params();
  for (std::size_t p = 0; p < ps.size(); ++p) arrays.emplace_back("param." + ps.name(p), ps.value(p).template cast<double>());
  for (std::size_t p = 0; p < st.adam.m.size(); ++p) {
    arrays.emplace_back("adam_m." + ps.name(p), st.adam.m[p].template cast<double>());
    arrays.emplace_back("adam_v." + ps.name(p), st.adam.v[p].template cast<double>());
  }
  Tensor<double> steps({st.loss_steps.size()});
  for (std::size_t i = 0; i < st.loss_steps.size(); ++i) steps[i] = static_cast<double>(st.loss_steps[i]);
  arrays.emplace_back("loss_steps", steps);
  arrays.emplace_back("losses", Tensor<double>({st.losses.size()}, st.losses));
  write_record((dir / "state.bin").string(), arrays);
}

template <class T>
struct LoadedCheckpoint {
  TrainState<T> state;
  TrainConfig config;
};

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& dir) {
  const auto doc = IniDocument::load((dir / "manifest.txt").string());
  if (!doc.find_section("checkpoint"))
    throw FormatError(doc.source() + ": not a checkpoint (no [checkpoint] section)");
  detail::SectionReader r(doc, "checkpoint", {"schema_version", "step", "adam_t", "best_eval", "best_eval_step", "rng"});
  if (r.count("schema_version", 0) != kCheckpointSchema)
    throw FormatError(r.position("schema_version") + "unsupported checkpoint schema");
  LoadedCheckpoint<T> out;
  const ModelSpec spec = read_model_spec(doc);
  out.config = read_train_config(doc);
  const auto path = (dir / "state.bin").string();
  const auto arrays = read_record(path);

  ParamStore<T> params;
  ArgentModel<T> reference(spec, 0);  // parameter names and shapes only
  const auto& names = reference.params().names();
  for (std::size_t p = 0; p < names.size(); ++p) {
    const auto& t = find_array(arrays, "param." + names[p], path);
    if (t.shape() != reference.params().value(p).shape())
      throw FormatError(path + ": parameter '" + names[p] + "' has shape " + shape_str(t.shape()) + ", expected " +
                        shape_str(reference.params().value(p).shape()));
    params.add(names[p], t.template cast<T>());
  }
  auto& st = out.state;
  st.model = ArgentModel<T>(spec, std::move(params));
  st.step = r.count("step", 0);
  st.adam.t = r.count("adam_t", 0);
  if (st.adam.t > 0) {
    for (const auto& n : names) {
      st.adam.m.push_back(find_array(arrays, "adam_m." + n, path).template cast<T>());
      st.adam.v.push_back(find_array(arrays, "adam_v." + n, path).template cast<T>());
    }
  }
  st.best_eval = r.real("best_eval", std::nan(""));
  st.best_eval_step = r.count("best_eval_step", 0);
  std::istringstream rng(r.text("rng", ""));
  rng >> st.rng;
  if (!rng) throw FormatError(r.position("rng") + "malformed RNG state");
  for (double v : find_array(arrays, "loss_steps", path).data()) st.loss_steps.push_back(static_cast<std::uint64_t>(v));
  const auto& losses = find_array(arrays, "losses", path);
  st.losses.assign(losses.data().begin(), losses.data().end());
  return out;
}

/// Precision recorded in a checkpoint manifest, without loading parameters.
inline Precision checkpoint_precision(const std::filesystem::path& dir) {
  const auto doc = IniDocument::load((dir / "manifest.txt").string());
  return parse_precision(doc.get_or("train", "precision", "float64"));
}

}  // namespace argent
