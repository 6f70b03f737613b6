#include "egogest/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "egogest/error.hpp"

namespace egogest {

std::vector<GestureClass> dataset_classes(const Dataset& dataset) {
  std::vector<GestureClass> out{GestureClass::Neutral};
  for (auto c : gesture_classes(dataset.class_count)) out.push_back(c);
  return out;
}

std::vector<GestureClass> task_classes(const Dataset& dataset, std::string_view task) {
  if (task == "all") return dataset_classes(dataset);
  constexpr std::string_view prefix = "binary:";
  if (task.substr(0, prefix.size()) == prefix) {
    const auto c = parse_class(task.substr(prefix.size()));
    if (!c || *c == GestureClass::Neutral) {
      throw Error(ErrorCode::InvalidArgument, "unknown gesture in task '" + std::string(task) + "'");
    }
    const auto present = dataset_classes(dataset);
    if (std::find(present.begin(), present.end(), *c) == present.end()) {
      throw Error(ErrorCode::InvalidArgument, std::string(class_name(*c)) + " is not in the dataset");
    }
    return {GestureClass::Neutral, *c};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + std::string(task) + "'");
}

Dataset regenerate(const Dataset& reference, int frame_rate) {
  if (!is_supported_rate(frame_rate)) {
    throw Error(ErrorCode::IncompatibleRate, std::to_string(frame_rate) + " fps is not supported");
  }
  std::optional<SceneProfile> indoor;
  std::optional<SceneProfile> outdoor;
  for (const auto& s : reference.scenes) {
    (s.kind == SceneKind::Indoor ? indoor : outdoor) = s;
  }
  if (!indoor || !outdoor || reference.actors.empty()) {
    throw Error(ErrorCode::InvalidArgument, "dataset lacks the generator parameters");
  }
  GeneratorConfig cfg;
  cfg.noise_scale = reference.noise_scale;
  return synthesize_dataset(reference.actors, *indoor, *outdoor, frame_rate, reference.master_seed,
                            reference.class_count, cfg);
}

Dataset validation_sequences(const Dataset& dataset, const TrainConfig& config) {
  Dataset out = dataset;
  out.sequences.clear();
  std::string actor = config.split.actor_id;
  if (config.split.kind == SplitKind::LeaveOneActorOut) {
    bool known = false;
    for (const auto& a : dataset.actors) known = known || a.actor_id == actor;
    if (!known) {
      const int idx = std::atoi(actor.c_str());
      if (std::to_string(idx) == actor && idx >= 0 && static_cast<std::size_t>(idx) < dataset.actors.size()) {
        actor = dataset.actors[static_cast<std::size_t>(idx)].actor_id;
      }
    }
  }
  for (const auto& seq : dataset.sequences) {
    bool keep = true;
    if (config.split.kind == SplitKind::LeaveOneActorOut) keep = seq.actor_id == actor;
    if (config.split.kind == SplitKind::SceneBased) keep = seq.scene != config.split.train_scene;
    if (keep) out.sequences.push_back(seq);
  }
  return out;
}

std::optional<SweepAxis> parse_sweep_axis(std::string_view name) noexcept {
  if (name == "hidden") return SweepAxis::Hidden;
  if (name == "fps") return SweepAxis::Fps;
  if (name == "alpha-w") return SweepAxis::AlphaW;
  return std::nullopt;
}

std::string_view sweep_axis_name(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::Hidden: return "hidden";
    case SweepAxis::Fps: return "fps";
    case SweepAxis::AlphaW: return "alpha-w";
  }
  return "hidden";
}

std::vector<SweepRow> SweepOutcome::rows() const {
  std::vector<SweepRow> out;
  for (const auto& s : settings) {
    for (std::size_t r = 0; r < s.report.runs.size(); ++r) {
      const auto& run = s.report.runs[r];
      const int id = static_cast<int>(r);
      for (const auto& e : run.history) {
        out.push_back({id, s.label, e.epoch, "train_loss", e.train_loss});
        out.push_back({id, s.label, e.epoch, "val_accuracy", e.val_accuracy});
        out.push_back({id, s.label, e.epoch, "lr", e.lr});
      }
      out.push_back({id, s.label, run.best_epoch, "peak_val_accuracy", run.peak_val_accuracy});
    }
  }
  return out;
}

SweepOutcome sweep(const Dataset& dataset, const TrainConfig& base, SweepAxis axis,
                   std::span<const double> values, int repeats, int threads) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "empty sweep");
  SweepOutcome out;
  out.axis = axis;
  for (double v : values) {
    TrainConfig config = base;
    SweepSetting setting;
    setting.value = v;
    std::optional<Dataset> regenerated;
    switch (axis) {
      case SweepAxis::Hidden: {
        if (v < 1.0 || v != std::floor(v)) throw Error(ErrorCode::InvalidArgument, "hidden sizes are positive integers");
        config.hidden = static_cast<int>(v);
        setting.label = "hidden=" + std::to_string(config.hidden);
        break;
      }
      case SweepAxis::Fps: {
        if (v != std::floor(v)) throw Error(ErrorCode::IncompatibleRate, "fractional frame rate");
        const int fps = static_cast<int>(v);
        if (fps != dataset.frame_rate) regenerated = regenerate(dataset, fps);
        setting.label = "fps=" + std::to_string(fps);
        break;
      }
      case SweepAxis::AlphaW: {
        if (v < 0.0) throw Error(ErrorCode::InvalidArgument, "alpha_w must be non-negative");
        config.features.alpha_w = v;
        setting.label = "alpha_w=" + format_double(v);
        break;
      }
    }
    setting.report = repeat_runs(regenerated ? *regenerated : dataset, config, repeats, threads);
    out.settings.push_back(std::move(setting));
  }
  return out;
}

}  // namespace egogest
