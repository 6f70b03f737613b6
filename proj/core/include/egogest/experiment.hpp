#pragma once

// Experiment plumbing shared by the CLI and the acceptance harness: label
// spaces, dataset regeneration at another frame rate, and parameter sweeps.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egogest/dataio.hpp"
#include "egogest/kinematics.hpp"
#include "egogest/training.hpp"

namespace egogest {

/// Neutral followed by the dataset's gesture classes.
std::vector<GestureClass> dataset_classes(const Dataset& dataset);

/// "all" -> dataset_classes; "binary:<Class>" -> {Neutral, Class}.
std::vector<GestureClass> task_classes(const Dataset& dataset, std::string_view task);

/// The same dataset (seed, actors, scenes, noise) synthesized at `frame_rate`.
Dataset regenerate(const Dataset& reference, int frame_rate);

/// Sequences whose frames end up in the validation split of `config`
/// (every sequence for a stratified split).
Dataset validation_sequences(const Dataset& dataset, const TrainConfig& config);

enum class SweepAxis { Hidden, Fps, AlphaW };

std::optional<SweepAxis> parse_sweep_axis(std::string_view name) noexcept;
std::string_view sweep_axis_name(SweepAxis axis) noexcept;

struct SweepSetting {
  std::string label;
  double value = 0.0;
  RepeatReport report;
};

struct SweepOutcome {
  SweepAxis axis = SweepAxis::Hidden;
  std::vector<SweepSetting> settings;

  /// Long format: per run and epoch the train loss, validation accuracy and
  /// learning rate, plus one peak_val_accuracy row per run at its best epoch.
  std::vector<SweepRow> rows() const;
};

/// `repeats` seeded runs per value; frame-rate sweeps regenerate the data.
SweepOutcome sweep(const Dataset& dataset, const TrainConfig& base, SweepAxis axis,
                   std::span<const double> values, int repeats, int threads = 1);

}  // namespace egogest
