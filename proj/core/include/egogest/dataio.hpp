#pragma once

// Text formats: a JSON manifest plus one CSV file per sequence, JSON
// checkpoints and CSV reports. Doubles are written with 17 significant
// digits so every reader reproduces the written values exactly.

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "egogest/features.hpp"
#include "egogest/inference.hpp"
#include "egogest/kinematics.hpp"
#include "egogest/model.hpp"
#include "egogest/training.hpp"

namespace egogest {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kSequenceFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

/// Decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Whole-token parse; throws MalformedRecord on trailing garbage.
double parse_double(std::string_view token, const std::string& where);
long parse_integer(std::string_view token, const std::string& where);

// ---- sequences -------------------------------------------------------------

void write_sequence(std::ostream& os, const LabeledSequence& seq);
void write_sequence(const std::filesystem::path& path, const LabeledSequence& seq);

/// Incremental reader for the sequence format; `stream` mode feeds frames
/// as they arrive.
class SequenceReader {
 public:
  SequenceReader(std::istream& is, std::string source);

  int frame_rate() const noexcept { return frame_rate_; }
  /// Next frame, or nullopt at end of input.
  std::optional<FrameRecord> next();

 private:
  std::string where() const;

  std::istream& is_;
  std::string source_;
  int line_ = 0;
  int frame_rate_ = 0;
  int expected_index_ = 0;
};

/// Frames and frame rate only; session metadata lives in the manifest.
LabeledSequence read_sequence(std::istream& is, const std::string& source);
LabeledSequence read_sequence(const std::filesystem::path& path);

// ---- datasets --------------------------------------------------------------

std::string sequence_file_name(std::size_t index);
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

// ---- configs and checkpoints -------------------------------------------------

std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text);

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  TrainConfig config;
  ModelState model;
  FeatureStats stats;
  int best_epoch = 0;
  double peak_val_accuracy = 0.0;
  std::vector<EpochRecord> history;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Throws ShapeMismatch when the checkpoint's model does not fit `config`.
void check_compatible(const Checkpoint& ckpt, const TrainConfig& config);

// ---- reports ---------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Rejects rows whose width differs from the header.
CsvTable read_csv(const std::filesystem::path& path);

/// Header "truth\predicted" followed by the class names; one row per true class.
void write_confusion_csv(const std::filesystem::path& path, const MetricsReport& report);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path, std::vector<std::string>* names = nullptr);
/// class,precision,recall,f1,support
void write_class_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);
/// epoch,train_loss,val_accuracy,lr
void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);
std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path);
/// frame,truth,predicted,hit
void write_time_diagram_csv(const std::filesystem::path& path, const TimeDiagram& diagram);
/// run,seed,peak_val_accuracy
void write_repeats_csv(const std::filesystem::path& path, const RepeatReport& report);

struct SweepRow {
  int run = 0;
  std::string setting;
  int epoch = 0;
  std::string metric;
  double value = 0.0;
};

/// run,setting,epoch,metric,value
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

}  // namespace egogest
