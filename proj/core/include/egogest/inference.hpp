#pragma once

// Online recognition: frame-pair features are buffered into batches of K,
// each batch runs through the model continuing from the carried LSTM state.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "egogest/features.hpp"
#include "egogest/model.hpp"

namespace egogest {

struct StreamOptions {
  int k = 10;
  bool carry = true;  // false restarts every batch from a zero state
};

struct BatchResult {
  std::int64_t first_frame = 0;
  std::vector<int> labels;  // unfiltered frame-wise labels
  int voted = 0;
  double seconds = 0.0;  // wall time of the model pass
};

class StreamState {
 public:
  /// `model` must outlive the stream. An empty `stats` skips normalization.
  StreamState(const ModelState& model, FeatureStats stats, LayoutTag layout, StreamOptions options = {});

  /// Buffers one raw feature; returns a result when K are buffered.
  std::optional<BatchResult> ingest(const MotionFeature& feature);
  /// Runs the residual (< K) buffer as a short batch, if any.
  std::optional<BatchResult> flush();

  int buffered() const noexcept { return static_cast<int>(buffer_.size()); }
  std::int64_t frames_ingested() const noexcept { return ingested_; }
  std::int64_t frames_emitted() const noexcept { return emitted_; }
  const std::vector<double>& batch_seconds() const noexcept { return batch_seconds_; }
  const RecurrentState& recurrent() const noexcept { return recurrent_; }
  const StreamOptions& options() const noexcept { return options_; }

 private:
  BatchResult run_buffer();

  const ModelState* model_;
  FeatureStats stats_;
  LayoutTag layout_;
  StreamOptions options_;
  std::vector<std::vector<double>> buffer_;
  RecurrentState recurrent_;
  std::int64_t ingested_ = 0;
  std::int64_t emitted_ = 0;
  std::vector<double> batch_seconds_;
};

/// Most frequent label; ties go to the tied label occurring latest.
int majority_vote(std::span<const int> labels);

struct TimeRecord {
  int frame = 0;
  int truth = 0;
  int predicted = 0;
  bool hit = false;
};

struct ClassHits {
  long frames = 0;
  long hits = 0;

  double accuracy() const noexcept { return frames > 0 ? static_cast<double>(hits) / frames : 0.0; }
};

/// One gesture instance: a maximal run of one non-Neutral true label.
struct OnsetRecord {
  int start = 0;
  int end = 0;  // exclusive
  int truth = 0;
  bool detected = false;
};

struct TimeDiagram {
  std::vector<TimeRecord> records;
  std::vector<ClassHits> per_class;
  std::vector<OnsetRecord> onsets;
};

/// An instance counts as detected when a K-aligned stream batch overlapping
/// its first second votes for the true label. Label 0 is Neutral.
TimeDiagram time_diagram(std::span<const int> predicted, std::span<const int> truth, int frame_rate,
                         int classes, int k = 10);

struct LatencyVerdict {
  int frame_rate = 0;
  double budget_seconds = 0.0;  // K / f
  bool real_time = false;       // p95 < budget
};

struct LatencyReport {
  int k = 0;
  std::size_t batches = 0;
  double mean_seconds = 0.0;
  double p95_seconds = 0.0;
  double max_seconds = 0.0;
  std::vector<LatencyVerdict> verdicts;
};

LatencyReport latency_report(std::span<const double> batch_seconds, int k,
                             std::span<const int> frame_rates = std::array{10, 20, 30});

}  // namespace egogest
