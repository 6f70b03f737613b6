#pragma once

// Snippet extraction, class rebalancing, splits, Adam, plateau scheduling,
// metrics and the training / repetition harness.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "egogest/features.hpp"
#include "egogest/kinematics.hpp"
#include "egogest/model.hpp"

namespace egogest {

/// Child-seed indices under a run seed: derive_seed(seed, k...SeedStream).
inline constexpr std::uint64_t kSplitSeedStream = 10;
inline constexpr std::uint64_t kUndersampleSeedStream = 11;
inline constexpr std::uint64_t kInitSeedStream = 12;
inline constexpr std::uint64_t kShuffleSeedStream = 13;

enum class SplitKind { Stratified, LeaveOneActorOut, SceneBased };

struct SplitSpec {
  SplitKind kind = SplitKind::Stratified;
  double train_fraction = 0.75;
  std::string actor_id;                     // held-out actor
  SceneKind train_scene = SceneKind::Indoor;

  /// "stratified", "actor:<id or index>", "scene:indoor|outdoor".
  static SplitSpec parse(std::string_view text);
  std::string to_string() const;
};

struct SchedulerConfig {
  double factor = 0.5;
  int patience = 3;
  double min_lr = 1e-5;
  double threshold = 1e-4;  // absolute improvement that resets patience
};

struct TrainConfig {
  int snippet_length = 40;
  int overlap = 30;
  int batch_size = 32;
  int epochs = 30;
  double lr = 5e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool decoupled_weight_decay = true;
  SchedulerConfig scheduler{};
  double undersample_ratio = 1.5;
  SplitSpec split{};
  std::uint64_t seed = 0;
  FeatureSpec features{};
  int hidden = 128;
  /// Label space; index 0 must be Neutral.
  std::vector<GestureClass> classes = {GestureClass::Neutral, GestureClass::ComeHere,
                                       GestureClass::NoddingHead, GestureClass::ShakingHead,
                                       GestureClass::Maybe};
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  void validate() const;
  ModelDims dims() const;
  std::vector<std::string> class_names() const;
};

/// One sequence turned into model inputs: unnormalized features and labels
/// mapped into the config's label space.
struct PreparedSequence {
  int id = 0;
  std::string actor_id;
  SceneKind scene = SceneKind::Indoor;
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

struct Snippet {
  Eigen::MatrixXd features;  // S x D
  std::vector<int> labels;   // S
  int sequence = 0;
  int start = 0;
  int majority = 0;
  std::string actor_id;
  SceneKind scene = SceneKind::Indoor;
};

/// Sequences of `dataset` whose session class is in the label space.
std::vector<PreparedSequence> prepare_sequences(const Dataset& dataset, const TrainConfig& config);

/// Start frames at stride S - O from 0; a trailing remainder < S is dropped.
std::vector<int> snippet_starts(int length, int snippet_length, int overlap);
std::vector<Snippet> extract_snippets(const PreparedSequence& seq, int snippet_length, int overlap);
/// Most frequent label; ties go to the lowest id.
int majority_label(std::span<const int> labels);

/// Randomly drops Neutral-majority snippets until at most
/// ratio * (mean count of the other majority classes) remain.
std::vector<Snippet> undersample_neutral(std::vector<Snippet> snippets, double ratio,
                                         std::uint64_t seed, int neutral_label = 0);

struct SplitResult {
  std::vector<Snippet> train;
  std::vector<Snippet> validation;
};

SplitResult split_snippets(std::vector<Snippet> snippets, const SplitSpec& spec, std::uint64_t seed);

struct AdamHyper {
  double lr = 5e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool decoupled = true;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const AdamHyper& hyper);

/// Reduce-on-plateau for a metric that should increase.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, SchedulerConfig config) : lr_(lr), config_(config) {}

  double step(double metric);
  double lr() const noexcept { return lr_; }
  int reductions() const noexcept { return reductions_; }

 private:
  double lr_;
  SchedulerConfig config_;
  double best_ = -1e300;
  int bad_epochs_ = 0;
  int reductions_ = 0;
};

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes = 0)
      : classes_(classes), counts_(static_cast<std::size_t>(classes * classes), 0) {}

  void add(int truth, int predicted);
  long at(int truth, int predicted) const;
  long row_total(int truth) const;
  long column_total(int predicted) const;
  long total() const;
  long trace() const;
  int classes() const noexcept { return classes_; }

 private:
  int classes_;
  std::vector<long> counts_;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<EpochRecord> history;
  double peak_val_accuracy = 0.0;
  int best_epoch = 0;
};

/// Precision / recall / F1 with 0/0 defined as 0.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, std::vector<std::string> names);

/// Frame-wise accuracy of eval-mode predictions over snippets, processed in
/// fixed chunks of `batch_size` (zero initial state per snippet).
double snippet_accuracy(const ModelState& model, std::span<const Snippet> snippets, int batch_size,
                        ConfusionMatrix* confusion = nullptr);

struct PreparedData {
  std::vector<Snippet> train;       // undersampled, normalized
  std::vector<Snippet> validation;  // normalized
  FeatureStats stats;
};

/// Feature extraction, snippets, split, undersampling and normalization,
/// all seeded from config.seed. Statistics are fit on the training snippets
/// unless `stats` is given.
PreparedData prepare_training_data(const Dataset& dataset, const TrainConfig& config,
                                   const FeatureStats* stats = nullptr);

struct TrainResult {
  ModelState model;  // best epoch
  FeatureStats stats;
  MetricsReport report;  // validation metrics of the best epoch + history
  TrainConfig config;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Throws Divergence on a non-finite training loss.
TrainResult train(const Dataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch = {});

struct DistributionSummary {
  double max = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (0 for n = 1)
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

DistributionSummary summarize(std::span<const double> values);

struct RepeatReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> peaks;
  std::vector<MetricsReport> runs;
  DistributionSummary summary;
  std::size_t best_run = 0;  // highest peak, lowest index on ties
  std::optional<TrainResult> best;
};

/// `n` runs with seeds derive_seed(config.seed, i); `threads` > 1 runs them
/// concurrently with identical results.
RepeatReport repeat_runs(const Dataset& dataset, const TrainConfig& config, int n, int threads = 1);

struct SequencePrediction {
  int sequence = 0;
  std::vector<int> truth;
  std::vector<int> predicted;
};

/// Whole-sequence frame-wise evaluation with hidden state carried within
/// each sequence.
MetricsReport evaluate(const ModelState& model, const FeatureStats& stats, const TrainConfig& config,
                       const Dataset& dataset, std::vector<SequencePrediction>* predictions = nullptr);

/// First epoch whose validation accuracy reaches `fraction` of the final one.
int epochs_to_fraction(std::span<const EpochRecord> history, double fraction);

}  // namespace egogest
