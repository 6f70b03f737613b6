#include "egogest/training.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <map>
#include <iterator>
#include <numeric>
#include <optional>
#include <thread>

#include "egogest/error.hpp"
#include "egogest/random.hpp"

namespace egogest {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

std::optional<long> parse_long(std::string_view s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

SequenceBatch make_batch(std::span<const Snippet> snippets, std::span<const std::size_t> order,
                         std::size_t begin, std::size_t end, std::vector<int>& labels) {
  const auto m = static_cast<int>(end - begin);
  const int steps = static_cast<int>(snippets[order[begin]].labels.size());
  const auto dim = snippets[order[begin]].features.cols();
  SequenceBatch batch{m, steps, RowMatrix(static_cast<Eigen::Index>(steps) * m, dim)};
  labels.assign(static_cast<std::size_t>(steps) * static_cast<std::size_t>(m), 0);
  for (int j = 0; j < m; ++j) {
    const Snippet& s = snippets[order[begin + static_cast<std::size_t>(j)]];
    for (int t = 0; t < steps; ++t) {
      const auto row = static_cast<Eigen::Index>(t) * m + j;
      batch.data.row(row) = s.features.row(t);
      labels[static_cast<std::size_t>(row)] = s.labels[static_cast<std::size_t>(t)];
    }
  }
  return batch;
}

std::string resolve_actor(const std::string& wanted, const Dataset& dataset) {
  for (const auto& a : dataset.actors) {
    if (a.actor_id == wanted) return wanted;
  }
  if (const auto idx = parse_long(wanted); idx && *idx >= 0 &&
                                           static_cast<std::size_t>(*idx) < dataset.actors.size()) {
    return dataset.actors[static_cast<std::size_t>(*idx)].actor_id;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown actor '" + wanted + "'");
}

}  // namespace

SplitSpec SplitSpec::parse(std::string_view text) {
  SplitSpec spec;
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? "" : text.substr(colon + 1);
  if (head == "stratified") {
    spec.kind = SplitKind::Stratified;
    if (!arg.empty()) {
      double f = 0.0;
      const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), f);
      if (ec != std::errc() || ptr != arg.data() + arg.size() || !(f > 0.0 && f < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "bad train fraction '" + std::string(arg) + "'");
      }
      spec.train_fraction = f;
    }
    return spec;
  }
  if (head == "actor" && !arg.empty()) {
    spec.kind = SplitKind::LeaveOneActorOut;
    spec.actor_id = std::string(arg);
    return spec;
  }
  if (head == "scene") {
    const auto scene = parse_scene(arg);
    if (scene) {
      spec.kind = SplitKind::SceneBased;
      spec.train_scene = *scene;
      return spec;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

std::string SplitSpec::to_string() const {
  switch (kind) {
    case SplitKind::Stratified: return "stratified";
    case SplitKind::LeaveOneActorOut: return "actor:" + actor_id;
    case SplitKind::SceneBased: return "scene:" + std::string(scene_name(train_scene));
  }
  return "stratified";
}

void TrainConfig::validate() const {
  require(snippet_length >= 1, "snippet length must be positive");
  require(overlap >= 0 && overlap < snippet_length, "overlap must satisfy 0 <= O < S");
  require(batch_size >= 1, "batch size must be positive");
  require(epochs >= 1, "epochs must be positive");
  require(lr >= 0.0 && std::isfinite(lr), "learning rate must be non-negative");
  require(weight_decay >= 0.0, "weight decay must be non-negative");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam eps must be positive");
  require(scheduler.factor > 0.0 && scheduler.factor < 1.0, "scheduler factor must lie in (0, 1)");
  require(scheduler.patience >= 0, "scheduler patience must be non-negative");
  require(scheduler.min_lr >= 0.0, "min lr must be non-negative");
  require(undersample_ratio > 0.0, "under-sampling ratio must be positive");
  require(split.train_fraction > 0.0 && split.train_fraction < 1.0, "train fraction must lie in (0, 1)");
  require(hidden >= 1, "hidden size must be positive");
  require(classes.size() >= 2, "need at least two classes");
  require(classes.front() == GestureClass::Neutral, "the first class must be Neutral");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (std::size_t j = i + 1; j < classes.size(); ++j) {
      require(classes[i] != classes[j], "duplicate class in label space");
    }
  }
  require(bn_momentum > 0.0 && bn_momentum <= 1.0, "bn momentum must lie in (0, 1]");
  require(bn_eps > 0.0, "bn eps must be positive");
  require(features.channels != Channels::Both || (features.alpha_w >= 0.0 && features.alpha_e >= 0.0),
          "channel weights must be non-negative");
}

ModelDims TrainConfig::dims() const {
  return {static_cast<int>(features.dim()), hidden, static_cast<int>(classes.size())};
}

std::vector<std::string> TrainConfig::class_names() const {
  std::vector<std::string> names;
  for (auto c : classes) names.emplace_back(class_name(c));
  return names;
}

std::vector<PreparedSequence> prepare_sequences(const Dataset& dataset, const TrainConfig& config) {
  std::array<int, kGestureClassCount> index{};
  index.fill(-1);
  for (std::size_t i = 0; i < config.classes.size(); ++i) {
    index[static_cast<std::size_t>(class_id(config.classes[i]))] = static_cast<int>(i);
  }
  std::vector<PreparedSequence> out;
  for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
    const auto& seq = dataset.sequences[i];
    if (index[static_cast<std::size_t>(class_id(seq.session_class))] < 0) continue;
    PreparedSequence p;
    p.id = static_cast<int>(i);
    p.actor_id = seq.actor_id;
    p.scene = seq.scene;
    p.features = sequence_features(seq, config.features);
    p.labels.reserve(seq.frames.size());
    for (const auto& f : seq.frames) {
      const int id = index[static_cast<std::size_t>(class_id(f.label))];
      if (id < 0) {
        throw Error(ErrorCode::LabelOutOfRange, "frame label " + std::string(class_name(f.label)) +
                                                    " is outside the label space");
      }
      p.labels.push_back(id);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<int> snippet_starts(int length, int snippet_length, int overlap) {
  if (snippet_length < 1 || overlap < 0 || overlap >= snippet_length) {
    throw Error(ErrorCode::InvalidArgument, "snippet geometry must satisfy 0 <= O < S");
  }
  if (length < snippet_length) {
    throw Error(ErrorCode::SequenceTooShort, "sequence of " + std::to_string(length) +
                                                 " frames is shorter than " +
                                                 std::to_string(snippet_length));
  }
  const int stride = snippet_length - overlap;
  std::vector<int> starts;
  for (int s = 0; s + snippet_length <= length; s += stride) starts.push_back(s);
  return starts;
}

int majority_label(std::span<const int> labels) {
  if (labels.empty()) throw Error(ErrorCode::InvalidArgument, "empty label window");
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  int best = counts.begin()->first;
  int best_count = 0;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

std::vector<Snippet> extract_snippets(const PreparedSequence& seq, int snippet_length, int overlap) {
  if (static_cast<std::size_t>(seq.features.rows()) != seq.labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "features and labels disagree in length");
  }
  std::vector<Snippet> out;
  for (int start : snippet_starts(static_cast<int>(seq.labels.size()), snippet_length, overlap)) {
    Snippet s;
    s.features = seq.features.middleRows(start, snippet_length);
    s.labels.assign(seq.labels.begin() + start, seq.labels.begin() + start + snippet_length);
    s.sequence = seq.id;
    s.start = start;
    s.majority = majority_label(s.labels);
    s.actor_id = seq.actor_id;
    s.scene = seq.scene;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Snippet> undersample_neutral(std::vector<Snippet> snippets, double ratio,
                                         std::uint64_t seed, int neutral_label) {
  if (!(ratio > 0.0)) throw Error(ErrorCode::InvalidArgument, "under-sampling ratio must be positive");
  std::map<int, std::size_t> counts;
  std::vector<std::size_t> neutral;
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    if (snippets[i].majority == neutral_label) {
      neutral.push_back(i);
    } else {
      ++counts[snippets[i].majority];
    }
  }
  if (neutral.empty() || counts.empty()) return snippets;
  double total = 0.0;
  for (const auto& [label, n] : counts) total += static_cast<double>(n);
  const auto cap = static_cast<std::size_t>(std::floor(ratio * total / static_cast<double>(counts.size())));
  if (neutral.size() <= cap) return snippets;

  Rng rng(seed);
  std::shuffle(neutral.begin(), neutral.end(), rng);
  std::vector<bool> drop(snippets.size(), false);
  for (std::size_t i = cap; i < neutral.size(); ++i) drop[neutral[i]] = true;
  std::vector<Snippet> kept;
  kept.reserve(snippets.size() - (neutral.size() - cap));
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    if (!drop[i]) kept.push_back(std::move(snippets[i]));
  }
  return kept;
}

SplitResult split_snippets(std::vector<Snippet> snippets, const SplitSpec& spec, std::uint64_t seed) {
  std::vector<bool> to_train(snippets.size(), false);
  switch (spec.kind) {
    case SplitKind::Stratified: {
      if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
      }
      std::map<int, std::vector<std::size_t>> groups;
      for (std::size_t i = 0; i < snippets.size(); ++i) groups[snippets[i].majority].push_back(i);
      Rng rng(seed);
      for (auto& [label, members] : groups) {
        if (members.size() < 2) {
          throw Error(ErrorCode::InsufficientClassMembers,
                      "class " + std::to_string(label) + " has fewer than 2 snippets");
        }
        const auto n = static_cast<double>(members.size());
        const auto k = std::clamp<long>(std::lround(spec.train_fraction * n), 1,
                                        static_cast<long>(members.size()) - 1);
        std::shuffle(members.begin(), members.end(), rng);
        for (long i = 0; i < k; ++i) to_train[members[static_cast<std::size_t>(i)]] = true;
      }
      break;
    }
    case SplitKind::LeaveOneActorOut: {
      bool held = false;
      bool other = false;
      for (std::size_t i = 0; i < snippets.size(); ++i) {
        to_train[i] = snippets[i].actor_id != spec.actor_id;
        (to_train[i] ? other : held) = true;
      }
      if (!held || !other) {
        throw Error(ErrorCode::InsufficientClassMembers,
                    "leave-one-actor-out needs snippets of '" + spec.actor_id + "' and of another actor");
      }
      break;
    }
    case SplitKind::SceneBased: {
      bool train_any = false;
      bool val_any = false;
      for (std::size_t i = 0; i < snippets.size(); ++i) {
        to_train[i] = snippets[i].scene == spec.train_scene;
        (to_train[i] ? train_any : val_any) = true;
      }
      if (!train_any || !val_any) {
        throw Error(ErrorCode::InsufficientClassMembers, "scene split needs both scene kinds");
      }
      break;
    }
  }
  SplitResult out;
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    (to_train[i] ? out.train : out.validation).push_back(std::move(snippets[i]));
  }
  return out;
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const AdamHyper& hyper) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "parameter/gradient count");
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match the parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || state.m[k].size() != params[k].size() ||
        state.v[k].size() != params[k].size()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter group " + std::to_string(k) + " shape mismatch");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - hyper.lr * hyper.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      double& p = params[k][i];
      double g = grads[k][i];
      if (hyper.decoupled) {
        p *= decay;
      } else {
        g += hyper.weight_decay * p;
      }
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
      p -= hyper.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + hyper.eps);
    }
  }
}

double PlateauScheduler::step(double metric) {
  if (metric > best_ + config_.threshold) {
    best_ = metric;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= config_.patience) {
    const double reduced = std::max(lr_ * config_.factor, config_.min_lr);
    if (reduced < lr_) ++reductions_;
    lr_ = reduced;
    bad_epochs_ = 0;
  }
  return lr_;
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw Error(ErrorCode::LabelOutOfRange, "label outside the confusion matrix");
  }
  ++counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
}

long ConfusionMatrix::at(int truth, int predicted) const {
  return counts_.at(static_cast<std::size_t>(truth * classes_ + predicted));
}

long ConfusionMatrix::row_total(int truth) const {
  long s = 0;
  for (int p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

long ConfusionMatrix::column_total(int predicted) const {
  long s = 0;
  for (int t = 0; t < classes_; ++t) s += at(t, predicted);
  return s;
}

long ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0L); }

long ConfusionMatrix::trace() const {
  long s = 0;
  for (int c = 0; c < classes_; ++c) s += at(c, c);
  return s;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, std::vector<std::string> names) {
  if (static_cast<int>(names.size()) != cm.classes()) {
    throw Error(ErrorCode::ShapeMismatch, "class names do not match the confusion matrix");
  }
  MetricsReport r;
  r.class_names = std::move(names);
  r.confusion = cm;
  const long total = cm.total();
  r.accuracy = total > 0 ? static_cast<double>(cm.trace()) / static_cast<double>(total) : 0.0;
  for (int c = 0; c < cm.classes(); ++c) {
    ClassMetrics m;
    const auto tp = static_cast<double>(cm.at(c, c));
    const long predicted = cm.column_total(c);
    m.support = cm.row_total(c);
    m.precision = predicted > 0 ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = m.support > 0 ? tp / static_cast<double>(m.support) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.per_class.push_back(m);
  }
  return r;
}

double snippet_accuracy(const ModelState& model, std::span<const Snippet> snippets, int batch_size,
                        ConfusionMatrix* confusion) {
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  ConfusionMatrix local(model.dims.classes);
  ConfusionMatrix& cm = confusion != nullptr ? *confusion : local;
  if (cm.classes() != model.dims.classes) cm = ConfusionMatrix(model.dims.classes);
  std::vector<std::size_t> order(snippets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> labels;
  long correct = 0;
  long total = 0;
  for (std::size_t b = 0; b < snippets.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(snippets.size(), b + static_cast<std::size_t>(batch_size));
    const SequenceBatch batch = make_batch(snippets, order, b, e, labels);
    const RowMatrix logits = forward(model, batch, Mode::Eval);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const int pred = argmax(logits.row(r).transpose());
      const int truth = labels[static_cast<std::size_t>(r)];
      cm.add(truth, pred);
      correct += pred == truth ? 1 : 0;
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

PreparedData prepare_training_data(const Dataset& dataset, const TrainConfig& config,
                                   const FeatureStats* stats) {
  config.validate();
  const auto sequences = prepare_sequences(dataset, config);
  if (sequences.empty()) throw Error(ErrorCode::InvalidArgument, "no sequences in the label space");

  std::vector<Snippet> snippets;
  for (const auto& seq : sequences) {
    auto s = extract_snippets(seq, config.snippet_length, config.overlap);
    std::move(s.begin(), s.end(), std::back_inserter(snippets));
  }

  SplitSpec split = config.split;
  if (split.kind == SplitKind::LeaveOneActorOut) split.actor_id = resolve_actor(split.actor_id, dataset);
  auto parts = split_snippets(std::move(snippets), split, derive_seed(config.seed, kSplitSeedStream));

  PreparedData data;
  data.train = undersample_neutral(std::move(parts.train), config.undersample_ratio,
                                   derive_seed(config.seed, kUndersampleSeedStream));
  data.validation = std::move(parts.validation);

  if (stats != nullptr) {
    data.stats = *stats;
  } else {
    Eigen::MatrixXd stacked(static_cast<Eigen::Index>(data.train.size()) * config.snippet_length,
                            static_cast<Eigen::Index>(config.features.dim()));
    for (std::size_t i = 0; i < data.train.size(); ++i) {
      stacked.middleRows(static_cast<Eigen::Index>(i) * config.snippet_length, config.snippet_length) =
          data.train[i].features;
    }
    data.stats = fit_stats(stacked);
  }
  for (auto& s : data.train) normalize_rows(s.features, data.stats);
  for (auto& s : data.validation) normalize_rows(s.features, data.stats);
  return data;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch) {
  PreparedData data = prepare_training_data(dataset, config);

  ModelState model = ModelState::initialize(config.dims(), derive_seed(config.seed, kInitSeedStream));
  model.layout = config.features.layout().to_string();
  model.bn.momentum = config.bn_momentum;
  model.bn.eps = config.bn_eps;

  AdamState adam;
  AdamHyper hyper{config.lr, config.weight_decay, config.beta1, config.beta2, config.adam_eps,
                  config.decoupled_weight_decay};
  PlateauScheduler scheduler(config.lr, config.scheduler);
  Rng rng(derive_seed(config.seed, kShuffleSeedStream));

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> labels;
  ForwardCache cache;

  TrainResult result;
  result.config = config;
  result.stats = data.stats;
  result.model = model;
  MetricsReport& report = result.report;
  report.peak_val_accuracy = -1.0;

  const auto m = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    hyper.lr = scheduler.lr();
    double loss_sum = 0.0;
    std::size_t frames = 0;
    for (std::size_t b = 0; b < order.size(); b += m) {
      const std::size_t e = std::min(order.size(), b + m);
      const SequenceBatch batch = make_batch(data.train, order, b, e, labels);
      const RowMatrix logits = forward(model, batch, Mode::Train, &cache);
      const LossResult loss = nll_loss(logits, labels);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorCode::Divergence, "non-finite training loss in epoch " + std::to_string(epoch));
      }
      const Gradients grads = backward(model, cache, loss.grad);
      update_running_stats(model.bn, cache);
      const auto g = grads.views();
      const auto p = parameter_views(model);
      adam_step(p, g, adam, hyper);
      loss_sum += loss.loss * static_cast<double>(labels.size());
      frames += labels.size();
    }

    const double val = snippet_accuracy(model, data.validation, config.batch_size);
    EpochRecord record{epoch, frames > 0 ? loss_sum / static_cast<double>(frames) : 0.0, val, hyper.lr};
    report.history.push_back(record);
    if (val > report.peak_val_accuracy) {
      report.peak_val_accuracy = val;
      report.best_epoch = epoch;
      result.model = model;
    }
    scheduler.step(val);
    if (on_epoch) on_epoch(record);
  }

  ConfusionMatrix cm(model.dims.classes);
  snippet_accuracy(result.model, data.validation, config.batch_size, &cm);
  auto history = std::move(report.history);
  const double peak = report.peak_val_accuracy;
  const int best = report.best_epoch;
  report = metrics_from_confusion(cm, config.class_names());
  report.history = std::move(history);
  report.peak_val_accuracy = peak;
  report.best_epoch = best;
  return result;
}

DistributionSummary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "no values to summarize");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  DistributionSummary s;
  s.max = v.back();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  auto quantile = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  return s;
}

RepeatReport repeat_runs(const Dataset& dataset, const TrainConfig& config, int n, int threads) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need at least one run");
  config.validate();
  RepeatReport report;
  report.runs.resize(static_cast<std::size_t>(n));
  report.peaks.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    report.seeds.push_back(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
  }

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::optional<TrainResult>> results(static_cast<std::size_t>(n));
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        TrainConfig c = config;
        c.seed = report.seeds[static_cast<std::size_t>(i)];
        results[static_cast<std::size_t>(i)] = train(dataset, c);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, n);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < results.size(); ++i) {
    report.peaks[i] = results[i]->report.peak_val_accuracy;
    report.runs[i] = results[i]->report;
    if (report.peaks[i] > report.peaks[report.best_run]) report.best_run = i;
  }
  report.best = std::move(results[report.best_run]);
  report.summary = summarize(report.peaks);
  return report;
}

MetricsReport evaluate(const ModelState& model, const FeatureStats& stats, const TrainConfig& config,
                       const Dataset& dataset, std::vector<SequencePrediction>* predictions) {
  if (!(model.dims == config.dims())) {
    throw Error(ErrorCode::ShapeMismatch, "model dimensions do not match the configuration");
  }
  if (stats.size() != static_cast<std::size_t>(model.dims.input)) {
    throw Error(ErrorCode::ShapeMismatch, "feature statistics do not match the model input");
  }
  ConfusionMatrix cm(model.dims.classes);
  for (auto& seq : prepare_sequences(dataset, config)) {
    normalize_rows(seq.features, stats);
    const auto pred = predict_framewise(model, seq.features);
    for (std::size_t t = 0; t < seq.labels.size(); ++t) cm.add(seq.labels[t], pred.labels[t]);
    if (predictions != nullptr) predictions->push_back({seq.id, seq.labels, pred.labels});
  }
  return metrics_from_confusion(cm, config.class_names());
}

int epochs_to_fraction(std::span<const EpochRecord> history, double fraction) {
  if (history.empty()) throw Error(ErrorCode::InvalidArgument, "empty history");
  const double target = fraction * history.back().val_accuracy;
  for (const auto& r : history) {
    if (r.val_accuracy >= target) return r.epoch;
  }
  return history.back().epoch;
}

}  // namespace egogest
