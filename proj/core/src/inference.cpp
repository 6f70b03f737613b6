#include "egogest/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "egogest/error.hpp"

namespace egogest {

StreamState::StreamState(const ModelState& model, FeatureStats stats, LayoutTag layout,
                         StreamOptions options)
    : model_(&model),
      stats_(std::move(stats)),
      layout_(layout),
      options_(options),
      recurrent_(RecurrentState::zeros(model.dims.hidden)) {
  if (options_.k < 1) throw Error(ErrorCode::InvalidArgument, "K must be positive");
  if (layout_.size() != static_cast<std::size_t>(model.dims.input)) {
    throw Error(ErrorCode::LayoutMismatch, "layout " + layout_.to_string() + " does not fit a model with " +
                                               std::to_string(model.dims.input) + " inputs");
  }
  if (stats_.size() != 0 && stats_.size() != layout_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature statistics do not match the layout");
  }
  buffer_.reserve(static_cast<std::size_t>(options_.k));
}

std::optional<BatchResult> StreamState::ingest(const MotionFeature& feature) {
  if (!(feature.layout == layout_) || feature.values.size() != layout_.size()) {
    throw Error(ErrorCode::LayoutMismatch,
                "expected " + layout_.to_string() + ", got " + feature.layout.to_string());
  }
  buffer_.push_back(stats_.size() != 0 ? normalize(feature, stats_).values : feature.values);
  ++ingested_;
  if (static_cast<int>(buffer_.size()) < options_.k) return std::nullopt;
  return run_buffer();
}

std::optional<BatchResult> StreamState::flush() {
  if (buffer_.empty()) return std::nullopt;
  return run_buffer();
}

BatchResult StreamState::run_buffer() {
  const auto start = std::chrono::steady_clock::now();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(buffer_.size()), model_->dims.input);
  for (std::size_t t = 0; t < buffer_.size(); ++t) {
    for (std::size_t j = 0; j < buffer_[t].size(); ++j) {
      x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = buffer_[t][j];
    }
  }
  if (!options_.carry) recurrent_ = RecurrentState::zeros(model_->dims.hidden);
  const Eigen::MatrixXd logits = run_sequence(*model_, x, recurrent_);

  BatchResult out;
  out.first_frame = emitted_;
  out.labels.reserve(buffer_.size());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) out.labels.push_back(argmax(logits.row(t).transpose()));
  out.voted = majority_vote(out.labels);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  emitted_ += static_cast<std::int64_t>(buffer_.size());
  batch_seconds_.push_back(out.seconds);
  buffer_.clear();
  return out;
}

int majority_vote(std::span<const int> labels) {
  if (labels.empty()) throw Error(ErrorCode::InvalidArgument, "cannot vote on an empty window");
  std::map<int, int> counts;
  int best = 0;
  for (int l : labels) best = std::max(best, ++counts[l]);
  for (auto it = labels.rbegin(); it != labels.rend(); ++it) {
    if (counts[*it] == best) return *it;
  }
  return labels.back();
}

TimeDiagram time_diagram(std::span<const int> predicted, std::span<const int> truth, int frame_rate,
                         int classes, int k) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                               std::to_string(truth.size()) + " labels");
  }
  if (frame_rate < 1 || classes < 1 || k < 1) {
    throw Error(ErrorCode::InvalidArgument, "frame rate, class count and K must be positive");
  }
  TimeDiagram d;
  d.per_class.resize(static_cast<std::size_t>(classes));
  const int n = static_cast<int>(truth.size());
  for (int t = 0; t < n; ++t) {
    const int y = truth[static_cast<std::size_t>(t)];
    const int p = predicted[static_cast<std::size_t>(t)];
    if (y < 0 || y >= classes || p < 0 || p >= classes) {
      throw Error(ErrorCode::LabelOutOfRange, "label outside [0, " + std::to_string(classes) + ")");
    }
    d.records.push_back({t, y, p, y == p});
    auto& c = d.per_class[static_cast<std::size_t>(y)];
    ++c.frames;
    c.hits += y == p ? 1 : 0;
  }

  std::vector<int> votes;
  for (int b = 0; b < n; b += k) {
    votes.push_back(majority_vote(predicted.subspan(static_cast<std::size_t>(b),
                                                    static_cast<std::size_t>(std::min(k, n - b)))));
  }
  for (int t = 0; t < n;) {
    const int y = truth[static_cast<std::size_t>(t)];
    int e = t + 1;
    while (e < n && truth[static_cast<std::size_t>(e)] == y) ++e;
    if (y != 0) {
      OnsetRecord o{t, e, y, false};
      const int window_end = std::min(e, t + frame_rate);
      for (int b = t / k; b * k < window_end; ++b) {
        if (votes[static_cast<std::size_t>(b)] == y) o.detected = true;
      }
      d.onsets.push_back(o);
    }
    t = e;
  }
  return d;
}

LatencyReport latency_report(std::span<const double> batch_seconds, int k,
                             std::span<const int> frame_rates) {
  if (batch_seconds.empty()) throw Error(ErrorCode::InvalidArgument, "no completed batches");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be positive");
  std::vector<double> v(batch_seconds.begin(), batch_seconds.end());
  std::sort(v.begin(), v.end());
  LatencyReport r;
  r.k = k;
  r.batches = v.size();
  r.mean_seconds = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  r.max_seconds = v.back();
  const double pos = 0.95 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  r.p95_seconds = v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  for (int f : frame_rates) {
    if (f < 1) throw Error(ErrorCode::InvalidArgument, "frame rate must be positive");
    const double budget = static_cast<double>(k) / f;
    r.verdicts.push_back({f, budget, r.p95_seconds < budget});
  }
  return r;
}

}  // namespace egogest
