#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "egogest/error.hpp"
#include "egogest/inference.hpp"
#include "egogest/training.hpp"
#include "fixtures.hpp"

using namespace egogest;

namespace {

MotionFeature random_feature(std::mt19937_64& rng, const LayoutTag& layout) {
  std::normal_distribution<double> n(0.0, 1.0);
  MotionFeature f;
  f.layout = layout;
  f.values.resize(layout.size());
  for (auto& v : f.values) v = n(rng);
  return f;
}

struct Streamed {
  std::vector<int> labels;
  std::vector<BatchResult> batches;
};

Streamed stream_all(StreamState& s, const std::vector<MotionFeature>& feats, bool flush) {
  Streamed out;
  for (const auto& f : feats) {
    if (auto r = s.ingest(f)) {
      out.labels.insert(out.labels.end(), r->labels.begin(), r->labels.end());
      out.batches.push_back(*r);
    }
  }
  if (flush) {
    if (auto r = s.flush()) {
      out.labels.insert(out.labels.end(), r->labels.begin(), r->labels.end());
      out.batches.push_back(*r);
    }
  }
  return out;
}

Eigen::MatrixXd stack(const std::vector<MotionFeature>& feats) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(feats.size()), static_cast<Eigen::Index>(feats[0].values.size()));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t j = 0; j < feats[i].values.size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feats[i].values[j];
    }
  }
  return x;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("majority vote examples") {
  CHECK(majority_vote(std::vector<int>{2, 2, 1, 0, 2, 2, 3, 2, 2, 2}) == 2);
  CHECK(majority_vote(std::vector<int>{0, 1, 2, 3, 4}) == 4);
  CHECK(majority_vote(std::vector<int>{1, 1, 0, 0}) == 0);
  CHECK(majority_vote(std::vector<int>{0, 0, 1, 1}) == 1);
  CHECK(majority_vote(std::vector<int>{3}) == 3);
  CHECK_THROWS_AS(majority_vote(std::vector<int>{}), Error);
}

TEST_CASE("vote is order invariant without ties and recency-driven with ties") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> u(0, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> w(10);
    for (auto& v : w) v = u(rng);
    std::array<int, 5> counts{};
    for (int v : w) ++counts[static_cast<std::size_t>(v)];
    const int best = *std::max_element(counts.begin(), counts.end());
    const int tied = static_cast<int>(std::count(counts.begin(), counts.end(), best));
    const int vote = majority_vote(w);
    CHECK(counts[static_cast<std::size_t>(vote)] == best);
    if (tied == 1) {
      auto shuffled = w;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(majority_vote(shuffled) == vote);
    } else {
      int latest = -1;
      for (int v : w) {
        if (counts[static_cast<std::size_t>(v)] == best) latest = v;
      }
      CHECK(vote == latest);
    }
  }
}

TEST_CASE("buffering contract") {
  const auto model = ModelState::initialize({8, 6, 3}, 1);
  const LayoutTag layout{FeatureKind::Raw8, false, 1, 1};
  StreamState s(model, {}, layout, {10, true});
  std::mt19937_64 rng(2);
  for (int i = 0; i < 9; ++i) CHECK_FALSE(s.ingest(random_feature(rng, layout)).has_value());
  CHECK(s.buffered() == 9);
  const auto r = s.ingest(random_feature(rng, layout));
  REQUIRE(r.has_value());
  CHECK(r->labels.size() == 10);
  CHECK(r->first_frame == 0);
  CHECK(r->voted == majority_vote(r->labels));
  CHECK(s.buffered() == 0);
  CHECK(s.batch_seconds().size() == 1);
  CHECK_FALSE(s.flush().has_value());
}

TEST_CASE("streaming with carry equals offline prediction") {
  const auto model = ModelState::initialize({16, 12, 5}, 4);
  const LayoutTag layout{FeatureKind::Descriptor16, false, 1, 1};
  std::mt19937_64 rng(9);
  for (int len : {20, 100, 47}) {
    std::vector<MotionFeature> feats;
    for (int i = 0; i < len; ++i) feats.push_back(random_feature(rng, layout));
    StreamState s(model, {}, layout);
    const auto out = stream_all(s, feats, true);
    CHECK(out.labels == predict_framewise(model, stack(feats)).labels);
    CHECK(s.frames_ingested() == len);
    CHECK(s.frames_emitted() == len);
    for (std::size_t b = 0; b < out.batches.size(); ++b) CHECK(out.batches[b].first_frame == static_cast<std::int64_t>(10 * b));
  }
}

TEST_CASE("normalization inside the stream matches normalizing offline") {
  const auto model = ModelState::initialize({8, 6, 3}, 4);
  const LayoutTag layout{FeatureKind::Raw8, false, 1, 1};
  std::mt19937_64 rng(19);
  std::vector<MotionFeature> feats;
  for (int i = 0; i < 30; ++i) feats.push_back(random_feature(rng, layout));
  const auto stats = fit_stats(stack(feats));
  StreamState s(model, stats, layout);
  const auto out = stream_all(s, feats, false);
  Eigen::MatrixXd x = stack(feats);
  normalize_rows(x, stats);
  CHECK(out.labels == predict_framewise(model, x).labels);
}

TEST_CASE("no frame loss and residual flush") {
  const auto model = ModelState::initialize({8, 6, 3}, 2);
  const LayoutTag layout{FeatureKind::Raw8, false, 1, 1};
  std::mt19937_64 rng(3);
  StreamState s(model, {}, layout, {10, true});
  std::vector<MotionFeature> feats;
  for (int i = 0; i < 37; ++i) feats.push_back(random_feature(rng, layout));
  const auto out = stream_all(s, feats, false);
  CHECK(out.labels.size() == 30);
  CHECK(s.buffered() == 7);
  CHECK(s.frames_emitted() == s.frames_ingested() - s.buffered());
  const auto tail = s.flush();
  REQUIRE(tail.has_value());
  CHECK(tail->labels.size() == 7);
  CHECK(tail->first_frame == 30);
  CHECK(s.frames_emitted() == 37);
}

TEST_CASE("without carry each batch starts from a zero state") {
  const auto model = ModelState::initialize({8, 6, 3}, 5);
  const LayoutTag layout{FeatureKind::Raw8, false, 1, 1};
  std::mt19937_64 rng(4);
  std::vector<MotionFeature> feats;
  for (int i = 0; i < 30; ++i) feats.push_back(random_feature(rng, layout));
  StreamState s(model, {}, layout, {10, false});
  const auto out = stream_all(s, feats, false);
  const Eigen::MatrixXd x = stack(feats);
  std::vector<int> expect;
  for (int b = 0; b < 3; ++b) {
    const auto p = predict_framewise(model, x.middleRows(10 * b, 10));
    expect.insert(expect.end(), p.labels.begin(), p.labels.end());
  }
  CHECK(out.labels == expect);
}

TEST_CASE("layout mismatches are rejected") {
  const auto model = ModelState::initialize({8, 6, 3}, 2);
  const LayoutTag raw{FeatureKind::Raw8, false, 1, 1};
  const LayoutTag fused{FeatureKind::Raw8, true, 1, 1};
  CHECK_THROWS_AS(StreamState(model, {}, fused), Error);
  StreamState s(model, {}, raw);
  std::mt19937_64 rng(1);
  try {
    s.ingest(random_feature(rng, LayoutTag{FeatureKind::Descriptor16, false, 1, 1}));
    FAIL("expected LayoutMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LayoutMismatch);
  }
}

TEST_CASE("identity motion streamed into a trained model votes Neutral") {
  const Dataset ds = egogest::testing::tiny_dataset();
  auto cfg = egogest::testing::tiny_config();
  cfg.hidden = 16;
  cfg.epochs = 4;
  const auto r = train(ds, cfg);
  StreamState s(r.model, r.stats, cfg.features.layout());
  FeatureExtractor ex(cfg.features);
  FrameRecord still;
  still.world = to_param8(Homography());
  still.eye = to_param8(Homography());
  std::vector<int> votes;
  for (int i = 0; i < 50; ++i) {
    if (auto b = s.ingest(ex.next(still))) votes.push_back(b->voted);
  }
  REQUIRE(votes.size() == 5);
  for (int v : votes) CHECK(v == 0);
}

TEST_CASE("time diagram") {
  SUBCASE("perfect predictions") {
    std::vector<int> truth(60, 0);
    std::fill(truth.begin() + 10, truth.begin() + 25, 3);
    std::fill(truth.begin() + 40, truth.begin() + 52, 3);
    const auto d = time_diagram(truth, truth, 10, 5);
    CHECK(d.records.size() == 60);
    for (const auto& r : d.records) CHECK(r.hit);
    REQUIRE(d.onsets.size() == 2);
    CHECK(d.onsets[0].start == 10);
    CHECK(d.onsets[0].end == 25);
    CHECK(d.onsets[1].detected);
    CHECK(d.per_class[3].accuracy() == 1.0);
    CHECK(d.per_class[3].frames == 27);
  }
  SUBCASE("all-Neutral predictions on a ShakingHead session") {
    const Dataset ds = egogest::testing::tiny_dataset();
    const LabeledSequence* shake = nullptr;
    for (const auto& s : ds.sequences) {
      if (s.session_class == GestureClass::ShakingHead) shake = &s;
    }
    REQUIRE(shake != nullptr);
    std::vector<int> truth;
    for (const auto& f : shake->frames) truth.push_back(class_id(f.label));
    const std::vector<int> pred(truth.size(), 0);
    const auto d = time_diagram(pred, truth, shake->frame_rate, 5);
    for (const auto& r : d.records) CHECK(r.hit == (r.truth == 0));
    CHECK(static_cast<int>(d.onsets.size()) == shake->instances);
    for (const auto& o : d.onsets) CHECK_FALSE(o.detected);
    CHECK(d.per_class[0].accuracy() == 1.0);
    CHECK(d.per_class[3].hits == 0);
  }
  SUBCASE("onset detection only looks at the first second") {
    // 10 fps, K = 5: instance 10..40, detection window frames 10..19
    std::vector<int> truth(50, 0);
    std::fill(truth.begin() + 10, truth.begin() + 40, 2);
    std::vector<int> pred(50, 0);
    std::fill(pred.begin() + 25, pred.begin() + 40, 2);
    CHECK_FALSE(time_diagram(pred, truth, 10, 3, 5).onsets[0].detected);
    std::fill(pred.begin() + 15, pred.begin() + 20, 2);
    CHECK(time_diagram(pred, truth, 10, 3, 5).onsets[0].detected);
  }
  SUBCASE("length mismatch") {
    try {
      time_diagram(std::vector<int>{0, 0}, std::vector<int>{0}, 10, 3);
      FAIL("expected LengthMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::LengthMismatch);
    }
  }
}

TEST_CASE("latency report") {
  std::vector<double> t(20);
  std::iota(t.begin(), t.end(), 1.0);
  for (auto& x : t) x *= 1e-3;
  const auto r = latency_report(t, 10);
  CHECK(r.batches == 20);
  CHECK(r.p95_seconds == doctest::Approx(19.05e-3));
  CHECK(r.mean_seconds == doctest::Approx(10.5e-3));
  CHECK(r.max_seconds == 20e-3);
  REQUIRE(r.verdicts.size() == 3);
  CHECK(r.verdicts[0].budget_seconds == 1.0);
  CHECK(r.verdicts[2].budget_seconds == doctest::Approx(0.3333333333));
  for (const auto& v : r.verdicts) CHECK(v.real_time);
  const std::vector<double> slow(5, 0.5);
  const auto s = latency_report(slow, 10);
  CHECK(s.verdicts[0].real_time);
  CHECK_FALSE(s.verdicts[1].real_time);
  CHECK_FALSE(s.verdicts[2].real_time);
  CHECK_THROWS_AS(latency_report(std::vector<double>{}, 10), Error);
}

}  // TEST_SUITE
