#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "egogest/error.hpp"
#include "egogest/geometry.hpp"
#include "egogest/kinematics.hpp"

using namespace egogest;

namespace {

ActorProfile still_actor() {
  ActorProfile a = ActorProfile::roster(1).front();
  a.noise_sigma = 0.0;
  a.timing_jitter = 0.0;
  return a;
}

struct AxisEnergy {
  double rx = 0.0, ry = 0.0, rz = 0.0;
};

AxisEnergy gesture_energy(const GestureScript& s) {
  AxisEnergy e;
  for (const auto& x : s.samples) {
    if (x.label_weight <= 0.0) continue;
    e.rx += std::abs(x.head.rx);
    e.ry += std::abs(x.head.ry);
    e.rz += std::abs(x.head.rz);
  }
  return e;
}

// Longest stretch (s) between consecutive samples with visible X rotation,
// restricted to the scripted gesture.
double longest_quiet_gap(const GestureScript& s, double threshold) {
  int last = -1;
  int longest = 0;
  for (int i = 0; i < static_cast<int>(s.samples.size()); ++i) {
    if (std::abs(s.samples[static_cast<std::size_t>(i)].head.rx) > threshold) {
      if (last >= 0) longest = std::max(longest, i - last);
      last = i;
    }
  }
  return static_cast<double>(longest) / s.rate;
}

bool same_frames(const LabeledSequence& a, const LabeledSequence& b) {
  if (a.frames.size() != b.frames.size()) return false;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (a.frames[i].world != b.frames[i].world || a.frames[i].eye != b.frames[i].eye ||
        a.frames[i].label != b.frames[i].label) {
      return false;
    }
  }
  return true;
}

double param_distance(const Param8& a, const Param8& b) {
  return (Homography::from_param8(a).matrix() - Homography::from_param8(b).matrix()).norm();
}

const Dataset& reference_dataset() {
  static const Dataset ds = synthesize_dataset(ActorProfile::roster(4), SceneProfile::indoor(),
                                               SceneProfile::outdoor(), 20, 1, 5);
  return ds;
}

}  // namespace

TEST_SUITE("kinematics") {

TEST_CASE("class names and ids") {
  for (int i = 0; i < kGestureClassCount; ++i) {
    const auto c = class_from_id(i);
    CHECK(parse_class(class_name(c)) == c);
  }
  CHECK_THROWS_AS(class_from_id(6), Error);
  CHECK_THROWS_AS(class_from_id(-1), Error);
  CHECK(gesture_classes(5).size() == 4);
  CHECK(gesture_classes(6).back() == GestureClass::Surprise);
}

TEST_CASE("actor roster is deterministic and valid") {
  const auto a = ActorProfile::roster(6);
  const auto b = ActorProfile::roster(6);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].actor_id == b[i].actor_id);
    CHECK(a[i].amplitude_scale == b[i].amplitude_scale);
    CHECK(a[i].amplitude_scale >= 0.5);
    CHECK(a[i].amplitude_scale <= 2.0);
    CHECK(a[i].frequency_scale >= 0.5);
    CHECK(a[i].frequency_scale <= 2.0);
    CHECK(a[i].noise_sigma >= 0.0);
  }
  CHECK(SceneProfile::indoor().plane_depth < SceneProfile::outdoor().plane_depth);
}

TEST_CASE("Neutral with zero drift noise is motionless") {
  const auto s = gesture_script(GestureClass::Neutral, still_actor(), 5.0, 3);
  for (const auto& x : s.samples) {
    CHECK(x.head.rx == 0.0);
    CHECK(x.head.ry == 0.0);
    CHECK(x.head.rz == 0.0);
    CHECK(x.label_weight == 0.0);
  }
  const auto k = CameraIntrinsics::world_default();
  const Homography h = homography_from_motion(k, s.samples[10].head, Vec3::UnitZ(), 1.5);
  CHECK(to_param8(h) == to_param8(Homography()));
}

TEST_CASE("each gesture's designed axis dominates the others") {
  const auto actors = ActorProfile::roster(4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& actor : actors) {
      const auto shake = gesture_energy(gesture_script(GestureClass::ShakingHead, actor, 4.0, seed));
      CHECK(shake.ry > 5.0 * shake.rx);
      CHECK(shake.ry > 5.0 * shake.rz);
      const auto maybe = gesture_energy(gesture_script(GestureClass::Maybe, actor, 4.0, seed));
      CHECK(maybe.rz > 5.0 * maybe.rx);
      CHECK(maybe.rz > 5.0 * maybe.ry);
      for (auto c : {GestureClass::NoddingHead, GestureClass::ComeHere, GestureClass::Surprise}) {
        const auto e = gesture_energy(gesture_script(c, actor, 4.0, seed));
        CHECK(e.rx > 5.0 * e.ry);
        CHECK(e.rx > 5.0 * e.rz);
      }
    }
  }
}

TEST_CASE("ComeHere pulses are spaced by at least 0.7 s, nodding is contiguous") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto come = gesture_script(GestureClass::ComeHere, still_actor(), 4.0, seed);
    CHECK(longest_quiet_gap(come, 1e-6) >= 0.7);
    const auto nod = gesture_script(GestureClass::NoddingHead, still_actor(), 4.0, seed);
    CHECK(longest_quiet_gap(nod, 1e-6) <= 2.0 / nod.rate);
  }
}

TEST_CASE("eye scale separates Surprise from the head-only gestures") {
  const auto actors = ActorProfile::roster(4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& actor : actors) {
      double surprise_peak = 0.0;
      for (const auto& x : gesture_script(GestureClass::Surprise, actor, 3.0, seed).samples) {
        if (!x.blink && x.label_weight > 0.0) surprise_peak = std::max(surprise_peak, std::abs(x.eye_scale - 1.0));
      }
      CHECK(surprise_peak > 0.1);
      for (auto c : {GestureClass::ShakingHead, GestureClass::Maybe, GestureClass::NoddingHead}) {
        double peak = 0.0;
        for (const auto& x : gesture_script(c, actor, 3.0, seed).samples) {
          if (!x.blink && x.label_weight > 0.0) peak = std::max(peak, std::abs(x.eye_scale - 1.0));
        }
        CHECK(peak < 0.02);
      }
    }
  }
}

TEST_CASE("noiseless DLT re-estimation reproduces the analytic homographies") {
  GeneratorConfig analytic;
  analytic.noise_scale = 0.0;
  GeneratorConfig dlt = analytic;
  dlt.force_dlt = true;
  const auto actor = ActorProfile::roster(1).front();
  for (auto c : gesture_classes(6)) {
    const auto a = synthesize_session(c, actor, SceneProfile::indoor(), 20, 9, analytic);
    const auto b = synthesize_session(c, actor, SceneProfile::indoor(), 20, 9, dlt);
    REQUIRE(a.frames.size() == b.frames.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
      worst = std::max(worst, param_distance(a.frames[i].world, b.frames[i].world));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("sessions are fifteen seconds with labels on every frame") {
  const auto actor = ActorProfile::roster(2).back();
  for (int fps : {10, 20, 30, 60}) {
    const auto s = synthesize_session(GestureClass::NoddingHead, actor, SceneProfile::outdoor(), fps, 4);
    CHECK(s.frames.size() == static_cast<std::size_t>(15 * fps));
    CHECK(s.instances >= 3);
    CHECK(s.instances <= 4);
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      CHECK(s.frames[i].index == static_cast<int>(i));
      CHECK(class_id(s.frames[i].label) >= 0);
      CHECK(class_id(s.frames[i].label) < kGestureClassCount);
      for (double v : s.frames[i].world) CHECK(std::isfinite(v));
      for (double v : s.frames[i].eye) CHECK(std::isfinite(v));
    }
  }
  CHECK_THROWS_AS(synthesize_session(GestureClass::Neutral, actor, SceneProfile::indoor(), 20, 1), Error);
  CHECK_THROWS_AS(synthesize_session(GestureClass::Maybe, actor, SceneProfile::indoor(), 25, 1), Error);
}

TEST_CASE("a session contains exactly its instance count of gesture runs") {
  GeneratorConfig cfg;
  cfg.noise_scale = 0.0;
  const auto actor = ActorProfile::roster(1).front();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = synthesize_session(GestureClass::ShakingHead, actor, SceneProfile::indoor(), 60, seed, cfg);
    int runs = 0;
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      const bool on = s.frames[i].label != GestureClass::Neutral;
      const bool before = i > 0 && s.frames[i - 1].label != GestureClass::Neutral;
      if (on && !before) ++runs;
    }
    CHECK(runs == s.instances);
  }
}

TEST_CASE("dataset: 600 s, balanced, Neutral share and instance counts") {
  const Dataset& ds = reference_dataset();
  REQUIRE(ds.sequences.size() == 40);
  std::size_t frames = 0, neutral = 0;
  std::map<GestureClass, int> sessions, instances;
  std::map<std::string, int> indoor, outdoor;
  for (const auto& s : ds.sequences) {
    frames += s.frames.size();
    for (const auto& f : s.frames) neutral += f.label == GestureClass::Neutral;
    ++sessions[s.session_class];
    instances[s.session_class] += s.instances;
    ++(s.scene == SceneKind::Indoor ? indoor : outdoor)[s.actor_id];
  }
  CHECK(static_cast<double>(frames) / ds.frame_rate == doctest::Approx(600.0));
  const double share = static_cast<double>(neutral) / static_cast<double>(frames);
  CHECK(share >= 0.60);
  CHECK(share <= 0.80);
  for (auto c : gesture_classes(5)) {
    CHECK(sessions[c] == 10);
    CHECK(instances[c] >= 25);
    CHECK(instances[c] <= 32);
  }
  for (const auto& [actor, n] : indoor) {
    CHECK(n == 5);
    CHECK(outdoor[actor] == 5);
  }
}

TEST_CASE("generation is deterministic") {
  const auto again = synthesize_dataset(ActorProfile::roster(4), SceneProfile::indoor(),
                                        SceneProfile::outdoor(), 20, 1, 5);
  const Dataset& ds = reference_dataset();
  REQUIRE(again.sequences.size() == ds.sequences.size());
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) CHECK(same_frames(ds.sequences[i], again.sequences[i]));
  const auto other = synthesize_session(GestureClass::Maybe, ds.actors[0], SceneProfile::indoor(), 20, 2);
  CHECK_FALSE(same_frames(other, synthesize_session(GestureClass::Maybe, ds.actors[0], SceneProfile::indoor(), 20, 3)));
}

TEST_CASE("downsampling") {
  GeneratorConfig cfg;
  cfg.noise_scale = 0.0;
  const auto actor = ActorProfile::roster(3)[1];
  const auto s60 = synthesize_session(GestureClass::ComeHere, actor, SceneProfile::indoor(), 60, 21, cfg);

  SUBCASE("to the same rate is the identity") { CHECK(same_frames(downsample_rate(s60, 60), s60)); }

  SUBCASE("60 -> 20 composes three frame pairs") {
    const auto s20 = downsample_rate(s60, 20);
    REQUIRE(s20.frames.size() == 300);
    for (std::size_t i = 1; i < s20.frames.size(); i += 37) {
      Homography chain;
      for (std::size_t j = 3 * i - 2; j <= 3 * i; ++j) chain = compose(Homography::from_param8(s60.frames[j].world), chain);
      CHECK(param_distance(s20.frames[i].world, to_param8(chain)) <= 1e-10);
    }
  }

  SUBCASE("matches direct generation at the lower rate") {
    const auto direct = synthesize_session(GestureClass::ComeHere, actor, SceneProfile::indoor(), 20, 21, cfg);
    const auto down = downsample_rate(s60, 20);
    REQUIRE(direct.frames.size() == down.frames.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < down.frames.size(); ++i) {
      CHECK(direct.frames[i].label == down.frames[i].label);
      worst = std::max(worst, param_distance(direct.frames[i].world, down.frames[i].world));
      worst = std::max(worst, param_distance(direct.frames[i].eye, down.frames[i].eye));
    }
    CHECK(worst <= 1e-9);
  }

  SUBCASE("path independence: 60 -> 30 -> 10 equals 60 -> 10") {
    const auto a = downsample_rate(downsample_rate(s60, 30), 10);
    const auto b = downsample_rate(s60, 10);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
      CHECK(a.frames[i].label == b.frames[i].label);
      CHECK(param_distance(a.frames[i].world, b.frames[i].world) <= 1e-10);
      CHECK(param_distance(a.frames[i].eye, b.frames[i].eye) <= 1e-10);
    }
  }

  SUBCASE("incompatible rates are rejected") {
    CHECK_THROWS_AS(downsample_rate(downsample_rate(s60, 20), 30), Error);
    CHECK_THROWS_AS(downsample_rate(s60, 25), Error);
  }
}

}  // TEST_SUITE
