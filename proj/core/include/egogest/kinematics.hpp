#pragma once

// Seeded synthesis of labeled head/eye gesture sessions.
//
// Trajectories are simulated at a base rate (60 fps by default) and sampled
// at the working frame rate, so a session generated at 20 fps sees the same
// underlying head motion as the 60 fps session with the same seed.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "egogest/geometry.hpp"

namespace egogest {

enum class GestureClass : int {
  Neutral = 0,
  ComeHere = 1,
  NoddingHead = 2,
  ShakingHead = 3,
  Maybe = 4,
  Surprise = 5,
};

inline constexpr int kGestureClassCount = 6;

std::string_view class_name(GestureClass c) noexcept;
std::optional<GestureClass> parse_class(std::string_view name) noexcept;
/// Throws LabelOutOfRange for ids outside [0, 6).
GestureClass class_from_id(int id);
constexpr int class_id(GestureClass c) noexcept { return static_cast<int>(c); }

/// The non-neutral classes present in a dataset of `class_count` classes
/// (5 -> without Surprise, 6 -> with Surprise).
std::vector<GestureClass> gesture_classes(int class_count);

struct ActorProfile {
  std::string actor_id;
  double amplitude_scale = 1.0;
  double frequency_scale = 1.0;
  double noise_sigma = 0.001;  // rad per base-rate frame, head drift increments
  double timing_jitter = 0.1;

  void validate() const;
  /// Deterministic roster; the first four are fixed, the rest derived.
  static std::vector<ActorProfile> roster(int count);
};

enum class SceneKind { Indoor, Outdoor };

std::string_view scene_name(SceneKind kind) noexcept;
std::optional<SceneKind> parse_scene(std::string_view name) noexcept;

struct SceneProfile {
  SceneKind kind = SceneKind::Indoor;
  double plane_depth = 1.5;           // m
  double correspondence_noise = 0.3;  // px

  void validate() const;
  static SceneProfile indoor() { return {SceneKind::Indoor, 1.5, 0.3}; }
  static SceneProfile outdoor() { return {SceneKind::Outdoor, 20.0, 0.5}; }
};

struct GeneratorConfig {
  int base_rate = 60;
  double session_seconds = 15.0;
  CameraIntrinsics world = CameraIntrinsics::world_default();
  CameraIntrinsics eye = CameraIntrinsics::eye_default();

  // Neck pivot position in the rest camera frame (m): below and behind.
  Vec3 neck_pivot{0.0, 0.10, -0.08};
  double drift_reversion = 0.02;  // per base frame, pulls drift back to zero

  // Eye channel (similarity motion of the eye image).
  double vor_px_per_rad = 48.0;  // compensatory eye translation per head radian
  double blink_rate_hz = 0.25;
  double blink_seconds = 0.15;
  double saccade_rate_hz = 0.3;
  double saccade_px = 6.0;
  double eye_noise_px = 0.15;
  double eye_scale_noise = 0.002;

  // World estimation noise grows with the frame-pair displacement.
  double blur_gain = 0.05;  // per px of mean grid displacement
  int grid_points = 4;      // grid_points x grid_points DLT correspondences
  bool force_dlt = false;   // re-estimate even when the noise is zero

  double noise_scale = 1.0;  // multiplies every noise source
  double label_threshold = 0.1;

  int sessions_per_actor = 10;
};

/// One base-rate sample of a scripted trajectory. `head` holds absolute
/// head angles and the camera-center displacement (m) of the gesture.
struct ScriptSample {
  RigidMotion head;
  double eye_scale = 1.0;
  double eye_tx = 0.0;
  double eye_ty = 0.0;
  double label_weight = 0.0;  // gesture envelope in [0, 1]
  bool blink = false;
};

struct GestureScript {
  GestureClass gesture = GestureClass::Neutral;
  int rate = 60;
  std::vector<ScriptSample> samples;
};

struct ScriptOptions {
  int rate = 60;
  double plane_depth = 1.5;
  GeneratorConfig config{};
};

/// Scripts one instance of `gesture` starting at t = 0 and padded with the
/// neutral background up to `duration` seconds.
GestureScript gesture_script(GestureClass gesture, const ActorProfile& actor, double duration,
                             std::uint64_t seed, const ScriptOptions& options = {});

struct FrameRecord {
  int index = 0;
  Param8 world{};
  Param8 eye{};
  GestureClass label = GestureClass::Neutral;
};

struct LabeledSequence {
  int frame_rate = 20;
  std::vector<FrameRecord> frames;
  std::string actor_id;
  SceneKind scene = SceneKind::Indoor;
  GestureClass session_class = GestureClass::Neutral;
  int instances = 0;
  std::uint64_t seed = 0;
};

bool is_supported_rate(int fps) noexcept;

/// One 15 s session with `instances` (3-4 when unset) non-overlapping
/// repetitions of `gesture` embedded in neutral background.
LabeledSequence synthesize_session(GestureClass gesture, const ActorProfile& actor,
                                   const SceneProfile& scene, int frame_rate, std::uint64_t seed,
                                   const GeneratorConfig& config = {},
                                   std::optional<int> instances = std::nullopt);

struct Dataset {
  std::uint64_t master_seed = 0;
  int frame_rate = 20;
  int class_count = 5;
  double noise_scale = 1.0;
  std::vector<ActorProfile> actors;
  std::vector<SceneProfile> scenes;
  std::vector<LabeledSequence> sequences;
};

/// `sessions_per_actor` sessions per actor, half indoor, balanced over the
/// non-neutral classes of a `class_count`-class problem.
Dataset synthesize_dataset(const std::vector<ActorProfile>& actors, const SceneProfile& indoor,
                           const SceneProfile& outdoor, int frame_rate, std::uint64_t seed,
                           int class_count = 5, const GeneratorConfig& config = {});

/// Keeps every (rate/target)-th frame and composes the skipped frame pairs.
LabeledSequence downsample_rate(const LabeledSequence& seq, int target_fps);

}  // namespace egogest
