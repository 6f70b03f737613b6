#include "egogest/kinematics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "egogest/error.hpp"
#include "egogest/random.hpp"

namespace egogest {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::array<std::string_view, kGestureClassCount> kClassNames = {
    "Neutral", "ComeHere", "NoddingHead", "ShakingHead", "Maybe", "Surprise"};

// Gesture-only component of one instance, at the base rate.
struct InstanceTrack {
  std::vector<double> rx, ry, rz;
  std::vector<double> retreat;    // camera moves back by retreat * plane depth
  std::vector<double> eye_scale;  // additive deviation of the eye-image scale
  std::vector<double> weight;     // labeling envelope

  std::size_t size() const { return weight.size(); }
  void resize(std::size_t n) {
    for (auto* v : {&rx, &ry, &rz, &retreat, &eye_scale, &weight}) v->assign(n, 0.0);
  }
};

// Neutral background over a whole timeline, at the base rate.
struct Background {
  std::vector<double> rx, ry, rz;
  std::vector<double> gaze_x, gaze_y;
  std::vector<double> blink;  // 0..1 closure
};

double sin2(double x) {
  const double s = std::sin(x);
  return s * s;
}

InstanceTrack sinusoid(double amplitude, double freq, double cycles, int rate,
                       std::vector<double> InstanceTrack::*axis) {
  InstanceTrack track;
  const double duration = cycles / freq;
  const auto n = static_cast<std::size_t>(std::floor(duration * rate)) + 1;
  track.resize(n);
  const double taper = 0.25 / freq;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate;
    double w = 1.0;
    if (t < taper) {
      w = 0.5 * (1.0 - std::cos(kPi * t / taper));
    } else if (t > duration - taper) {
      w = 0.5 * (1.0 - std::cos(kPi * std::max(0.0, duration - t) / taper));
    }
    (track.*axis)[k] = amplitude * w * std::sin(2.0 * kPi * freq * t);
    track.weight[k] = w;
  }
  return track;
}

InstanceTrack make_instance(GestureClass gesture, const ActorProfile& actor, int rate, Rng& rng) {
  std::uniform_real_distribution<double> jitter_dist(-actor.timing_jitter, actor.timing_jitter);
  const double time_factor = actor.frequency_scale * (1.0 + jitter_dist(rng));
  const double amp = actor.amplitude_scale;

  switch (gesture) {
    case GestureClass::Neutral:
      return {};
    case GestureClass::NoddingHead: {
      const int cycles = std::uniform_int_distribution<int>(2, 3)(rng);
      return sinusoid(0.20 * amp, 2.0 * time_factor, cycles, rate, &InstanceTrack::rx);
    }
    case GestureClass::ShakingHead:
      return sinusoid(0.25 * amp, 2.0 * time_factor, 3.0, rate, &InstanceTrack::ry);
    case GestureClass::Maybe:
      return sinusoid(0.20 * amp, 1.0 * time_factor, 1.5, rate, &InstanceTrack::rz);
    case GestureClass::ComeHere: {
      const double pulse = 0.5 / time_factor;
      const double gap = std::uniform_real_distribution<double>(0.7, 1.2)(rng);
      const double duration = 2.0 * pulse + gap;
      InstanceTrack track;
      const auto n = static_cast<std::size_t>(std::floor(duration * rate)) + 1;
      track.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / rate;
        double p = 0.0;
        if (t <= pulse) {
          p = sin2(kPi * t / pulse);
        } else if (t >= pulse + gap) {
          p = sin2(kPi * std::min(pulse, t - pulse - gap) / pulse);
        }
        track.rx[k] = 0.25 * amp * p;
        track.weight[k] = p;
      }
      return track;
    }
    case GestureClass::Surprise: {
      const double pulse = 0.4 / time_factor;
      InstanceTrack track;
      const auto n = static_cast<std::size_t>(std::floor(pulse * rate)) + 1;
      track.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double p = sin2(kPi * (static_cast<double>(k) / rate) / pulse);
        track.rx[k] = -0.1 * amp * p;
        track.retreat[k] = 0.05 * amp * p;
        track.eye_scale[k] = 0.15 * p;
        track.weight[k] = p;
      }
      return track;
    }
  }
  return {};
}

Background make_background(std::size_t n, const ActorProfile& actor, const GeneratorConfig& cfg,
                           Rng& rng) {
  Background bg;
  for (auto* v : {&bg.rx, &bg.ry, &bg.rz, &bg.gaze_x, &bg.gaze_y, &bg.blink}) v->assign(n, 0.0);

  const double sigma = actor.noise_sigma * cfg.noise_scale;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<double, 3> drift{0.0, 0.0, 0.0};

  const double blink_p = cfg.blink_rate_hz / cfg.base_rate;
  const double saccade_p = cfg.saccade_rate_hz / cfg.base_rate;
  const auto blink_len =
      std::max<std::size_t>(1, static_cast<std::size_t>(cfg.blink_seconds * cfg.base_rate));
  constexpr std::size_t kSaccadeLen = 3;

  double gx = 0.0, gy = 0.0, gx_from = 0.0, gy_from = 0.0, gx_to = 0.0, gy_to = 0.0;
  std::size_t saccade_left = 0;
  std::size_t blink_left = 0;

  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && sigma > 0.0) {
      for (auto& d : drift) d = (1.0 - cfg.drift_reversion) * d + sigma * normal(rng);
    }
    bg.rx[k] = drift[0];
    bg.ry[k] = drift[1];
    bg.rz[k] = drift[2];

    if (saccade_left == 0 && cfg.saccade_rate_hz > 0.0 && unit(rng) < saccade_p) {
      gx_from = gx;
      gy_from = gy;
      gx_to = cfg.saccade_px * (2.0 * unit(rng) - 1.0);
      gy_to = cfg.saccade_px * (2.0 * unit(rng) - 1.0);
      saccade_left = kSaccadeLen;
    }
    if (saccade_left > 0) {
      const double a = static_cast<double>(kSaccadeLen - saccade_left + 1) / kSaccadeLen;
      gx = gx_from + a * (gx_to - gx_from);
      gy = gy_from + a * (gy_to - gy_from);
      --saccade_left;
    }
    bg.gaze_x[k] = gx;
    bg.gaze_y[k] = gy;

    if (blink_left == 0 && cfg.blink_rate_hz > 0.0 && unit(rng) < blink_p) {
      blink_left = blink_len;
    }
    if (blink_left > 0) {
      const double phase = static_cast<double>(blink_len - blink_left + 1) / (blink_len + 1);
      bg.blink[k] = sin2(kPi * phase);
      --blink_left;
    }
  }
  return bg;
}

ScriptSample combine(const Background& bg, const InstanceTrack* inst, std::size_t k,
                     std::size_t offset, double plane_depth, const GeneratorConfig& cfg) {
  ScriptSample s;
  s.head.rx = bg.rx[k];
  s.head.ry = bg.ry[k];
  s.head.rz = bg.rz[k];
  double eye_dev = 0.0;
  if (inst != nullptr && k >= offset && k - offset < inst->size()) {
    const std::size_t j = k - offset;
    s.head.rx += inst->rx[j];
    s.head.ry += inst->ry[j];
    s.head.rz += inst->rz[j];
    s.head.tz = -inst->retreat[j] * plane_depth;
    eye_dev = inst->eye_scale[j];
    s.label_weight = inst->weight[j];
  }
  s.blink = bg.blink[k] > 0.0;
  s.eye_scale = (1.0 + eye_dev) * (1.0 - 0.1 * bg.blink[k]);
  s.eye_tx = bg.gaze_x[k] - cfg.vor_px_per_rad * s.head.ry;
  s.eye_ty = bg.gaze_y[k] + 3.0 * bg.blink[k] - cfg.vor_px_per_rad * s.head.rx;
  return s;
}

int rate_step(int base_rate, int rate) {
  if (rate <= 0 || base_rate % rate != 0) {
    throw Error(ErrorCode::IncompatibleRate, "rate " + std::to_string(rate) +
                                                 " does not divide base rate " +
                                                 std::to_string(base_rate));
  }
  return base_rate / rate;
}

struct CameraPose {
  Mat3 rotation;     // camera-from-world
  Vec3 translation;  // X_cam = R X_world + T
};

CameraPose camera_pose(const RigidMotion& head, const Vec3& pivot) {
  CameraPose pose;
  pose.rotation = head.rotation();
  const Vec3 center = pivot - pose.rotation.transpose() * pivot + head.translation();
  pose.translation = -pose.rotation * center;
  return pose;
}

// Frame-pair homography from pose a to pose b for the world plane z = depth.
Homography world_pair(const CameraIntrinsics& k, const CameraPose& a, const CameraPose& b,
                      double depth) {
  const Mat3 r_rel = b.rotation * a.rotation.transpose();
  const Vec3 t_rel = b.translation - r_rel * a.translation;
  const Vec3 normal = a.rotation * Vec3::UnitZ();
  const double d = depth + normal.dot(a.translation);
  return homography_from_motion(k, r_rel, t_rel, normal, d);
}

Mat3 eye_similarity(const CameraIntrinsics& k, double scale, double tx, double ty) {
  Mat3 m;
  m << scale, 0.0, (1.0 - scale) * k.cx + tx,
       0.0, scale, (1.0 - scale) * k.cy + ty,
       0.0, 0.0, 1.0;
  return m;
}

Homography noisy_reestimate(const Homography& h, const CameraIntrinsics& k, double sigma,
                            const GeneratorConfig& cfg, Rng& rng) {
  const int g = std::max(2, cfg.grid_points);
  std::vector<Correspondence> corr;
  corr.reserve(static_cast<std::size_t>(g * g));
  double disp = 0.0;
  for (int iy = 0; iy < g; ++iy) {
    for (int ix = 0; ix < g; ++ix) {
      const Vec2 src(k.width * (0.1 + 0.8 * ix / (g - 1.0)), k.height * (0.1 + 0.8 * iy / (g - 1.0)));
      const Vec2 dst = apply(h, src);
      disp += (dst - src).norm();
      corr.push_back({src, dst});
    }
  }
  disp /= static_cast<double>(corr.size());
  const double sigma_eff = sigma * (1.0 + cfg.blur_gain * disp);
  if (sigma_eff > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_eff);
    for (auto& c : corr) {
      c.dst.x() += noise(rng);
      c.dst.y() += noise(rng);
    }
  }
  return estimate_homography_dlt(corr);
}

}  // namespace

std::string_view class_name(GestureClass c) noexcept {
  const int id = class_id(c);
  if (id < 0 || id >= kGestureClassCount) return "Unknown";
  return kClassNames[static_cast<std::size_t>(id)];
}

std::optional<GestureClass> parse_class(std::string_view name) noexcept {
  for (int i = 0; i < kGestureClassCount; ++i) {
    if (kClassNames[static_cast<std::size_t>(i)] == name) return static_cast<GestureClass>(i);
  }
  return std::nullopt;
}

GestureClass class_from_id(int id) {
  if (id < 0 || id >= kGestureClassCount) {
    throw Error(ErrorCode::LabelOutOfRange, "gesture class id " + std::to_string(id));
  }
  return static_cast<GestureClass>(id);
}

std::vector<GestureClass> gesture_classes(int class_count) {
  if (class_count != 5 && class_count != 6) {
    throw Error(ErrorCode::InvalidArgument, "class count must be 5 or 6");
  }
  std::vector<GestureClass> out = {GestureClass::ComeHere, GestureClass::NoddingHead,
                                   GestureClass::ShakingHead, GestureClass::Maybe};
  if (class_count == 6) out.push_back(GestureClass::Surprise);
  return out;
}

void ActorProfile::validate() const {
  if (amplitude_scale < 0.5 || amplitude_scale > 2.0 || frequency_scale < 0.5 ||
      frequency_scale > 2.0) {
    throw Error(ErrorCode::InvalidArgument, "actor scales must lie in [0.5, 2.0]");
  }
  if (!(noise_sigma >= 0.0) || !(timing_jitter >= 0.0) || timing_jitter >= 0.5) {
    throw Error(ErrorCode::InvalidArgument, "actor noise/jitter out of range");
  }
}

std::vector<ActorProfile> ActorProfile::roster(int count) {
  std::vector<ActorProfile> out = {
      {"actor0", 1.00, 1.00, 0.0010, 0.10},
      {"actor1", 0.85, 1.15, 0.0012, 0.15},
      {"actor2", 1.20, 0.90, 0.0008, 0.10},
      {"actor3", 0.90, 0.85, 0.0015, 0.20},
  };
  if (count < 0) throw Error(ErrorCode::InvalidArgument, "negative actor count");
  if (count <= 4) {
    out.resize(static_cast<std::size_t>(count));
    return out;
  }
  for (int i = 4; i < count; ++i) {
    Rng rng(derive_seed(0xac70f11eULL, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> scale(0.8, 1.25);
    std::uniform_real_distribution<double> noise(0.0008, 0.0015);
    ActorProfile a;
    a.actor_id = "actor" + std::to_string(i);
    a.amplitude_scale = scale(rng);
    a.frequency_scale = scale(rng);
    a.noise_sigma = noise(rng);
    a.timing_jitter = 0.15;
    out.push_back(a);
  }
  return out;
}

std::string_view scene_name(SceneKind kind) noexcept {
  return kind == SceneKind::Indoor ? "indoor" : "outdoor";
}

std::optional<SceneKind> parse_scene(std::string_view name) noexcept {
  if (name == "indoor") return SceneKind::Indoor;
  if (name == "outdoor") return SceneKind::Outdoor;
  return std::nullopt;
}

void SceneProfile::validate() const {
  if (!(plane_depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "scene plane depth");
  if (!(correspondence_noise >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "correspondence noise must be >= 0");
  }
}

bool is_supported_rate(int fps) noexcept { return fps == 10 || fps == 20 || fps == 30 || fps == 60; }

GestureScript gesture_script(GestureClass gesture, const ActorProfile& actor, double duration,
                             std::uint64_t seed, const ScriptOptions& options) {
  if (!(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
  actor.validate();
  const auto& cfg = options.config;
  const int step = rate_step(cfg.base_rate, options.rate);

  Rng rng(derive_seed(seed, 0));
  const InstanceTrack inst = make_instance(gesture, actor, cfg.base_rate, rng);
  const auto n_base = static_cast<std::size_t>(std::llround(duration * cfg.base_rate));
  const Background bg = make_background(n_base, actor, cfg, rng);

  GestureScript script;
  script.gesture = gesture;
  script.rate = options.rate;
  for (std::size_t k = 0; k < n_base; k += static_cast<std::size_t>(step)) {
    script.samples.push_back(combine(bg, &inst, k, 0, options.plane_depth, cfg));
  }
  return script;
}

LabeledSequence synthesize_session(GestureClass gesture, const ActorProfile& actor,
                                   const SceneProfile& scene, int frame_rate, std::uint64_t seed,
                                   const GeneratorConfig& cfg, std::optional<int> instances) {
  if (gesture == GestureClass::Neutral) {
    throw Error(ErrorCode::InvalidArgument, "sessions need a non-neutral gesture");
  }
  if (!is_supported_rate(frame_rate)) {
    throw Error(ErrorCode::IncompatibleRate, "unsupported frame rate " + std::to_string(frame_rate));
  }
  actor.validate();
  scene.validate();
  const int step = rate_step(cfg.base_rate, frame_rate);

  Rng rng(derive_seed(seed, 0));
  Rng noise_rng(derive_seed(seed, 1));

  const int drawn = std::uniform_int_distribution<int>(3, 4)(rng);
  const int count = instances.value_or(drawn);
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "need at least one instance");

  const auto n_base = static_cast<std::size_t>(std::llround(cfg.session_seconds * cfg.base_rate));
  std::vector<InstanceTrack> tracks;
  std::size_t busy = 0;
  for (int i = 0; i < count; ++i) {
    tracks.push_back(make_instance(gesture, actor, cfg.base_rate, rng));
    busy += tracks.back().size();
  }
  if (busy >= n_base) throw Error(ErrorCode::InvalidArgument, "instances do not fit the session");

  // Neutral gaps: at least one second each when room allows, the rest split
  // with Dirichlet(1) weights.
  const std::size_t free = n_base - busy;
  const std::size_t slots = tracks.size() + 1;
  const std::size_t min_gap = std::min<std::size_t>(static_cast<std::size_t>(cfg.base_rate), free / slots);
  const std::size_t extra = free - min_gap * slots;
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(slots);
  for (auto& x : w) x = expo(rng);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> offsets;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    cursor += min_gap + static_cast<std::size_t>(std::floor(extra * w[i] / wsum));
    offsets.push_back(cursor);
    cursor += tracks[i].size();
  }

  const Background bg = make_background(n_base, actor, cfg, rng);

  std::vector<ScriptSample> base(n_base);
  std::size_t ti = 0;
  for (std::size_t k = 0; k < n_base; ++k) {
    while (ti < tracks.size() && k >= offsets[ti] + tracks[ti].size()) ++ti;
    const InstanceTrack* inst = ti < tracks.size() ? &tracks[ti] : nullptr;
    const std::size_t off = ti < tracks.size() ? offsets[ti] : 0;
    base[k] = combine(bg, inst, k, off, scene.plane_depth, cfg);
  }

  LabeledSequence seq;
  seq.frame_rate = frame_rate;
  seq.actor_id = actor.actor_id;
  seq.scene = scene.kind;
  seq.session_class = gesture;
  seq.instances = count;
  seq.seed = seed;

  const double world_sigma = scene.correspondence_noise * cfg.noise_scale;
  const double eye_sigma = cfg.eye_noise_px * cfg.noise_scale;
  const double eye_scale_sigma = cfg.eye_scale_noise * cfg.noise_scale;
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t frames = n_base / static_cast<std::size_t>(step);
  CameraPose prev_pose{};
  Mat3 prev_eye = Mat3::Identity();
  for (std::size_t i = 0; i < frames; ++i) {
    const ScriptSample& s = base[i * static_cast<std::size_t>(step)];
    const CameraPose pose = camera_pose(s.head, cfg.neck_pivot);
    const Mat3 eye = eye_similarity(cfg.eye, s.eye_scale, s.eye_tx, s.eye_ty);

    FrameRecord rec;
    rec.index = static_cast<int>(i);
    rec.label = s.label_weight >= cfg.label_threshold ? gesture : GestureClass::Neutral;
    if (i == 0) {
      rec.world = to_param8(Homography::identity());
      rec.eye = to_param8(Homography::identity());
    } else {
      Homography hw = world_pair(cfg.world, prev_pose, pose, scene.plane_depth);
      if (world_sigma > 0.0 || cfg.force_dlt) {
        hw = noisy_reestimate(hw, cfg.world, world_sigma, cfg, noise_rng);
      }
      Mat3 he = eye * prev_eye.inverse();
      if (eye_sigma > 0.0 || eye_scale_sigma > 0.0) {
        const double ds = std::exp(eye_scale_sigma * normal(noise_rng));
        const double dx = eye_sigma * normal(noise_rng);
        const double dy = eye_sigma * normal(noise_rng);
        he = eye_similarity(cfg.eye, ds, dx, dy) * he;
      }
      rec.world = to_param8(hw);
      rec.eye = to_param8(Homography(he));
    }
    seq.frames.push_back(rec);
    prev_pose = pose;
    prev_eye = eye;
  }
  return seq;
}

Dataset synthesize_dataset(const std::vector<ActorProfile>& actors, const SceneProfile& indoor,
                           const SceneProfile& outdoor, int frame_rate, std::uint64_t seed,
                           int class_count, const GeneratorConfig& cfg) {
  if (actors.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one actor");
  const auto classes = gesture_classes(class_count);
  const auto n_classes = classes.size();
  const int per_actor = cfg.sessions_per_actor;
  const int half = per_actor / 2;

  struct Plan {
    std::size_t actor;
    bool indoor;
    GestureClass gesture;
    int instances = 3;
  };
  std::vector<Plan> plans;
  for (std::size_t a = 0; a < actors.size(); ++a) {
    for (int k = 0; k < per_actor; ++k) {
      const bool in = k < half;
      const std::size_t slot = static_cast<std::size_t>(in ? k : k - half);
      const std::size_t ci = (static_cast<std::size_t>(half) * a + slot) % n_classes;
      plans.push_back({a, in, classes[ci]});
    }
  }

  // Per class: 3 or 4 repetitions per session, aiming at 3.5 on average
  // but keeping the class total inside [25, 32] whenever that is reachable.
  Rng rng(derive_seed(seed, 0x5e55105ULL));
  for (const auto c : classes) {
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < plans.size(); ++j) {
      if (plans[j].gesture == c) members.push_back(j);
    }
    const auto n = static_cast<long>(members.size());
    long target = std::clamp<long>(std::lround(3.5 * static_cast<double>(n)), 25, 32);
    target = std::clamp<long>(target, 3 * n, 4 * n);
    const long fours = target - 3 * n;
    std::shuffle(members.begin(), members.end(), rng);
    for (long r = 0; r < n; ++r) plans[members[static_cast<std::size_t>(r)]].instances = r < fours ? 4 : 3;
  }

  Dataset ds;
  ds.master_seed = seed;
  ds.frame_rate = frame_rate;
  ds.class_count = class_count;
  ds.noise_scale = cfg.noise_scale;
  ds.actors = actors;
  ds.scenes = {indoor, outdoor};
  for (std::size_t j = 0; j < plans.size(); ++j) {
    const auto& p = plans[j];
    ds.sequences.push_back(synthesize_session(p.gesture, actors[p.actor], p.indoor ? indoor : outdoor,
                                              frame_rate, derive_seed(seed, j), cfg, p.instances));
  }
  return ds;
}

LabeledSequence downsample_rate(const LabeledSequence& seq, int target_fps) {
  if (target_fps <= 0 || seq.frame_rate % target_fps != 0 || !is_supported_rate(target_fps)) {
    throw Error(ErrorCode::IncompatibleRate, std::to_string(target_fps) + " fps from " +
                                                 std::to_string(seq.frame_rate) + " fps");
  }
  const auto step = static_cast<std::size_t>(seq.frame_rate / target_fps);
  LabeledSequence out = seq;
  out.frame_rate = target_fps;
  out.frames.clear();
  const std::size_t n = seq.frames.size() / step;
  for (std::size_t i = 0; i < n; ++i) {
    FrameRecord rec;
    rec.index = static_cast<int>(i);
    rec.label = seq.frames[i * step].label;
    if (i == 0) {
      rec.world = seq.frames[0].world;
      rec.eye = seq.frames[0].eye;
    } else {
      Homography w, e;
      for (std::size_t j = (i - 1) * step + 1; j <= i * step; ++j) {
        w = compose(Homography::from_param8(seq.frames[j].world), w);
        e = compose(Homography::from_param8(seq.frames[j].eye), e);
      }
      rec.world = to_param8(w);
      rec.eye = to_param8(e);
    }
    out.frames.push_back(rec);
  }
  return out;
}

}  // namespace egogest
