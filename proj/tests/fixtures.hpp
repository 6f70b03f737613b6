#pragma once

#include "egogest/kinematics.hpp"
#include "egogest/training.hpp"

namespace egogest::testing {

// 4 actors x 4 sessions at 10 fps: small enough for unit tests.
inline Dataset tiny_dataset(std::uint64_t seed = 3, int fps = 10, int class_count = 5) {
  GeneratorConfig cfg;
  cfg.sessions_per_actor = class_count == 6 ? 5 : 4;
  return synthesize_dataset(ActorProfile::roster(4), SceneProfile::indoor(), SceneProfile::outdoor(), fps,
                            seed, class_count, cfg);
}

inline TrainConfig tiny_config() {
  TrainConfig c;
  c.hidden = 8;
  c.epochs = 2;
  c.batch_size = 16;
  c.seed = 7;
  return c;
}

inline Snippet labeled_snippet(int majority, std::string actor = "actor0", SceneKind scene = SceneKind::Indoor) {
  Snippet s;
  s.majority = majority;
  s.labels.assign(4, majority);
  s.features = Eigen::MatrixXd::Zero(4, 2);
  s.actor_id = std::move(actor);
  s.scene = scene;
  return s;
}

}  // namespace egogest::testing
