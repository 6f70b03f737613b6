#pragma once

// Frame-pair homographies -> per-frame motion features m_t.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egogest/geometry.hpp"
#include "egogest/kinematics.hpp"

namespace egogest {

enum class FeatureKind { Raw8, Descriptor16 };
enum class Channels { World, Eye, Both };

inline constexpr std::size_t kRawDim = 8;
inline constexpr std::size_t kDescriptorDim = 16;

std::string_view feature_kind_name(FeatureKind kind) noexcept;
std::optional<FeatureKind> parse_feature_kind(std::string_view name) noexcept;
std::string_view channels_name(Channels channels) noexcept;
std::optional<Channels> parse_channels(std::string_view name) noexcept;

struct LayoutTag {
  FeatureKind kind = FeatureKind::Raw8;
  bool fused = false;
  double alpha_w = 1.0;
  double alpha_e = 1.0;

  std::size_t size() const noexcept;
  std::string to_string() const;
  bool operator==(const LayoutTag&) const = default;
};

struct MotionFeature {
  std::vector<double> values;
  LayoutTag layout;
};

/// to_param8(h) minus the identity's param8 when `centered`.
MotionFeature raw_features(const Homography& h, bool centered = true);

struct DescriptorOptions {
  bool allow_fallback = true;
  double rotation_tolerance = 0.05;  // Frobenius distance of K^-1 H K to SO(3)
};

/// (theta_x, theta_y, theta_z, center shift x/w, center shift y/h,
///  log scale, perspective x, perspective y) of a single homography.
std::array<double, 8> motion_descriptor(const Homography& h, const CameraIntrinsics& k,
                                        const DescriptorOptions& options = {});

/// motion_descriptor(h) followed by its difference to motion_descriptor(prev);
/// the difference block is zero when `prev` is empty.
MotionFeature descriptor_features(const Homography& h, const Homography* prev,
                                  const CameraIntrinsics& k,
                                  const DescriptorOptions& options = {});

/// [alpha_e * eye, alpha_w * world]; both inputs must share an unfused layout.
MotionFeature fuse(const MotionFeature& world, const MotionFeature& eye, double alpha_w,
                   double alpha_e);

struct FeatureStats {
  static constexpr double kStdFloor = 1e-8;
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t size() const noexcept { return mean.size(); }
};

/// Per-column mean and population standard deviation (floored at 1e-8).
FeatureStats fit_stats(const Eigen::Ref<const Eigen::MatrixXd>& samples);
FeatureStats fit_stats(std::span<const std::vector<double>> samples);
MotionFeature normalize(const MotionFeature& f, const FeatureStats& stats);
void normalize_rows(Eigen::Ref<Eigen::MatrixXd> rows, const FeatureStats& stats);

/// Everything needed to turn frame records into model inputs.
struct FeatureSpec {
  FeatureKind kind = FeatureKind::Descriptor16;
  Channels channels = Channels::Both;
  double alpha_w = 1.0;
  double alpha_e = 1.0;
  bool centered_raw = true;
  CameraIntrinsics world = CameraIntrinsics::world_default();
  CameraIntrinsics eye = CameraIntrinsics::eye_default();

  LayoutTag layout() const noexcept;
  std::size_t dim() const noexcept { return layout().size(); }
};

/// Stateful per-stream extractor; descriptor features need the previous
/// frame pair of each channel.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureSpec spec) : spec_(std::move(spec)) {}

  MotionFeature next(const FrameRecord& frame);
  void reset() noexcept;
  const FeatureSpec& spec() const noexcept { return spec_; }

 private:
  MotionFeature channel(const Homography& h, std::optional<Homography>& prev,
                        const CameraIntrinsics& k) const;

  FeatureSpec spec_;
  std::optional<Homography> prev_world_;
  std::optional<Homography> prev_eye_;
};

/// Unnormalized L x D feature matrix of a whole sequence.
Eigen::MatrixXd sequence_features(const LabeledSequence& seq, const FeatureSpec& spec);

}  // namespace egogest
