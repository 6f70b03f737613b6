#include "egogest/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "egogest/error.hpp"

namespace egogest {

namespace {

constexpr Param8 kIdentityParam8 = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0};

std::size_t base_size(FeatureKind kind) { return kind == FeatureKind::Raw8 ? kRawDim : kDescriptorDim; }

}  // namespace

std::string_view feature_kind_name(FeatureKind kind) noexcept {
  return kind == FeatureKind::Raw8 ? "raw8" : "descriptor16";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view name) noexcept {
  if (name == "raw8") return FeatureKind::Raw8;
  if (name == "descriptor16") return FeatureKind::Descriptor16;
  return std::nullopt;
}

std::string_view channels_name(Channels channels) noexcept {
  switch (channels) {
    case Channels::World: return "world";
    case Channels::Eye: return "eye";
    case Channels::Both: return "both";
  }
  return "both";
}

std::optional<Channels> parse_channels(std::string_view name) noexcept {
  if (name == "world") return Channels::World;
  if (name == "eye") return Channels::Eye;
  if (name == "both") return Channels::Both;
  return std::nullopt;
}

std::size_t LayoutTag::size() const noexcept { return fused ? 2 * base_size(kind) : base_size(kind); }

std::string LayoutTag::to_string() const {
  if (!fused) return std::string(feature_kind_name(kind));
  std::ostringstream os;
  os << "fused(" << feature_kind_name(kind) << "," << feature_kind_name(kind) << "," << alpha_w
     << "," << alpha_e << ")";
  return os.str();
}

MotionFeature raw_features(const Homography& h, bool centered) {
  const Param8 p = to_param8(h);
  MotionFeature f;
  f.layout = {FeatureKind::Raw8, false, 1.0, 1.0};
  f.values.assign(p.begin(), p.end());
  if (centered) {
    for (std::size_t i = 0; i < kRawDim; ++i) f.values[i] -= kIdentityParam8[i];
  }
  return f;
}

std::array<double, 8> motion_descriptor(const Homography& h, const CameraIntrinsics& k,
                                        const DescriptorOptions& options) {
  Mat3 m = k.inverse_matrix() * h.matrix() * k.matrix();
  const double det = m.determinant();
  m /= std::cbrt(det);

  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  const double residual = (m - r).norm();
  if (residual > options.rotation_tolerance && !options.allow_fallback) {
    throw Error(ErrorCode::DecompositionFailure,
                "K^-1 H K is " + std::to_string(residual) + " away from a rotation");
  }

  // R = Rz * Ry * Rx.
  const double ry = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double rx = std::atan2(r(2, 1), r(2, 2));
  const double rz = std::atan2(r(1, 0), r(0, 0));

  const Vec2 center(0.5 * k.width, 0.5 * k.height);
  const Vec2 shift = apply(h, center) - center;
  const Mat3& hm = h.matrix();
  const double area = std::abs(hm(0, 0) * hm(1, 1) - hm(0, 1) * hm(1, 0));

  return {rx,
          ry,
          rz,
          shift.x() / k.width,
          shift.y() / k.height,
          0.5 * std::log(std::max(area, 1e-300)),
          hm(2, 0) * k.fx,
          hm(2, 1) * k.fy};
}

MotionFeature descriptor_features(const Homography& h, const Homography* prev,
                                  const CameraIntrinsics& k, const DescriptorOptions& options) {
  const auto cur = motion_descriptor(h, k, options);
  MotionFeature f;
  f.layout = {FeatureKind::Descriptor16, false, 1.0, 1.0};
  f.values.assign(kDescriptorDim, 0.0);
  std::copy(cur.begin(), cur.end(), f.values.begin());
  if (prev != nullptr) {
    const auto before = motion_descriptor(*prev, k, options);
    for (std::size_t i = 0; i < cur.size(); ++i) f.values[cur.size() + i] = cur[i] - before[i];
  }
  return f;
}

MotionFeature fuse(const MotionFeature& world, const MotionFeature& eye, double alpha_w,
                   double alpha_e) {
  if (world.layout.fused || eye.layout.fused || world.layout.kind != eye.layout.kind ||
      world.values.size() != world.layout.size() || eye.values.size() != eye.layout.size()) {
    throw Error(ErrorCode::LayoutMismatch,
                "cannot fuse " + world.layout.to_string() + " with " + eye.layout.to_string());
  }
  MotionFeature f;
  f.layout = {world.layout.kind, true, alpha_w, alpha_e};
  f.values.reserve(eye.values.size() + world.values.size());
  for (double v : eye.values) f.values.push_back(alpha_e * v);
  for (double v : world.values) f.values.push_back(alpha_w * v);
  return f;
}

FeatureStats fit_stats(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  if (samples.rows() < 2) {
    throw Error(ErrorCode::InvalidArgument, "feature statistics need at least 2 samples");
  }
  FeatureStats stats;
  const auto n = static_cast<double>(samples.rows());
  const Eigen::RowVectorXd mean = samples.colwise().sum() / n;
  const Eigen::RowVectorXd var =
      (samples.rowwise() - mean).array().square().colwise().sum() / n;
  stats.mean.resize(static_cast<std::size_t>(samples.cols()));
  stats.stddev.resize(stats.mean.size());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    stats.mean[static_cast<std::size_t>(j)] = mean(j);
    stats.stddev[static_cast<std::size_t>(j)] = std::max(std::sqrt(var(j)), FeatureStats::kStdFloor);
  }
  return stats;
}

FeatureStats fit_stats(std::span<const std::vector<double>> samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no samples");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(samples.size()),
                    static_cast<Eigen::Index>(samples.front().size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != samples.front().size()) {
      throw Error(ErrorCode::ShapeMismatch, "ragged feature samples");
    }
    for (std::size_t j = 0; j < samples[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i][j];
    }
  }
  return fit_stats(m);
}

MotionFeature normalize(const MotionFeature& f, const FeatureStats& stats) {
  if (f.values.size() != stats.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature/statistics dimension mismatch");
  }
  MotionFeature out = f;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (out.values[i] - stats.mean[i]) / stats.stddev[i];
  }
  return out;
}

void normalize_rows(Eigen::Ref<Eigen::MatrixXd> rows, const FeatureStats& stats) {
  if (static_cast<std::size_t>(rows.cols()) != stats.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature/statistics dimension mismatch");
  }
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    rows.col(j) = (rows.col(j).array() - stats.mean[ju]) / stats.stddev[ju];
  }
}

LayoutTag FeatureSpec::layout() const noexcept {
  if (channels == Channels::Both) return {kind, true, alpha_w, alpha_e};
  return {kind, false, 1.0, 1.0};
}

MotionFeature FeatureExtractor::channel(const Homography& h, std::optional<Homography>& prev,
                                        const CameraIntrinsics& k) const {
  MotionFeature f = spec_.kind == FeatureKind::Raw8
                        ? raw_features(h, spec_.centered_raw)
                        : descriptor_features(h, prev ? &*prev : nullptr, k);
  prev = h;
  return f;
}

MotionFeature FeatureExtractor::next(const FrameRecord& frame) {
  switch (spec_.channels) {
    case Channels::World:
      return channel(Homography::from_param8(frame.world), prev_world_, spec_.world);
    case Channels::Eye:
      return channel(Homography::from_param8(frame.eye), prev_eye_, spec_.eye);
    case Channels::Both: {
      auto w = channel(Homography::from_param8(frame.world), prev_world_, spec_.world);
      auto e = channel(Homography::from_param8(frame.eye), prev_eye_, spec_.eye);
      return fuse(w, e, spec_.alpha_w, spec_.alpha_e);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown channel selection");
}

void FeatureExtractor::reset() noexcept {
  prev_world_.reset();
  prev_eye_.reset();
}

Eigen::MatrixXd sequence_features(const LabeledSequence& seq, const FeatureSpec& spec) {
  FeatureExtractor extractor(spec);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(seq.frames.size()),
                      static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto f = extractor.next(seq.frames[i]);
    for (std::size_t j = 0; j < f.values.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f.values[j];
    }
  }
  return out;
}

}  // namespace egogest
