#pragma once

// Pinhole-camera homographies: construction from rigid motion, DLT
// estimation, composition and the 8-parameter canonical form.
//
// Conventions used throughout the library:
//   * camera axes: X right, Y down, Z forward;
//   * rotation_matrix(rx, ry, rz) = Rz(rz) * Ry(ry) * Rx(rx);
//   * a RigidMotion maps points between camera frames, X2 = R X1 + t.

#include <array>
#include <span>

#include <Eigen/Core>

namespace egogest {

using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Param8 = std::array<double, 8>;

struct CameraIntrinsics {
  double fx = 120.0;
  double fy = 120.0;
  double cx = 96.0;
  double cy = 72.0;
  int width = 192;
  int height = 144;

  /// 192x144 working resolution of the world camera (~77 deg horizontal FOV).
  static CameraIntrinsics world_default() { return {120.0, 120.0, 96.0, 72.0, 192, 144}; }
  /// 192x192 eye camera.
  static CameraIntrinsics eye_default() { return {160.0, 160.0, 96.0, 96.0, 192, 192}; }

  void validate() const;
  Mat3 matrix() const;
  Mat3 inverse_matrix() const;
};

struct RigidMotion {
  double rx = 0.0;
  double ry = 0.0;
  double rz = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double tz = 0.0;

  Mat3 rotation() const;
  Vec3 translation() const { return {tx, ty, tz}; }
};

/// 3x3 projective transform, always stored with m(2,2) == 1.
class Homography {
 public:
  Homography() : m_(Mat3::Identity()) {}
  /// Normalizes by m(2,2). Throws DegenerateConfiguration when |m(2,2)| or
  /// |det| is below 1e-12.
  explicit Homography(const Mat3& m);

  static Homography identity() { return Homography(); }
  static Homography from_param8(const Param8& p);

  const Mat3& matrix() const noexcept { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }
  double determinant() const { return m_.determinant(); }
  Homography inverse() const;

 private:
  Mat3 m_;
};

struct Correspondence {
  Vec2 src;
  Vec2 dst;
};

Mat3 rotation_matrix(double rx, double ry, double rz);

/// Plane-induced homography H = K (R + t n^T / d) K^-1 for the plane
/// n . X = d expressed in the first camera frame.
Homography homography_from_motion(const CameraIntrinsics& k, const Mat3& rotation,
                                  const Vec3& translation, const Vec3& plane_normal,
                                  double plane_depth);
Homography homography_from_motion(const CameraIntrinsics& k, const RigidMotion& motion,
                                  const Vec3& plane_normal, double plane_depth);

/// Normalized DLT (Hartley conditioning) over >= 4 correspondences.
Homography estimate_homography_dlt(std::span<const Correspondence> correspondences);

/// Row-major reading of the 8 entries other than m(2,2).
Param8 to_param8(const Homography& h);

/// compose(a, b) maps points as a(b(p)).
Homography compose(const Homography& a, const Homography& b);

/// Projective mapping of a point; throws PointAtInfinity when |w| < 1e-12.
Vec2 apply(const Homography& h, const Vec2& p);

}  // namespace egogest
