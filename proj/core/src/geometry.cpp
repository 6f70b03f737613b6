#include "egogest/geometry.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "egogest/error.hpp"

namespace egogest {

namespace {

constexpr double kTiny = 1e-12;
constexpr double kDltRankTolerance = 1e-9;

// Translates the centroid to the origin and scales the mean distance to sqrt(2).
Mat3 conditioning_transform(std::span<const Vec2> points) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(points.size());
  if (mean_dist < kTiny) {
    throw Error(ErrorCode::DegenerateConfiguration, "all correspondence points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 t;
  t << s, 0.0, -s * centroid.x(),
       0.0, s, -s * centroid.y(),
       0.0, 0.0, 1.0;
  return t;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw Error(ErrorCode::InvalidArgument, "principal point must lie inside the image");
  }
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraIntrinsics::inverse_matrix() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx,
       0.0, 1.0 / fy, -cy / fy,
       0.0, 0.0, 1.0;
  return k;
}

Mat3 RigidMotion::rotation() const { return rotation_matrix(rx, ry, rz); }

Homography::Homography(const Mat3& m) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::DegenerateConfiguration, "homography has non-finite entries");
  }
  if (std::abs(m(2, 2)) < kTiny) {
    throw Error(ErrorCode::DegenerateConfiguration, "|m22| below 1e-12, cannot normalize");
  }
  m_ = m / m(2, 2);
  if (std::abs(m_.determinant()) <= kTiny) {
    throw Error(ErrorCode::DegenerateConfiguration, "homography is singular");
  }
}

Homography Homography::from_param8(const Param8& p) {
  Mat3 m;
  m << p[0], p[1], p[2],
       p[3], p[4], p[5],
       p[6], p[7], 1.0;
  return Homography(m);
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Mat3 rotation_matrix(double rx, double ry, double rz) {
  const double cxr = std::cos(rx), sxr = std::sin(rx);
  const double cyr = std::cos(ry), syr = std::sin(ry);
  const double czr = std::cos(rz), szr = std::sin(rz);
  Mat3 x, y, z;
  x << 1.0, 0.0, 0.0,
       0.0, cxr, -sxr,
       0.0, sxr, cxr;
  y << cyr, 0.0, syr,
       0.0, 1.0, 0.0,
       -syr, 0.0, cyr;
  z << czr, -szr, 0.0,
       szr, czr, 0.0,
       0.0, 0.0, 1.0;
  return z * y * x;
}

Homography homography_from_motion(const CameraIntrinsics& k, const Mat3& rotation,
                                  const Vec3& translation, const Vec3& plane_normal,
                                  double plane_depth) {
  if (!(plane_depth > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth,
                "plane depth must be positive, got " + std::to_string(plane_depth));
  }
  if (std::abs(plane_normal.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "plane normal must be unit length");
  }
  const Mat3 euclidean = rotation + translation * plane_normal.transpose() / plane_depth;
  return Homography(k.matrix() * euclidean * k.inverse_matrix());
}

Homography homography_from_motion(const CameraIntrinsics& k, const RigidMotion& motion,
                                  const Vec3& plane_normal, double plane_depth) {
  return homography_from_motion(k, motion.rotation(), motion.translation(), plane_normal,
                                plane_depth);
}

Homography estimate_homography_dlt(std::span<const Correspondence> correspondences) {
  const auto n = correspondences.size();
  if (n < 4) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "DLT needs at least 4 correspondences, got " + std::to_string(n));
  }
  std::vector<Vec2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!correspondences[i].src.allFinite() || !correspondences[i].dst.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "non-finite correspondence");
    }
    src[i] = correspondences[i].src;
    dst[i] = correspondences[i].dst;
  }
  const Mat3 ts = conditioning_transform(src);
  const Mat3 td = conditioning_transform(dst);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = ts * src[i].homogeneous();
    const Vec3 q = td * dst[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    // q x (H p) = 0, two independent rows.
    a.row(r) << 0.0, 0.0, 0.0, -q.z() * p.transpose(), q.y() * p.transpose();
    a.row(r + 1) << q.z() * p.transpose(), 0.0, 0.0, 0.0, -q.x() * p.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A one-dimensional null space is required; sv(7) ~ 0 means the points
  // leave the homography underdetermined.
  if (sv.size() < 8 || sv(7) <= kDltRankTolerance * sv(0)) {
    throw Error(ErrorCode::DegenerateConfiguration, "DLT design matrix is rank deficient");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2),
        h(3), h(4), h(5),
        h(6), h(7), h(8);
  return Homography(td.inverse() * hn * ts);
}

Param8 to_param8(const Homography& h) {
  const Mat3& m = h.matrix();
  return {m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1)};
}

Homography compose(const Homography& a, const Homography& b) {
  return Homography(a.matrix() * b.matrix());
}

Vec2 apply(const Homography& h, const Vec2& p) {
  const Vec3 q = h.matrix() * p.homogeneous();
  if (std::abs(q.z()) < kTiny) {
    throw Error(ErrorCode::PointAtInfinity, "point maps to infinity");
  }
  return q.hnormalized();
}

}  // namespace egogest
