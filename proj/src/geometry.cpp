#include "mapfusion/geometry.hpp"

#include <cmath>

namespace mapfusion {

namespace {
constexpr double kMinDepth = 1e-6;

double wrap_2pi(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  return a < 0 ? a + two_pi : a;
}
}  // namespace

Projection project_point(const WorldPoint& p, const CameraIntrinsics& intr, const CameraPose& pose) {
  if (!p.allFinite() || !pose.position.allFinite() || !pose.rotation.allFinite()) throw NonFiniteInput();
  Eigen::Vector3d cam = pose.rotation * (p - pose.position);
  if (cam.z() <= kMinDepth) throw BehindCamera();
  Projection out;
  out.pixel.u = intr.fx * cam.x() / cam.z() + intr.cx;
  out.pixel.v = intr.fy * cam.y() / cam.z() + intr.cy;
  out.depth = cam.z();
  return out;
}

PositionLine2D backproject_line(const PixelPoint& p, const CameraIntrinsics& intr,
                                const Eigen::Matrix3d& rotation, const WorldPoint& world_point) {
  Eigen::Vector3d hom(p.u, p.v, 1.0);
  Eigen::Vector3d dir3 = rotation.transpose() * (intr.matrix().inverse() * hom);
  Eigen::Vector2d dir2(dir3.x(), dir3.y());
  double n = dir2.norm();
  if (n < 1e-12) throw DegenerateDirection();
  return {Eigen::Vector2d(world_point.x(), world_point.y()), dir2 / n};
}

Eigen::Vector2d intersect_lines(const PositionLine2D& a, const PositionLine2D& b) {
  double cross = a.direction.x() * b.direction.y() - a.direction.y() * b.direction.x();
  if (std::abs(cross) <= 1e-9) throw ParallelLines();
  Eigen::Vector2d d = b.anchor - a.anchor;
  double t = (d.x() * b.direction.y() - d.y() * b.direction.x()) / cross;
  return a.anchor + t * a.direction;
}

bool FovWedge::contains(const Eigen::Vector2d& pt) const {
  Eigen::Vector2d rel = pt - apex;
  double r = rel.norm();
  if (r > radius) return false;
  if (r < 1e-12) return true;
  double theta = std::atan2(rel.y(), rel.x());
  double span = wrap_2pi(bearing_left - bearing_right);
  return wrap_2pi(theta - bearing_right) <= span;
}

double FovWedge::half_angle() const { return wrap_2pi(bearing_left - bearing_right) / 2.0; }

FovWedge field_of_view_wedge(const CameraIntrinsics& intr, const CameraPose& pose, double max_range) {
  if (!intr.valid()) throw std::invalid_argument("invalid intrinsics");
  if (!pose.rotation_valid(1e-6)) throw std::invalid_argument("rotation not orthonormal");
  auto bearing_of_column = [&](double u) {
    Eigen::Vector3d hom(u, intr.cy, 1.0);
    Eigen::Vector3d d = pose.rotation.transpose() * (intr.matrix().inverse() * hom);
    return std::atan2(d.y(), d.x());
  };
  FovWedge w;
  w.apex = Eigen::Vector2d(pose.position.x(), pose.position.y());
  w.bearing_left = bearing_of_column(0.0);
  w.bearing_right = bearing_of_column(static_cast<double>(intr.image_width - 1));
  w.radius = max_range;
  return w;
}

Eigen::Matrix3d rotation_from_bearing(double bearing_rad) {
  // Camera axes in world coordinates: z_cam = forward (planar bearing),
  // x_cam = rightward, y_cam = down.
  Eigen::Vector3d forward(std::cos(bearing_rad), std::sin(bearing_rad), 0.0);
  Eigen::Vector3d right(std::sin(bearing_rad), -std::cos(bearing_rad), 0.0);
  Eigen::Vector3d down(0.0, 0.0, -1.0);
  Eigen::Matrix3d r;
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = forward;
  return r;
}

}  // namespace mapfusion
