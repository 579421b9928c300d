#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace mapfusion {

// Convention, repo-wide: world frame is a local planar metric frame with
// X = east, Y = north, Z = up. The rotation maps world to camera; the camera
// looks along +Z of the camera frame; pixel u grows rightward, v downward.

struct NonFiniteInput : std::runtime_error {
  NonFiniteInput() : std::runtime_error("non-finite input") {}
};
struct BehindCamera : std::runtime_error {
  BehindCamera() : std::runtime_error("point behind camera") {}
};
struct DegenerateDirection : std::runtime_error {
  DegenerateDirection() : std::runtime_error("back-projected ray is vertical in the world frame") {}
};
struct ParallelLines : std::runtime_error {
  ParallelLines() : std::runtime_error("lines are parallel") {}
};

struct LocalFrame {
  double origin_easting = 0.0;
  double origin_northing = 0.0;
};

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int image_width = 0, image_height = 0;

  bool valid() const {
    return fx > 0 && fy > 0 && cx >= 0 && cx < image_width && cy >= 0 && cy < image_height;
  }
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }
};

struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d position = Eigen::Vector3d::Zero();      // camera center, meters

  bool rotation_valid(double tol = 1e-9) const {
    return (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(rotation.determinant() - 1.0) < tol;
  }
};

using WorldPoint = Eigen::Vector3d;

struct PixelPoint {
  double u = 0, v = 0;
};

struct PositionLine2D {
  Eigen::Vector2d anchor;     // a point on the line, meters
  Eigen::Vector2d direction;  // unit vector
};

struct Projection {
  PixelPoint pixel;
  double depth = 0;  // third camera-frame coordinate, meters
};

/// Pinhole projection u = K R (P - C); throws BehindCamera if depth <= 1e-6.
Projection project_point(const WorldPoint& p, const CameraIntrinsics& intr, const CameraPose& pose);

/// Planar line of camera positions consistent with the correspondence p <-> P
/// under a known rotation. The line passes through (P.x, P.y).
PositionLine2D backproject_line(const PixelPoint& p, const CameraIntrinsics& intr,
                                const Eigen::Matrix3d& rotation, const WorldPoint& world_point);

Eigen::Vector2d intersect_lines(const PositionLine2D& a, const PositionLine2D& b);

/// Planar field-of-view sector on the map plane.
struct FovWedge {
  Eigen::Vector2d apex;
  double bearing_left = 0;   // radians, from back-projecting pixel (0, cy)
  double bearing_right = 0;  // radians, pixel (width-1, cy)
  double radius = 0;         // meters

  bool contains(const Eigen::Vector2d& pt) const;
  double half_angle() const;
};

FovWedge field_of_view_wedge(const CameraIntrinsics& intr, const CameraPose& pose, double max_range);

/// Camera pose looking along a planar bearing (radians, 0 = +X east,
/// pi/2 = +Y north), horizon level. Euler-style ingestion helper for metadata
/// that ships a heading instead of a full matrix.
Eigen::Matrix3d rotation_from_bearing(double bearing_rad);

}  // namespace mapfusion
