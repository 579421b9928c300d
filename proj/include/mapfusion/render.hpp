#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "mapfusion/footprints.hpp"
#include "mapfusion/geometry.hpp"
#include "mapfusion/image.hpp"

namespace mapfusion {

struct NonPositiveHeight : std::runtime_error {
  NonPositiveHeight() : std::runtime_error("building height must be positive") {}
};
struct DimensionMismatch : std::runtime_error {
  DimensionMismatch() : std::runtime_error("mask dimensions differ") {}
};

/// Extruded prism: one quad per ring edge plus the roof polygon.
struct BuildingModel {
  std::string building_id;
  std::vector<Eigen::Vector2d> ring;  // CCW
  double ground_elev = 0;
  double height = 0;

  struct Face {
    std::vector<Eigen::Vector3d> vertices;  // CCW viewed from outside
    bool is_roof = false;
  };
  std::vector<Face> faces;
};

BuildingModel extrude(const Footprint& footprint, double height);

struct FacadeMask {
  Image<std::uint16_t> labels;  // 0 = background
  std::map<std::uint16_t, std::string> label_to_building;
};

struct RenderOptions {
  bool include_roof = true;
};

/// Painter's algorithm: faces sorted by decreasing centroid distance, nearer
/// faces overwrite farther ones. Faces crossing the image plane are clipped
/// at depth 1e-3 m.
FacadeMask render_masks(const std::vector<BuildingModel>& models, const CameraIntrinsics& intr,
                        const CameraPose& pose, const RenderOptions& opts = {});

/// Fraction of truth building pixels carrying the right building label
/// (label tables matched by building_id; cross-building confusions count as
/// wrong).
double mask_accuracy(const FacadeMask& predicted, const FacadeMask& truth);

std::string export_obj(const std::vector<BuildingModel>& models);

/// Minimal OBJ reader for round-trip checks: objects, vertices, faces.
struct ParsedObj {
  struct Object {
    std::string name;
    std::vector<std::vector<Eigen::Vector3d>> faces;
  };
  std::vector<Object> objects;
};
ParsedObj parse_obj(const std::string& text);

void write_mask(const std::string& png_path, const std::string& json_path, const FacadeMask& mask);
FacadeMask read_mask(const std::string& png_path, const std::string& json_path);

}  // namespace mapfusion
