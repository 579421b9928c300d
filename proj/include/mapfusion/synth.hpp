#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mapfusion/footprints.hpp"
#include "mapfusion/geometry.hpp"
#include "mapfusion/image.hpp"
#include "mapfusion/render.hpp"

namespace mapfusion {

struct PlacementFailure : std::runtime_error {
  PlacementFailure() : std::runtime_error("could not place a valid synthetic scene") {}
};

struct SceneSpec {
  std::uint64_t seed = 1;
  int n_buildings = 6;
  int n_cameras = 1;
  double min_footprint = 8.0, max_footprint = 16.0;   // meters per side
  double min_height = 8.0, max_height = 16.0;         // meters
  double street_width = 14.0;
  double min_gap = 3.0, max_gap = 8.0;
  double camera_mast = 2.5;                            // meters above ground
  double camera_spacing = 12.0;                        // along-street distance
  Rgb sky{170, 210, 250};
  Rgb ground{90, 90, 95};
  double facade_saturation = 1.0;  // 1 = vivid palette, lower = low contrast
  int n_occluders = 0;             // vertical "tree" billboards
  double gain_min = 1.0, gain_max = 1.0;
  int min_visible_bcls = 4;
};

struct SyntheticScene {
  MapScene map;
  std::vector<double> true_heights;       // parallel to map.footprints
  std::vector<CameraPose> cameras;        // true poses
  CameraIntrinsics intrinsics;
  std::vector<BuildingModel::Face> occluders;  // unlabeled billboards
  double gain = 1.0;
  double palette_saturation = 1.0;
  Rgb sky{170, 210, 250};
  Rgb ground{90, 90, 95};
};

SyntheticScene generate_scene(const SceneSpec& spec);

struct RenderedView {
  ImageRgb image;
  FacadeMask truth_mask;
};

/// Flat-shaded z-buffer reference render; per-pixel nearest-face test,
/// independent of the painter path in render_masks.
RenderedView render_scene(const SyntheticScene& scene, const CameraPose& pose);

/// Label-only z-buffer render of arbitrary prism models (oracle for
/// painter/z-buffer equivalence checks).
FacadeMask zbuffer_masks(const std::vector<BuildingModel>& models, const CameraIntrinsics& intr,
                         const CameraPose& pose, bool include_roof = true);

/// Planar offset uniform in a disc of the given radius; z and rotation kept.
CameraPose perturb_position(const CameraPose& pose, double radius_m, std::uint64_t seed);

/// Writes the dataset directory layout the CLI consumes:
/// images/, cameras/, map.geojson, truth_heights.csv, truth_masks/,
/// truth_positions.csv.
void write_dataset(const std::string& dir, const SyntheticScene& scene,
                   const std::vector<CameraPose>& initial_poses);

std::string camera_json(const std::string& image_name, const CameraIntrinsics& intr,
                        const CameraPose& pose);
void parse_camera_json(const std::string& text, std::string& image_name, CameraIntrinsics& intr,
                       CameraPose& pose);

}  // namespace mapfusion
