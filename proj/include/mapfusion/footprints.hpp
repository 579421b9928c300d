#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mapfusion/geometry.hpp"
#include "mapfusion/image.hpp"

namespace mapfusion {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error("parse error: " + msg) {}
};
struct DegenerateRing : std::runtime_error {
  explicit DegenerateRing(const std::string& id)
      : std::runtime_error("degenerate ring (<3 distinct vertices): " + id) {}
};

/// Closed CCW polygon ring in LocalFrame meters. The closing vertex is not
/// repeated in `ring`.
struct Footprint {
  std::string id;
  std::vector<Eigen::Vector2d> ring;
  double ground_elev = 0.0;

  double signed_area() const;
  bool contains(const Eigen::Vector2d& pt) const;
};

struct MapRaster {
  ImageU8 occupancy;        // 1 = inside some footprint
  double resolution = 0.3;  // meters per pixel
  double origin_x = 0.0;    // world coords of the outer corner of cell (0, 0)
  double origin_y = 0.0;    // top edge; rows grow southward

  Eigen::Vector2d cell_center(int col, int row) const {
    return {origin_x + (col + 0.5) * resolution, origin_y - (row + 0.5) * resolution};
  }
};

struct MapScene {
  std::vector<Footprint> footprints;
  MapRaster raster;
};

struct VisibleEdge {
  std::string building_id;
  int edge_index = 0;  // index of the ring edge this (sub)segment lies on
  Eigen::Vector2d a, b;
  double distance_to_camera = 0.0;
};

struct CornerPoint {
  std::string building_id;
  int vertex_index = 0;
  Eigen::Vector2d position;
  double ground_elev = 0.0;
};

std::vector<Footprint> load_geojson(const std::string& text);
std::vector<Footprint> load_geojson_file(const std::string& path);
std::string footprints_to_geojson(const std::vector<Footprint>& fps);

/// Minimal OSM XML reader: closed ways tagged building=*. Relations and open
/// ways are skipped with a warning pushed to `warnings`. Node lat/lon are
/// mapped to a local equirectangular plane anchored at the node centroid.
std::vector<Footprint> load_osm_xml(const std::string& text, std::vector<std::string>* warnings = nullptr);

MapRaster rasterize_map(const std::vector<Footprint>& footprints, double resolution = 0.3);

MapScene make_scene(std::vector<Footprint> footprints, double resolution = 0.3);

std::vector<VisibleEdge> visible_edges(const MapScene& scene, const CameraIntrinsics& intr,
                                       const CameraPose& pose, double max_range = 60.0);

std::vector<CornerPoint> visible_corners(const MapScene& scene, const CameraIntrinsics& intr,
                                         const CameraPose& pose, double max_range = 60.0);

}  // namespace mapfusion
