#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mapfusion/features.hpp"
#include "mapfusion/footprints.hpp"
#include "mapfusion/geometry.hpp"
#include "mapfusion/localization.hpp"

namespace mapfusion {

struct EmptyProjection : std::runtime_error {
  EmptyProjection() : std::runtime_error("all projected segments clip away") {}
};
struct NoVisibleEdges : std::runtime_error {
  NoVisibleEdges() : std::runtime_error("building has no visible edges") {}
};
struct OutOfRange : std::runtime_error {
  OutOfRange() : std::runtime_error("height outside vote array range") {}
};

struct HeightScanConfig {
  double min_above_ground = 3.0;
  double max_above_ground = 100.0;
  double step = 0.2;
  double low_score_threshold = 0.15;  // mean edgeness per polyline pixel
  bool normalize_by_pixel_count = true;

  bool valid() const {
    return min_above_ground < max_above_ground && step > 0 && low_score_threshold >= 0;
  }
  int n_bins() const {
    return static_cast<int>(std::floor((max_above_ground - min_above_ground) / step + 0.5)) + 1;
  }
};

struct PolylineScore {
  double score = 0;  // sum of edgeness over unique pixels, / count if normalized
  int pixel_count = 0;
  double in_frame_fraction = 0;  // pixel-space length kept by the image clip
};

/// Projects edge segments at the given absolute elevation, rasterizes them
/// and sums edgeness over unique pixels.
PolylineScore polyline_score(const std::vector<VisibleEdge>& edges, double elevation,
                             const EdgenessField& field, const CameraIntrinsics& intr,
                             const CameraPose& pose, bool normalize = true);

struct HeightEstimate {
  bool rejected = false;
  bool truncated = false;  // rejected because the roofline mostly left the frame
  double height = 0;  // meters above ground
  double score = 0;   // polyline score at the selected elevation
  std::vector<double> scan_scores;  // one per scan step (diagnostics)
};

/// Scans elevations over the configured range and returns the argmax; marked
/// rejected when the best score stays under the threshold.
HeightEstimate estimate_height_single(const std::vector<VisibleEdge>& building_edges,
                                      double ground_elev, const EdgenessField& field,
                                      const CameraIntrinsics& intr, const CameraPose& pose,
                                      const HeightScanConfig& cfg, bool keep_curve = false);

struct HeightVoteArray {
  std::string building_id;
  HeightScanConfig cfg;
  std::vector<int> counts;

  explicit HeightVoteArray(std::string id = {}, const HeightScanConfig& c = {})
      : building_id(std::move(id)), cfg(c), counts(c.n_bins(), 0) {}

  int bin_of(double height) const;
  void accumulate(const HeightEstimate& est);
  /// Argmax height; ties break toward the smallest height. Empty when no
  /// votes were recorded.
  std::optional<double> finalize() const;
  int total_votes() const;
};

struct BuildingResult {
  std::string building_id;
  HeightEstimate estimate;
  bool no_visible_edges = false;
};

struct JointResult {
  Eigen::Vector2d refined_position;
  bool used_refinement = false;  // false = fallback to the initial position
  double top_peak = 0;
  double best_sum = 0;  // S of the selected candidate
  std::vector<CandidatePosition> candidates;
  std::vector<double> candidate_sums;
  std::vector<BuildingResult> buildings;  // for the selected candidate
};

struct JointConfig {
  VoteConfig vote;
  AccumulatorConfig accumulator;
  HeightScanConfig scan;
  int top_k = 5;
  double peak_threshold = 1.5;
  double max_range = 60.0;
  double angle_tol_deg = 22.5;
  int min_vertical_px = 50;
  int max_horizontal_px = 20;
};

/// Joint camera refinement + per-building height estimation for one image:
/// vote candidate positions, score every candidate by the sum of best
/// polyline scores over its non-rejected buildings, keep the best.
JointResult joint_localize_estimate(const ImageRgb& image, const EdgenessField& field,
                                    const MapScene& scene, const CameraIntrinsics& intr,
                                    const CameraPose& initial_pose, const JointConfig& cfg,
                                    bool refine = true,
                                    const std::vector<LineSupportRegion>* regions_override = nullptr);

}  // namespace mapfusion
