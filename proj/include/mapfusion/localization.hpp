#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mapfusion/features.hpp"
#include "mapfusion/footprints.hpp"
#include "mapfusion/geometry.hpp"

namespace mapfusion {

struct FullyClipped : std::runtime_error {
  FullyClipped() : std::runtime_error("projected segment fully outside image") {}
};

/// Building corner line: a vertical 3D segment of fixed length anchored at a
/// footprint corner, matchable against near-vertical edge regions in images.
struct Bcl {
  CornerPoint corner;
  double base_elev = 0.0;
  double top_elev = 0.0;
};

std::vector<Bcl> make_bcls(const std::vector<CornerPoint>& corners, double length_m = 15.0);

struct ProjectedBcl {
  double u = 0;        // column (base pixel column)
  double v_top = 0;    // smaller row value (toward image top)
  double v_bottom = 0;
  double v_base = 0;   // unclipped base row
};

/// Projects a BCL; under zero roll the segment is one column (deviation
/// < 0.5 px asserted). Rows clipped to image bounds.
ProjectedBcl project_bcl(const Bcl& bcl, const CameraIntrinsics& intr, const CameraPose& pose);

/// Column sweep half-range, inversely proportional to BCL distance.
int sweep_range(double distance_m, double fx, double max_err_m, int image_width);

struct AccumulatorConfig {
  int size = 40;           // cells per side
  double resolution = 0.3; // meters per cell
};

struct Accumulator {
  AccumulatorConfig cfg;
  Eigen::Vector2d center;  // initial camera position; geometric grid center
  std::vector<double> cells;

  Accumulator() = default;
  Accumulator(const AccumulatorConfig& c, const Eigen::Vector2d& ctr)
      : cfg(c), center(ctr), cells(static_cast<size_t>(c.size) * c.size, 0.0) {}

  double& at(int col, int row) { return cells[static_cast<size_t>(row) * cfg.size + col]; }
  double at(int col, int row) const { return cells[static_cast<size_t>(row) * cfg.size + col]; }

  double min_x() const { return center.x() - cfg.size * 0.5 * cfg.resolution; }
  double min_y() const { return center.y() - cfg.size * 0.5 * cfg.resolution; }
  Eigen::Vector2d cell_center(int col, int row) const {
    return {min_x() + (col + 0.5) * cfg.resolution, min_y() + (row + 0.5) * cfg.resolution};
  }
  bool cell_of(const Eigen::Vector2d& p, int& col, int& row) const;
  double total_mass() const;
};

struct CandidatePosition {
  Eigen::Vector2d position;
  double peak_value = 0;
};

enum class VoteWeightEval {
  kSegmentMax,  // max center density reached along the moved segment
  kMidpoint,    // density at the moved segment midpoint only
};

struct VoteConfig {
  double bcl_length_m = 15.0;
  double center_sigma_px = 10.0;
  double sweep_max_err_m = 6.0;
  VoteWeightEval weight_eval = VoteWeightEval::kSegmentMax;
};

/// Casts position-line votes for every BCL and column offset into the
/// accumulator. Offsets whose moved segment reaches no region weight cast
/// nothing.
void vote(Accumulator& acc, const std::vector<Bcl>& bcls,
          const std::vector<LineSupportRegion>& regions, const CameraIntrinsics& intr,
          const CameraPose& initial_pose, const VoteConfig& cfg);

/// 3x3 local maxima above threshold, descending, mutually non-adjacent,
/// at most k.
std::vector<CandidatePosition> top_peaks(const Accumulator& acc, int k = 5, double threshold = 1.5);

void write_accumulator_csv(const std::string& path, const Accumulator& acc);
void write_accumulator_png(const std::string& path, const Accumulator& acc);

}  // namespace mapfusion
