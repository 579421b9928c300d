#pragma once

#include <map>
#include <string>
#include <vector>

#include "mapfusion/heights.hpp"
#include "mapfusion/render.hpp"

namespace mapfusion {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error("config error: " + m) {}
};

/// Every numeric constant of the pipeline, validated on load; unknown keys
/// are rejected.
struct PipelineConfig {
  // image_features
  int window = 17;
  int bins_per_band = 11;
  double log_sigma_small = 0.5;
  double log_sigma_large = 1.0;
  double rgb_weight = 0.5;
  double angle_tol_deg = 22.5;
  int min_vertical_px = 50;
  int max_horizontal_px = 20;
  double center_sigma_px = 10.0;
  // localization
  int accumulator_size = 40;
  double accumulator_resolution_m = 0.3;
  int top_k = 5;
  double peak_threshold = 1.5;
  double bcl_length_m = 15.0;
  double sweep_max_err_m = 6.0;
  std::string vote_weight_eval = "segment_max";  // or "midpoint"
  // map / heights
  double max_range_m = 60.0;
  double map_resolution_m = 0.3;
  double scan_min_m = 3.0;
  double scan_max_m = 100.0;
  double scan_step_m = 0.2;
  double rejection_threshold = 0.15;
  bool normalize_polyline_score = true;
  // rendering
  bool include_roof_in_mask = true;
  // execution
  int threads = 1;
  std::uint64_t seed = 0;

  void validate() const;
  SpectralHistogramConfig spectral() const;
  JointConfig joint() const;
  RenderOptions render_options() const;

  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig from_file(const std::string& path);
  /// Key list of the JSON schema; the config-coverage test checks it against
  /// the serialized form.
  static std::vector<std::string> key_names();
};

struct DatasetImage {
  std::string name;  // stem, e.g. "img_0000"
  std::string image_path;
  CameraIntrinsics intrinsics;
  CameraPose initial_pose;
};

struct Dataset {
  MapScene scene;
  std::vector<DatasetImage> images;
};

Dataset load_dataset(const std::string& dir, const PipelineConfig& cfg);

struct PipelineOutputs {
  std::vector<std::pair<std::string, JointResult>> per_image;  // ordered by image name
  std::map<std::string, double> final_heights;
  std::map<std::string, int> vote_counts;
  std::map<std::string, double> best_scores;
  std::map<std::string, int> views_seen;
};

/// Full batch run: per-image joint refinement + height scan, cross-image
/// height vote, final model extrusion and mask rendering. Writes
/// refined_positions.csv, heights.csv, masks/, models.obj, diagnostics/.
PipelineOutputs run_pipeline(const std::string& dataset_dir, const std::string& out_dir,
                             const PipelineConfig& cfg, bool refine = true);

struct HeightEvaluation {
  std::map<double, double> accuracy_per_tolerance;
  std::vector<std::string> id_mismatches;
  int n_buildings = 0;
};

HeightEvaluation evaluate_heights(const std::string& predicted_csv, const std::string& truth_csv,
                                  const std::vector<double>& tolerances = {2.0, 3.0, 4.0});

struct MaskEvaluation {
  double mean_accuracy = 0;
  int n_images = 0;
  std::vector<std::string> errors;
};

MaskEvaluation evaluate_masks(const std::string& pred_dir, const std::string& truth_dir);

std::map<std::string, double> read_heights_csv(const std::string& path);

}  // namespace mapfusion
