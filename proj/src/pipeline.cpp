#include "mapfusion/pipeline.hpp"

#include "mapfusion/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace mapfusion {

namespace fs = std::filesystem;
using json = nlohmann::json;

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (window < 3 || window % 2 == 0) fail("window must be odd and >= 3");
  if (bins_per_band < 2) fail("bins_per_band must be >= 2");
  if (log_sigma_small <= 0 || log_sigma_large <= 0) fail("log sigmas must be positive");
  if (rgb_weight <= 0 || rgb_weight > 1.0) fail("rgb_weight must be in (0, 1]");
  if (angle_tol_deg <= 0 || angle_tol_deg >= 90) fail("angle_tol_deg must be in (0, 90)");
  if (min_vertical_px < 1 || max_horizontal_px < 1) fail("region extents must be positive");
  if (center_sigma_px <= 0) fail("center_sigma_px must be positive");
  if (accumulator_size < 2) fail("accumulator_size must be >= 2");
  if (accumulator_resolution_m <= 0) fail("accumulator_resolution_m must be positive");
  if (top_k < 1) fail("top_k must be >= 1");
  if (peak_threshold < 0) fail("peak_threshold must be >= 0");
  if (bcl_length_m <= 0) fail("bcl_length_m must be positive");
  if (sweep_max_err_m <= 0) fail("sweep_max_err_m must be positive");
  if (vote_weight_eval != "segment_max" && vote_weight_eval != "midpoint")
    fail("vote_weight_eval must be segment_max or midpoint");
  if (max_range_m <= 0) fail("max_range_m must be positive");
  if (map_resolution_m <= 0) fail("map_resolution_m must be positive");
  if (scan_min_m >= scan_max_m) fail("scan_min_m must be below scan_max_m");
  if (scan_step_m <= 0) fail("scan_step_m must be positive");
  if (rejection_threshold < 0) fail("rejection_threshold must be >= 0");
  if (threads < 1) fail("threads must be >= 1");
}

SpectralHistogramConfig PipelineConfig::spectral() const {
  SpectralHistogramConfig c;
  c.window = window;
  c.bins_per_band = bins_per_band;
  c.log_sigma_small = log_sigma_small;
  c.log_sigma_large = log_sigma_large;
  c.rgb_weight = rgb_weight;
  return c;
}

JointConfig PipelineConfig::joint() const {
  JointConfig c;
  c.vote.bcl_length_m = bcl_length_m;
  c.vote.center_sigma_px = center_sigma_px;
  c.vote.sweep_max_err_m = sweep_max_err_m;
  c.vote.weight_eval =
      vote_weight_eval == "midpoint" ? VoteWeightEval::kMidpoint : VoteWeightEval::kSegmentMax;
  c.accumulator.size = accumulator_size;
  c.accumulator.resolution = accumulator_resolution_m;
  c.scan.min_above_ground = scan_min_m;
  c.scan.max_above_ground = scan_max_m;
  c.scan.step = scan_step_m;
  c.scan.low_score_threshold = rejection_threshold;
  c.scan.normalize_by_pixel_count = normalize_polyline_score;
  c.top_k = top_k;
  c.peak_threshold = peak_threshold;
  c.max_range = max_range_m;
  c.angle_tol_deg = angle_tol_deg;
  c.min_vertical_px = min_vertical_px;
  c.max_horizontal_px = max_horizontal_px;
  return c;
}

RenderOptions PipelineConfig::render_options() const { return {include_roof_in_mask}; }

namespace {

json config_to_json_obj(const PipelineConfig& c) {
  return json{{"window", c.window},
              {"bins_per_band", c.bins_per_band},
              {"log_sigma_small", c.log_sigma_small},
              {"log_sigma_large", c.log_sigma_large},
              {"rgb_weight", c.rgb_weight},
              {"angle_tol_deg", c.angle_tol_deg},
              {"min_vertical_px", c.min_vertical_px},
              {"max_horizontal_px", c.max_horizontal_px},
              {"center_sigma_px", c.center_sigma_px},
              {"accumulator_size", c.accumulator_size},
              {"accumulator_resolution_m", c.accumulator_resolution_m},
              {"top_k", c.top_k},
              {"peak_threshold", c.peak_threshold},
              {"bcl_length_m", c.bcl_length_m},
              {"sweep_max_err_m", c.sweep_max_err_m},
              {"vote_weight_eval", c.vote_weight_eval},
              {"max_range_m", c.max_range_m},
              {"map_resolution_m", c.map_resolution_m},
              {"scan_min_m", c.scan_min_m},
              {"scan_max_m", c.scan_max_m},
              {"scan_step_m", c.scan_step_m},
              {"rejection_threshold", c.rejection_threshold},
              {"normalize_polyline_score", c.normalize_polyline_score},
              {"include_roof_in_mask", c.include_roof_in_mask},
              {"threads", c.threads},
              {"seed", c.seed}};
}

}  // namespace

std::string PipelineConfig::to_json() const { return config_to_json_obj(*this).dump(2); }

std::vector<std::string> PipelineConfig::key_names() {
  std::vector<std::string> keys;
  const json doc = config_to_json_obj(PipelineConfig{});
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  return keys;
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  PipelineConfig c;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "window") c.window = value.get<int>();
      else if (key == "bins_per_band") c.bins_per_band = value.get<int>();
      else if (key == "log_sigma_small") c.log_sigma_small = value.get<double>();
      else if (key == "log_sigma_large") c.log_sigma_large = value.get<double>();
      else if (key == "rgb_weight") c.rgb_weight = value.get<double>();
      else if (key == "angle_tol_deg") c.angle_tol_deg = value.get<double>();
      else if (key == "min_vertical_px") c.min_vertical_px = value.get<int>();
      else if (key == "max_horizontal_px") c.max_horizontal_px = value.get<int>();
      else if (key == "center_sigma_px") c.center_sigma_px = value.get<double>();
      else if (key == "accumulator_size") c.accumulator_size = value.get<int>();
      else if (key == "accumulator_resolution_m") c.accumulator_resolution_m = value.get<double>();
      else if (key == "top_k") c.top_k = value.get<int>();
      else if (key == "peak_threshold") c.peak_threshold = value.get<double>();
      else if (key == "bcl_length_m") c.bcl_length_m = value.get<double>();
      else if (key == "sweep_max_err_m") c.sweep_max_err_m = value.get<double>();
      else if (key == "vote_weight_eval") c.vote_weight_eval = value.get<std::string>();
      else if (key == "max_range_m") c.max_range_m = value.get<double>();
      else if (key == "map_resolution_m") c.map_resolution_m = value.get<double>();
      else if (key == "scan_min_m") c.scan_min_m = value.get<double>();
      else if (key == "scan_max_m") c.scan_max_m = value.get<double>();
      else if (key == "scan_step_m") c.scan_step_m = value.get<double>();
      else if (key == "rejection_threshold") c.rejection_threshold = value.get<double>();
      else if (key == "normalize_polyline_score") c.normalize_polyline_score = value.get<bool>();
      else if (key == "include_roof_in_mask") c.include_roof_in_mask = value.get<bool>();
      else if (key == "threads") c.threads = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown key: " + key);
    } catch (const json::exception& e) {
      throw ConfigError("bad value for " + key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

Dataset load_dataset(const std::string& dir, const PipelineConfig& cfg) {
  Dataset ds;
  fs::path root(dir);
  if (!fs::exists(root / "map.geojson")) throw ParseError("missing map.geojson in " + dir);
  ds.scene = make_scene(load_geojson_file((root / "map.geojson").string()), cfg.map_resolution_m);

  std::vector<fs::path> camera_files;
  if (fs::exists(root / "cameras"))
    for (const auto& e : fs::directory_iterator(root / "cameras"))
      if (e.path().extension() == ".json") camera_files.push_back(e.path());
  std::sort(camera_files.begin(), camera_files.end());
  for (const auto& p : camera_files) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    DatasetImage di;
    std::string image_name;
    parse_camera_json(ss.str(), image_name, di.intrinsics, di.initial_pose);
    di.name = p.stem().string();
    di.image_path = (root / "images" / image_name).string();
    if (!fs::exists(di.image_path)) throw ParseError("missing image " + di.image_path);
    ds.images.push_back(std::move(di));
  }
  if (ds.images.empty()) throw ParseError("no images in dataset " + dir);
  return ds;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_diagnostics(const fs::path& path, const JointResult& r) {
  json cands = json::array();
  for (size_t i = 0; i < r.candidates.size(); ++i) {
    cands.push_back({{"x_m", r.candidates[i].position.x()},
                     {"y_m", r.candidates[i].position.y()},
                     {"peak", r.candidates[i].peak_value},
                     {"sum", i < r.candidate_sums.size() ? r.candidate_sums[i] : 0.0}});
  }
  json buildings = json::array();
  for (const auto& b : r.buildings) {
    json jb = {{"building_id", b.building_id},
               {"no_visible_edges", b.no_visible_edges},
               {"rejected", b.estimate.rejected},
               {"height_m", b.estimate.height},
               {"score", b.estimate.score}};
    jb["scan_scores"] = b.estimate.scan_scores;
    buildings.push_back(std::move(jb));
  }
  json doc = {{"used_refinement", r.used_refinement},
              {"refined_x_m", r.refined_position.x()},
              {"refined_y_m", r.refined_position.y()},
              {"top_peak", r.top_peak},
              {"best_sum", r.best_sum},
              {"candidates", cands},
              {"buildings", buildings}};
  std::ofstream f(path);
  f << doc.dump(2) << "\n";
}

}  // namespace

PipelineOutputs run_pipeline(const std::string& dataset_dir, const std::string& out_dir,
                             const PipelineConfig& cfg, bool refine) {
  cfg.validate();
  Dataset ds = load_dataset(dataset_dir, cfg);
  fs::create_directories(fs::path(out_dir) / "masks");
  fs::create_directories(fs::path(out_dir) / "diagnostics");

  const JointConfig jc = cfg.joint();
  const SpectralHistogramConfig sc = cfg.spectral();
  const int n = static_cast<int>(ds.images.size());
  std::vector<JointResult> results(n);
  std::vector<std::string> failures(n);

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const DatasetImage& di = ds.images[i];
        ImageRgb image = read_png_rgb(di.image_path);
        CameraIntrinsics intr = di.intrinsics;
        if (intr.image_width == 0) {
          intr.image_width = image.width;
          intr.image_height = image.height;
        }
        EdgenessField field = edgeness_field(image, sc);
        results[i] = joint_localize_estimate(image, field, ds.scene, intr, di.initial_pose, jc, refine);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  int n_threads = std::max(1, std::min(cfg.threads, n));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (int i = 0; i < n; ++i)
    if (!failures[i].empty())
      throw std::runtime_error("image " + ds.images[i].name + " failed: " + failures[i]);

  // Deterministic cross-image merge, in image order.
  PipelineOutputs out;
  HeightScanConfig scan = jc.scan;
  std::map<std::string, HeightVoteArray> votes;
  for (int i = 0; i < n; ++i) {
    const JointResult& r = results[i];
    out.per_image.emplace_back(ds.images[i].name, r);
    for (const auto& b : r.buildings) {
      if (b.no_visible_edges) continue;
      out.views_seen[b.building_id] += 1;
      auto [it, inserted] = votes.try_emplace(b.building_id, b.building_id, scan);
      if (!b.estimate.rejected) {
        it->second.accumulate(b.estimate);
        double& best = out.best_scores[b.building_id];
        best = std::max(best, b.estimate.score);
      }
    }
  }
  for (const auto& [id, arr] : votes) {
    out.vote_counts[id] = arr.total_votes();
    if (auto h = arr.finalize()) out.final_heights[id] = *h;
  }

  {
    std::ofstream f(fs::path(out_dir) / "refined_positions.csv");
    f << "image,x_m,y_m,used_refinement,top_peak\n";
    for (int i = 0; i < n; ++i) {
      const JointResult& r = results[i];
      f << ds.images[i].name << "," << fmt(r.refined_position.x()) << ","
        << fmt(r.refined_position.y()) << "," << (r.used_refinement ? 1 : 0) << ","
        << fmt(r.top_peak) << "\n";
    }
  }
  {
    std::ofstream f(fs::path(out_dir) / "heights.csv");
    f << "building_id,height_m,n_votes,best_score,n_views_seen\n";
    for (const auto& [id, seen] : out.views_seen) {
      f << id << ",";
      auto it = out.final_heights.find(id);
      f << (it == out.final_heights.end() ? "nan" : fmt(it->second)) << ","
        << out.vote_counts[id] << "," << fmt(out.best_scores[id]) << "," << seen << "\n";
    }
  }

  // Final models and per-image masks with refined poses and final heights.
  std::vector<BuildingModel> models;
  for (const auto& fp : ds.scene.footprints) {
    auto it = out.final_heights.find(fp.id);
    if (it != out.final_heights.end()) models.push_back(extrude(fp, it->second));
  }
  {
    std::ofstream f(fs::path(out_dir) / "models.obj");
    f << export_obj(models);
  }
  for (int i = 0; i < n; ++i) {
    const DatasetImage& di = ds.images[i];
    CameraPose pose = di.initial_pose;
    pose.position.x() = results[i].refined_position.x();
    pose.position.y() = results[i].refined_position.y();
    CameraIntrinsics intr = di.intrinsics;
    FacadeMask mask = render_masks(models, intr, pose, cfg.render_options());
    write_mask((fs::path(out_dir) / "masks" / (di.name + ".png")).string(),
               (fs::path(out_dir) / "masks" / (di.name + ".json")).string(), mask);
    write_diagnostics(fs::path(out_dir) / "diagnostics" / (di.name + ".json"), results[i]);
  }
  return out;
}

std::map<std::string, double> read_heights_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  std::map<std::string, double> out;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, h;
    std::getline(ss, id, ',');
    std::getline(ss, h, ',');
    try {
      out[id] = std::stod(h);
    } catch (...) {
      out[id] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

HeightEvaluation evaluate_heights(const std::string& predicted_csv, const std::string& truth_csv,
                                  const std::vector<double>& tolerances) {
  auto pred = read_heights_csv(predicted_csv);
  auto truth = read_heights_csv(truth_csv);
  HeightEvaluation ev;
  ev.n_buildings = static_cast<int>(truth.size());
  for (const auto& [id, h] : pred)
    if (!truth.count(id)) ev.id_mismatches.push_back("predicted id not in truth: " + id);
  for (double tol : tolerances) {
    int good = 0;
    for (const auto& [id, h_true] : truth) {
      auto it = pred.find(id);
      if (it == pred.end() || std::isnan(it->second)) continue;  // missing counts as wrong
      if (std::abs(it->second - h_true) <= tol) ++good;
    }
    ev.accuracy_per_tolerance[tol] = truth.empty() ? 0.0 : static_cast<double>(good) / truth.size();
  }
  return ev;
}

MaskEvaluation evaluate_masks(const std::string& pred_dir, const std::string& truth_dir) {
  MaskEvaluation ev;
  std::vector<fs::path> truth_pngs;
  for (const auto& e : fs::directory_iterator(truth_dir))
    if (e.path().extension() == ".png") truth_pngs.push_back(e.path());
  std::sort(truth_pngs.begin(), truth_pngs.end());
  double sum = 0;
  for (const auto& tp : truth_pngs) {
    fs::path tj = tp;
    tj.replace_extension(".json");
    fs::path pp = fs::path(pred_dir) / tp.filename();
    fs::path pj = pp;
    pj.replace_extension(".json");
    try {
      FacadeMask truth = read_mask(tp.string(), tj.string());
      FacadeMask pred = read_mask(pp.string(), pj.string());
      sum += mask_accuracy(pred, truth);
      ++ev.n_images;
    } catch (const std::exception& e) {
      ev.errors.push_back(tp.filename().string() + ": " + e.what());
    }
  }
  ev.mean_accuracy = ev.n_images > 0 ? sum / ev.n_images : 0.0;
  return ev;
}

}  // namespace mapfusion
