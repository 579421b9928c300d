#include "mapfusion/heights.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mapfusion/raster_utils.hpp"

namespace mapfusion {

namespace {
constexpr double kNearClip = 1e-3;
}

PolylineScore polyline_score(const std::vector<VisibleEdge>& edges, double elevation,
                             const EdgenessField& field, const CameraIntrinsics& intr,
                             const CameraPose& pose, bool normalize) {
  std::unordered_set<std::int64_t> seen;
  double sum = 0;
  int count = 0;
  double len_total = 0, len_kept = 0;
  const int W = intr.image_width, H = intr.image_height;
  for (const auto& e : edges) {
    Eigen::Vector3d a_cam = pose.rotation * (Eigen::Vector3d(e.a.x(), e.a.y(), elevation) - pose.position);
    Eigen::Vector3d b_cam = pose.rotation * (Eigen::Vector3d(e.b.x(), e.b.y(), elevation) - pose.position);
    if (a_cam.z() <= kNearClip && b_cam.z() <= kNearClip) continue;
    if (a_cam.z() <= kNearClip || b_cam.z() <= kNearClip) {
      double t = (kNearClip - a_cam.z()) / (b_cam.z() - a_cam.z());
      Eigen::Vector3d clipped = a_cam + t * (b_cam - a_cam);
      if (a_cam.z() <= kNearClip)
        a_cam = clipped;
      else
        b_cam = clipped;
    }
    double u0 = intr.fx * a_cam.x() / a_cam.z() + intr.cx;
    double v0 = intr.fy * a_cam.y() / a_cam.z() + intr.cy;
    double u1 = intr.fx * b_cam.x() / b_cam.z() + intr.cx;
    double v1 = intr.fy * b_cam.y() / b_cam.z() + intr.cy;
    len_total += std::hypot(u1 - u0, v1 - v0);
    if (!clip_segment(u0, v0, u1, v1, 0, 0, W - 1, H - 1)) continue;
    len_kept += std::hypot(u1 - u0, v1 - v0);
    for (auto [px, py] : supercover_pixels(u0, v0, u1, v1)) {
      if (px < 0 || py < 0 || px >= W || py >= H) continue;
      std::int64_t key = static_cast<std::int64_t>(py) * W + px;
      if (!seen.insert(key).second) continue;
      sum += field.at(px, py);
      ++count;
    }
  }
  if (count == 0) throw EmptyProjection();
  PolylineScore out;
  out.pixel_count = count;
  out.score = normalize ? sum / count : sum;
  out.in_frame_fraction = len_total > 0 ? len_kept / len_total : 0.0;
  return out;
}

HeightEstimate estimate_height_single(const std::vector<VisibleEdge>& building_edges,
                                      double ground_elev, const EdgenessField& field,
                                      const CameraIntrinsics& intr, const CameraPose& pose,
                                      const HeightScanConfig& cfg, bool keep_curve) {
  if (building_edges.empty()) throw NoVisibleEdges();
  HeightEstimate est;
  double best_score = -1;
  double best_height = 0;
  const int n = cfg.n_bins();
  if (keep_curve) est.scan_scores.reserve(n);
  for (int i = 0; i < n; ++i) {
    double h = cfg.min_above_ground + i * cfg.step;
    double score = 0;
    try {
      score = polyline_score(building_edges, ground_elev + h, field, intr, pose,
                             cfg.normalize_by_pixel_count)
                  .score;
    } catch (const EmptyProjection&) {
      score = 0;
    }
    if (keep_curve) est.scan_scores.push_back(score);
    if (score > best_score) {
      best_score = score;
      best_height = h;
    }
  }
  est.height = best_height;
  est.score = std::max(best_score, 0.0);
  est.rejected = est.score < cfg.low_score_threshold;
  // A roofline that mostly leaves the frame at the chosen elevation was never
  // really observed: the score came from a clipped remnant. Treat it like a
  // truncated roofline and discard the estimate.
  constexpr double kMinInFrame = 0.5;
  if (!est.rejected) {
    try {
      PolylineScore ps = polyline_score(building_edges, ground_elev + best_height, field, intr,
                                        pose, cfg.normalize_by_pixel_count);
      est.truncated = ps.in_frame_fraction < kMinInFrame;
    } catch (const EmptyProjection&) {
      est.truncated = true;
    }
    est.rejected = est.rejected || est.truncated;
  }
  return est;
}

int HeightVoteArray::bin_of(double height) const {
  if (height < cfg.min_above_ground - 1e-9 || height > cfg.max_above_ground + 1e-9)
    throw OutOfRange();
  int bin = static_cast<int>(std::lround((height - cfg.min_above_ground) / cfg.step));
  return std::clamp(bin, 0, cfg.n_bins() - 1);
}

void HeightVoteArray::accumulate(const HeightEstimate& est) {
  if (est.rejected) return;
  counts[bin_of(est.height)] += 1;
}

std::optional<double> HeightVoteArray::finalize() const {
  int best = 0, best_bin = -1;
  for (int i = 0; i < static_cast<int>(counts.size()); ++i) {
    if (counts[i] > best) {  // strict: ties keep the smaller height
      best = counts[i];
      best_bin = i;
    }
  }
  if (best_bin < 0) return std::nullopt;
  return cfg.min_above_ground + best_bin * cfg.step;
}

int HeightVoteArray::total_votes() const {
  int s = 0;
  for (int c : counts) s += c;
  return s;
}

JointResult joint_localize_estimate(const ImageRgb& image, const EdgenessField& field,
                                    const MapScene& scene, const CameraIntrinsics& intr,
                                    const CameraPose& initial_pose, const JointConfig& cfg,
                                    bool refine,
                                    const std::vector<LineSupportRegion>* regions_override) {
  JointResult result;
  Eigen::Vector2d init(initial_pose.position.x(), initial_pose.position.y());

  if (refine) {
    std::vector<LineSupportRegion> regions_local;
    const std::vector<LineSupportRegion>* regions = regions_override;
    if (!regions) {
      regions_local = line_support_regions(to_gray(image), cfg.angle_tol_deg, cfg.min_vertical_px,
                                           cfg.max_horizontal_px);
      regions = &regions_local;
    }
    auto corners = visible_corners(scene, intr, initial_pose, cfg.max_range);
    auto bcls = make_bcls(corners, cfg.vote.bcl_length_m);
    Accumulator acc(cfg.accumulator, init);
    vote(acc, bcls, *regions, intr, initial_pose, cfg.vote);
    result.candidates = top_peaks(acc, cfg.top_k, cfg.peak_threshold);
    result.used_refinement = !result.candidates.empty();
  }
  if (result.candidates.empty()) {
    result.candidates.push_back({init, 0.0});
  }

  double best_sum = -1;
  int best_idx = 0;
  std::vector<std::vector<BuildingResult>> per_candidate(result.candidates.size());
  for (size_t ci = 0; ci < result.candidates.size(); ++ci) {
    CameraPose pose = initial_pose;
    pose.position.x() = result.candidates[ci].position.x();
    pose.position.y() = result.candidates[ci].position.y();
    auto edges = visible_edges(scene, intr, pose, cfg.max_range);
    std::map<std::string, std::vector<VisibleEdge>> by_building;
    for (auto& e : edges) by_building[e.building_id].push_back(e);
    std::map<std::string, double> elev;
    for (const auto& fp : scene.footprints) elev[fp.id] = fp.ground_elev;
    double sum = 0;
    int n_scored = 0;
    for (auto& [id, bedges] : by_building) {
      BuildingResult br;
      br.building_id = id;
      try {
        br.estimate =
            estimate_height_single(bedges, elev.at(id), field, intr, pose, cfg.scan, true);
        // A truncated roofline carries no pose evidence either way; keep it
        // out of the candidate score entirely. A low-score misfit is
        // evidence and dilutes the mean.
        if (!br.estimate.truncated) {
          if (!br.estimate.rejected) sum += br.estimate.score;
          ++n_scored;
        }
      } catch (const NoVisibleEdges&) {
        br.no_visible_edges = true;
      }
      per_candidate[ci].push_back(std::move(br));
    }
    // The visible set varies with the candidate: a pose pushed toward the
    // block simply sees more buildings, so a raw sum rewards the move even
    // when every individual fit got worse. Compare the per-building mean
    // instead, with rejected buildings diluting it.
    double score = n_scored > 0 ? sum / n_scored : 0.0;
    result.candidate_sums.push_back(score);
  }
  // Ties in S break toward the higher accumulator peak. Depth errors trade
  // off against height almost freely, so scores within a few percent are
  // noise ties, not evidence: within that band the vote decides.
  constexpr double kTieRelTol = 0.08;
  double s_max = *std::max_element(result.candidate_sums.begin(), result.candidate_sums.end());
  double tie_floor = s_max - kTieRelTol * std::abs(s_max);
  for (size_t ci = 0; ci < result.candidates.size(); ++ci) {
    if (result.candidate_sums[ci] >= tie_floor) {
      best_idx = static_cast<int>(ci);
      best_sum = result.candidate_sums[ci];
      break;  // candidates are sorted by peak value
    }
  }
  result.best_sum = best_sum;
  result.refined_position = result.candidates[best_idx].position;
  result.top_peak = result.candidates[best_idx].peak_value;
  result.buildings = std::move(per_candidate[best_idx]);
  return result;
}

}  // namespace mapfusion
