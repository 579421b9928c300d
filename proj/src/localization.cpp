#include "mapfusion/localization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mapfusion/raster_utils.hpp"

namespace mapfusion {

std::vector<Bcl> make_bcls(const std::vector<CornerPoint>& corners, double length_m) {
  std::vector<Bcl> out;
  out.reserve(corners.size());
  for (const auto& c : corners) out.push_back({c, c.ground_elev, c.ground_elev + length_m});
  return out;
}

ProjectedBcl project_bcl(const Bcl& bcl, const CameraIntrinsics& intr, const CameraPose& pose) {
  WorldPoint base(bcl.corner.position.x(), bcl.corner.position.y(), bcl.base_elev);
  WorldPoint top(bcl.corner.position.x(), bcl.corner.position.y(), bcl.top_elev);
  Projection pb = project_point(base, intr, pose);
  Projection pt = project_point(top, intr, pose);
  if (std::abs(pb.pixel.u - pt.pixel.u) >= 0.5)
    throw std::runtime_error("BCL projection not a single column; non-zero roll?");
  ProjectedBcl out;
  out.u = pb.pixel.u;
  out.v_base = pb.pixel.v;
  out.v_top = std::min(pb.pixel.v, pt.pixel.v);
  out.v_bottom = std::max(pb.pixel.v, pt.pixel.v);
  if (out.u < 0 || out.u > intr.image_width - 1 || out.v_bottom < 0 ||
      out.v_top > intr.image_height - 1)
    throw FullyClipped();
  out.v_top = std::max(out.v_top, 0.0);
  out.v_bottom = std::min(out.v_bottom, static_cast<double>(intr.image_height - 1));
  return out;
}

int sweep_range(double distance_m, double fx, double max_err_m, int image_width) {
  if (distance_m <= 0) throw std::invalid_argument("sweep_range: distance must be positive");
  double cols = std::ceil(fx * max_err_m / distance_m);
  return static_cast<int>(std::min(cols, static_cast<double>(image_width)));
}

bool Accumulator::cell_of(const Eigen::Vector2d& p, int& col, int& row) const {
  col = static_cast<int>(std::floor((p.x() - min_x()) / cfg.resolution));
  row = static_cast<int>(std::floor((p.y() - min_y()) / cfg.resolution));
  return col >= 0 && col < cfg.size && row >= 0 && row < cfg.size;
}

double Accumulator::total_mass() const {
  double s = 0;
  for (double v : cells) s += v;
  return s;
}

void vote(Accumulator& acc, const std::vector<Bcl>& bcls,
          const std::vector<LineSupportRegion>& regions, const CameraIntrinsics& intr,
          const CameraPose& initial_pose, const VoteConfig& cfg) {
  if (regions.empty()) return;
  const Eigen::Vector2d init(initial_pose.position.x(), initial_pose.position.y());
  const double box_x0 = acc.min_x(), box_y0 = acc.min_y();
  const double box_x1 = box_x0 + acc.cfg.size * acc.cfg.resolution;
  const double box_y1 = box_y0 + acc.cfg.size * acc.cfg.resolution;

  for (const auto& bcl : bcls) {
    ProjectedBcl proj;
    try {
      proj = project_bcl(bcl, intr, initial_pose);
    } catch (const BehindCamera&) {
      continue;
    } catch (const FullyClipped&) {
      continue;
    }
    double dist = (bcl.corner.position - init).norm();
    if (dist <= 1e-6) continue;
    int range = sweep_range(dist, intr.fx, cfg.sweep_max_err_m, intr.image_width);
    for (int du = -range; du <= range; ++du) {
      double u = proj.u + du;
      if (u < 0 || u > intr.image_width - 1) continue;
      double w = 0;
      if (cfg.weight_eval == VoteWeightEval::kMidpoint) {
        w = center_density(regions, {u, 0.5 * (proj.v_top + proj.v_bottom)}, cfg.center_sigma_px);
      } else {
        // Maximum density the moved segment reaches (sampled at half-sigma
        // steps along the column).
        double step = std::max(1.0, cfg.center_sigma_px * 0.5);
        for (double v = proj.v_top; v < proj.v_bottom + step; v += step) {
          w = std::max(w, center_density(regions, {u, std::min(v, proj.v_bottom)}, cfg.center_sigma_px));
        }
      }
      if (w <= 0) continue;
      PositionLine2D line;
      try {
        WorldPoint corner3(bcl.corner.position.x(), bcl.corner.position.y(), bcl.base_elev);
        line = backproject_line({u, proj.v_base}, intr, initial_pose.rotation, corner3);
      } catch (const DegenerateDirection&) {
        continue;
      }
      double x0, y0, x1, y1;
      if (!clip_line_to_box(line.anchor.x(), line.anchor.y(), line.direction.x(), line.direction.y(),
                            box_x0, box_y0, box_x1, box_y1, x0, y0, x1, y1))
        continue;
      auto cells = supercover_cells((x0 - box_x0) / acc.cfg.resolution, (y0 - box_y0) / acc.cfg.resolution,
                                    (x1 - box_x0) / acc.cfg.resolution, (y1 - box_y0) / acc.cfg.resolution);
      for (auto [cx, cy] : cells) {
        if (cx >= 0 && cx < acc.cfg.size && cy >= 0 && cy < acc.cfg.size) acc.at(cx, cy) += w;
      }
    }
  }
}

std::vector<CandidatePosition> top_peaks(const Accumulator& acc, int k, double threshold) {
  struct Peak {
    int col, row;
    double value;
  };
  std::vector<Peak> peaks;
  const int n = acc.cfg.size;
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      double v = acc.at(col, row);
      if (v < threshold || v <= 0) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          int nc = col + dc, nr = row + dr;
          if (nc < 0 || nr < 0 || nc >= n || nr >= n) continue;
          if (acc.at(nc, nr) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({col, row, v});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  std::vector<Peak> kept;
  for (const auto& p : peaks) {
    bool adjacent = false;
    for (const auto& q : kept) {
      if (std::abs(p.col - q.col) <= 1 && std::abs(p.row - q.row) <= 1) {
        adjacent = true;
        break;
      }
    }
    if (!adjacent) {
      kept.push_back(p);
      if (static_cast<int>(kept.size()) == k) break;
    }
  }
  std::vector<CandidatePosition> out;
  for (const auto& p : kept) out.push_back({acc.cell_center(p.col, p.row), p.value});
  return out;
}

void write_accumulator_csv(const std::string& path, const Accumulator& acc) {
  std::ofstream f(path);
  for (int row = 0; row < acc.cfg.size; ++row) {
    for (int col = 0; col < acc.cfg.size; ++col) {
      f << acc.at(col, row);
      f << (col + 1 == acc.cfg.size ? '\n' : ',');
    }
  }
}

void write_accumulator_png(const std::string& path, const Accumulator& acc) {
  double vmax = 0;
  for (double v : acc.cells) vmax = std::max(vmax, v);
  ImageRgb img(acc.cfg.size, acc.cfg.size, Rgb{0, 0, 32});
  if (vmax > 0) {
    for (int row = 0; row < acc.cfg.size; ++row) {
      for (int col = 0; col < acc.cfg.size; ++col) {
        double t = acc.at(col, row) / vmax;
        img.at(col, row) = {static_cast<std::uint8_t>(255 * t), 0,
                            static_cast<std::uint8_t>(32 * (1 - t))};
      }
    }
  }
  write_png_rgb(path, img);
}

}  // namespace mapfusion
