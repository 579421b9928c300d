#include "mapfusion/raster_utils.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mapfusion {

std::vector<std::pair<int, int>> supercover_cells(double x0, double y0, double x1, double y1) {
  std::vector<std::pair<int, int>> out;
  int cx = static_cast<int>(std::floor(x0));
  int cy = static_cast<int>(std::floor(y0));
  const int ex = static_cast<int>(std::floor(x1));
  const int ey = static_cast<int>(std::floor(y1));
  out.emplace_back(cx, cy);
  double dx = x1 - x0, dy = y1 - y0;
  int step_x = dx > 0 ? 1 : -1;
  int step_y = dy > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  double t_max_x = inf, t_max_y = inf, t_delta_x = inf, t_delta_y = inf;
  if (dx != 0) {
    double next = dx > 0 ? (cx + 1 - x0) : (x0 - cx);
    t_max_x = next / std::abs(dx);
    t_delta_x = 1.0 / std::abs(dx);
  }
  if (dy != 0) {
    double next = dy > 0 ? (cy + 1 - y0) : (y0 - cy);
    t_max_y = next / std::abs(dy);
    t_delta_y = 1.0 / std::abs(dy);
  }
  // Bounded walk; the +4 slack covers endpoints landing on cell borders.
  int guard = std::abs(ex - cx) + std::abs(ey - cy) + 4;
  while ((cx != ex || cy != ey) && guard-- > 0) {
    if (t_max_x < t_max_y) {
      cx += step_x;
      t_max_x += t_delta_x;
    } else {
      cy += step_y;
      t_max_y += t_delta_y;
    }
    out.emplace_back(cx, cy);
  }
  return out;
}

std::vector<std::pair<int, int>> supercover_pixels(double u0, double v0, double u1, double v1) {
  return supercover_cells(u0 + 0.5, v0 + 0.5, u1 + 0.5, v1 + 0.5);
}

bool clip_segment(double& x0, double& y0, double& x1, double& y1, double xmin, double ymin,
                  double xmax, double ymax) {
  double t0 = 0.0, t1 = 1.0;
  double dx = x1 - x0, dy = y1 - y0;
  auto clip = [&](double p, double q) {
    if (p == 0) return q >= 0;
    double r = q / p;
    if (p < 0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
    return true;
  };
  if (!clip(-dx, x0 - xmin) || !clip(dx, xmax - x0) || !clip(-dy, y0 - ymin) || !clip(dy, ymax - y0))
    return false;
  if (t0 > t1) return false;
  double nx0 = x0 + t0 * dx, ny0 = y0 + t0 * dy;
  double nx1 = x0 + t1 * dx, ny1 = y0 + t1 * dy;
  x0 = nx0;
  y0 = ny0;
  x1 = nx1;
  y1 = ny1;
  return true;
}

bool clip_line_to_box(double ax, double ay, double dx, double dy, double xmin, double ymin,
                      double xmax, double ymax, double& x0, double& y0, double& x1, double& y1) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  auto slab = [&](double a, double d, double lo, double hi) {
    if (d == 0) return a >= lo && a <= hi;
    double ta = (lo - a) / d, tb = (hi - a) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    return true;
  };
  if (!slab(ax, dx, xmin, xmax) || !slab(ay, dy, ymin, ymax)) return false;
  if (t0 > t1) return false;
  x0 = ax + t0 * dx;
  y0 = ay + t0 * dy;
  x1 = ax + t1 * dx;
  y1 = ay + t1 * dy;
  return true;
}

}  // namespace mapfusion
