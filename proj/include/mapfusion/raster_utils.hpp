#pragma once

#include <utility>
#include <vector>

namespace mapfusion {

/// All unit-grid cells touched by the segment (x0,y0)-(x1,y1), where cell
/// (i, j) covers [i, i+1) x [j, j+1). Both endpoint cells included.
std::vector<std::pair<int, int>> supercover_cells(double x0, double y0, double x1, double y1);

/// Pixels touched by a segment given in pixel coordinates (pixel (u, v)
/// covers [u-0.5, u+0.5) x [v-0.5, v+0.5)).
std::vector<std::pair<int, int>> supercover_pixels(double u0, double v0, double u1, double v1);

/// Clip segment to the axis-aligned box [xmin,xmax] x [ymin,ymax]
/// (Liang-Barsky). Returns false when fully outside.
bool clip_segment(double& x0, double& y0, double& x1, double& y1, double xmin, double ymin,
                  double xmax, double ymax);

/// Clip the infinite line through (ax, ay) with direction (dx, dy) to the box;
/// outputs a finite segment. Returns false when the line misses the box.
bool clip_line_to_box(double ax, double ay, double dx, double dy, double xmin, double ymin,
                      double xmax, double ymax, double& x0, double& y0, double& x1, double& y1);

}  // namespace mapfusion
