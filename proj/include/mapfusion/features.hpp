#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mapfusion/geometry.hpp"
#include "mapfusion/image.hpp"

namespace mapfusion {

struct WindowOutOfBounds : std::runtime_error {
  WindowOutOfBounds() : std::runtime_error("histogram window out of image bounds") {}
};
struct LengthMismatch : std::runtime_error {
  LengthMismatch() : std::runtime_error("histogram length mismatch") {}
};
struct ImageTooSmall : std::runtime_error {
  ImageTooSmall() : std::runtime_error("image too small for edgeness window") {}
};

struct SpectralHistogramConfig {
  int window = 17;             // odd, >= 3
  int bins_per_band = 11;      // >= 2
  double log_sigma_small = 0.5;
  double log_sigma_large = 1.0;
  double rgb_weight = 0.5;     // in (0, 1]

  bool valid() const {
    return window >= 3 && window % 2 == 1 && bins_per_band >= 2 && log_sigma_small > 0 &&
           log_sigma_large > 0 && rgb_weight > 0 && rgb_weight <= 1.0;
  }
  int half() const { return (window - 1) / 2; }
  int n_bands() const { return 5; }
  int vector_length() const { return n_bands() * bins_per_band; }
};

/// Zero-DC Laplacian-of-Gaussian kernel, radius ceil(4*sigma).
std::vector<std::vector<double>> log_kernel(double sigma);

/// Convolution of a [0,255] grayscale image with the LoG kernel,
/// reflect-padded borders.
ImageF log_response(const ImageF& gray, double sigma);

/// Clamp range used when binning LoG responses: the peak magnitude of the
/// kernel response to an ideal 255-step edge. Fixed per sigma so scores stay
/// comparable across images.
double log_bin_range(double sigma);

/// The five binned bands (R, G, B, LoG small, LoG large), values in
/// [0, bins_per_band).
struct BinnedBands {
  int width = 0, height = 0;
  int bins = 0;
  std::vector<ImageU8> bands;
};

BinnedBands bin_bands(const ImageRgb& image, const SpectralHistogramConfig& cfg);

/// Per-band unit-mass histograms over a square window, concatenated; RGB
/// bands scaled by rgb_weight.
std::vector<double> spectral_histogram(const BinnedBands& bands, int cx, int cy,
                                       const SpectralHistogramConfig& cfg);

/// One integral image per (band, bin); window-count queries are exact
/// integer sums.
class IntegralHistograms {
 public:
  IntegralHistograms(const BinnedBands& bands);

  /// Counts over the inclusive pixel rectangle [x0, x1] x [y0, y1],
  /// flattened band-major: band * bins + bin.
  std::vector<std::uint32_t> query(int x0, int y0, int x1, int y1) const;
  void query_into(int x0, int y0, int x1, int y1, std::uint32_t* out) const;

  int planes() const { return n_planes_; }
  int bins() const { return bins_; }

 private:
  int width_, height_, bins_, n_planes_;
  // Layout: [y][x][plane], (width+1) x (height+1) summed-area table.
  std::vector<std::uint32_t> table_;
};

/// Symmetric chi-square: sum (a-b)^2/(a+b) over entries with a+b > 0.
double chi_square(const std::vector<double>& a, const std::vector<double>& b);

struct EdgenessField {
  ImageF scores;  // >= 0; zero inside the border margin
  int margin = 0;

  float at(int x, int y) const {
    return scores.inside(x, y) ? scores.at(x, y) : 0.0f;
  }
};

EdgenessField edgeness_field(const ImageRgb& image, const SpectralHistogramConfig& cfg = {});

struct LineSupportRegion {
  std::vector<std::pair<int, int>> pixels;  // (x, y)
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  double center_u = 0, center_v = 0;  // centroid
  int vertical_extent() const { return max_y - min_y + 1; }
  int horizontal_extent() const { return max_x - min_x + 1; }
};

std::vector<LineSupportRegion> line_support_regions(const ImageF& gray, double angle_tol_deg = 22.5,
                                                    int min_vertical_px = 50, int max_horizontal_px = 20);

/// Max over region centers of a Gaussian density at the query point; zero
/// when no center lies within 3 sigma.
double center_density(const std::vector<LineSupportRegion>& regions, const PixelPoint& query,
                      double sigma_px = 10.0);

void write_edgeness_debug(const std::string& path, const EdgenessField& field);
void write_regions_debug(const std::string& path, const ImageRgb& image,
                         const std::vector<LineSupportRegion>& regions);

}  // namespace mapfusion
