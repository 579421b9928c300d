#include "mapfusion/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mapfusion {

std::vector<std::vector<double>> log_kernel(double sigma) {
  int radius = static_cast<int>(std::ceil(4.0 * sigma));
  int size = 2 * radius + 1;
  std::vector<std::vector<double>> k(size, std::vector<double>(size));
  double s2 = sigma * sigma;
  double sum = 0;
  for (int y = -radius; y <= radius; ++y) {
    for (int x = -radius; x <= radius; ++x) {
      double r2 = x * x + y * y;
      double v = (r2 - 2.0 * s2) / (s2 * s2) * std::exp(-r2 / (2.0 * s2));
      k[y + radius][x + radius] = v;
      sum += v;
    }
  }
  double mean = sum / (size * size);
  for (auto& row : k)
    for (auto& v : row) v -= mean;
  return k;
}

namespace {
int reflect(int i, int n) {
  // reflect-101: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}
}  // namespace

ImageF log_response(const ImageF& gray, double sigma) {
  auto k = log_kernel(sigma);
  int radius = (static_cast<int>(k.size()) - 1) / 2;
  ImageF out(gray.width, gray.height, 0.0f);
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      double acc = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        int sy = reflect(y + dy, gray.height);
        const float* row = &gray.data[static_cast<size_t>(sy) * gray.width];
        const std::vector<double>& krow = k[dy + radius];
        for (int dx = -radius; dx <= radius; ++dx) {
          acc += krow[dx + radius] * row[reflect(x + dx, gray.width)];
        }
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

double log_bin_range(double sigma) {
  static std::map<double, double> cache;
  auto it = cache.find(sigma);
  if (it != cache.end()) return it->second;
  auto k = log_kernel(sigma);
  int radius = (static_cast<int>(k.size()) - 1) / 2;
  int size = 2 * radius + 1;
  std::vector<double> colsum(size, 0.0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) colsum[x] += k[y][x];
  // Peak |response| of the kernel over an ideal 255-amplitude vertical step.
  double peak = 0;
  for (int x0 = -radius - 1; x0 <= radius + 1; ++x0) {
    double acc = 0;
    for (int dx = -radius; dx <= radius; ++dx) {
      if (x0 + dx >= 0) acc += colsum[dx + radius];
    }
    peak = std::max(peak, std::abs(255.0 * acc));
  }
  cache[sigma] = peak;
  return peak;
}

BinnedBands bin_bands(const ImageRgb& image, const SpectralHistogramConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("invalid spectral histogram config");
  BinnedBands out;
  out.width = image.width;
  out.height = image.height;
  out.bins = cfg.bins_per_band;
  out.bands.assign(5, ImageU8(image.width, image.height, 0));
  const int bins = cfg.bins_per_band;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const Rgb& p = image.at(x, y);
      for (int b = 0; b < 3; ++b)
        out.bands[b].at(x, y) = static_cast<std::uint8_t>(std::min(bins - 1, p[b] * bins / 256));
    }
  }
  ImageF gray = to_gray(image);
  const double sigmas[2] = {cfg.log_sigma_small, cfg.log_sigma_large};
  for (int s = 0; s < 2; ++s) {
    ImageF resp = log_response(gray, sigmas[s]);
    double range = log_bin_range(sigmas[s]);
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        double v = std::clamp(static_cast<double>(resp.at(x, y)), -range, range);
        int bin = static_cast<int>((v + range) / (2.0 * range) * bins);
        out.bands[3 + s].at(x, y) = static_cast<std::uint8_t>(std::clamp(bin, 0, bins - 1));
      }
    }
  }
  return out;
}

std::vector<double> spectral_histogram(const BinnedBands& bands, int cx, int cy,
                                       const SpectralHistogramConfig& cfg) {
  int h = cfg.half();
  if (cx - h < 0 || cy - h < 0 || cx + h >= bands.width || cy + h >= bands.height)
    throw WindowOutOfBounds();
  const int bins = bands.bins;
  std::vector<double> vec(5 * bins, 0.0);
  for (int b = 0; b < 5; ++b) {
    const ImageU8& band = bands.bands[b];
    double* slot = &vec[b * bins];
    for (int y = cy - h; y <= cy + h; ++y)
      for (int x = cx - h; x <= cx + h; ++x) slot[band.at(x, y)] += 1.0;
    double scale = (b < 3 ? cfg.rgb_weight : 1.0) / (cfg.window * cfg.window);
    for (int i = 0; i < bins; ++i) slot[i] *= scale;
  }
  return vec;
}

IntegralHistograms::IntegralHistograms(const BinnedBands& bands)
    : width_(bands.width), height_(bands.height), bins_(bands.bins), n_planes_(5 * bands.bins) {
  const size_t stride = static_cast<size_t>(width_ + 1) * n_planes_;
  table_.assign(stride * (height_ + 1), 0u);
  for (int y = 0; y < height_; ++y) {
    std::uint32_t* cur = &table_[(y + 1) * stride];
    const std::uint32_t* prev = &table_[y * stride];
    std::vector<std::uint32_t> rowsum(n_planes_, 0u);
    for (int x = 0; x < width_; ++x) {
      for (int b = 0; b < 5; ++b) rowsum[b * bins_ + bands.bands[b].at(x, y)] += 1u;
      std::uint32_t* dst = cur + static_cast<size_t>(x + 1) * n_planes_;
      const std::uint32_t* up = prev + static_cast<size_t>(x + 1) * n_planes_;
      for (int p = 0; p < n_planes_; ++p) dst[p] = rowsum[p] + up[p];
    }
  }
}

void IntegralHistograms::query_into(int x0, int y0, int x1, int y1, std::uint32_t* out) const {
  const size_t stride = static_cast<size_t>(width_ + 1) * n_planes_;
  const std::uint32_t* a = &table_[(y1 + 1) * stride + static_cast<size_t>(x1 + 1) * n_planes_];
  const std::uint32_t* b = &table_[(y1 + 1) * stride + static_cast<size_t>(x0) * n_planes_];
  const std::uint32_t* c = &table_[(y0)*stride + static_cast<size_t>(x1 + 1) * n_planes_];
  const std::uint32_t* d = &table_[(y0)*stride + static_cast<size_t>(x0) * n_planes_];
  for (int p = 0; p < n_planes_; ++p) out[p] = a[p] - b[p] - c[p] + d[p];
}

std::vector<std::uint32_t> IntegralHistograms::query(int x0, int y0, int x1, int y1) const {
  if (x0 < 0 || y0 < 0 || x1 >= width_ || y1 >= height_ || x0 > x1 || y0 > y1)
    throw WindowOutOfBounds();
  std::vector<std::uint32_t> out(n_planes_);
  query_into(x0, y0, x1, y1, out.data());
  return out;
}

double chi_square(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw LengthMismatch();
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double sum = a[i] + b[i];
    if (sum > 0) {
      double d = a[i] - b[i];
      s += d * d / sum;
    }
  }
  return s;
}

namespace {

inline double chi_square_raw(const float* a, const float* b, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) {
    double sum = static_cast<double>(a[i]) + b[i];
    if (sum > 0) {
      double d = static_cast<double>(a[i]) - b[i];
      s += d * d / sum;
    }
  }
  return s;
}

}  // namespace

EdgenessField edgeness_field(const ImageRgb& image, const SpectralHistogramConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("invalid spectral histogram config");
  if (image.width < 4 * cfg.window || image.height < 4 * cfg.window) throw ImageTooSmall();
  const int h = cfg.half();
  const int margin = cfg.window;
  const int planes = cfg.vector_length();
  const int bins = cfg.bins_per_band;
  const int W = image.width, H = image.height;

  BinnedBands bands = bin_bands(image, cfg);
  IntegralHistograms integral(bands);

  // Normalized window histogram for every pixel of a row, cached over the
  // 2h+1 rows the vertical pair needs.
  const int n_cached = 2 * h + 1;
  std::vector<std::vector<float>> rows(n_cached, std::vector<float>(static_cast<size_t>(W) * planes, 0.0f));
  std::vector<int> row_of(n_cached, -1);
  std::vector<float> scale(planes);
  const double area = static_cast<double>(cfg.window) * cfg.window;
  for (int p = 0; p < planes; ++p)
    scale[p] = static_cast<float>((p < 3 * bins ? cfg.rgb_weight : 1.0) / area);

  std::vector<std::uint32_t> counts(planes);
  auto hist_row = [&](int y) -> const float* {
    int slot = y % n_cached;
    if (row_of[slot] != y) {
      float* dst = rows[slot].data();
      for (int x = h; x <= W - 1 - h; ++x) {
        integral.query_into(x - h, y - h, x + h, y + h, counts.data());
        float* cell = dst + static_cast<size_t>(x) * planes;
        for (int p = 0; p < planes; ++p) cell[p] = counts[p] * scale[p];
      }
      row_of[slot] = y;
    }
    return rows[slot].data();
  };

  EdgenessField field;
  field.margin = margin;
  field.scores = ImageF(W, H, 0.0f);
  for (int y = margin; y <= H - 1 - margin; ++y) {
    // Slots are indexed mod 2h+1, so y, y-h and y+h never collide.
    const float* row_c = hist_row(y);
    const float* row_up = hist_row(y - h);
    const float* row_dn = hist_row(y + h);
    for (int x = margin; x <= W - 1 - margin; ++x) {
      const float* left = row_c + static_cast<size_t>(x - h) * planes;
      const float* right = row_c + static_cast<size_t>(x + h) * planes;
      const float* up = row_up + static_cast<size_t>(x) * planes;
      const float* down = row_dn + static_cast<size_t>(x) * planes;
      field.scores.at(x, y) =
          static_cast<float>(chi_square_raw(right, left, planes) + chi_square_raw(down, up, planes));
    }
  }
  return field;
}

std::vector<LineSupportRegion> line_support_regions(const ImageF& gray, double angle_tol_deg,
                                                    int min_vertical_px, int max_horizontal_px) {
  const int W = gray.width, H = gray.height;
  const double tol = angle_tol_deg * M_PI / 180.0;
  ImageU8 mask(W, H, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double gx = (gray.at(std::min(x + 1, W - 1), y) - gray.at(std::max(x - 1, 0), y)) * 0.5;
      double gy = (gray.at(x, std::min(y + 1, H - 1)) - gray.at(x, std::max(y - 1, 0))) * 0.5;
      double mag = std::hypot(gx, gy);
      if (mag < 1e-6) continue;
      // Vertical edge <=> gradient close to horizontal, orientation mod 180.
      if (std::atan2(std::abs(gy), std::abs(gx)) <= tol) mask.at(x, y) = 1;
    }
  }
  std::vector<LineSupportRegion> out;
  ImageU8 seen(W, H, 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!mask.at(x, y) || seen.at(x, y)) continue;
      LineSupportRegion region;
      region.min_x = region.max_x = x;
      region.min_y = region.max_y = y;
      stack.clear();
      stack.emplace_back(x, y);
      seen.at(x, y) = 1;
      double su = 0, sv = 0;
      while (!stack.empty()) {
        auto [px, py] = stack.back();
        stack.pop_back();
        region.pixels.emplace_back(px, py);
        su += px;
        sv += py;
        region.min_x = std::min(region.min_x, px);
        region.max_x = std::max(region.max_x, px);
        region.min_y = std::min(region.min_y, py);
        region.max_y = std::max(region.max_y, py);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = px + dx, ny = py + dy;
            if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
            if (mask.at(nx, ny) && !seen.at(nx, ny)) {
              seen.at(nx, ny) = 1;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
      if (region.vertical_extent() >= min_vertical_px && region.horizontal_extent() <= max_horizontal_px) {
        region.center_u = su / region.pixels.size();
        region.center_v = sv / region.pixels.size();
        out.push_back(std::move(region));
      }
    }
  }
  return out;
}

double center_density(const std::vector<LineSupportRegion>& regions, const PixelPoint& query,
                      double sigma_px) {
  double best = 0;
  const double cutoff2 = 9.0 * sigma_px * sigma_px;
  for (const auto& r : regions) {
    double du = query.u - r.center_u;
    double dv = query.v - r.center_v;
    double d2 = du * du + dv * dv;
    if (d2 > cutoff2) continue;
    best = std::max(best, std::exp(-d2 / (2.0 * sigma_px * sigma_px)));
  }
  return best;
}

void write_edgeness_debug(const std::string& path, const EdgenessField& field) {
  ImageU16 out(field.scores.width, field.scores.height, 0);
  for (size_t i = 0; i < field.scores.data.size(); ++i) {
    double v = field.scores.data[i] * 1e4;
    out.data[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
  }
  write_png_gray16(path, out);
}

void write_regions_debug(const std::string& path, const ImageRgb& image,
                         const std::vector<LineSupportRegion>& regions) {
  ImageRgb out = image;
  for (const auto& r : regions) {
    for (auto [x, y] : r.pixels) out.at(x, y) = {255, 0, 0};
    int cu = static_cast<int>(r.center_u), cv = static_cast<int>(r.center_v);
    for (int d = -2; d <= 2; ++d) {
      if (out.inside(cu + d, cv)) out.at(cu + d, cv) = {0, 255, 0};
      if (out.inside(cu, cv + d)) out.at(cu, cv + d) = {0, 255, 0};
    }
  }
  write_png_rgb(path, out);
}

}  // namespace mapfusion
