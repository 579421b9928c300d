#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapfusion {

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major single-plane raster. Pixel (x, y): x rightward, y downward,
/// origin top-left.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

  bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  size_t size() const { return data.size(); }
  bool operator==(const Image&) const = default;
};

using ImageU8 = Image<std::uint8_t>;
using ImageU16 = Image<std::uint16_t>;
using ImageF = Image<float>;
using ImageRgb = Image<Rgb>;
using ImageI32 = Image<std::int32_t>;

/// BT.601 luma, result in [0, 255].
ImageF to_gray(const ImageRgb& rgb);

ImageRgb read_png_rgb(const std::string& path);
void write_png_rgb(const std::string& path, const ImageRgb& img);
void write_png_gray8(const std::string& path, const ImageU8& img);
ImageU8 read_png_gray8(const std::string& path);
void write_png_gray16(const std::string& path, const ImageU16& img);
ImageU16 read_png_gray16(const std::string& path);

}  // namespace mapfusion
