#include "mapfusion/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace mapfusion {

ImageF to_gray(const ImageRgb& rgb) {
  ImageF out(rgb.width, rgb.height);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      const Rgb& p = rgb.at(x, y);
      out.at(x, y) = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
  }
  return out;
}

ImageRgb read_png_rgb(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw std::runtime_error("cannot read image: " + path);
  ImageRgb out(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) out.at(x, y) = {row[x][2], row[x][1], row[x][0]};
  }
  return out;
}

void write_png_rgb(const std::string& path, const ImageRgb& img) {
  cv::Mat m(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      const Rgb& p = img.at(x, y);
      row[x] = cv::Vec3b(p[2], p[1], p[0]);
    }
  }
  if (!cv::imwrite(path, m)) throw std::runtime_error("cannot write image: " + path);
}

void write_png_gray8(const std::string& path, const ImageU8& img) {
  cv::Mat m(img.height, img.width, CV_8UC1, const_cast<std::uint8_t*>(img.data.data()));
  if (!cv::imwrite(path, m)) throw std::runtime_error("cannot write image: " + path);
}

ImageU8 read_png_gray8(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw std::runtime_error("cannot read image: " + path);
  ImageU8 out(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) out.at(x, y) = m.at<std::uint8_t>(y, x);
  return out;
}

ImageU16 read_png_gray16(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw std::runtime_error("cannot read image: " + path);
  if (m.type() != CV_16UC1) throw std::runtime_error("expected 16-bit grayscale: " + path);
  ImageU16 out(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) out.at(x, y) = m.at<std::uint16_t>(y, x);
  return out;
}

void write_png_gray16(const std::string& path, const ImageU16& img) {
  cv::Mat m(img.height, img.width, CV_16UC1, const_cast<std::uint16_t*>(img.data.data()));
  if (!cv::imwrite(path, m)) throw std::runtime_error("cannot write image: " + path);
}

}  // namespace mapfusion
