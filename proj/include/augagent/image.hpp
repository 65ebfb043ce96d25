#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace augagent {

// Single-channel 8-bit raster, rows = height, cols = width.
using GrayImage =
    Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Interleaved 8-bit RGB raster.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  std::uint8_t& at(int x, int y, int c) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    at(x, y, 0) = r;
    at(x, y, 1) = g;
    at(x, y, 2) = b;
  }

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// PNG codecs. Reading converts any PNG colour type to the requested layout.
// Failures raise DataError.
RgbImage read_png_rgb(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_png(const GrayImage& image);
RgbImage decode_png_rgb(const std::vector<std::uint8_t>& bytes);
GrayImage decode_png_gray(const std::vector<std::uint8_t>& bytes);

GrayImage resize_nearest(const GrayImage& image, int width, int height);
RgbImage resize_bilinear(const RgbImage& image, int width, int height);

}  // namespace augagent
