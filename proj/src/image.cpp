#include "augagent/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "augagent/errors.hpp"

namespace augagent {

RgbImage::RgbImage(int width, int height, std::uint8_t fill)
    : width_(width),
      height_(height),
      pixels_(static_cast<std::size_t>(width) * height * 3, fill) {}

namespace {

struct PngReader {
  png_image image{};
  PngReader() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngReader() { png_image_free(&image); }
};

std::vector<std::uint8_t> decode(const std::vector<std::uint8_t>& bytes,
                                 png_uint_32 format, int& width, int& height) {
  PngReader reader;
  if (!png_image_begin_read_from_memory(&reader.image, bytes.data(),
                                        bytes.size())) {
    throw DataError(std::string("png decode: ") + reader.image.message);
  }
  reader.image.format = format;
  std::vector<std::uint8_t> out(PNG_IMAGE_SIZE(reader.image));
  if (!png_image_finish_read(&reader.image, nullptr, out.data(), 0, nullptr)) {
    throw DataError(std::string("png decode: ") + reader.image.message);
  }
  width = static_cast<int>(reader.image.width);
  height = static_cast<int>(reader.image.height);
  return out;
}

std::vector<std::uint8_t> encode(const std::uint8_t* data, int width,
                                 int height, png_uint_32 format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0,
                                 nullptr)) {
    throw DataError(std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0,
                                 nullptr)) {
    throw DataError(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write image " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  return encode(image.pixels().data(), image.width(), image.height(),
                PNG_FORMAT_RGB);
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  return encode(image.data(), static_cast<int>(image.cols()),
                static_cast<int>(image.rows()), PNG_FORMAT_GRAY);
}

RgbImage decode_png_rgb(const std::vector<std::uint8_t>& bytes) {
  int width = 0;
  int height = 0;
  auto data = decode(bytes, PNG_FORMAT_RGB, width, height);
  RgbImage image(width, height);
  image.pixels() = std::move(data);
  return image;
}

GrayImage decode_png_gray(const std::vector<std::uint8_t>& bytes) {
  int width = 0;
  int height = 0;
  auto data = decode(bytes, PNG_FORMAT_GRAY, width, height);
  GrayImage image(height, width);
  std::copy(data.begin(), data.end(), image.data());
  return image;
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  try {
    return decode_png_rgb(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  try {
    return decode_png_gray(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_file(path, encode_png(image));
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  write_file(path, encode_png(image));
}

GrayImage resize_nearest(const GrayImage& image, int width, int height) {
  if (image.cols() == width && image.rows() == height) return image;
  GrayImage out(height, width);
  for (int y = 0; y < height; ++y) {
    const auto sy = static_cast<Eigen::Index>(
        static_cast<long long>(y) * image.rows() / height);
    for (int x = 0; x < width; ++x) {
      const auto sx = static_cast<Eigen::Index>(
          static_cast<long long>(x) * image.cols() / width);
      out(y, x) = image(sy, sx);
    }
  }
  return out;
}

RgbImage resize_bilinear(const RgbImage& image, int width, int height) {
  if (image.width() == width && image.height() == height) return image;
  RgbImage out(width, height);
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int y = 0; y < height; ++y) {
    // Pixel-centre alignment.
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(image.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(image.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(x0, y0, c) * (1 - wx) + image.at(x1, y0, c) * wx;
        const double bottom = image.at(x0, y1, c) * (1 - wx) + image.at(x1, y1, c) * wx;
        out.at(x, y, c) = static_cast<std::uint8_t>(
            std::lround(top * (1 - wy) + bottom * wy));
      }
    }
  }
  return out;
}

}  // namespace augagent
