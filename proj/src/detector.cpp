#include "augagent/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <string>

#include "augagent/errors.hpp"

namespace augagent {

namespace {

using I64Array =
    Eigen::Array<long long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MagArray =
    Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

I64Array luma_x1000(const RgbImage& image) {
  I64Array out(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out(y, x) = 299LL * image.at(x, y, 0) + 587LL * image.at(x, y, 1) +
                  114LL * image.at(x, y, 2);
    }
  }
  return out;
}

I64Array blur(const I64Array& in, const std::vector<long long>& taps) {
  const auto rows = in.rows();
  const auto cols = in.cols();
  const auto radius = static_cast<Eigen::Index>(taps.size() / 2);
  I64Array horizontal(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      long long acc = 0;
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * in(y, std::clamp<Eigen::Index>(x + k, 0, cols - 1));
      }
      horizontal(y, x) = acc;
    }
  }
  I64Array out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      long long acc = 0;
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] *
               horizontal(std::clamp<Eigen::Index>(y + k, 0, rows - 1), x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

// Direction bins: 0 horizontal gradient, 1 along (+x,+y), 2 vertical,
// 3 along (+x,-y). Boundaries at 22.5 and 67.5 degrees are decided exactly
// in integers via tan(pi/8) = sqrt(2) - 1 and tan(3pi/8) = sqrt(2) + 1.
int direction_bin(long long gx, long long gy) {
  const __int128 ax = gx < 0 ? -gx : gx;
  const __int128 ay = gy < 0 ? -gy : gy;
  if ((ay + ax) * (ay + ax) <= 2 * ax * ax) return 0;
  if (ay >= ax && (ay - ax) * (ay - ax) >= 2 * ax * ax) return 2;
  return (gx > 0) == (gy > 0) ? 1 : 3;
}

constexpr int kOffsets[4][2] = {{1, 0}, {1, 1}, {0, 1}, {1, -1}};

}  // namespace

std::string_view to_string(DetectorKind kind) {
  return kind == DetectorKind::canny ? "canny" : "pose";
}

DetectorKind parse_detector_kind(std::string_view text) {
  if (text == "canny") return DetectorKind::canny;
  if (text == "pose") return DetectorKind::pose;
  throw ConfigError("unknown detector kind '" + std::string(text) + "'");
}

DetectorKind select_detector(const std::set<int>& labels, const Vocabulary& vocab) {
  if (labels.empty()) throw DataError("cannot select a detector for an empty label set");
  const auto person = vocab.find("person");
  return person && labels.contains(*person) ? DetectorKind::pose : DetectorKind::canny;
}

std::vector<long long> canny_gaussian_taps(double sigma) {
  if (!(sigma > 0.0 && sigma <= 20.0)) throw ConfigError("canny sigma must lie in (0, 20]");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<long long> taps;
  for (int i = -radius; i <= radius; ++i) {
    taps.push_back(std::llround(1024.0 * std::exp(-(i * i) / (2.0 * sigma * sigma))));
  }
  return taps;
}

DetectorMap canny_edge(const RgbImage& image, const CannyParams& params) {
  if (image.width() < 3 || image.height() < 3) {
    throw DataError("canny needs an image of at least 3x3");
  }
  if (!(params.sigma > 0.0 && params.sigma <= 20.0)) {
    throw ConfigError("canny sigma must lie in (0, 20]");
  }
  if (!(params.low > 0.0 && params.low < params.high && params.high < 1.0)) {
    throw ConfigError("canny thresholds need 0 < low < high < 1");
  }

  const I64Array smooth = blur(luma_x1000(image), canny_gaussian_taps(params.sigma));
  const auto rows = smooth.rows();
  const auto cols = smooth.cols();
  auto px = [&](Eigen::Index y, Eigen::Index x) {
    return smooth(std::clamp<Eigen::Index>(y, 0, rows - 1),
                  std::clamp<Eigen::Index>(x, 0, cols - 1));
  };

  MagArray magnitude(rows, cols);
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bins(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const long long gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                           (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
      const long long gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                           (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
      const double dx = static_cast<double>(gx);
      const double dy = static_cast<double>(gy);
      magnitude(y, x) = std::sqrt(dx * dx + dy * dy);
      bins(y, x) = direction_bin(gx, gy);
    }
  }

  DetectorMap map{DetectorKind::canny, GrayImage::Zero(rows, cols)};
  const double max_mag = magnitude.maxCoeff();
  if (max_mag <= 0.0) return map;

  auto mag_at = [&](Eigen::Index y, Eigen::Index x) {
    if (y < 0 || y >= rows || x < 0 || x >= cols) return 0.0;
    return magnitude(y, x);
  };
  // 0 = suppressed, 1 = weak, 2 = strong.
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> klass =
      decltype(map.data)::Zero(rows, cols);
  const double high = params.high * max_mag;
  const double low = params.low * max_mag;
  std::deque<std::pair<Eigen::Index, Eigen::Index>> frontier;
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double m = magnitude(y, x);
      if (m <= 0.0) continue;
      const auto [ox, oy] = kOffsets[bins(y, x)];
      if (!(m >= mag_at(y + oy, x + ox) && m > mag_at(y - oy, x - ox))) continue;
      if (m >= high) {
        klass(y, x) = 2;
        frontier.emplace_back(y, x);
      } else if (m >= low) {
        klass(y, x) = 1;
      }
    }
  }

  while (!frontier.empty()) {
    const auto [y, x] = frontier.front();
    frontier.pop_front();
    map.data(y, x) = 255;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const Eigen::Index ny = y + dy;
        const Eigen::Index nx = x + dx;
        if (ny < 0 || ny >= rows || nx < 0 || nx >= cols) continue;
        if (klass(ny, nx) == 1) {
          klass(ny, nx) = 2;
          frontier.emplace_back(ny, nx);
        }
      }
    }
  }
  return map;
}

DetectorMap pose_map(PoseBackend& backend, const RgbImage& image) {
  GrayImage raw = backend.detect(image);
  if (raw.size() == 0) throw BackendError("pose backend returned an empty map");
  return {DetectorKind::pose, resize_nearest(raw, image.width(), image.height())};
}

namespace {

void draw_line(GrayImage& img, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    img(y0, x0) = 255;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

GrayImage mock_skeleton() {
  GrayImage img = GrayImage::Zero(64, 64);
  for (int a = 0; a < 360; a += 3) {
    const double t = a * 3.14159265358979323846 / 180.0;
    img(static_cast<int>(std::lround(11 + 5 * std::sin(t))),
        static_cast<int>(std::lround(32 + 5 * std::cos(t)))) = 255;
  }
  draw_line(img, 32, 16, 32, 40);  // spine
  draw_line(img, 32, 22, 18, 32);  // arms
  draw_line(img, 32, 22, 46, 32);
  draw_line(img, 32, 40, 22, 60);  // legs
  draw_line(img, 32, 40, 42, 60);
  return img;
}

GrayImage MockPose::detect(const RgbImage&) { return mock_skeleton(); }

}  // namespace augagent
