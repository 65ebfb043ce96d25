#include "augagent/generation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "augagent/codec.hpp"
#include "augagent/errors.hpp"

namespace augagent {

void check_request(const GenerationRequest& request) {
  if (request.source.empty()) throw DataError("generation source image is empty");
  if (request.map.width() != request.source.width() ||
      request.map.height() != request.source.height()) {
    throw DataError("detector map size differs from the source image");
  }
  if (request.prompt.empty()) throw DataError("generation prompt is empty");
  if (request.steps <= 0) throw DataError("generation steps must be positive");
  if (!(request.guidance > 0.0)) throw DataError("guidance must be positive");
}

RgbImage generate(GenerationBackend& backend, const GenerationRequest& request) {
  check_request(request);
  RgbImage out = backend.generate(request);
  if (out.width() != request.source.width() || out.height() != request.source.height()) {
    throw BackendError("generation backend returned " + std::to_string(out.width()) + "x" +
                       std::to_string(out.height()) + " for a " +
                       std::to_string(request.source.width()) + "x" +
                       std::to_string(request.source.height()) + " source");
  }
  return out;
}

int mock_hue_angle(std::string_view prompt, std::uint64_t seed) {
  return static_cast<int>(hash_text_and_u64(prompt, seed) % 360);
}

RgbImage mock_generate(const GenerationRequest& request) {
  check_request(request);
  Eigen::Matrix3d to_yiq;
  to_yiq << 0.299, 0.587, 0.114,
            0.596, -0.274, -0.322,
            0.211, -0.523, 0.312;
  const double theta = mock_hue_angle(request.prompt, request.seed) *
                       std::numbers::pi / 180.0;
  Eigen::Matrix3d rotate = Eigen::Matrix3d::Identity();
  rotate.bottomRightCorner<2, 2>() << std::cos(theta), -std::sin(theta),
                                      std::sin(theta), std::cos(theta);
  const Eigen::Matrix3d transform = to_yiq.inverse() * rotate * to_yiq;

  const RgbImage& src = request.source;
  RgbImage out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const Eigen::Vector3d rgb(src.at(x, y, 0), src.at(x, y, 1), src.at(x, y, 2));
      const Eigen::Vector3d rotated = transform * rgb;
      const int edge = request.map.data(y, x);
      for (int c = 0; c < 3; ++c) {
        int v = static_cast<int>(std::lround(std::clamp(rotated[c], 0.0, 255.0)));
        if (edge > 0) v = (v + edge + 1) / 2;
        out.at(x, y, c) = static_cast<std::uint8_t>(v);
      }
    }
  }
  return out;
}

}  // namespace augagent
