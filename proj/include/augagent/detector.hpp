#pragma once

#include <set>
#include <string_view>

#include "augagent/image.hpp"
#include "augagent/manifest.hpp"

namespace augagent {

enum class DetectorKind { canny, pose };

std::string_view to_string(DetectorKind kind);
DetectorKind parse_detector_kind(std::string_view text);

// Conditioning map M. Canny maps hold only 0 and 255.
struct DetectorMap {
  DetectorKind kind = DetectorKind::canny;
  GrayImage data;

  int width() const { return static_cast<int>(data.cols()); }
  int height() const { return static_cast<int>(data.rows()); }
};

// Pose when the vocabulary's "person" label is among the labels.
DetectorKind select_detector(const std::set<int>& labels, const Vocabulary& vocab);

struct CannyParams {
  double sigma = 1.4;
  // Hysteresis thresholds as fractions of the image's largest gradient
  // magnitude; 0 < low < high < 1.
  double low = 0.1;
  double high = 0.2;
};

// Gaussian taps for |i| <= ceil(3 sigma): round(1024 exp(-i^2 / (2 sigma^2))).
// Integer taps keep every stage before the magnitude exact, which makes the
// detector exactly invariant to a constant brightness offset.
std::vector<long long> canny_gaussian_taps(double sigma);

// Luma (0.299, 0.587, 0.114) -> Gaussian blur -> Sobel -> non-maximum
// suppression over four direction bins -> double-threshold hysteresis.
// Borders replicate. Throws DataError for images smaller than 3x3 and
// ConfigError for bad parameters (sigma must lie in (0, 20]).
DetectorMap canny_edge(const RgbImage& image, const CannyParams& params = {});

// Pose estimator. Must tolerate concurrent calls.
class PoseBackend {
 public:
  virtual ~PoseBackend() = default;
  virtual GrayImage detect(const RgbImage& image) = 0;
};

// Backend skeleton, nearest-neighbour resized to the source size if needed.
DetectorMap pose_map(PoseBackend& backend, const RgbImage& image);

// The fixed 64x64 stick figure returned by MockPose.
GrayImage mock_skeleton();

class MockPose : public PoseBackend {
 public:
  GrayImage detect(const RgbImage& image) override;
};

}  // namespace augagent
