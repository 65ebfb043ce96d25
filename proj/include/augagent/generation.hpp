#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "augagent/detector.hpp"
#include "augagent/image.hpp"

namespace augagent {

struct GenerationRequest {
  RgbImage source;
  DetectorMap map;
  std::string prompt;
  std::uint64_t seed = 0;
  int steps = 30;
  double guidance = 7.5;
};

// Throws DataError when the map size differs from the source, the prompt is
// empty, or steps/guidance are not positive.
void check_request(const GenerationRequest& request);

// Conditioned image generator. Must tolerate concurrent calls; mocks must be
// pure functions of (source, map, prompt, seed).
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual RgbImage generate(const GenerationRequest& request) = 0;
};

// Validates the request, calls the backend and enforces that the result has
// the source dimensions (BackendError otherwise).
RgbImage generate(GenerationBackend& backend, const GenerationRequest& request);

// hash(prompt, seed) mod 360, in degrees.
int mock_hue_angle(std::string_view prompt, std::uint64_t seed);

// Source hue-rotated in YIQ space by mock_hue_angle, then every non-zero map
// pixel blended in at 50% opacity. Luma is preserved up to rounding and
// clamping.
RgbImage mock_generate(const GenerationRequest& request);

class MockGeneration : public GenerationBackend {
 public:
  RgbImage generate(const GenerationRequest& request) override {
    return mock_generate(request);
  }
};

}  // namespace augagent
