#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "augagent/augment.hpp"
#include "augagent/detector.hpp"
#include "augagent/http_backends.hpp"
#include "augagent/manifest.hpp"
#include "augagent/prompt_agent.hpp"

namespace augagent {

struct BackendConfig {
  bool mock = true;
  std::string url;
  std::string model;
  std::string api_key_env;
  int max_in_flight = 4;
};

struct RunConfig {
  // Preset name ("voc", "coco") or path to {"dataset_name", "labels"} JSON.
  std::string vocabulary = "voc";
  double epsilon = 0.9;
  int image_size = kScorerImageSize;
  int epochs = 80;
  int batch_size = 16;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  int max_attempts = 10;
  int quota = 1;
  int max_prompt_iters = 8;
  bool fresh_prompt_per_attempt = true;
  int jobs = 4;
  std::string out = "out";
  CannyParams canny;
  int steps = 30;
  double guidance = 7.5;
  PromptTemplates templates;
  BackendConfig llm;
  BackendConfig diffusion;
  BackendConfig embed;
  BackendConfig similarity;
  BackendConfig pose;
  int retry_attempts = 3;
  int retry_initial_delay_ms = 200;
  std::optional<std::string> similarity_class;
  std::size_t similarity_sample_size = 100;
  std::string similarity_method = "Controlled Self-Refined Diffusion";
};

// Command-line values; each one set overrides the file.
struct ConfigOverrides {
  std::optional<double> epsilon;
  std::optional<int> max_attempts;
  std::optional<int> quota;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> vocabulary;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<double> sigma;
  std::optional<double> low;
  std::optional<double> high;
  std::optional<std::string> similarity_class;
  std::optional<std::size_t> sample_size;
  bool mock_llm = false;
  bool mock_diffusion = false;
  bool mock_embed = false;
  bool mock_pose = false;
};

// Defaults <- JSON text <- overrides, then validation. Unknown keys and every
// invalid value are collected into one ConfigError.
RunConfig parse_config_text(std::string_view json_text, const ConfigOverrides& overrides = {});
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const ConfigOverrides& overrides = {});

Vocabulary resolve_vocabulary(const RunConfig& config);
AugmentationPolicy make_policy(const RunConfig& config);
Endpoint make_endpoint(const RunConfig& config, const BackendConfig& backend);

}  // namespace augagent
