#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "augagent/detector.hpp"
#include "augagent/generation.hpp"
#include "augagent/manifest.hpp"
#include "augagent/prompt_agent.hpp"
#include "augagent/scorer.hpp"

namespace augagent {

struct AugmentationPolicy {
  double epsilon = 0.9;
  int max_attempts = 10;
  // Accepted augmentations sought per original image.
  int quota = 1;
  std::uint64_t base_seed = 0;
  // Draw a new refined prompt on every attempt instead of reusing the first.
  bool fresh_prompt_per_attempt = true;
  int max_prompt_iters = 8;
  PromptTemplates templates;
  CannyParams canny;
  int steps = 30;
  double guidance = 7.5;
  int jobs = 4;
};

// Throws ConfigError on out-of-range fields.
void validate_policy(const AugmentationPolicy& policy);

struct Backends {
  LlmBackend& llm;
  GenerationBackend& generator;
  PoseBackend& pose;
  ImageScorer& scorer;
};

struct AttemptEntry {
  std::uint64_t seed = 0;
  std::string prompt;
  bool prompt_best_effort = false;
  double target_score = 0.0;
  bool accepted = false;
};

enum class SlotOutcome { accepted, exhausted };

struct AttemptLog {
  std::string record_id;  // id of the child slot
  std::string parent_id;
  DetectorKind detector = DetectorKind::canny;
  std::vector<AttemptEntry> attempts;
  SlotOutcome outcome = SlotOutcome::exhausted;
};

struct AugmentResult {
  // Present only when an attempt cleared the gate.
  std::optional<ImageRecord> record;
  AttemptLog log;
};

// Seed for attempt t of a slot: base_seed xor hash(slot id, t).
std::uint64_t attempt_seed(std::uint64_t base_seed, const std::string& slot_id, int attempt);

// Id of the j-th augmentation slot of a parent.
std::string child_record_id(const std::string& parent_id, int slot);

// Generate -> score -> retry for one slot. Accepts when the target score is
// strictly above epsilon; gives up after max_attempts with outcome
// exhausted. The accepted image is written to image_dir/<slot id>.png.
AugmentResult augment_one(const ImageRecord& record, const RgbImage& source,
                          const Vocabulary& vocab, const AugmentationPolicy& policy,
                          Backends& backends, const std::string& slot_id,
                          const std::filesystem::path& image_dir);

struct RunReport {
  // Labels of children accepted during this run, per vocabulary entry.
  std::vector<std::size_t> per_class_counts;
  // attempts needed -> number of slots accepted with that many attempts.
  std::map<int, std::size_t> attempts_histogram;
  // Parent id for every exhausted slot, in manifest order.
  std::vector<std::string> exhausted_record_ids;
  // accepted children after the run -> number of originals with that many.
  std::map<int, std::size_t> children_histogram;
  std::vector<std::pair<std::string, std::string>> skipped;  // (record id, reason)
  std::size_t generation_calls = 0;
  std::size_t new_records = 0;
  double wall_time_seconds = 0.0;
};

struct PipelineResult {
  DatasetManifest manifest;  // input records followed by the new children
  RunReport report;
  std::vector<AttemptLog> logs;
};

// Seeks `quota` accepted children for every original, skipping slots already
// filled in the manifest. Originals are processed on up to policy.jobs
// workers; results are appended in manifest order.
PipelineResult run_pipeline(const DatasetManifest& manifest, const AugmentationPolicy& policy,
                            Backends& backends, const std::filesystem::path& image_dir);

std::string report_to_json(const RunReport& report, const Vocabulary& vocab);
// One JSON object per line, one line per slot.
std::string logs_to_jsonl(const std::vector<AttemptLog>& logs);

}  // namespace augagent
