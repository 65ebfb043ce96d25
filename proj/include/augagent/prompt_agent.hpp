#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "augagent/manifest.hpp"

namespace augagent {

// Chat-completion backend. Implementations must tolerate concurrent calls;
// mocks must be deterministic in (instruction, seed_hint).
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const std::string& instruction,
                               std::uint64_t seed_hint) = 0;
};

struct PromptTemplates {
  // Must contain {category}.
  std::string p_gen =
      "You are helping build a training set for image segmentation. "
      "Describe one realistic background scene in which a {category} could be "
      "photographed. Answer with a single short phrase suitable as a "
      "text-to-image prompt, without mentioning any other object category.";
  // Must contain {category} and {candidate}.
  std::string p_refine =
      "Evaluate the following background prompt for generating a photo of a "
      "{category}. Judge whether the scene is plausible for a {category}, "
      "specific rather than generic, and free of objects that would confuse "
      "the category.\nPrompt: \"{candidate}\"";
};

// Appended once to every rendered refinement command.
inline constexpr std::string_view kScoreFormatSuffix =
    "\nRespond with exactly one line of the form {\"score\": x} where x is a "
    "number between 0 and 1.";

struct PromptAttempt {
  std::string candidate;
  // Absent when the candidate was empty or the score reply did not parse.
  std::optional<double> score;
};

struct RefinedPrompt {
  std::string text;
  ClassLabel category;
  double score = 0.0;
  int iterations = 0;
  bool best_effort = false;
  std::vector<PromptAttempt> history;
};

// Throws DataError when the template lacks a placeholder or the category
// name is empty.
std::string render_initial_command(const PromptTemplates& templates,
                                   const ClassLabel& category);
std::string render_refine_command(const PromptTemplates& templates,
                                  const ClassLabel& category,
                                  std::string_view candidate);

// Finds the first {"score": x} object in a reply. Throws DataError if none
// parses or x lies outside [0,1].
double parse_score(std::string_view response);

struct RefineOptions {
  double epsilon = 0.9;
  int max_iters = 8;
  std::uint64_t seed = 0;
};

// Generate, score, accept the first candidate with score >= epsilon. After
// max_iters the best scored candidate is returned with best_effort set.
// Throws BackendError when the backend fails or no candidate ever scored.
RefinedPrompt self_refine(LlmBackend& backend, const PromptTemplates& templates,
                          const ClassLabel& category, const RefineOptions& options);

// Deterministic offline LLM: answers scoring commands with a hashed score in
// [0.5, 1) and generation commands with a hashed stock background phrase.
class MockLlm : public LlmBackend {
 public:
  std::string complete(const std::string& instruction,
                       std::uint64_t seed_hint) override;
};

}  // namespace augagent
