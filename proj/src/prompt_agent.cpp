#include "augagent/prompt_agent.hpp"

#include <array>
#include <utility>

#include <json.hpp>

#include "augagent/codec.hpp"
#include "augagent/errors.hpp"

namespace augagent {

namespace {

constexpr std::string_view kCategory = "{category}";
constexpr std::string_view kCandidate = "{candidate}";

// Single left-to-right pass so substituted text is never re-scanned.
std::string substitute(std::string_view tmpl,
                       std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    bool replaced = false;
    if (tmpl[pos] == '{') {
      for (const auto& [key, value] : values) {
        if (tmpl.substr(pos, key.size()) == key) {
          out += value;
          pos += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[pos++];
  }
  return out;
}

std::string trim_candidate(std::string_view text) {
  constexpr std::string_view junk = " \t\r\n\"'`";
  auto first = text.find_first_not_of(junk);
  if (first == std::string_view::npos) return {};
  auto last = text.find_last_not_of(junk);
  return std::string(text.substr(first, last - first + 1));
}

}  // namespace

std::string render_initial_command(const PromptTemplates& templates,
                                   const ClassLabel& category) {
  if (templates.p_gen.find(kCategory) == std::string::npos) {
    throw DataError("generation template lacks {category}");
  }
  if (category.name.empty()) throw DataError("empty category name");
  return substitute(templates.p_gen, {{kCategory, category.name}});
}

std::string render_refine_command(const PromptTemplates& templates,
                                  const ClassLabel& category,
                                  std::string_view candidate) {
  if (templates.p_refine.find(kCategory) == std::string::npos ||
      templates.p_refine.find(kCandidate) == std::string::npos) {
    throw DataError("refinement template lacks {category} or {candidate}");
  }
  if (category.name.empty()) throw DataError("empty category name");
  if (candidate.empty()) throw DataError("empty candidate prompt");
  std::string out = substitute(templates.p_refine,
                               {{kCategory, category.name}, {kCandidate, candidate}});
  if (out.find(kScoreFormatSuffix) == std::string::npos) out += kScoreFormatSuffix;
  return out;
}

double parse_score(std::string_view response) {
  for (std::size_t open = response.find('{'); open != std::string_view::npos;
       open = response.find('{', open + 1)) {
    const std::size_t close = response.find('}', open);
    if (close == std::string_view::npos) break;
    const std::string_view candidate = response.substr(open, close - open + 1);
    if (candidate.find('\n') != std::string_view::npos) continue;
    auto obj = nlohmann::json::parse(candidate, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    auto it = obj.find("score");
    if (it == obj.end() || !it->is_number()) continue;
    const double score = it->get<double>();
    if (!(score >= 0.0 && score <= 1.0)) {
      throw DataError("score " + std::to_string(score) + " outside [0,1]");
    }
    return score;
  }
  throw DataError("no score object in LLM reply");
}

RefinedPrompt self_refine(LlmBackend& backend, const PromptTemplates& templates,
                          const ClassLabel& category, const RefineOptions& options) {
  if (!(options.epsilon > 0.0 && options.epsilon <= 1.0)) {
    throw ConfigError("epsilon must lie in (0,1]");
  }
  if (options.max_iters < 1) throw ConfigError("max_iters must be >= 1");

  const std::string command = render_initial_command(templates, category);
  RefinedPrompt result;
  result.category = category;
  std::optional<std::size_t> best;

  for (int i = 0; i < options.max_iters; ++i) {
    const auto base = options.seed ^ (static_cast<std::uint64_t>(i) << 1);
    std::string candidate = trim_candidate(backend.complete(command, splitmix64(base)));
    if (candidate.empty()) {
      result.history.push_back({std::move(candidate), std::nullopt});
      continue;
    }
    const std::string reply = backend.complete(
        render_refine_command(templates, category, candidate), splitmix64(base | 1));
    std::optional<double> score;
    try {
      score = parse_score(reply);
    } catch (const DataError&) {
    }
    result.history.push_back({candidate, score});
    if (!score) continue;
    if (*score >= options.epsilon) {
      result.text = std::move(candidate);
      result.score = *score;
      result.iterations = static_cast<int>(result.history.size());
      return result;
    }
    if (!best || *score > *result.history[*best].score) best = result.history.size() - 1;
  }

  result.iterations = static_cast<int>(result.history.size());
  if (!best) {
    throw BackendError("no scorable prompt for '" + category.name + "' after " +
                       std::to_string(options.max_iters) + " iterations");
  }
  result.text = result.history[*best].candidate;
  result.score = *result.history[*best].score;
  result.best_effort = true;
  return result;
}

std::string MockLlm::complete(const std::string& instruction, std::uint64_t seed_hint) {
  static constexpr std::array<std::string_view, 16> kScenes = {
      "on a quiet country road at dawn",
      "in a sunlit city park with autumn trees",
      "beside a misty mountain lake",
      "in a cozy living room with warm lamplight",
      "on a sandy beach under an overcast sky",
      "in a snowy village square at dusk",
      "on a rain-soaked street with neon reflections",
      "in an open grassy field at golden hour",
      "inside a bright modern kitchen",
      "at a busy harbour with moored boats",
      "in a desert canyon under clear blue sky",
      "on a wooden porch overlooking a garden",
      "in a foggy pine forest clearing",
      "at an airport apron on a cloudy morning",
      "in a farmyard next to a red barn",
      "on a rooftop terrace at sunset",
  };
  const std::uint64_t h = splitmix64(hash_text_and_u64(instruction, seed_hint));
  if (instruction.find(kScoreFormatSuffix) != std::string::npos) {
    return "{\"score\": " + format_fixed6(0.5 + 0.5 * unit_interval(h)) + "}";
  }
  return std::string(kScenes[h % kScenes.size()]);
}

}  // namespace augagent
