#include "augagent/config.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "augagent/errors.hpp"

namespace augagent {

using nlohmann::json;

namespace {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  // Reads obj[key] into target when present; records a type error otherwise.
  template <typename T>
  void get(const json& obj, const std::string& prefix, const char* key, T& target) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
      if constexpr (std::is_same_v<T, std::optional<std::string>>) {
        if (it->is_null()) {
          target.reset();
        } else {
          target = it->template get<std::string>();
        }
      } else {
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
          if (!it->is_number_integer()) throw std::invalid_argument("integer expected");
          if (std::is_unsigned_v<T> && !it->is_number_unsigned()) {
            throw std::invalid_argument("non-negative integer expected");
          }
        }
        target = it->template get<T>();
      }
    } catch (const std::exception&) {
      errors_.push_back("invalid value for '" + prefix + key + "'");
    }
  }

  void check_keys(const json& obj, const std::string& prefix,
                  std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      errors_.push_back("'" + prefix + "' must be an object");
      return;
    }
    for (const auto& [key, _] : obj.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) errors_.push_back("unknown key '" + prefix + key + "'");
    }
  }

 private:
  std::vector<std::string>& errors_;
};

void read_backend(Reader& r, const json& root, const char* name, BackendConfig& b) {
  auto it = root.find(name);
  if (it == root.end()) return;
  const std::string prefix = std::string("backends.") + name + ".";
  r.check_keys(*it, prefix, {"mock", "url", "model", "api_key_env", "max_in_flight"});
  if (!it->is_object()) return;
  r.get(*it, prefix, "mock", b.mock);
  r.get(*it, prefix, "url", b.url);
  r.get(*it, prefix, "model", b.model);
  r.get(*it, prefix, "api_key_env", b.api_key_env);
  r.get(*it, prefix, "max_in_flight", b.max_in_flight);
}

void validate(const RunConfig& c, std::vector<std::string>& errors) {
  auto require = [&](bool ok, const char* message) {
    if (!ok) errors.emplace_back(message);
  };
  require(c.epsilon > 0.0 && c.epsilon <= 1.0, "epsilon must lie in (0,1]");
  require(c.image_size == kScorerImageSize, "image_size must be 384 (24x24 grid of 16px patches)");
  require(c.epochs >= 0, "epochs must be >= 0");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.learning_rate > 0.0, "learning_rate must be > 0");
  require(c.max_attempts >= 1, "max_attempts must be >= 1");
  require(c.quota >= 1, "quota must be >= 1");
  require(c.max_prompt_iters >= 1, "max_prompt_iters must be >= 1");
  require(c.jobs >= 1, "jobs must be >= 1");
  require(!c.out.empty(), "out must be non-empty");
  require(c.canny.sigma > 0.0 && c.canny.sigma <= 20.0, "canny.sigma must lie in (0,20]");
  require(c.canny.low > 0.0 && c.canny.low < c.canny.high && c.canny.high < 1.0,
          "canny thresholds need 0 < low < high < 1");
  require(c.steps >= 1, "generation.steps must be >= 1");
  require(c.guidance > 0.0, "generation.guidance must be > 0");
  require(c.templates.p_gen.find("{category}") != std::string::npos,
          "templates.p_gen must contain {category}");
  require(c.templates.p_refine.find("{category}") != std::string::npos &&
              c.templates.p_refine.find("{candidate}") != std::string::npos,
          "templates.p_refine must contain {category} and {candidate}");
  require(c.retry_attempts >= 1, "retry.attempts must be >= 1");
  require(c.retry_initial_delay_ms >= 0, "retry.initial_delay_ms must be >= 0");
  require(c.similarity_sample_size >= 1, "similarity.sample_size must be >= 1");
  const std::pair<const char*, const BackendConfig*> backends[] = {
      {"llm", &c.llm}, {"diffusion", &c.diffusion}, {"embed", &c.embed},
      {"similarity", &c.similarity}, {"pose", &c.pose}};
  for (const auto& [name, b] : backends) {
    if (!b->mock && b->url.empty()) {
      errors.push_back(std::string("backends.") + name + ".url is required when mock is false");
    }
    if (b->max_in_flight < 1) {
      errors.push_back(std::string("backends.") + name + ".max_in_flight must be >= 1");
    }
  }
}

}  // namespace

RunConfig parse_config_text(std::string_view json_text, const ConfigOverrides& o) {
  RunConfig c;
  std::vector<std::string> errors;
  Reader r(errors);

  json root = json_text.find_first_not_of(" \t\r\n") == std::string_view::npos
                  ? json::object()
                  : json::parse(json_text, nullptr, false);
  if (root.is_discarded()) throw ConfigError("config is not valid JSON");
  r.check_keys(root, "",
               {"vocabulary", "epsilon", "image_size", "epochs", "batch_size", "learning_rate",
                "seed", "max_attempts", "quota", "max_prompt_iters",
                "fresh_prompt_per_attempt", "jobs", "out", "canny", "generation", "templates",
                "backends", "retry", "similarity"});
  if (root.is_object()) {
    r.get(root, "", "vocabulary", c.vocabulary);
    r.get(root, "", "epsilon", c.epsilon);
    r.get(root, "", "image_size", c.image_size);
    r.get(root, "", "epochs", c.epochs);
    r.get(root, "", "batch_size", c.batch_size);
    r.get(root, "", "learning_rate", c.learning_rate);
    r.get(root, "", "seed", c.seed);
    r.get(root, "", "max_attempts", c.max_attempts);
    r.get(root, "", "quota", c.quota);
    r.get(root, "", "max_prompt_iters", c.max_prompt_iters);
    r.get(root, "", "fresh_prompt_per_attempt", c.fresh_prompt_per_attempt);
    r.get(root, "", "jobs", c.jobs);
    r.get(root, "", "out", c.out);
    if (auto it = root.find("canny"); it != root.end()) {
      r.check_keys(*it, "canny.", {"sigma", "low", "high"});
      if (it->is_object()) {
        r.get(*it, "canny.", "sigma", c.canny.sigma);
        r.get(*it, "canny.", "low", c.canny.low);
        r.get(*it, "canny.", "high", c.canny.high);
      }
    }
    if (auto it = root.find("generation"); it != root.end()) {
      r.check_keys(*it, "generation.", {"steps", "guidance"});
      if (it->is_object()) {
        r.get(*it, "generation.", "steps", c.steps);
        r.get(*it, "generation.", "guidance", c.guidance);
      }
    }
    if (auto it = root.find("templates"); it != root.end()) {
      r.check_keys(*it, "templates.", {"p_gen", "p_refine"});
      if (it->is_object()) {
        r.get(*it, "templates.", "p_gen", c.templates.p_gen);
        r.get(*it, "templates.", "p_refine", c.templates.p_refine);
      }
    }
    if (auto it = root.find("backends"); it != root.end()) {
      r.check_keys(*it, "backends.", {"llm", "diffusion", "embed", "similarity", "pose"});
      if (it->is_object()) {
        read_backend(r, *it, "llm", c.llm);
        read_backend(r, *it, "diffusion", c.diffusion);
        read_backend(r, *it, "embed", c.embed);
        read_backend(r, *it, "similarity", c.similarity);
        read_backend(r, *it, "pose", c.pose);
      }
    }
    if (auto it = root.find("retry"); it != root.end()) {
      r.check_keys(*it, "retry.", {"attempts", "initial_delay_ms"});
      if (it->is_object()) {
        r.get(*it, "retry.", "attempts", c.retry_attempts);
        r.get(*it, "retry.", "initial_delay_ms", c.retry_initial_delay_ms);
      }
    }
    if (auto it = root.find("similarity"); it != root.end()) {
      r.check_keys(*it, "similarity.", {"class", "sample_size", "method"});
      if (it->is_object()) {
        r.get(*it, "similarity.", "class", c.similarity_class);
        r.get(*it, "similarity.", "sample_size", c.similarity_sample_size);
        r.get(*it, "similarity.", "method", c.similarity_method);
      }
    }
  }

  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.max_attempts) c.max_attempts = *o.max_attempts;
  if (o.quota) c.quota = *o.quota;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.vocabulary) c.vocabulary = *o.vocabulary;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.sigma) c.canny.sigma = *o.sigma;
  if (o.low) c.canny.low = *o.low;
  if (o.high) c.canny.high = *o.high;
  if (o.similarity_class) c.similarity_class = *o.similarity_class;
  if (o.sample_size) c.similarity_sample_size = *o.sample_size;
  if (o.mock_llm) c.llm.mock = true;
  if (o.mock_diffusion) c.diffusion.mock = true;
  if (o.mock_embed) c.embed.mock = c.similarity.mock = true;
  if (o.mock_pose) c.pose.mock = true;

  validate(c, errors);
  if (!errors.empty()) {
    std::string message = "invalid configuration:";
    for (const auto& e : errors) message += "\n  - " + e;
    throw ConfigError(message);
  }
  return c;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const ConfigOverrides& overrides) {
  if (!file) return parse_config_text("", overrides);
  std::ifstream in(*file);
  if (!in) throw ConfigError("cannot open config " + file->string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), overrides);
}

Vocabulary resolve_vocabulary(const RunConfig& config) {
  if (config.vocabulary == "voc") return Vocabulary::voc();
  if (config.vocabulary == "coco") return Vocabulary::coco();
  std::ifstream in(config.vocabulary);
  if (!in) throw ConfigError("unknown vocabulary preset or file: " + config.vocabulary);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("labels") ||
      !j["labels"].is_array()) {
    throw ConfigError("vocabulary file needs a 'labels' array: " + config.vocabulary);
  }
  try {
    return Vocabulary(j.value("dataset_name", std::string("custom")),
                      j["labels"].get<std::vector<std::string>>());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad vocabulary file: ") + e.what());
  }
}

AugmentationPolicy make_policy(const RunConfig& c) {
  AugmentationPolicy p;
  p.epsilon = c.epsilon;
  p.max_attempts = c.max_attempts;
  p.quota = c.quota;
  p.base_seed = c.seed;
  p.fresh_prompt_per_attempt = c.fresh_prompt_per_attempt;
  p.max_prompt_iters = c.max_prompt_iters;
  p.templates = c.templates;
  p.canny = c.canny;
  p.steps = c.steps;
  p.guidance = c.guidance;
  p.jobs = c.jobs;
  return p;
}

Endpoint make_endpoint(const RunConfig& config, const BackendConfig& backend) {
  Endpoint e;
  e.url = backend.url;
  e.model = backend.model;
  e.api_key_env = backend.api_key_env;
  e.max_in_flight = std::min(backend.max_in_flight, config.jobs);
  e.retry.max_attempts = config.retry_attempts;
  e.retry.initial_delay = std::chrono::milliseconds(config.retry_initial_delay_ms);
  return e;
}

}  // namespace augagent
