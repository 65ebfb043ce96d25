#include "augagent/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "augagent/codec.hpp"
#include "augagent/errors.hpp"

namespace augagent {

namespace fs = std::filesystem;
using nlohmann::json;

std::string normalize_label_name(std::string_view name) {
  auto first = name.find_first_not_of(" \t\r\n");
  auto last = name.find_last_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  std::string out(name.substr(first, last - first + 1));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Vocabulary::Vocabulary(std::string dataset_name,
                       const std::vector<std::string>& names)
    : dataset_name_(std::move(dataset_name)) {
  if (names.empty()) throw DataError("vocabulary needs at least one label");
  for (const auto& raw : names) {
    std::string name = normalize_label_name(raw);
    if (name.empty()) throw DataError("vocabulary label names must be non-empty");
    if (find(name)) throw DataError("duplicate vocabulary label '" + name + "'");
    labels_.push_back({static_cast<int>(labels_.size()), std::move(name)});
  }
}

std::optional<int> Vocabulary::find(std::string_view name) const {
  const std::string key = normalize_label_name(name);
  for (const auto& label : labels_) {
    if (label.name == key) return label.id;
  }
  return std::nullopt;
}

Vocabulary Vocabulary::voc() {
  return Vocabulary(
      "voc",
      {"background", "airplane", "bicycle", "bird", "boat", "bottle", "bus",
       "car", "cat", "chair", "cow", "dining table", "dog", "horse",
       "motorbike", "person", "potted plant", "sheep", "sofa", "train",
       "tv monitor"});
}

Vocabulary Vocabulary::coco() {
  return Vocabulary(
      "coco",
      {"background", "person", "bicycle", "car", "motorcycle", "airplane",
       "bus", "train", "truck", "boat", "traffic light", "fire hydrant",
       "stop sign", "parking meter", "bench", "bird", "cat", "dog", "horse",
       "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack",
       "umbrella", "handbag", "tie", "suitcase", "frisbee", "skis",
       "snowboard", "sports ball", "kite", "baseball bat", "baseball glove",
       "skateboard", "surfboard", "tennis racket", "bottle", "wine glass",
       "cup", "fork", "knife", "spoon", "bowl", "banana", "apple",
       "sandwich", "orange", "broccoli", "carrot", "hot dog", "pizza",
       "donut", "cake", "chair", "couch", "potted plant", "bed",
       "dining table", "toilet", "tv", "laptop", "mouse", "remote",
       "keyboard", "cell phone", "microwave", "oven", "toaster", "sink",
       "refrigerator", "book", "clock", "vase", "scissors", "teddy bear",
       "hair drier", "toothbrush"});
}

std::string_view to_string(Provenance p) {
  return p == Provenance::original ? "original" : "augmented";
}

std::vector<std::string> validate_record(const ImageRecord& record,
                                         const Vocabulary& vocab) {
  std::vector<std::string> violations;
  if (record.record_id.empty()) violations.emplace_back("empty record_id");
  if (record.image_path.empty()) violations.emplace_back("empty image_path");
  if (record.labels.empty()) violations.emplace_back("empty labels");
  for (int id : record.labels) {
    if (!vocab.contains(id)) {
      violations.push_back(fmt::format("unknown label {}", id));
    }
  }
  if (record.target_score &&
      !(*record.target_score >= 0.0 && *record.target_score <= 1.0)) {
    violations.emplace_back("score outside [0,1]");
  }
  if (record.attempts < 0) violations.emplace_back("negative attempts");
  if (record.provenance == Provenance::augmented) {
    if (!record.parent_id || record.parent_id->empty()) {
      violations.emplace_back("missing parent");
    }
    if (!record.prompt || record.prompt->empty()) {
      violations.emplace_back("missing prompt");
    }
    if (!record.target_score) violations.emplace_back("missing target_score");
    if (record.attempts < 1) violations.emplace_back("augmented attempts < 1");
  } else {
    if (record.parent_id) violations.emplace_back("original carries parent_id");
    if (record.prompt) violations.emplace_back("original carries prompt");
    if (record.target_score) {
      violations.emplace_back("original carries target_score");
    }
    if (record.attempts != 0) violations.emplace_back("original carries attempts");
  }
  return violations;
}

void validate_manifest(const DatasetManifest& manifest, ManifestCheck check) {
  if (!(manifest.epsilon > 0.0 && manifest.epsilon <= 1.0)) {
    throw DataError("manifest epsilon outside (0,1]");
  }
  std::unordered_map<std::string, Provenance> seen;
  for (const auto& record : manifest.records) {
    auto violations = validate_record(record, manifest.vocabulary);
    if (!violations.empty()) throw InvariantError(record.record_id, violations.front());
    if (!seen.emplace(record.record_id, record.provenance).second) {
      throw InvariantError(record.record_id, "duplicate record_id");
    }
  }
  if (!check.require_local_parents) return;
  for (const auto& record : manifest.records) {
    if (!record.parent_id) continue;
    auto it = seen.find(*record.parent_id);
    if (it == seen.end()) {
      throw InvariantError(record.record_id,
                           "parent '" + *record.parent_id + "' not in manifest");
    }
    if (it->second != Provenance::original) {
      throw InvariantError(record.record_id,
                           "parent '" + *record.parent_id + "' is not original");
    }
  }
}

namespace {

std::string quoted(const std::string& s) { return json(s).dump(); }

template <typename T, typename F>
std::string optional_field(const std::optional<T>& value, F render) {
  return value ? render(*value) : std::string("null");
}

std::string relative_path(const fs::path& path, const fs::path& base_dir) {
  const fs::path abs = fs::absolute(path).lexically_normal();
  const fs::path base = fs::absolute(base_dir).lexically_normal();
  fs::path rel = abs.lexically_relative(base);
  return (rel.empty() ? abs : rel).generic_string();
}

// Keys are emitted in sorted order.
std::string header_line(const DatasetManifest& m) {
  std::string labels;
  for (const auto& label : m.vocabulary.labels()) {
    if (!labels.empty()) labels += ",";
    labels += quoted(label.name);
  }
  return fmt::format(
      R"({{"created_at":{},"dataset_name":{},"epsilon":{},"labels":[{}],"version":{}}})",
      quoted(m.created_at), quoted(m.vocabulary.dataset_name()),
      format_fixed6(m.epsilon), labels, kManifestVersion);
}

std::string record_line(const ImageRecord& r, const fs::path& base_dir) {
  std::string labels;
  for (int id : r.labels) {
    if (!labels.empty()) labels += ",";
    labels += std::to_string(id);
  }
  return fmt::format(
      R"({{"attempts":{},"image_path":{},"labels":[{}],"parent_id":{},"prompt":{},"provenance":{},"record_id":{},"seed":{},"target_score":{}}})",
      r.attempts, quoted(relative_path(r.image_path, base_dir)), labels,
      optional_field(r.parent_id, quoted), optional_field(r.prompt, quoted),
      quoted(std::string(to_string(r.provenance))), quoted(r.record_id),
      optional_field(r.seed, [](std::uint64_t s) { return std::to_string(s); }),
      optional_field(r.target_score, format_fixed6));
}

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing key '") + key + "'");
  return *it;
}

void require_exact_keys(const json& obj, std::initializer_list<const char*> keys,
                        std::size_t line) {
  for (const char* key : keys) require(obj, key, line);
  if (obj.size() != keys.size()) throw ParseError(line, "unexpected key");
}

std::string as_string(const json& v, const char* key, std::size_t line) {
  if (!v.is_string()) throw ParseError(line, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> as_opt_string(const json& v, const char* key,
                                         std::size_t line) {
  if (v.is_null()) return std::nullopt;
  return as_string(v, key, line);
}

double as_number(const json& v, const char* key, std::size_t line) {
  if (!v.is_number()) throw ParseError(line, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

ImageRecord parse_record(const json& obj, std::size_t line,
                         const fs::path& base_dir) {
  if (!obj.is_object()) throw ParseError(line, "record must be an object");
  require_exact_keys(obj,
                     {"attempts", "image_path", "labels", "parent_id", "prompt",
                      "provenance", "record_id", "seed", "target_score"},
                     line);
  ImageRecord r;
  r.record_id = as_string(obj["record_id"], "record_id", line);
  fs::path path = as_string(obj["image_path"], "image_path", line);
  r.image_path = path.is_absolute() ? path : (base_dir / path).lexically_normal();
  const json& labels = obj["labels"];
  if (!labels.is_array()) throw ParseError(line, "'labels' must be an array");
  for (const auto& id : labels) {
    if (!id.is_number_integer()) throw ParseError(line, "label ids must be integers");
    r.labels.insert(id.get<int>());
  }
  const std::string provenance = as_string(obj["provenance"], "provenance", line);
  if (provenance == "original") {
    r.provenance = Provenance::original;
  } else if (provenance == "augmented") {
    r.provenance = Provenance::augmented;
  } else {
    throw ParseError(line, "unknown provenance '" + provenance + "'");
  }
  r.parent_id = as_opt_string(obj["parent_id"], "parent_id", line);
  r.prompt = as_opt_string(obj["prompt"], "prompt", line);
  if (!obj["target_score"].is_null()) {
    r.target_score = as_number(obj["target_score"], "target_score", line);
  }
  const json& attempts = obj["attempts"];
  if (!attempts.is_number_integer()) throw ParseError(line, "'attempts' must be an integer");
  r.attempts = attempts.get<int>();
  const json& seed = obj["seed"];
  if (!seed.is_null()) {
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
      throw ParseError(line, "'seed' must be a non-negative integer");
    }
    r.seed = seed.get<std::uint64_t>();
  }
  return r;
}

}  // namespace

std::string serialize_manifest(const DatasetManifest& manifest,
                               const fs::path& base_dir) {
  std::string out = header_line(manifest);
  out += '\n';
  for (const auto& record : manifest.records) {
    out += record_line(record, base_dir);
    out += '\n';
  }
  return out;
}

DatasetManifest parse_manifest(std::string_view text, const fs::path& base_dir,
                               ManifestCheck check) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  DatasetManifest manifest;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) throw ParseError(line_no, "malformed JSON");
    if (!have_header) {
      if (!obj.is_object()) throw ParseError(line_no, "header must be an object");
      require_exact_keys(obj, {"created_at", "dataset_name", "epsilon", "labels", "version"},
                         line_no);
      if (obj["version"] != kManifestVersion) {
        throw ParseError(line_no, "unsupported manifest version");
      }
      std::vector<std::string> names;
      if (!obj["labels"].is_array()) throw ParseError(line_no, "'labels' must be an array");
      for (const auto& name : obj["labels"]) names.push_back(as_string(name, "labels", line_no));
      try {
        manifest.vocabulary =
            Vocabulary(as_string(obj["dataset_name"], "dataset_name", line_no), names);
      } catch (const DataError& e) {
        throw ParseError(line_no, e.what());
      }
      manifest.epsilon = as_number(obj["epsilon"], "epsilon", line_no);
      manifest.created_at = as_string(obj["created_at"], "created_at", line_no);
      have_header = true;
      continue;
    }
    manifest.records.push_back(parse_record(obj, line_no, base_dir));
    auto violations = validate_record(manifest.records.back(), manifest.vocabulary);
    if (!violations.empty()) {
      throw InvariantError(manifest.records.back().record_id, violations.front());
    }
  }
  if (!have_header) throw ParseError(line_no + 1, "missing header line");
  validate_manifest(manifest, check);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(base);
  const std::string text = serialize_manifest(manifest, base);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out.flush()) throw DataError("cannot write manifest " + tmp.string());
  }
  fs::rename(tmp, path);
}

DatasetManifest load_manifest(const fs::path& path, ManifestCheck check) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_manifest(buffer.str(), fs::absolute(base), check);
}

std::vector<std::size_t> per_class_counts(const DatasetManifest& manifest,
                                          std::optional<Provenance> only) {
  std::vector<std::size_t> counts(manifest.vocabulary.size(), 0);
  for (const auto& record : manifest.records) {
    if (only && record.provenance != *only) continue;
    for (int id : record.labels) ++counts.at(id);
  }
  return counts;
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

}  // namespace augagent
