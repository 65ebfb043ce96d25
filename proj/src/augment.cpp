#include "augagent/augment.hpp"

#include <chrono>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "augagent/codec.hpp"
#include "augagent/errors.hpp"
#include "augagent/parallel.hpp"

namespace augagent {

namespace fs = std::filesystem;

void validate_policy(const AugmentationPolicy& policy) {
  if (!(policy.epsilon > 0.0 && policy.epsilon <= 1.0)) {
    throw ConfigError("epsilon must lie in (0,1]");
  }
  if (policy.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (policy.quota < 1) throw ConfigError("quota must be >= 1");
  if (policy.max_prompt_iters < 1) throw ConfigError("max_prompt_iters must be >= 1");
  if (policy.steps < 1 || !(policy.guidance > 0.0)) {
    throw ConfigError("generation steps and guidance must be positive");
  }
}

std::uint64_t attempt_seed(std::uint64_t base_seed, const std::string& slot_id, int attempt) {
  return base_seed ^ hash_text_and_u64(slot_id, static_cast<std::uint64_t>(attempt));
}

std::string child_record_id(const std::string& parent_id, int slot) {
  return parent_id + "-aug" + std::to_string(slot);
}

AugmentResult augment_one(const ImageRecord& record, const RgbImage& source,
                          const Vocabulary& vocab, const AugmentationPolicy& policy,
                          Backends& backends, const std::string& slot_id,
                          const fs::path& image_dir) {
  if (record.provenance != Provenance::original) {
    throw DataError("only original records are augmented: " + record.record_id);
  }
  validate_policy(policy);

  AugmentResult result;
  result.log.record_id = slot_id;
  result.log.parent_id = record.record_id;
  result.log.detector = select_detector(record.labels, vocab);
  const DetectorMap map = result.log.detector == DetectorKind::pose
                              ? pose_map(backends.pose, source)
                              : canny_edge(source, policy.canny);

  const std::vector<int> labels(record.labels.begin(), record.labels.end());
  std::optional<RefinedPrompt> prompt;
  for (int t = 0; t < policy.max_attempts; ++t) {
    const std::uint64_t seed = attempt_seed(policy.base_seed, slot_id, t);
    if (!prompt || policy.fresh_prompt_per_attempt) {
      const int category = labels[static_cast<std::size_t>(t) % labels.size()];
      prompt = self_refine(backends.llm, policy.templates, vocab.labels().at(category),
                           {policy.epsilon, policy.max_prompt_iters, splitmix64(seed)});
    }
    GenerationRequest request{source, map, prompt->text, seed, policy.steps, policy.guidance};
    RgbImage candidate = generate(backends.generator, request);
    const QualityScore score = backends.scorer.score(candidate, record.labels);

    AttemptEntry entry{seed, prompt->text, prompt->best_effort, score.target_score,
                       score.target_score > policy.epsilon};
    result.log.attempts.push_back(entry);
    if (!entry.accepted) continue;

    result.log.outcome = SlotOutcome::accepted;
    const fs::path path = image_dir / (slot_id + ".png");
    write_png(path, candidate);
    ImageRecord child;
    child.record_id = slot_id;
    child.image_path = fs::absolute(path).lexically_normal();
    child.labels = record.labels;
    child.provenance = Provenance::augmented;
    child.parent_id = record.record_id;
    child.prompt = prompt->text;
    child.target_score = score.target_score;
    child.attempts = t + 1;
    child.seed = seed;
    result.record = std::move(child);
    return result;
  }
  result.log.outcome = SlotOutcome::exhausted;
  return result;
}

PipelineResult run_pipeline(const DatasetManifest& manifest, const AugmentationPolicy& policy,
                            Backends& backends, const fs::path& image_dir) {
  const auto started = std::chrono::steady_clock::now();
  validate_policy(policy);
  validate_manifest(manifest);

  std::unordered_set<std::string> ids;
  std::unordered_map<std::string, int> children;
  for (const auto& record : manifest.records) {
    ids.insert(record.record_id);
    if (record.parent_id) ++children[*record.parent_id];
  }

  std::vector<const ImageRecord*> originals;
  for (const auto& record : manifest.records) {
    if (record.provenance == Provenance::original) originals.push_back(&record);
  }

  struct Work {
    std::vector<AugmentResult> slots;
    std::optional<std::string> skipped;
  };
  std::vector<Work> work(originals.size());

  parallel_for(originals.size(), policy.jobs, [&](std::size_t i) {
    const ImageRecord& record = *originals[i];
    const auto have = children.find(record.record_id);
    int needed = policy.quota - (have == children.end() ? 0 : have->second);
    if (needed <= 0) return;
    RgbImage source;
    try {
      source = read_png_rgb(record.image_path);
    } catch (const DataError& e) {
      work[i].skipped = e.what();
      return;
    }
    for (int slot = 0; needed > 0; ++slot) {
      const std::string id = child_record_id(record.record_id, slot);
      if (ids.contains(id)) continue;
      work[i].slots.push_back(
          augment_one(record, source, manifest.vocabulary, policy, backends, id, image_dir));
      --needed;
    }
  });

  PipelineResult out{manifest, {}, {}};
  RunReport& report = out.report;
  report.per_class_counts.assign(manifest.vocabulary.size(), 0);
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const std::string& parent = originals[i]->record_id;
    if (work[i].skipped) report.skipped.emplace_back(parent, *work[i].skipped);
    for (auto& slot : work[i].slots) {
      report.generation_calls += slot.log.attempts.size();
      if (slot.record) {
        ++report.attempts_histogram[slot.record->attempts];
        for (int id : slot.record->labels) ++report.per_class_counts[id];
        ++children[parent];
        ++report.new_records;
        out.manifest.records.push_back(std::move(*slot.record));
      } else {
        report.exhausted_record_ids.push_back(parent);
      }
      out.logs.push_back(std::move(slot.log));
    }
  }
  for (const ImageRecord* record : originals) {
    const auto it = children.find(record->record_id);
    ++report.children_histogram[it == children.end() ? 0 : it->second];
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::string report_to_json(const RunReport& report, const Vocabulary& vocab) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& label : vocab.labels()) {
    counts[label.name] = report.per_class_counts.at(static_cast<std::size_t>(label.id));
  }
  nlohmann::ordered_json attempts = nlohmann::ordered_json::object();
  for (const auto& [n, count] : report.attempts_histogram) attempts[std::to_string(n)] = count;
  nlohmann::ordered_json per_parent = nlohmann::ordered_json::object();
  for (const auto& [n, count] : report.children_histogram) per_parent[std::to_string(n)] = count;
  nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
  for (const auto& [id, reason] : report.skipped) {
    skipped.push_back({{"reason", reason}, {"record_id", id}});
  }
  j["attempts_histogram"] = attempts;
  j["children_histogram"] = per_parent;
  j["exhausted_record_ids"] = report.exhausted_record_ids;
  j["generation_calls"] = report.generation_calls;
  j["new_records"] = report.new_records;
  j["per_class_counts"] = counts;
  j["skipped"] = skipped;
  j["wall_time"] = report.wall_time_seconds;
  return j.dump(2) + "\n";
}

std::string logs_to_jsonl(const std::vector<AttemptLog>& logs) {
  std::string out;
  for (const auto& log : logs) {
    nlohmann::ordered_json attempts = nlohmann::ordered_json::array();
    for (const auto& a : log.attempts) {
      attempts.push_back({{"accepted", a.accepted},
                          {"prompt", a.prompt},
                          {"prompt_best_effort", a.prompt_best_effort},
                          {"seed", a.seed},
                          {"target_score", std::stod(format_fixed6(a.target_score))}});
    }
    nlohmann::ordered_json line;
    line["attempts"] = attempts;
    line["detector"] = std::string(to_string(log.detector));
    line["outcome"] = log.outcome == SlotOutcome::accepted ? "accepted" : "exhausted";
    line["parent_id"] = log.parent_id;
    line["record_id"] = log.record_id;
    out += line.dump() + "\n";
  }
  return out;
}

}  // namespace augagent
