#include "augagent/cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "augagent/assemble.hpp"
#include "augagent/augment.hpp"
#include "augagent/codec.hpp"
#include "augagent/config.hpp"
#include "augagent/errors.hpp"
#include "augagent/http_backends.hpp"
#include "augagent/scorer.hpp"

namespace augagent {

namespace fs = std::filesystem;

namespace {

struct BackendSet {
  std::unique_ptr<LlmBackend> llm;
  std::unique_ptr<GenerationBackend> generator;
  std::unique_ptr<PoseBackend> pose;
  std::unique_ptr<EmbeddingBackend> embed;
  std::unique_ptr<EmbeddingBackend> similarity;
};

BackendSet make_backends(const RunConfig& c) {
  BackendSet b;
  if (c.llm.mock) {
    b.llm = std::make_unique<MockLlm>();
  } else {
    b.llm = std::make_unique<HttpLlm>(make_endpoint(c, c.llm));
  }
  if (c.diffusion.mock) {
    b.generator = std::make_unique<MockGeneration>();
  } else {
    b.generator = std::make_unique<HttpGeneration>(make_endpoint(c, c.diffusion));
  }
  if (c.pose.mock) {
    b.pose = std::make_unique<MockPose>();
  } else {
    b.pose = std::make_unique<HttpPose>(make_endpoint(c, c.pose));
  }
  if (c.embed.mock) {
    b.embed = std::make_unique<MockEmbedder>();
  } else {
    b.embed = std::make_unique<HttpEmbedder>(make_endpoint(c, c.embed));
  }
  if (c.similarity.mock) {
    b.similarity = std::make_unique<MockEmbedder>();
  } else {
    b.similarity = std::make_unique<HttpEmbedder>(make_endpoint(c, c.similarity));
  }
  return b;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out.flush()) throw DataError("cannot write " + path.string());
}

// Refuses to let an output overwrite one of the inputs.
void check_not_input(const fs::path& output, std::initializer_list<fs::path> inputs) {
  const fs::path target = fs::weakly_canonical(output);
  for (const auto& input : inputs) {
    if (fs::weakly_canonical(input) == target) {
      throw ConfigError("output " + output.string() + " would overwrite an input");
    }
  }
}

std::string refined_prompt_json(const RefinedPrompt& p) {
  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (const auto& h : p.history) {
    history.push_back({{"candidate", h.candidate},
                       {"score", h.score ? nlohmann::ordered_json(std::stod(format_fixed6(*h.score)))
                                         : nlohmann::ordered_json(nullptr)}});
  }
  nlohmann::ordered_json j;
  j["best_effort"] = p.best_effort;
  j["category"] = p.category.name;
  j["history"] = history;
  j["iterations"] = p.iterations;
  j["score"] = std::stod(format_fixed6(p.score));
  j["text"] = p.text;
  return j.dump(2) + "\n";
}

struct Args {
  std::optional<std::string> config;
  ConfigOverrides overrides;
  std::string manifest;
  std::string head;
  std::string origin;
  std::string aug;
  std::string category;
  std::string image;
  std::string kind = "canny";
};

int cmd_train_scorer(const RunConfig& c, const Args& a, std::ostream& out) {
  const DatasetManifest manifest = load_manifest(a.manifest);
  BackendSet backends = make_backends(c);
  const TrainOptions options{c.epochs, c.batch_size, c.learning_rate, c.seed};
  const TrainResult result = train_head(manifest, *backends.embed, options, c.jobs);
  const fs::path dir = c.out;
  save_head(result.head, dir / "head.bin");
  nlohmann::ordered_json trace;
  trace["batch_size"] = c.batch_size;
  trace["epoch_loss"] = result.epoch_loss;
  trace["epochs"] = c.epochs;
  trace["learning_rate"] = c.learning_rate;
  trace["seed"] = c.seed;
  write_text(dir / "train_trace.json", trace.dump(2) + "\n");
  out << "trained head " << result.head.embedding_dim() << "x" << result.head.num_classes()
      << " on " << manifest.records.size() << " records";
  if (!result.epoch_loss.empty()) out << ", final loss " << result.epoch_loss.back();
  out << "\n";
  return kExitOk;
}

int cmd_refine_prompt(const RunConfig& c, const Args& a, std::ostream& out) {
  const Vocabulary vocab =
      a.manifest.empty() ? resolve_vocabulary(c) : load_manifest(a.manifest).vocabulary;
  const auto id = vocab.find(a.category);
  if (!id) throw DataError("category '" + a.category + "' is not in the vocabulary");
  BackendSet backends = make_backends(c);
  const RefinedPrompt prompt = self_refine(*backends.llm, c.templates, vocab.labels().at(*id),
                                           {c.epsilon, c.max_prompt_iters, c.seed});
  const std::string text = refined_prompt_json(prompt);
  write_text(fs::path(c.out) / "prompt.json", text);
  out << text;
  return kExitOk;
}

int cmd_detect(const RunConfig& c, const Args& a, std::ostream& out) {
  const RgbImage image = read_png_rgb(a.image);
  const DetectorKind kind = parse_detector_kind(a.kind);
  DetectorMap map;
  if (kind == DetectorKind::canny) {
    map = canny_edge(image, c.canny);
  } else {
    BackendSet backends = make_backends(c);
    map = pose_map(*backends.pose, image);
  }
  const fs::path path =
      fs::path(c.out) / (fs::path(a.image).stem().string() + "_" + std::string(to_string(kind)) + ".png");
  write_png(path, map.data);
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_augment(const RunConfig& c, const Args& a, std::ostream& out) {
  const fs::path dir = c.out;
  check_not_input(dir / "manifest.jsonl", {a.manifest});
  check_not_input(dir / "augmented.jsonl", {a.manifest});
  const DatasetManifest manifest = load_manifest(a.manifest);
  if (format_fixed6(manifest.epsilon) != format_fixed6(c.epsilon)) {
    throw ConfigError("configured epsilon " + format_fixed6(c.epsilon) +
                      " differs from the manifest's " + format_fixed6(manifest.epsilon));
  }
  const LinearHead head = load_head(a.head);
  if (head.num_classes() != static_cast<Eigen::Index>(manifest.vocabulary.size())) {
    throw DataError("head has " + std::to_string(head.num_classes()) +
                    " classes but the vocabulary has " +
                    std::to_string(manifest.vocabulary.size()));
  }
  BackendSet b = make_backends(c);
  ClassifierScorer scorer(head, *b.embed);
  Backends backends{*b.llm, *b.generator, *b.pose, scorer};
  const PipelineResult result = run_pipeline(manifest, make_policy(c), backends, dir / "images");

  DatasetManifest aug_only = result.manifest;
  std::erase_if(aug_only.records,
                [](const ImageRecord& r) { return r.provenance != Provenance::augmented; });
  save_manifest(result.manifest, dir / "manifest.jsonl");
  save_manifest(aug_only, dir / "augmented.jsonl");
  write_text(dir / "run_report.json", report_to_json(result.report, manifest.vocabulary));
  write_text(dir / "attempts.jsonl", logs_to_jsonl(result.logs));
  out << "augment: " << result.report.new_records << " new records, "
      << result.report.exhausted_record_ids.size() << " exhausted slots, "
      << result.report.skipped.size() << " skipped images, "
      << result.report.generation_calls << " generation calls\n";
  return kExitOk;
}

int cmd_assemble(const RunConfig& c, const Args& a, std::ostream& out) {
  const fs::path target = fs::path(c.out) / "manifest.jsonl";
  check_not_input(target, {a.origin, a.aug});
  const DatasetManifest origin = load_manifest(a.origin);
  const DatasetManifest aug = load_manifest(a.aug, {.require_local_parents = false});
  const DatasetManifest final_set = assemble(origin, aug);
  save_manifest(final_set, target);
  out << "assembled " << origin.records.size() << " + " << aug.records.size() << " = "
      << final_set.records.size() << " records\n";
  return kExitOk;
}

int cmd_report(const RunConfig& c, const Args& a, std::ostream& out) {
  const DatasetManifest manifest = load_manifest(a.manifest);
  BackendSet b = make_backends(c);
  MeanPooledEmbedder embedder(*b.similarity);
  SimilarityOptions options;
  options.class_filter = c.similarity_class;
  options.sample_size = c.similarity_sample_size;
  options.seed = c.seed;
  options.method = c.similarity_method;
  options.jobs = c.jobs;
  const SimilarityReport report = similarity_report(manifest, embedder, options);
  const SimilarityRow row = summary_row(report);
  const std::string table = format_similarity_table(std::span(&row, 1));
  const fs::path dir = c.out;
  write_text(dir / "similarity_report.json", similarity_report_json(report));
  write_text(dir / "similarity_table.txt", table);
  out << table;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic training images for segmentation datasets: prompt refinement, conditioned generation, "
               "online quality gating and dataset assembly."};
  app.name("augagent");
  app.require_subcommand(1);

  Args a;
  ConfigOverrides& o = a.overrides;
  app.add_option("--config", a.config, "JSON config file");
  app.add_option("--epsilon", o.epsilon, "Quality threshold for prompts and images");
  app.add_option("--max-attempts", o.max_attempts, "Generation attempts per slot");
  app.add_option("--quota", o.quota, "Accepted augmentations per original");
  app.add_option("--jobs", o.jobs, "Worker and in-flight request cap");
  app.add_option("--seed", o.seed, "Seed for all randomness");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--vocabulary", o.vocabulary, "Vocabulary preset (voc, coco) or JSON file");
  app.add_flag("--mock-llm", o.mock_llm, "Use the offline LLM");
  app.add_flag("--mock-diffusion", o.mock_diffusion, "Use the offline generator");
  app.add_flag("--mock-embed", o.mock_embed, "Use the offline embedders");
  app.add_flag("--mock-pose", o.mock_pose, "Use the offline pose detector");

  auto* train = app.add_subcommand("train-scorer", "Train the patch classifier head");
  train->add_option("--manifest", a.manifest, "Manifest of original images")->required();
  train->add_option("--epochs", o.epochs, "Training epochs");
  train->add_option("--learning-rate", o.learning_rate, "Gradient descent step size");

  auto* refine = app.add_subcommand("refine-prompt", "Produce one refined background prompt");
  refine->add_option("--category", a.category, "Category name")->required();
  refine->add_option("--manifest", a.manifest, "Take the vocabulary from this manifest");

  auto* detect = app.add_subcommand("detect", "Write a detector map for one image");
  detect->add_option("--image", a.image, "PNG image")->required();
  detect->add_option("--kind", a.kind, "canny or pose")->check(CLI::IsMember({"canny", "pose"}));
  detect->add_option("--sigma", o.sigma, "Gaussian sigma");
  detect->add_option("--low", o.low, "Low hysteresis threshold (fraction of max gradient)");
  detect->add_option("--high", o.high, "High hysteresis threshold (fraction of max gradient)");

  auto* augment = app.add_subcommand("augment", "Generate quality-gated augmentations");
  augment->add_option("--manifest", a.manifest, "Input manifest")->required();
  augment->add_option("--head", a.head, "Trained head file")->required();

  auto* assemble_cmd = app.add_subcommand("assemble", "Union of original and augmented sets");
  assemble_cmd->add_option("--origin", a.origin, "Original manifest")->required();
  assemble_cmd->add_option("--aug", a.aug, "Augmented-only manifest")->required();

  auto* report = app.add_subcommand("report", "Parent/child embedding similarity report");
  report->add_option("--manifest", a.manifest, "Manifest with augmented records")->required();
  report->add_option("--class", o.similarity_class, "Restrict to one class");
  report->add_option("--sample-size", o.sample_size, "Pairs to sample");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitBackendOrConfigError;
  }

  try {
    const RunConfig config = parse_config(a.config, a.overrides);
    if (train->parsed()) return cmd_train_scorer(config, a, out);
    if (refine->parsed()) return cmd_refine_prompt(config, a, out);
    if (detect->parsed()) return cmd_detect(config, a, out);
    if (augment->parsed()) return cmd_augment(config, a, out);
    if (assemble_cmd->parsed()) return cmd_assemble(config, a, out);
    if (report->parsed()) return cmd_report(config, a, out);
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitBackendOrConfigError;
  }
  err << app.help();
  return kExitBackendOrConfigError;
}

}  // namespace augagent
