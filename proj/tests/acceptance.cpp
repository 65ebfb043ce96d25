// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "augagent/assemble.hpp"
#include "augagent/augment.hpp"
#include "augagent/cli.hpp"
#include "augagent/detector.hpp"
#include "augagent/manifest.hpp"
#include "augagent/prompt_agent.hpp"
#include "augagent/scorer.hpp"
#include "support/fixtures.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

using namespace augagent;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// --- softmax and pooling ----------------------------------------------------

Outcome softmax_pooling() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240101);
  double worst_row = 0.0;
  int pool_mismatch = 0, out_of_range = 0;
  for (int i = 0; i < 1000; ++i) {
    const int s = 1 + static_cast<int>(rng() % 1000);
    const int e = 1 + static_cast<int>(rng() % 16);
    const int c = 1 + static_cast<int>(rng() % 21);
    const auto inst = instances::random_instance(rng, s, e, c, 4.0);
    const auto z = patch_scores(inst.features, inst.weights);
    worst_row = std::max(worst_row, (z.rowwise().sum().array() - 1.0).abs().maxCoeff());
    if (c > 1) out_of_range += static_cast<int>(((z.array() <= 0) || (z.array() >= 1)).count());
    const auto got = image_scores(z);
    const auto [best, arg] = oracle::column_max(z);
    for (int k = 0; k < c; ++k)
      if (got.per_class[k] != best[k] || got.argmax_patch[k] != arg[k]) ++pool_mismatch;
  }
  const double t = seconds_since(start);
  return {worst_row <= 1e-9 && pool_mismatch == 0 && out_of_range == 0 && t < 10.0,
          fmt::format("1000 instances, max |row sum - 1| = {:.2e}, pooling mismatches = {}, entries outside (0,1) = {}, {:.2f} s",
                      worst_row, pool_mismatch, out_of_range, t)};
}

// --- multi-label cross entropy ------------------------------------------------

Outcome cross_entropy() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int c = 1 + static_cast<int>(rng() % 21);
    std::vector<double> y(c), p(c);
    Eigen::VectorXd ye(c), pe(c);
    for (int k = 0; k < c; ++k) {
      ye[k] = y[k] = static_cast<double>(rng() & 1);
      pe[k] = p[k] = (i % 10 == 0 && k == 0) ? static_cast<double>(rng() & 1) : u(rng);
    }
    worst = std::max(worst, std::abs(mce_loss(ye, pe) - static_cast<double>(oracle::mce_terms(y, p))));
  }
  const double half = mce_loss(Eigen::Vector2d(1, 0), Eigen::Vector2d(0.5, 0.5));
  const double ln2_err = std::abs(half - 0.693147180559945309);
  return {worst <= 1e-12 && ln2_err <= 1e-9,
          fmt::format("1000 instances, max |loss - oracle| = {:.2e}; ln 2 case = {:.12f} (err {:.1e})", worst, half,
                      ln2_err)};
}

// --- gradient -----------------------------------------------------------------

Outcome gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(99);
  double worst = 0.0;
  int checked = 0, skipped = 0;
  while (checked < 100) {
    const int s = 2 + static_cast<int>(rng() % 5);
    const int e = 2 + static_cast<int>(rng() % 4);
    const int c = 2 + static_cast<int>(rng() % 3);
    const auto inst = instances::random_instance(rng, s, e, c, 2.0);
    // Ties, or near-ties the finite-difference step could cross, are excluded.
    if (instances::min_argmax_gap(patch_scores(inst.features, inst.weights)) < 1e-3) {
      ++skipped;
      continue;
    }
    const std::vector<double> y(inst.targets.data(), inst.targets.data() + c);
    const auto analytic = mce_gradient(inst.targets, inst.features, inst.weights);
    const auto numeric = oracle::fd_gradient(y, inst.features, inst.weights, 1e-5);
    worst = std::max(worst, instances::max_relative_error(analytic, numeric));
    ++checked;
  }
  const double t = seconds_since(start);
  return {worst < 1e-4 && t < 30.0,
          fmt::format("100 instances ({} near-tie draws skipped), max relative error = {:.2e}, {:.2f} s", skipped,
                      worst, t)};
}

// --- training -----------------------------------------------------------------

Outcome training_sanity() {
  const auto toy = instances::separable_toy_set();
  TrainOptions opt;
  opt.epochs = 200;
  opt.seed = 1;
  const auto r = train_head(toy, 2, opt);
  int first_perfect = -1;
  for (int epochs = 1; epochs <= 200 && first_perfect < 0; ++epochs) {
    TrainOptions o = opt;
    o.epochs = epochs;
    if (instances::thresholded_accuracy(toy, train_head(toy, 2, o).head.weights) == 1.0) first_perfect = epochs;
  }
  const double acc = instances::thresholded_accuracy(toy, r.head.weights);
  return {acc == 1.0 && r.epoch_loss[199] < r.epoch_loss[0],
          fmt::format("accuracy after 200 epochs = {:.0f}% (first 100% at epoch {}), loss epoch 1 = {:.4f}, epoch 200 = {:.4f}",
                      100 * acc, first_perfect, r.epoch_loss[0], r.epoch_loss[199])};
}

// --- edge maps ----------------------------------------------------------------

Outcome canny_oracle() {
  std::vector<std::pair<std::string, RgbImage>> fixtures;
  fixtures.emplace_back("constant", fixture::solid(16, 16, 128, 128, 128));
  RgbImage step(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x) step.set(x, y, 255, 255, 255);
  fixtures.emplace_back("step", step);
  RgbImage disk(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if ((x - 15.5) * (x - 15.5) + (y - 15.5) * (y - 15.5) <= 121.0) disk.set(x, y, 255, 255, 255);
  fixtures.emplace_back("disk", disk);

  std::string detail;
  bool ok = true;
  for (const auto& [name, img] : fixtures) {
    const auto got = canny_edge(img).data;
    const auto ref = oracle::canny(img, 1.4, 0.1, 0.2);
    const auto diff = (got != ref).count();
    ok = ok && diff == 0;
    detail += fmt::format("{} {} px differ ({} edge px); ", name, diff, (got > 0).count());
  }
  std::mt19937_64 rng(5);
  int invariant = 0;
  for (int i = 0; i < 50; ++i) {
    const int w = 3 + static_cast<int>(rng() % 30), h = 3 + static_cast<int>(rng() % 30);
    const int c = 1 + static_cast<int>(rng() % 55);
    auto img = fixture::random_image(rng, w, h, 200);
    auto shifted = img;
    for (auto& p : shifted.pixels()) p = static_cast<std::uint8_t>(p + c);
    invariant += (canny_edge(img).data == canny_edge(shifted).data).all();
  }
  ok = ok && invariant == 50;
  return {ok, detail + fmt::format("offset invariance {}/50", invariant)};
}

// --- prompt refinement control ----------------------------------------------

Outcome prompt_control() {
  struct Case {
    std::vector<double> scores;
    int max_iters;
    int iterations;
    bool best_effort;
  };
  const std::vector<Case> cases = {{{0.95}, 8, 1, false}, {{0.5, 0.95}, 8, 2, false}, {{0.3, 0.4, 0.2}, 3, 3, true}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    auto llm = fixture::ScriptedLlm::scores(c.scores);
    const auto r = self_refine(llm, {}, {1, "airplane"}, {0.9, c.max_iters, 0});
    const bool good = r.iterations == c.iterations && r.best_effort == c.best_effort &&
                      (r.best_effort || r.score >= 0.9) && (!c.best_effort || r.text == "candidate 2");
    ok = ok && good;
    detail += fmt::format("[{}] -> iterations {}{} score {:.2f}; ", fmt::join(c.scores, ", "), r.iterations,
                          r.best_effort ? " best_effort" : "", r.score);
  }
  return {ok, detail};
}

// --- augmentation loop control ----------------------------------------------

Outcome augment_control() {
  fixture::TempDir dir("accept-alg2");
  const auto vocab = fixture::small_vocab();
  const int person = *vocab.find("person");
  const auto m = fixture::originals(dir.path() / "src", vocab, {{1}, {person, 4}});
  AugmentationPolicy p;
  p.base_seed = 3;

  MockLlm llm;
  fixture::CountingPose pose;
  fixture::CountingGeneration gen_a;
  fixture::ScriptedScorer scorer_a({0.30, 0.95});
  Backends a{llm, gen_a, pose, scorer_a};
  const auto src = read_png_rgb(m.records[0].image_path);
  const auto ra = augment_one(m.records[0], src, vocab, p, a, "img0-aug0", dir.path());
  const bool first = ra.record && ra.record->attempts == 2 && gen_a.calls == 2;

  fixture::CountingGeneration gen_b;
  fixture::ScriptedScorer scorer_b({0.5});
  Backends b{llm, gen_b, pose, scorer_b};
  p.max_attempts = 4;
  const auto rb = augment_one(m.records[0], src, vocab, p, b, "img0-aug1", dir.path());
  const bool second = !rb.record && rb.log.outcome == SlotOutcome::exhausted && gen_b.calls == 4;

  fixture::CountingGeneration gen_c;
  fixture::ScriptedScorer scorer_c({0.99});
  Backends c{llm, gen_c, pose, scorer_c};
  const auto rc = augment_one(m.records[1], read_png_rgb(m.records[1].image_path), vocab, p, c, "img1-aug0",
                              dir.path());
  const bool third = rc.log.detector == DetectorKind::pose && gen_c.kinds.size() == 1 &&
                     gen_c.kinds[0] == DetectorKind::pose && pose.calls == 1;
  return {first && second && third,
          fmt::format("[0.30, 0.95] -> accepted at attempt {} with {} generate calls; always 0.5, cap 4 -> {} after {} "
                      "calls; {{person, bicycle}} -> {} map",
                      ra.record ? ra.record->attempts : 0, gen_a.calls,
                      rb.log.outcome == SlotOutcome::exhausted ? "exhausted" : "accepted", gen_b.calls,
                      to_string(rc.log.detector))};
}

// --- end to end ---------------------------------------------------------------

// Five 64x64 originals over {airplane, cat, dog, person}. Every class region
// is a flat colour whose luma sits at the centre of its own histogram bin.
void write_e2e_fixture(const fs::path& dir) {
  fs::create_directories(dir / "images");
  std::ofstream(dir / "vocabulary.json") << R"({"dataset_name": "tiny", "labels": ["airplane", "cat", "dog", "person"]})";
  const Vocabulary vocab("tiny", {"airplane", "cat", "dog", "person"});
  struct Rgb {
    std::uint8_t r, g, b;
  };
  const Rgb colour[4] = {{68, 38, 58}, {132, 102, 122}, {196, 166, 186}, {250, 235, 235}};
  auto fill = [&](RgbImage& img, int x0, int y0, int x1, int y1, int cls) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) img.set(x, y, colour[cls].r, colour[cls].g, colour[cls].b);
  };
  DatasetManifest m;
  m.vocabulary = vocab;
  m.epsilon = 0.9;
  m.created_at = "2024-01-01T00:00:00Z";
  const std::vector<std::set<int>> labels = {{0}, {1}, {2}, {2, 3}, {0, 1}};
  for (int i = 0; i < 5; ++i) {
    RgbImage img(64, 64);
    switch (i) {
      case 3: fill(img, 0, 0, 32, 64, 3); fill(img, 32, 0, 64, 64, 2); break;
      case 4: fill(img, 0, 0, 64, 32, 0); fill(img, 0, 32, 64, 64, 1); break;
      default: fill(img, 0, 0, 64, 64, i); break;
    }
    ImageRecord r;
    r.record_id = "img" + std::to_string(i);
    r.image_path = dir / "images" / (r.record_id + ".png");
    r.labels = labels[i];
    write_png(r.image_path, img);
    m.records.push_back(r);
  }
  save_manifest(m, dir / "origin.jsonl");
  std::ofstream(dir / "config.json") << R"({
  "vocabulary": ")" << (dir / "vocabulary.json").string() << R"(",
  "epsilon": 0.9,
  "epochs": 300,
  "learning_rate": 0.5,
  "batch_size": 16,
  "seed": 11,
  "quota": 1,
  "max_attempts": 10,
  "jobs": 3,
  "similarity": {"class": "airplane", "sample_size": 100}
})";
}

struct RunFiles {
  std::map<std::string, std::string> files;  // relative path -> bytes
  int exit_code = 0;
};

RunFiles run_all(const fs::path& fixture_dir, const fs::path& out) {
  RunFiles rf;
  const std::string cfg = (fixture_dir / "config.json").string();
  const std::vector<std::string> mocks = {"--mock-llm", "--mock-diffusion", "--mock-embed", "--mock-pose"};
  auto run = [&](std::vector<std::string> args) {
    std::vector<std::string> full = {"augagent", "--config", cfg};
    full.insert(full.end(), mocks.begin(), mocks.end());
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream o, e;
    const int code = run_cli(full, o, e);
    if (code != 0 && rf.exit_code == 0) rf.exit_code = code;
    if (code != 0) std::fprintf(stderr, "%s", e.str().c_str());
  };
  const std::string origin = (fixture_dir / "origin.jsonl").string();
  run({"--out", (out / "train").string(), "train-scorer", "--manifest", origin});
  run({"--out", (out / "aug").string(), "augment", "--manifest", origin, "--head", (out / "train" / "head.bin").string()});
  run({"--out", (out / "final").string(), "assemble", "--origin", origin, "--aug", (out / "aug" / "augmented.jsonl").string()});
  run({"--out", (out / "final").string(), "report", "--manifest", (out / "final" / "manifest.jsonl").string()});
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    std::string bytes = slurp(entry.path());
    if (entry.path().filename() == "run_report.json") {
      auto j = nlohmann::ordered_json::parse(bytes);
      j.erase("wall_time");
      bytes = j.dump(2);
    }
    rf.files[fs::relative(entry.path(), out).string()] = bytes;
  }
  return rf;
}

Outcome end_to_end() {
  fixture::TempDir dir("accept-e2e");
  write_e2e_fixture(dir.path() / "fixture");
  const auto a = run_all(dir.path() / "fixture", dir.path() / "run1");
  const auto b = run_all(dir.path() / "fixture", dir.path() / "run2");
  if (a.exit_code != 0 || b.exit_code != 0) return {false, fmt::format("exit codes {} / {}", a.exit_code, b.exit_code)};

  std::size_t differing = 0;
  for (const auto& [name, bytes] : a.files) {
    const auto it = b.files.find(name);
    if (it == b.files.end() || it->second != bytes) ++differing;
  }
  differing += b.files.size() - std::min(b.files.size(), a.files.size());

  const auto origin = load_manifest(dir.path() / "fixture" / "origin.jsonl");
  const auto final_set = load_manifest(dir.path() / "run1" / "final" / "manifest.jsonl");
  const auto report = nlohmann::json::parse(a.files.at("aug/run_report.json"));
  const std::size_t exhausted = report["exhausted_record_ids"].size();
  const std::size_t k = 1;

  // Recount labels straight from the records of the final manifest.
  std::vector<std::size_t> orig(origin.vocabulary.size(), 0), aug(origin.vocabulary.size(), 0);
  for (const auto& r : final_set.records)
    for (int c : r.labels) ++(r.provenance == Provenance::original ? orig : aug)[c];
  bool recount_ok = true;
  for (const auto& label : origin.vocabulary.labels()) {
    recount_ok = recount_ok && aug[label.id] == k * orig[label.id] &&
                 report["per_class_counts"][label.name].get<std::size_t>() == aug[label.id];
  }
  const bool size_ok = final_set.records.size() == origin.records.size() + k * origin.records.size();
  return {differing == 0 && exhausted == 0 && size_ok && recount_ok,
          fmt::format("{} output files compared, {} differ; |D_final| = {} (|D_origin| = {}, k = {}, exhausted {}); "
                      "per-class recount {}",
                      a.files.size(), differing, final_set.records.size(), origin.records.size(), k, exhausted,
                      recount_ok ? "matches" : "differs")};
}

// --- similarity ---------------------------------------------------------------

Outcome similarity_metric() {
  const Eigen::Vector3d u(0.3, -1.2, 2.5);
  const double same = normalized_similarity(u, u);
  const double orth = normalized_similarity(Eigen::Vector3d(1, 2, 0), Eigen::Vector3d(-2, 1, 7));
  const double anti = normalized_similarity(u, (-u).eval());
  const std::vector<SimilarityRow> rows = {{"Airplane", 100, "Direct Stable Diffusion", 0.750},
                                           {"Airplane", 100, "Controlled Self-Refined Diffusion", 0.893}};
  const std::string expected =
      "Image class | Image Size |        Augmentation Method        | Mean Similarity\n"
      "------------------------------------------------------------------------------\n"
      "Airplane    |    100     |      Direct Stable Diffusion      |      0.750\n"
      "Airplane    |    100     | Controlled Self-Refined Diffusion |      0.893\n";
  const bool table_ok = format_similarity_table(rows) == expected;
  return {same == 1.0 && orth == 0.5 && anti == 0.0 && table_ok,
          fmt::format("identical {:.17g}, orthogonal {:.17g}, antipodal {:.17g}; table layout {}", same, orth, anti,
                      table_ok ? "matches" : "differs")};
}

// --- manifest round trip ---------------------------------------------------------

Outcome manifest_round_trip() {
  fixture::TempDir dir("accept-manifest");
  std::mt19937_64 rng(100);
  DatasetManifest m;
  m.vocabulary = Vocabulary::voc();
  m.epsilon = 0.9;
  m.created_at = "2024-06-01T08:30:00Z";
  std::uniform_int_distribution<int> label(0, 20), score(900001, 1000000);
  for (int i = 0; i < 100; ++i) {
    ImageRecord r;
    r.record_id = fmt::format("rec{:03d}", i);
    r.image_path = dir.path() / "images" / (r.record_id + ".png");
    for (int j = 0, n = 1 + static_cast<int>(rng() % 3); j < n; ++j) r.labels.insert(label(rng));
    if (i >= 50) {
      r.provenance = Provenance::augmented;
      r.parent_id = fmt::format("rec{:03d}", rng() % 50);
      r.prompt = fmt::format("scene {} \"quoted\", unicode café", rng() % 997);
      r.target_score = score(rng) / 1e6;
      r.attempts = 1 + static_cast<int>(rng() % 10);
      r.seed = rng();
    }
    m.records.push_back(r);
  }
  const auto p1 = dir.path() / "a.jsonl", p2 = dir.path() / "b.jsonl";
  save_manifest(m, p1);
  const auto loaded = load_manifest(p1);
  save_manifest(loaded, p2);
  const bool identity = loaded == m;
  const bool stable = slurp(p1) == slurp(p2);
  return {identity && stable && loaded.records.size() == 100,
          fmt::format("100 records: load(save(m)) == m {}, re-save byte identical {}", identity ? "yes" : "no",
                      stable ? "yes" : "no")};
}

}  // namespace

int main() {
  criterion("softmax/GMP oracle", softmax_pooling);
  criterion("MCE loss oracle", cross_entropy);
  criterion("gradient check", gradient_check);
  criterion("scorer training sanity", training_sanity);
  criterion("Canny oracle", canny_oracle);
  criterion("prompt refinement control", prompt_control);
  criterion("augmentation loop control", augment_control);
  criterion("end-to-end determinism", end_to_end);
  criterion("similarity metric", similarity_metric);
  criterion("manifest round trip", manifest_round_trip);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
