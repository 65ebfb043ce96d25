#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "augagent/augment.hpp"
#include "augagent/codec.hpp"
#include "augagent/detector.hpp"
#include "augagent/generation.hpp"
#include "augagent/image.hpp"
#include "augagent/manifest.hpp"
#include "augagent/prompt_agent.hpp"
#include "augagent/scorer.hpp"

namespace fixture {

namespace fs = std::filesystem;
using namespace augagent;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("augagent-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Replies to scoring commands with the next scripted score and to generation
// commands with "candidate N".
class ScriptedLlm : public LlmBackend {
 public:
  explicit ScriptedLlm(std::vector<std::string> score_replies) : replies_(std::move(score_replies)) {}
  static ScriptedLlm scores(const std::vector<double>& values) {
    std::vector<std::string> replies;
    for (double v : values) replies.push_back("{\"score\": " + std::to_string(v) + "}");
    return ScriptedLlm(std::move(replies));
  }

  std::string complete(const std::string& instruction, std::uint64_t) override {
    std::lock_guard lock(mu_);
    if (instruction.find(kScoreFormatSuffix) != std::string::npos) {
      ++score_calls;
      const std::string r = replies_.at(next_reply_ % replies_.size());
      ++next_reply_;
      return r;
    }
    ++generate_calls;
    return "candidate " + std::to_string(generate_calls);
  }

  int generate_calls = 0;
  int score_calls = 0;

 private:
  std::mutex mu_;
  std::vector<std::string> replies_;
  std::size_t next_reply_ = 0;
};

// Returns the scripted target scores in order, repeating the last one.
class ScriptedScorer : public ImageScorer {
 public:
  explicit ScriptedScorer(std::vector<double> values) : values_(std::move(values)) {}
  QualityScore score(const RgbImage&, const std::set<int>&) override {
    std::lock_guard lock(mu_);
    const double v = values_[std::min(calls, values_.size() - 1)];
    ++calls;
    QualityScore q;
    q.target_score = v;
    return q;
  }
  std::size_t calls = 0;

 private:
  std::mutex mu_;
  std::vector<double> values_;
};

class CountingGeneration : public GenerationBackend {
 public:
  RgbImage generate(const GenerationRequest& request) override {
    {
      std::lock_guard lock(mu_);
      ++calls;
      kinds.push_back(request.map.kind);
    }
    return mock_generate(request);
  }
  std::size_t calls = 0;
  std::vector<DetectorKind> kinds;

 private:
  std::mutex mu_;
};

class CountingPose : public PoseBackend {
 public:
  GrayImage detect(const RgbImage& image) override {
    ++calls;
    return inner_.detect(image);
  }
  std::atomic<int> calls{0};

 private:
  MockPose inner_;
};

inline RgbImage solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, r, g, b);
  return img;
}

inline RgbImage random_image(std::mt19937_64& rng, int w, int h, int max_value = 255) {
  std::uniform_int_distribution<int> d(0, max_value);
  RgbImage img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(d(rng));
  return img;
}

// Original records with one PNG each under dir; labels[i] is the label set of
// record i.
inline DatasetManifest originals(const fs::path& dir, const Vocabulary& vocab,
                                 const std::vector<std::set<int>>& labels, int size = 32) {
  DatasetManifest m;
  m.vocabulary = vocab;
  m.epsilon = 0.9;
  m.created_at = "2024-01-01T00:00:00Z";
  fs::create_directories(dir);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ImageRecord r;
    r.record_id = "img" + std::to_string(i);
    r.image_path = fs::absolute(dir / (r.record_id + ".png"));
    r.labels = labels[i];
    const auto shade = static_cast<std::uint8_t>(40 + 30 * i);
    write_png(r.image_path, solid(size, size, shade, static_cast<std::uint8_t>(shade / 2), 90));
    m.records.push_back(r);
  }
  return m;
}

inline Vocabulary small_vocab() {
  return Vocabulary("fixture", {"airplane", "cat", "dog", "person", "bicycle"});
}

}  // namespace fixture
