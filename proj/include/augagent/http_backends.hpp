#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>

#include "augagent/detector.hpp"
#include "augagent/generation.hpp"
#include "augagent/prompt_agent.hpp"
#include "augagent/retry.hpp"
#include "augagent/scorer.hpp"

namespace augagent {

struct Endpoint {
  // Full URL, e.g. http://127.0.0.1:8000/v1/generate
  std::string url;
  std::string model;
  // Name of the environment variable holding a bearer token; empty for none.
  std::string api_key_env;
  int max_in_flight = 4;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};
};

// Request bodies exactly as sent on the wire (keys sorted, compact).
std::string chat_request_body(const std::string& model, const std::string& instruction,
                              std::uint64_t seed);
std::string generation_request_body(const GenerationRequest& request);
std::string image_request_body(const RgbImage& image);

// Response decoders; contract violations raise BackendError.
std::string parse_chat_response(const std::string& body);
RgbImage parse_generation_response(const std::string& body);
PatchEmbeddings parse_embedding_response(const std::string& body);
GrayImage parse_pose_response(const std::string& body);

// POSTs JSON with bounded concurrency and retries. Connection failures,
// 429 and 5xx are retried; other non-200 statuses are not.
class JsonClient {
 public:
  explicit JsonClient(Endpoint endpoint);
  ~JsonClient();
  std::string post(const std::string& body);
  const Endpoint& endpoint() const { return endpoint_; }

 private:
  std::string post_once(const std::string& body);

  Endpoint endpoint_;
  std::string origin_;
  std::string path_;
  std::counting_semaphore<1024> in_flight_;
};

class HttpLlm : public LlmBackend {
 public:
  explicit HttpLlm(Endpoint endpoint) : client_(std::move(endpoint)) {}
  std::string complete(const std::string& instruction, std::uint64_t seed_hint) override;

 private:
  JsonClient client_;
};

class HttpGeneration : public GenerationBackend {
 public:
  explicit HttpGeneration(Endpoint endpoint) : client_(std::move(endpoint)) {}
  RgbImage generate(const GenerationRequest& request) override;

 private:
  JsonClient client_;
};

class HttpEmbedder : public EmbeddingBackend {
 public:
  explicit HttpEmbedder(Endpoint endpoint) : client_(std::move(endpoint)) {}
  PatchEmbeddings embed(const RgbImage& image) override;

 private:
  JsonClient client_;
};

class HttpPose : public PoseBackend {
 public:
  explicit HttpPose(Endpoint endpoint) : client_(std::move(endpoint)) {}
  GrayImage detect(const RgbImage& image) override;

 private:
  JsonClient client_;
};

}  // namespace augagent
