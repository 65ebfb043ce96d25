#include "augagent/http_backends.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "augagent/codec.hpp"
#include "augagent/errors.hpp"

namespace augagent {

using nlohmann::json;

namespace {

std::string png_base64(const RgbImage& image) { return base64_encode(encode_png(image)); }
std::string png_base64(const GrayImage& image) { return base64_encode(encode_png(image)); }

json parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw BackendError("backend reply is not a JSON object");
  return j;
}

std::vector<std::uint8_t> field_png(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw BackendError(std::string("backend reply lacks string field '") + key + "'");
  }
  auto bytes = base64_decode(it->get<std::string>());
  if (!bytes) throw BackendError(std::string("field '") + key + "' is not valid base64");
  return std::move(*bytes);
}

}  // namespace

std::string chat_request_body(const std::string& model, const std::string& instruction,
                              std::uint64_t seed) {
  json j;
  j["model"] = model;
  j["messages"] = json::array({{{"role", "user"}, {"content", instruction}}});
  j["seed"] = seed;
  return j.dump();
}

std::string generation_request_body(const GenerationRequest& request) {
  json j;
  j["image"] = png_base64(request.source);
  j["map"] = png_base64(request.map.data);
  j["map_kind"] = std::string(to_string(request.map.kind));
  j["prompt"] = request.prompt;
  j["seed"] = request.seed;
  j["steps"] = request.steps;
  j["guidance"] = request.guidance;
  return j.dump();
}

std::string image_request_body(const RgbImage& image) {
  json j;
  j["image"] = png_base64(image);
  return j.dump();
}

std::string parse_chat_response(const std::string& body) {
  const json j = parse_body(body);
  auto it = j.find("content");
  if (it == j.end() || !it->is_string()) throw BackendError("chat reply lacks 'content'");
  return it->get<std::string>();
}

RgbImage parse_generation_response(const std::string& body) {
  try {
    return decode_png_rgb(field_png(parse_body(body), "image"));
  } catch (const DataError& e) {
    throw BackendError(std::string("generation reply: ") + e.what());
  }
}

PatchEmbeddings parse_embedding_response(const std::string& body) {
  const json j = parse_body(body);
  const auto shape = j.find("shape");
  const auto data = j.find("data");
  if (shape == j.end() || !shape->is_array() || shape->size() != 2 ||
      !(*shape)[0].is_number_unsigned() || !(*shape)[1].is_number_unsigned()) {
    throw BackendError("embedding reply needs shape [s, e]");
  }
  const auto rows = (*shape)[0].get<Eigen::Index>();
  const auto cols = (*shape)[1].get<Eigen::Index>();
  if (data == j.end() || !data->is_array() ||
      data->size() != static_cast<std::size_t>(rows * cols)) {
    throw BackendError("embedding reply data does not match its shape");
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f(rows, cols);
  for (std::size_t i = 0; i < data->size(); ++i) {
    const auto& v = (*data)[i];
    if (!v.is_number()) throw BackendError("embedding reply holds a non-number");
    f.data()[i] = v.get<double>();
  }
  if (!f.allFinite()) throw BackendError("embedding reply holds non-finite values");
  return f;
}

GrayImage parse_pose_response(const std::string& body) {
  try {
    return decode_png_gray(field_png(parse_body(body), "map"));
  } catch (const DataError& e) {
    throw BackendError(std::string("pose reply: ") + e.what());
  }
}

JsonClient::JsonClient(Endpoint endpoint)
    : endpoint_(std::move(endpoint)), in_flight_(std::max(1, endpoint_.max_in_flight)) {
  const auto scheme = endpoint_.url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + endpoint_.url);
  const auto slash = endpoint_.url.find('/', scheme + 3);
  origin_ = endpoint_.url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : endpoint_.url.substr(slash);
}

JsonClient::~JsonClient() = default;

std::string JsonClient::post(const std::string& body) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  return with_retries(endpoint_.retry, "POST " + endpoint_.url,
                      [&] { return post_once(body); });
}

std::string JsonClient::post_once(const std::string& body) {
  httplib::Client client(origin_);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(endpoint_.timeout);
  client.set_write_timeout(endpoint_.timeout);
  httplib::Headers headers;
  if (!endpoint_.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint_.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) throw TransportError(httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + endpoint_.url + ": " +
                       res->body.substr(0, 200));
  }
  return res->body;
}

std::string HttpLlm::complete(const std::string& instruction, std::uint64_t seed_hint) {
  return parse_chat_response(
      client_.post(chat_request_body(client_.endpoint().model, instruction, seed_hint)));
}

RgbImage HttpGeneration::generate(const GenerationRequest& request) {
  return parse_generation_response(client_.post(generation_request_body(request)));
}

PatchEmbeddings HttpEmbedder::embed(const RgbImage& image) {
  return parse_embedding_response(client_.post(image_request_body(image)));
}

GrayImage HttpPose::detect(const RgbImage& image) {
  return parse_pose_response(client_.post(image_request_body(image)));
}

}  // namespace augagent
