// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "moral/clients.hpp"
#include "moral/errors.hpp"

namespace moral {
namespace {

httplib::Headers auth_headers(const HttpEndpoint& endpoint) {
  httplib::Headers headers;
  if (endpoint.api_key_env.empty()) return headers;
  const char* key = std::getenv(endpoint.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw ConfigError(fmt::format("environment variable {} is not set", endpoint.api_key_env));
  headers.emplace("Authorization", fmt::format("Bearer {}", key));
  return headers;
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body) {
  const httplib::Headers headers = auth_headers(endpoint);
  const std::string payload = body.dump();
  const auto timeout = std::chrono::duration<double>(endpoint.timeout_seconds);
  std::string last_error;
  for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    const auto res = client.Post(endpoint.path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = fmt::format("HTTP {}", res->status);
      continue;
    }
    if (res->status != 200)
      throw ClientError(fmt::format("{}{} returned HTTP {}", endpoint.base_url, endpoint.path, res->status));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw FormatError("response body is not JSON", res->body);
    }
  }
  throw ClientError(fmt::format("{}{} failed after {} attempts: {}", endpoint.base_url, endpoint.path,
                                endpoint.max_retries + 1, last_error));
}

}  // namespace

ChatCompletionGenerator::ChatCompletionGenerator(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  if (endpoint_.base_url.empty()) throw ConfigError("chat endpoint needs a base_url");
  if (endpoint_.path.empty()) endpoint_.path = "/v1/chat/completions";
}

std::string ChatCompletionGenerator::complete(const ClientRequest& request) {
  const nlohmann::json body{{"model", endpoint_.model},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})}};
  const nlohmann::json reply = post_json(endpoint_, body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("chat reply has no choices[0].message.content", reply.dump());
  }
}

double parse_judge_score(std::string_view reply) {
  static const std::regex kNumber(R"([-+]?(\d+(\.\d*)?|\.\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, kNumber))
    throw FormatError("judge reply contains no number", std::string(reply));
  return std::stod(m.str());
}

ChatCompletionJudge::ChatCompletionJudge(HttpEndpoint endpoint) : chat_(std::move(endpoint)) {}

double ChatCompletionJudge::raw_score(const ClientRequest& request) { return parse_judge_score(chat_.complete(request)); }

RemoteEmbedder::RemoteEmbedder(HttpEndpoint endpoint, std::size_t dim) : endpoint_(std::move(endpoint)), dim_(dim) {
  if (endpoint_.base_url.empty()) throw ConfigError("embedding endpoint needs a base_url");
  if (endpoint_.path.empty()) endpoint_.path = "/embed";
  if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

Vector RemoteEmbedder::embed(std::string_view text) const {
  if (text.empty()) throw ArgumentError("cannot embed empty text");
  const nlohmann::json reply = post_json(endpoint_, nlohmann::json{{"text", text}});
  Vector v;
  try {
    v = reply.at("embedding").get<Vector>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("embedding reply has no numeric \"embedding\" array", reply.dump());
  }
  if (v.size() != dim_)
    throw FormatError(fmt::format("embedding has length {}, expected {}", v.size(), dim_), reply.dump());
  for (double x : v)
    if (!std::isfinite(x)) throw FormatError("embedding has non-finite entries", reply.dump());
  return normalized(v);
}

}  // namespace moral
