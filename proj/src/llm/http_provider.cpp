#include <cstdlib>
#include <thread>

#include "masked_irl/errors.hpp"
#include "masked_irl/llm.hpp"

// After Eigen: <resolv.h> defines a _res macro that breaks Eigen headers.
#include <httplib.h>

namespace masked_irl {

namespace {

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpChatProvider::HttpChatProvider(Options options) : options_(std::move(options)) {
  if (options_.model.empty()) throw ValidationError("HTTP provider needs a model id");
  if (options_.max_attempts < 1) throw ValidationError("HTTP provider needs at least one attempt");
}

HttpChatProvider::Options HttpChatProvider::from_environment(std::string model, std::string base_url) {
  const char* key = std::getenv(kApiKeyVariable);
  if (key == nullptr || *key == '\0') {
    throw ValidationError(std::string("live provider disabled: ") + kApiKeyVariable + " is not set");
  }
  Options o;
  o.api_key = key;
  o.model = std::move(model);
  if (!base_url.empty()) o.base_url = std::move(base_url);
  return o;
}

std::string HttpChatProvider::complete(const ChatRequest& request) {
  const nlohmann::json body{{"model", request.model.empty() ? options_.model : request.model},
                            {"temperature", request.temperature},
                            {"messages",
                             {{{"role", "system"}, {"content", request.system}},
                              {{"role", "user"}, {"content", request.user}}}}};
  const std::string payload = body.dump();

  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  std::string last_error;
  auto backoff = options_.initial_backoff;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    const auto res = client.Post(options_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      if (retryable(res->status)) continue;
      break;
    }
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) {
      last_error = "response body is not JSON";
      continue;
    }
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      last_error = "response lacks choices[0].message.content";
    }
  }
  throw AnnotationError("chat provider " + options_.base_url + " failed: " + last_error);
}

}  // namespace masked_irl
