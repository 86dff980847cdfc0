#include "byokg/http_adapters.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <memory>
#include <thread>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include "byokg/text.hpp"

namespace byokg {

namespace {

using nlohmann::json;

httplib::Headers auth_headers(const HttpOptions& options) {
  httplib::Headers headers;
  if (!options.auth_env.empty()) {
    if (const char* token = std::getenv(options.auth_env.c_str()); token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  return headers;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

// POST with retries on connection failures and retryable statuses; any other
// failure (or exhaustion) becomes a TransportError.
json post_json(const HttpOptions& options, const std::string& path, const json& body) {
  std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
    httplib::Client client(options.base_url);
    client.set_connection_timeout(options.timeout_seconds);
    client.set_read_timeout(options.timeout_seconds);
    client.set_write_timeout(options.timeout_seconds);
    auto result = client.Post(path, auth_headers(options), payload, "application/json");
    if (!result) {
      last_error = "connection failed: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 200 && result->status < 300) {
      json parsed = json::parse(result->body, nullptr, false);
      if (parsed.is_discarded()) throw TransportError("invalid JSON response from " + path);
      return parsed;
    }
    last_error = "HTTP " + std::to_string(result->status) + " from " + path;
    if (!retryable_status(result->status)) throw TransportError(last_error);
  }
  throw TransportError(last_error + " (after " + std::to_string(options.max_retries + 1) + " attempts)");
}

// Walks "choices.0.message.content"-style paths; numeric segments index
// arrays.
const json* walk_path(const json& root, const std::string& dotted) {
  const json* node = &root;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    std::size_t dot = dotted.find('.', start);
    std::string segment = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (segment.empty()) return nullptr;
    if (node->is_array()) {
      std::size_t index = 0;
      try {
        index = static_cast<std::size_t>(std::stoul(segment));
      } catch (const std::exception&) {
        return nullptr;
      }
      if (index >= node->size()) return nullptr;
      node = &(*node)[index];
    } else if (node->is_object()) {
      auto it = node->find(segment);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else {
      return nullptr;
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return node;
}

}  // namespace

HttpLlmBackend::HttpLlmBackend(ChatCompletionOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty()) throw TransportError("http backend requires a base_url");
  if (options_.max_in_flight < 1) throw TransportError("http backend max_in_flight must be at least 1");
}

std::string HttpLlmBackend::do_complete(const LlmRequest& request) {
  if (request.prompt.empty()) throw TransportError("refusing to send an empty prompt");
  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    HttpLlmBackend* self;
    ~Release() {
      std::lock_guard lock(self->mutex_);
      --self->in_flight_;
      self->slot_free_.notify_one();
    }
  } release{this};

  json body{{"model", options_.model},
            {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (!request.stop.empty()) body["stop"] = request.stop;
  json response = post_json(options_, options_.path, body);
  const json* content = walk_path(response, options_.response_path);
  if (content == nullptr || !content->is_string()) {
    throw TransportError("response has no text at \"" + options_.response_path + "\"");
  }
  return content->get<std::string>();
}

Embedder http_embedder(HttpOptions options, std::string path) {
  auto shared = std::make_shared<HttpOptions>(std::move(options));
  return [shared, path](const std::vector<std::string>& texts) {
    json response = post_json(*shared, path, json{{"texts", texts}});
    auto it = response.find("embeddings");
    if (it == response.end() || !it->is_array() || it->size() != texts.size()) {
      throw TransportError("embedding response must carry one vector per input text");
    }
    std::vector<std::vector<double>> out;
    out.reserve(it->size());
    for (const auto& row : *it) {
      if (!row.is_array()) throw TransportError("embedding response rows must be arrays");
      out.push_back(row.get<std::vector<double>>());
    }
    return out;
  };
}

Reranker http_reranker(HttpOptions options, std::string path) {
  auto shared = std::make_shared<HttpOptions>(std::move(options));
  return [shared, path](const std::string& query, const std::vector<std::string>& texts) {
    json response = post_json(*shared, path, json{{"query", query}, {"texts", texts}});
    auto it = response.find("scores");
    if (it == response.end() || !it->is_array() || it->size() != texts.size()) {
      throw TransportError("rerank response must carry one score per input text");
    }
    return it->get<std::vector<double>>();
  };
}

}  // namespace byokg
