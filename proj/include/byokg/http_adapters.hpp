#pragma once

#include <condition_variable>
#include <mutex>
#include <string>

#include "byokg/linking.hpp"
#include "byokg/llm_client.hpp"
#include "byokg/retrieval.hpp"

namespace byokg {

// Connection settings shared by the HTTP-backed LLM, embedder, and reranker.
// The auth token is read from the named environment variable at request time
// and sent as a bearer token when present.
struct HttpOptions {
  std::string base_url;  // scheme://host[:port]
  std::string model;
  std::string auth_env = "BYOKG_API_KEY";
  int timeout_seconds = 60;
  int max_retries = 2;  // additional attempts after the first
};

// Generic chat-completion client. The request shape is
//   {"model", "messages": [{"role": "user", "content": prompt}],
//    "temperature", "max_tokens", "stop"?}
// and the response text is extracted via `response_path`, a dotted path with
// numeric segments as array indices — remap it for providers with a
// different response layout.
struct ChatCompletionOptions : HttpOptions {
  std::string path = "/v1/chat/completions";
  std::string response_path = "choices.0.message.content";
  int max_in_flight = 4;  // concurrent request cap across threads
};

class HttpLlmBackend : public LlmBackend {
 public:
  explicit HttpLlmBackend(ChatCompletionOptions options);

 protected:
  std::string do_complete(const LlmRequest& request) override;

 private:
  ChatCompletionOptions options_;
  std::mutex mutex_;
  std::condition_variable slot_free_;
  int in_flight_ = 0;
};

// Embedder posting {"texts": [...]} and expecting {"embeddings": [[...]]}.
Embedder http_embedder(HttpOptions options, std::string path = "/embed");

// Reranker posting {"query", "texts": [...]} and expecting {"scores": [...]}.
Reranker http_reranker(HttpOptions options, std::string path = "/rerank");

}  // namespace byokg
