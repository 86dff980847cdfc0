#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace byokg {

struct LlmRequest {
  std::string prompt;
  std::string stage;  // caller-supplied label recorded in the call log
  double temperature = 0.0;
  int max_tokens = 4096;
  std::vector<std::string> stop;  // optional stop sequences
};

struct LlmCallRecord {
  std::string stage;
  std::string prompt;
  std::string response;  // empty on failure
  std::size_t prompt_bytes = 0;
  std::size_t response_bytes = 0;
  std::chrono::system_clock::time_point started_at;
  std::chrono::system_clock::time_point finished_at;
  bool ok = false;
  std::string error;
};

// Thread-safe append-only record of every LLM exchange, successes and
// failures alike.
class CallLog {
 public:
  void append(LlmCallRecord record);
  std::vector<LlmCallRecord> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<LlmCallRecord> records_;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A prompt reached a scripted backend that has no entry for it.
struct UnscriptedPromptError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// More than one scripted entry matched a live prompt.
struct AmbiguousScriptError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScriptValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Base completion interface. complete() records every exchange in the call
// log before rethrowing failures, so the log stays complete.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  std::string complete(const LlmRequest& request);

  const CallLog& call_log() const { return log_; }

 protected:
  virtual std::string do_complete(const LlmRequest& request) = 0;

 private:
  CallLog log_;
};

struct ScriptEntry {
  enum class Match { exact, substring, pattern };
  Match kind = Match::substring;
  std::string pattern;
  std::string response;
  std::optional<int> max_uses;  // entry stops matching after this many uses
};

// Deterministic replay backend: each prompt must match exactly one active
// script entry. Script files are line-oriented:
//
//   # comment
//   [match:substring]
//   Task: Entity Extraction
//   [max_uses:1]
//   [response]
//   <entities>
//   Jamaica
//   </entities>
//   [end]
//
// The pattern is every line between the [match:...] directive and the next
// directive. Overlapping entries that are statically decidable (duplicate
// patterns, one substring containing another, a substring inside an exact
// prompt, a regex matching an exact prompt) are rejected at load time;
// regex-vs-regex overlap is caught by the runtime ambiguity guard instead.
class ScriptedBackend : public LlmBackend {
 public:
  explicit ScriptedBackend(std::vector<ScriptEntry> entries);
  static std::vector<ScriptEntry> parse_script(std::string_view content);
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  std::size_t entry_count() const { return entries_.size(); }

 protected:
  std::string do_complete(const LlmRequest& request) override;

 private:
  std::vector<ScriptEntry> entries_;
  std::vector<int> uses_;
  std::mutex mutex_;
};

// Adapts an arbitrary completion function (used by the language bindings).
class CallbackBackend : public LlmBackend {
 public:
  using Fn = std::function<std::string(const std::string& prompt)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}

 protected:
  std::string do_complete(const LlmRequest& request) override;

 private:
  Fn fn_;
};

}  // namespace byokg
