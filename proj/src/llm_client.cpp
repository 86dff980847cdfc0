#include "byokg/llm_client.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "byokg/text.hpp"

namespace byokg {

void CallLog::append(LlmCallRecord record) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(record));
}

std::vector<LlmCallRecord> CallLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string LlmBackend::complete(const LlmRequest& request) {
  LlmCallRecord record;
  record.stage = request.stage;
  record.prompt = request.prompt;
  record.prompt_bytes = request.prompt.size();
  record.started_at = std::chrono::system_clock::now();
  try {
    std::string response = do_complete(request);
    record.finished_at = std::chrono::system_clock::now();
    record.response = response;
    record.response_bytes = response.size();
    record.ok = true;
    log_.append(std::move(record));
    return response;
  } catch (const std::exception& e) {
    record.finished_at = std::chrono::system_clock::now();
    record.ok = false;
    record.error = e.what();
    log_.append(std::move(record));
    throw;
  }
}

namespace {

std::string preview(std::string_view prompt) {
  std::string out(prompt.substr(0, 80));
  std::replace(out.begin(), out.end(), '\n', ' ');
  if (prompt.size() > 80) out += "...";
  return out;
}

std::string_view match_kind_name(ScriptEntry::Match kind) {
  switch (kind) {
    case ScriptEntry::Match::exact:
      return "exact";
    case ScriptEntry::Match::substring:
      return "substring";
    default:
      return "pattern";
  }
}

bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

bool entry_matches(const ScriptEntry& entry, const std::string& prompt) {
  switch (entry.kind) {
    case ScriptEntry::Match::exact:
      return prompt == entry.pattern;
    case ScriptEntry::Match::substring:
      return contains(prompt, entry.pattern);
    default: {
      std::regex re(entry.pattern);
      return std::regex_search(prompt, re);
    }
  }
}

// Statically decidable overlap between two entries: some prompt both accept.
bool statically_overlap(const ScriptEntry& a, const ScriptEntry& b) {
  using M = ScriptEntry::Match;
  if (a.kind == M::exact && b.kind == M::exact) return a.pattern == b.pattern;
  if (a.kind == M::substring && b.kind == M::substring) {
    return contains(a.pattern, b.pattern) || contains(b.pattern, a.pattern);
  }
  if (a.kind == M::exact && b.kind == M::substring) return contains(a.pattern, b.pattern);
  if (a.kind == M::substring && b.kind == M::exact) return contains(b.pattern, a.pattern);
  if (a.kind == M::pattern && b.kind == M::exact) return entry_matches(a, b.pattern);
  if (a.kind == M::exact && b.kind == M::pattern) return entry_matches(b, a.pattern);
  return false;  // regex-vs-regex / regex-vs-substring: runtime guard only
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ScriptValidationError("script has no entries");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].pattern.empty()) {
      throw ScriptValidationError("script entry " + std::to_string(i + 1) + " has an empty pattern");
    }
    if (entries_[i].kind == ScriptEntry::Match::pattern) {
      try {
        std::regex re(entries_[i].pattern);
      } catch (const std::regex_error& e) {
        throw ScriptValidationError("script entry " + std::to_string(i + 1) + " has an invalid regex: " + e.what());
      }
    }
    if (entries_[i].max_uses && *entries_[i].max_uses <= 0) {
      throw ScriptValidationError("script entry " + std::to_string(i + 1) + " has a non-positive max_uses");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (statically_overlap(entries_[j], entries_[i])) {
        throw ScriptValidationError(
            "script entries " + std::to_string(j + 1) + " and " + std::to_string(i + 1) + " overlap (" +
            std::string(match_kind_name(entries_[j].kind)) + " \"" + preview(entries_[j].pattern) + "\" vs " +
            std::string(match_kind_name(entries_[i].kind)) + " \"" + preview(entries_[i].pattern) + "\")");
      }
    }
  }
  uses_.assign(entries_.size(), 0);
}

std::string ScriptedBackend::do_complete(const LlmRequest& request) {
  std::lock_guard lock(mutex_);
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].max_uses && uses_[i] >= *entries_[i].max_uses) continue;
    if (entry_matches(entries_[i], request.prompt)) hits.push_back(i);
  }
  if (hits.empty()) {
    throw UnscriptedPromptError("unscripted prompt: \"" + preview(request.prompt) + "\"");
  }
  if (hits.size() > 1) {
    std::string which;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      if (i) which += ", ";
      which += std::to_string(hits[i] + 1);
    }
    throw AmbiguousScriptError("script entries " + which + " all match prompt: \"" + preview(request.prompt) + "\"");
  }
  ++uses_[hits[0]];
  return entries_[hits[0]].response;
}

std::vector<ScriptEntry> ScriptedBackend::parse_script(std::string_view content) {
  std::vector<ScriptEntry> entries;
  std::optional<ScriptEntry> current;
  std::vector<std::string> pattern_lines;
  bool in_pattern = false;
  bool in_response = false;
  std::vector<std::string> response_lines;
  std::size_t line_no = 0;

  auto flush_pattern = [&]() {
    if (!in_pattern) return;
    // Blank boundary lines are layout, not pattern content.
    while (!pattern_lines.empty() && text::trim(pattern_lines.front()).empty()) {
      pattern_lines.erase(pattern_lines.begin());
    }
    while (!pattern_lines.empty() && text::trim(pattern_lines.back()).empty()) pattern_lines.pop_back();
    current->pattern = text::join(pattern_lines, "\n");
    pattern_lines.clear();
    in_pattern = false;
  };

  for (const std::string& line : text::split_lines(content)) {
    ++line_no;
    if (in_response) {
      if (line == "[end]") {
        current->response = text::join(response_lines, "\n");
        entries.push_back(std::move(*current));
        current.reset();
        response_lines.clear();
        in_response = false;
      } else {
        response_lines.push_back(line);
      }
      continue;
    }
    std::string trimmed = text::trim(line);
    if (!in_pattern && (trimmed.empty() || trimmed[0] == '#')) continue;
    if (trimmed.rfind("[match:", 0) == 0 && trimmed.back() == ']') {
      if (current) {
        throw ScriptValidationError("line " + std::to_string(line_no) +
                                    ": new [match:] before previous entry's [response]/[end] block");
      }
      std::string kind = trimmed.substr(7, trimmed.size() - 8);
      current = ScriptEntry{};
      if (kind == "exact") {
        current->kind = ScriptEntry::Match::exact;
      } else if (kind == "substring") {
        current->kind = ScriptEntry::Match::substring;
      } else if (kind == "pattern") {
        current->kind = ScriptEntry::Match::pattern;
      } else {
        throw ScriptValidationError("line " + std::to_string(line_no) + ": unknown match kind \"" + kind + "\"");
      }
      in_pattern = true;
      continue;
    }
    if (trimmed.rfind("[max_uses:", 0) == 0 && trimmed.back() == ']') {
      if (!current) {
        throw ScriptValidationError("line " + std::to_string(line_no) + ": [max_uses:] outside an entry");
      }
      flush_pattern();
      try {
        current->max_uses = std::stoi(trimmed.substr(10, trimmed.size() - 11));
      } catch (const std::exception&) {
        throw ScriptValidationError("line " + std::to_string(line_no) + ": invalid max_uses");
      }
      continue;
    }
    if (trimmed == "[response]") {
      if (!current) {
        throw ScriptValidationError("line " + std::to_string(line_no) + ": [response] outside an entry");
      }
      flush_pattern();
      in_response = true;
      continue;
    }
    if (in_pattern) {
      pattern_lines.push_back(line);
      continue;
    }
    throw ScriptValidationError("line " + std::to_string(line_no) + ": unexpected content outside an entry: \"" +
                                trimmed + "\"");
  }
  if (in_response) throw ScriptValidationError("script ends inside a [response] block (missing [end])");
  if (current) throw ScriptValidationError("script ends inside an entry (missing [response]/[end])");
  return entries;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScriptValidationError("cannot open script file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::make_unique<ScriptedBackend>(parse_script(buf.str()));
}

std::string CallbackBackend::do_complete(const LlmRequest& request) {
  if (!fn_) throw TransportError("callback backend has no completion function");
  return fn_(request.prompt);
}

}  // namespace byokg
