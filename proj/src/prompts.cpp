#include "byokg/prompts.hpp"

#include <fstream>
#include <sstream>

namespace byokg {

namespace {

struct NamedTemplate {
  const char* name;
  const char* text;
};

const NamedTemplate kBuiltinTemplates[] = {
#include "prompts_data.inc"
};

std::string rtrim(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

}  // namespace

const PromptLibrary& PromptLibrary::builtin() {
  static const PromptLibrary lib = [] {
    PromptLibrary l;
    for (const NamedTemplate& t : kBuiltinTemplates) l.templates_[t.name] = rtrim(t.text);
    return l;
  }();
  return lib;
}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
  PromptLibrary lib = builtin();
  if (!std::filesystem::is_directory(dir)) {
    throw PromptError("prompt directory does not exist: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    if (!in) throw PromptError("cannot read prompt file: " + entry.path().string());
    std::ostringstream buf;
    buf << in.rdbuf();
    lib.templates_[entry.path().stem().string()] = rtrim(buf.str());
  }
  return lib;
}

const std::string& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(std::string(name));
  if (it == templates_.end()) throw PromptError("unknown prompt template: " + std::string(name));
  return it->second;
}

bool PromptLibrary::has(std::string_view name) const { return templates_.count(std::string(name)) > 0; }

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  out.reserve(templates_.size());
  for (const auto& [name, _] : templates_) out.push_back(name);
  return out;
}

std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& replacements) {
  std::string out(tmpl);
  for (const auto& [key, value] : replacements) {
    std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

}  // namespace byokg
