#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace byokg {

struct PromptError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Named prompt templates. The compiled-in set comes from assets/prompts/;
// from_directory() overlays <dir>/<name>.txt files over the builtin ones so
// deployments can tune wording without rebuilding. Templates are stored with
// trailing whitespace trimmed.
class PromptLibrary {
 public:
  static const PromptLibrary& builtin();
  static PromptLibrary from_directory(const std::filesystem::path& dir);

  const std::string& get(std::string_view name) const;  // throws PromptError for unknown names
  bool has(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::string> templates_;
};

// Replaces every occurrence of "{key}" for the given key/value pairs.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& replacements);

}  // namespace byokg
