#include "byokg/kg_linker.hpp"

#include <algorithm>
#include <set>

#include "byokg/text.hpp"

namespace byokg {

namespace {

constexpr std::string_view kFinishSentinel = "FINISH";

const PromptLibrary& library_for(const LinkerOptions& options) {
  return options.prompts ? *options.prompts : PromptLibrary::builtin();
}

std::vector<std::string> task_section_names(bool with_context) {
  return {with_context ? "relevant_entity_extraction" : "entity_extraction", "path_identification",
          "query_generation", "draft_answer"};
}

std::string task_section(const PromptLibrary& lib, const std::string& name, const LinkerOptions& options) {
  std::string section = lib.get(name);
  if (name == "query_generation") {
    section = fill_template(section, {{"query_language", options.query_language}});
  }
  return section;
}

}  // namespace

PromptBundle build_prompt(const std::string& question, const Schema& schema,
                          const std::optional<std::string>& context_text, const LinkerOptions& options) {
  const PromptLibrary& lib = library_for(options);
  PromptBundle bundle;
  bundle.question = question;
  bundle.schema_text = schema.to_text();
  bundle.context_text = context_text.value_or("");

  bool with_context = !bundle.context_text.empty();
  std::vector<std::string> sections;
  for (const std::string& name : task_section_names(with_context)) {
    sections.push_back(task_section(lib, name, options));
  }
  bundle.task_text = text::join(sections, "\n\n");

  std::string footer = fill_template(lib.get("kg_linker_footer"), {{"question", bundle.question},
                                                                   {"schema", bundle.schema_text},
                                                                   {"graph_context", bundle.context_text}});
  bundle.text = lib.get("kg_linker_header") + "\n\n" + bundle.task_text + "\n\n" + footer;
  return bundle;
}

std::optional<std::string> extract_tag_block(std::string_view response, std::string_view tag) {
  std::string open = "<" + std::string(tag) + ">";
  std::string close = "</" + std::string(tag) + ">";
  auto find_ci = [&](std::string_view needle, std::size_t from) -> std::size_t {
    if (from > response.size()) return std::string_view::npos;
    for (std::size_t i = from; i + needle.size() <= response.size(); ++i) {
      bool hit = true;
      for (std::size_t j = 0; j < needle.size(); ++j) {
        if (std::tolower(static_cast<unsigned char>(response[i + j])) !=
            std::tolower(static_cast<unsigned char>(needle[j]))) {
          hit = false;
          break;
        }
      }
      if (hit) return i;
    }
    return std::string_view::npos;
  };
  std::size_t start = find_ci(open, 0);
  if (start == std::string_view::npos) return std::nullopt;
  std::size_t body = start + open.size();
  std::size_t end = find_ci(close, body);
  if (end == std::string_view::npos) end = response.size();
  return std::string(response.substr(body, end - body));
}

namespace {

std::vector<std::string> nonblank_lines(std::string_view block) {
  std::vector<std::string> out;
  for (const std::string& raw : text::split_lines(block)) {
    std::string line = text::trim(raw);
    if (!line.empty()) out.push_back(std::move(line));
  }
  return out;
}

std::vector<std::string> dedup_preserving_order(std::vector<std::string> items) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (auto& item : items) {
    if (seen.insert(item).second) out.push_back(std::move(item));
  }
  return out;
}

}  // namespace

GraphArtifacts parse_response(std::string_view response) {
  GraphArtifacts artifacts;

  if (auto block = extract_tag_block(response, "entities")) {
    std::vector<std::string> lines = nonblank_lines(*block);
    if (lines.size() == 1 && lines[0] == kFinishSentinel) {
      artifacts.finished = true;
    } else {
      std::erase(lines, std::string(kFinishSentinel));
      artifacts.entities = dedup_preserving_order(std::move(lines));
    }
  }

  if (auto block = extract_tag_block(response, "paths")) {
    std::set<std::vector<std::string>> seen;
    for (const std::string& line : nonblank_lines(*block)) {
      RelationPath path;
      std::size_t start = 0;
      while (start <= line.size()) {
        std::size_t arrow = line.find("->", start);
        std::string part = text::trim(arrow == std::string::npos ? line.substr(start)
                                                                 : line.substr(start, arrow - start));
        if (!part.empty()) path.relations.push_back(std::move(part));
        if (arrow == std::string::npos) break;
        start = arrow + 2;
      }
      if (!path.relations.empty() && seen.insert(path.relations).second) {
        artifacts.paths.push_back(std::move(path));
      }
    }
  }

  if (auto block = extract_tag_block(response, "opencypher")) {
    std::string query = text::trim(*block);
    if (!query.empty()) artifacts.query = std::move(query);
  }

  auto answers = extract_tag_block(response, "answers");
  if (!answers) answers = extract_tag_block(response, "answer");
  if (answers) artifacts.draft_answers = dedup_preserving_order(nonblank_lines(*answers));

  return artifacts;
}

std::string render_response(const GraphArtifacts& artifacts) {
  std::string out = "<entities>\n";
  if (artifacts.finished) {
    out += std::string(kFinishSentinel) + "\n";
  } else {
    for (const auto& e : artifacts.entities) out += e + "\n";
  }
  out += "</entities>\n\n<paths>\n";
  for (const auto& p : artifacts.paths) out += text::join(p.relations, " -> ") + "\n";
  out += "</paths>\n\n<opencypher>\n";
  if (artifacts.query) out += *artifacts.query + "\n";
  out += "</opencypher>\n\n<answers>\n";
  for (const auto& a : artifacts.draft_answers) out += a + "\n";
  out += "</answers>";
  return out;
}

GraphArtifacts generate_artifacts(const std::string& question, const Schema& schema,
                                  const std::optional<std::string>& context_text, LlmBackend& backend,
                                  const LinkerOptions& options) {
  auto call = [&backend](const std::string& prompt, const std::string& stage) {
    LlmRequest request{prompt, stage};
    try {
      return backend.complete(request);
    } catch (const TransportError&) {
      return backend.complete(request);  // one retry
    }
  };

  if (!options.per_task_calls) {
    PromptBundle bundle = build_prompt(question, schema, context_text, options);
    return parse_response(call(bundle.text, "linker"));
  }

  // One prompt per task; each response is parsed for just its own block.
  const PromptLibrary& lib = library_for(options);
  bool with_context = context_text.has_value() && !context_text->empty();
  std::string footer = fill_template(lib.get("kg_linker_footer"), {{"question", question},
                                                                   {"schema", schema.to_text()},
                                                                   {"graph_context", context_text.value_or("")}});
  GraphArtifacts combined;
  for (const std::string& name : task_section_names(with_context)) {
    std::string prompt =
        lib.get("kg_linker_header") + "\n\n" + task_section(lib, name, options) + "\n\n" + footer;
    GraphArtifacts part = parse_response(call(prompt, "linker." + name));
    if (name == "entity_extraction" || name == "relevant_entity_extraction") {
      combined.entities = std::move(part.entities);
      combined.finished = part.finished;
    } else if (name == "path_identification") {
      combined.paths = std::move(part.paths);
    } else if (name == "query_generation") {
      combined.query = std::move(part.query);
    } else {
      combined.draft_answers = std::move(part.draft_answers);
    }
  }
  return combined;
}

}  // namespace byokg
