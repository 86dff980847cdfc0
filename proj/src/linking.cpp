#include "byokg/linking.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "byokg/text.hpp"

namespace byokg {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void l2_normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) return;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
}

double string_link_score(std::string_view mention, std::string_view entity_name) {
  if (text::normalize_key(mention) == text::normalize_key(entity_name)) return 1.0;
  return text::token_set_ratio(mention, entity_name);
}

Embedder hashing_embedder(std::size_t dimension) {
  if (dimension == 0) throw LinkingError("hashing embedder dimension must be positive");
  return [dimension](const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) {
      std::vector<double> v(dimension, 0.0);
      std::string padded = "^" + text::normalize_key(t) + "$";
      std::vector<char32_t> cps = text::utf8_codepoints(padded);
      if (cps.size() < 3) {
        v[0] = 1.0;  // degenerate input gets a fixed unit spike
      } else {
        for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
          std::string gram;
          for (std::size_t j = i; j < i + 3; ++j) {
            char32_t cp = cps[j];
            gram.append(reinterpret_cast<const char*>(&cp), sizeof(cp));
          }
          std::uint64_t h = text::fnv1a64(gram);
          double sign = (h & 0x8000000000000000ull) ? -1.0 : 1.0;
          v[h % dimension] += sign;
        }
      }
      l2_normalize(v);
      if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
      out.push_back(std::move(v));
    }
    return out;
  };
}

EmbeddingIndex EmbeddingIndex::build(const GraphStore& store, const Embedder& embedder, std::string provider_tag) {
  if (!embedder) throw IndexBuildError("no embedder provided");
  EmbeddingIndex index;
  index.provider_tag_ = std::move(provider_tag);

  // Embed distinct names once; entities sharing a name share the vector.
  std::vector<std::string> names;
  std::map<std::string, std::size_t> name_slot;
  for (const Entity& e : store.entities()) {
    std::string key = text::normalize_key(e.name);
    if (name_slot.emplace(key, names.size()).second) names.push_back(key);
  }
  std::vector<std::vector<double>> vectors = embedder(names);
  if (vectors.size() != names.size()) {
    throw IndexBuildError("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                          std::to_string(names.size()) + " names");
  }
  std::vector<std::string> failed;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].empty()) {
      failed.push_back(names[i]);
      continue;
    }
    if (index.dimension_ == 0) index.dimension_ = vectors[i].size();
    if (vectors[i].size() != index.dimension_) {
      failed.push_back(names[i]);
      continue;
    }
    l2_normalize(vectors[i]);
    bool zero = std::all_of(vectors[i].begin(), vectors[i].end(), [](double x) { return x == 0.0; });
    if (zero) failed.push_back(names[i]);
  }
  if (!failed.empty()) {
    std::string msg = "embedding index build failed for " + std::to_string(failed.size()) + " name(s): ";
    for (std::size_t i = 0; i < failed.size() && i < 5; ++i) {
      if (i) msg += ", ";
      msg += "\"" + failed[i] + "\"";
    }
    throw IndexBuildError(msg, failed);
  }
  for (const Entity& e : store.entities()) {
    index.order_.push_back(e.id);
    index.vectors_[e.id] = vectors[name_slot.at(text::normalize_key(e.name))];
  }
  return index;
}

const std::vector<double>* EmbeddingIndex::vector_for(const std::string& entity_id) const {
  auto it = vectors_.find(entity_id);
  return it == vectors_.end() ? nullptr : &it->second;
}

namespace {

struct Candidate {
  const std::string* entity_id;
  double raw;          // ranking key (string score, or raw cosine)
  bool exact = false;  // exact normalized-name match; wins score ties
};

std::vector<LinkedEntity> top_m_candidates(std::vector<Candidate> candidates, const Mention& mention,
                                           LinkMethod method, int top_m, bool clamp_to_unit) {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.raw != b.raw) return a.raw > b.raw;
    if (a.exact != b.exact) return a.exact;
    return *a.entity_id < *b.entity_id;
  });
  std::vector<LinkedEntity> out;
  int limit = std::min<int>(top_m, static_cast<int>(candidates.size()));
  for (int i = 0; i < limit; ++i) {
    // Cosine of two unit vectors can drift a few ulps past +/-1; keep the
    // published score inside [0, 1] so exact string matches win merge ties.
    double score = clamp_to_unit ? std::clamp(candidates[i].raw, 0.0, 1.0) : candidates[i].raw;
    out.push_back(LinkedEntity{*candidates[i].entity_id, mention, method, score, i + 1});
  }
  return out;
}

}  // namespace

std::vector<LinkedEntity> link_mentions(std::span<const Mention> mentions, const GraphStore& store,
                                        const LinkOptions& options) {
  if (options.top_m <= 0) throw LinkingError("top_m must be positive");
  bool use_string = options.mode == LinkMode::string_match || options.mode == LinkMode::both;
  bool use_embedding = options.mode == LinkMode::embedding || options.mode == LinkMode::both;
  if (use_embedding) {
    if (options.index == nullptr) throw LinkingError("embedding link mode requires a prebuilt embedding index");
    if (!options.embedder) throw LinkingError("embedding link mode requires an embedder for mention texts");
  }

  std::vector<LinkedEntity> result;
  for (const Mention& mention : mentions) {
    std::vector<LinkedEntity> merged;
    if (use_string) {
      std::string mention_key = text::normalize_key(mention.text);
      std::vector<Candidate> candidates;
      for (const Entity& e : store.entities()) {
        bool exact = text::normalize_key(e.name) == mention_key;
        double s = exact ? 1.0 : text::token_set_ratio(mention.text, e.name);
        if (s >= options.string_score_floor) candidates.push_back({&e.id, s, exact});
      }
      merged = top_m_candidates(std::move(candidates), mention, LinkMethod::string_match, options.top_m, false);
    }
    if (use_embedding) {
      std::vector<std::vector<double>> q = options.embedder({text::normalize_key(mention.text)});
      if (q.size() != 1 || q[0].size() != options.index->dimension()) {
        throw LinkingError("embedder returned an incompatible vector for mention \"" + mention.text + "\"");
      }
      l2_normalize(q[0]);
      std::vector<Candidate> candidates;
      for (const std::string& id : options.index->entity_ids()) {
        candidates.push_back({&id, cosine(q[0], *options.index->vector_for(id))});
      }
      std::vector<LinkedEntity> emb =
          top_m_candidates(std::move(candidates), mention, LinkMethod::embedding, options.top_m, true);
      // Merge, keeping the higher-scored record per entity id.
      for (auto& candidate : emb) {
        auto it = std::find_if(merged.begin(), merged.end(),
                               [&](const LinkedEntity& le) { return le.entity_id == candidate.entity_id; });
        if (it == merged.end()) {
          merged.push_back(std::move(candidate));
        } else if (candidate.score > it->score) {
          *it = std::move(candidate);
        }
      }
    }
    for (auto& le : merged) result.push_back(std::move(le));
  }
  return result;
}

}  // namespace byokg
