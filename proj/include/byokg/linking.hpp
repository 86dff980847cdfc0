#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "byokg/graph_store.hpp"

namespace byokg {

enum class MentionSource { extracted, draft_answer };

struct Mention {
  std::string text;
  MentionSource source = MentionSource::extracted;
};

enum class LinkMethod { string_match, embedding };
enum class LinkMode { string_match, embedding, both };

struct LinkedEntity {
  std::string entity_id;
  Mention mention;
  LinkMethod method;
  double score;  // in [0, 1]
  int rank;      // 1-based within (mention, method)
};

// Batch embedder: one vector per input text, all the same dimension.
using Embedder = std::function<std::vector<std::vector<double>>(const std::vector<std::string>&)>;

struct LinkingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexBuildError : LinkingError {
  explicit IndexBuildError(const std::string& msg, std::vector<std::string> failed = {})
      : LinkingError(msg), failed_names(std::move(failed)) {}
  std::vector<std::string> failed_names;
};

// Precomputed unit vectors for every entity, keyed by entity id. Entities
// sharing a display name share one vector.
class EmbeddingIndex {
 public:
  static EmbeddingIndex build(const GraphStore& store, const Embedder& embedder, std::string provider_tag = "");

  const std::vector<double>* vector_for(const std::string& entity_id) const;
  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return order_.size(); }
  const std::string& provider_tag() const { return provider_tag_; }
  // Entity ids in store insertion order (stable scoring order).
  const std::vector<std::string>& entity_ids() const { return order_; }

 private:
  std::size_t dimension_ = 0;
  std::string provider_tag_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct LinkOptions {
  int top_m = 3;
  LinkMode mode = LinkMode::string_match;
  double string_score_floor = 0.4;
  // Required when mode involves embeddings.
  const EmbeddingIndex* index = nullptr;
  Embedder embedder;
};

// Links each mention to its top-m candidate entities. In `both` mode the two
// candidate lists are merged per mention, deduplicated by entity id keeping
// the higher-scored record. Results keep mention order, then rank order.
std::vector<LinkedEntity> link_mentions(std::span<const Mention> mentions, const GraphStore& store,
                                        const LinkOptions& options = {});

// Similarity used for string linking, exposed for direct scoring.
double string_link_score(std::string_view mention, std::string_view entity_name);

// Deterministic locally-computable embedder over hashed character trigrams;
// output is L2-normalized. Stands in for a neural text encoder.
Embedder hashing_embedder(std::size_t dimension = 64);

double cosine(const std::vector<double>& a, const std::vector<double>& b);
void l2_normalize(std::vector<double>& v);

}  // namespace byokg
