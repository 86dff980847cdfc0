#include "byokg/paths.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include "byokg/text.hpp"

namespace byokg {

namespace {

// Relation labels grouped by NFC-normalized form.
std::map<std::string, std::vector<std::string>> nfc_label_groups(const GraphStore& store) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const std::string& label : store.relation_labels()) {
    groups[text::nfc(label)].push_back(label);
  }
  return groups;
}

struct WalkState {
  std::vector<std::string> nodes;
  std::vector<std::string> relations;
  std::vector<HopDirection> directions;
};

}  // namespace

FollowResult follow_paths(std::span<const RelationPath> relation_paths, std::span<const std::string> source_ids,
                          const GraphStore& store, const FollowOptions& options) {
  FollowResult result;
  auto label_groups = nfc_label_groups(store);
  std::set<std::pair<std::vector<std::string>, std::vector<std::string>>> seen;

  for (std::size_t p = 0; p < relation_paths.size(); ++p) {
    const RelationPath& chain = relation_paths[p];
    if (chain.relations.empty()) continue;
    // Labels actually present in the store for each hop of this chain.
    std::vector<const std::vector<std::string>*> hop_labels;
    bool groundable = true;
    for (const std::string& rel : chain.relations) {
      auto it = label_groups.find(text::nfc(rel));
      if (it == label_groups.end()) {
        groundable = false;
        break;
      }
      hop_labels.push_back(&it->second);
    }
    if (!groundable) continue;

    for (const std::string& source : source_ids) {
      if (store.find(source) == nullptr) continue;
      std::size_t found = 0;
      bool truncated = false;
      // Depth-first grounding of the chain from this source.
      std::vector<WalkState> stack;
      stack.push_back(WalkState{{source}, {}, {}});
      while (!stack.empty()) {
        WalkState walk = std::move(stack.back());
        stack.pop_back();
        std::size_t depth = walk.relations.size();
        if (depth == chain.relations.size()) {
          if (found == options.per_source_cap) {
            truncated = true;
            break;
          }
          ++found;
          GroundedPath gp{walk.nodes, walk.relations, walk.directions};
          if (seen.insert(gp.key()).second) result.paths.push_back(std::move(gp));
          continue;
        }
        const std::string& cur = walk.nodes.back();
        const std::vector<std::string>& labels = *hop_labels[depth];
        // Pushed in reverse so edges pop in insertion order, inverse after forward.
        std::vector<WalkState> next;
        for (const std::string& label : labels) {
          for (std::size_t idx : store.out_edges(cur)) {
            const Edge& e = store.edge(idx);
            if (e.triplet.relation != label) continue;
            WalkState w = walk;
            w.nodes.push_back(e.triplet.tail);
            w.relations.push_back(e.triplet.relation);
            w.directions.push_back(HopDirection::forward);
            next.push_back(std::move(w));
          }
          for (std::size_t idx : store.in_edges(cur)) {
            const Edge& e = store.edge(idx);
            if (e.triplet.relation != label) continue;
            WalkState w = walk;
            w.nodes.push_back(e.triplet.head);
            w.relations.push_back(e.triplet.relation);
            w.directions.push_back(HopDirection::inverse);
            next.push_back(std::move(w));
          }
        }
        for (auto it = next.rbegin(); it != next.rend(); ++it) stack.push_back(std::move(*it));
      }
      if (truncated) {
        result.cap_hit = true;
        result.warnings.push_back("grounding cap (" + std::to_string(options.per_source_cap) +
                                  ") reached for source \"" + source + "\" on relation path " + std::to_string(p + 1));
      }
    }
  }
  return result;
}

namespace {

constexpr int kUnreached = std::numeric_limits<int>::max();

// Unit-weight BFS distances over the undirected edge view.
std::unordered_map<std::string, int> bfs_distances(const GraphStore& store, const std::string& start, int limit) {
  std::unordered_map<std::string, int> dist;
  if (store.find(start) == nullptr) return dist;
  dist[start] = 0;
  std::deque<std::string> queue{start};
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    int d = dist[cur];
    if (d >= limit) continue;
    auto visit = [&](const std::string& nxt) {
      if (dist.emplace(nxt, d + 1).second) queue.push_back(nxt);
    };
    for (std::size_t idx : store.out_edges(cur)) visit(store.edge(idx).triplet.tail);
    for (std::size_t idx : store.in_edges(cur)) visit(store.edge(idx).triplet.head);
  }
  return dist;
}

int distance_of(const std::unordered_map<std::string, int>& dist, const std::string& id) {
  auto it = dist.find(id);
  return it == dist.end() ? kUnreached : it->second;
}

}  // namespace

std::vector<GroundedPath> shortest_paths(std::span<const std::string> source_ids,
                                         std::span<const std::string> target_ids, const GraphStore& store,
                                         int max_hops) {
  std::vector<std::string> sources(source_ids.begin(), source_ids.end());
  std::vector<std::string> targets(target_ids.begin(), target_ids.end());
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  std::unordered_map<std::string, std::unordered_map<std::string, int>> to_target;
  for (const std::string& t : targets) to_target[t] = bfs_distances(store, t, max_hops);

  std::vector<GroundedPath> result;
  std::set<std::pair<std::vector<std::string>, std::vector<std::string>>> seen;
  for (const std::string& s : sources) {
    if (store.find(s) == nullptr) continue;
    auto from_source = bfs_distances(store, s, max_hops);
    for (const std::string& t : targets) {
      if (store.find(t) == nullptr) continue;
      if (s == t) {
        GroundedPath gp{{s}, {}, {}};
        if (seen.insert(gp.key()).second) result.push_back(std::move(gp));
        continue;
      }
      const auto& dt = to_target.at(t);
      int total = distance_of(from_source, t);
      if (total == kUnreached || total > max_hops) continue;
      // Greedy reconstruction: at each step take the smallest next node id
      // that still lies on some shortest path, yielding the
      // lexicographically smallest node sequence overall.
      GroundedPath gp{{s}, {}, {}};
      std::string cur = s;
      for (int step = 1; step <= total; ++step) {
        std::string best_node;
        std::string best_label;
        HopDirection best_dir = HopDirection::forward;
        auto consider = [&](const std::string& nxt, const std::string& label, HopDirection dir) {
          if (distance_of(from_source, nxt) != step) return;
          if (distance_of(dt, nxt) != total - step) return;
          if (!best_node.empty() && nxt > best_node) return;
          bool same_node = nxt == best_node;
          if (same_node) {
            if (label > best_label) return;
            if (label == best_label && dir == HopDirection::inverse && best_dir == HopDirection::forward) return;
          }
          best_node = nxt;
          best_label = label;
          best_dir = dir;
        };
        for (std::size_t idx : store.out_edges(cur)) {
          const Edge& e = store.edge(idx);
          consider(e.triplet.tail, e.triplet.relation, HopDirection::forward);
        }
        for (std::size_t idx : store.in_edges(cur)) {
          const Edge& e = store.edge(idx);
          consider(e.triplet.head, e.triplet.relation, HopDirection::inverse);
        }
        gp.nodes.push_back(best_node);
        gp.relations.push_back(best_label);
        gp.directions.push_back(best_dir);
        cur = best_node;
      }
      if (seen.insert(gp.key()).second) result.push_back(std::move(gp));
    }
  }
  return result;
}

std::string verbalize_paths(const GraphStore& store, std::span<const GroundedPath> paths) {
  std::string out;
  for (const GroundedPath& p : paths) {
    if (p.nodes.empty()) continue;
    std::string line = store.display_name(p.nodes[0]);
    for (std::size_t i = 0; i < p.relations.size(); ++i) {
      line += " -> " + p.relations[i] + " -> " + store.display_name(p.nodes[i + 1]);
    }
    out += line + "\n";
  }
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

}  // namespace byokg
