#include "treelm/window.hpp"

#include <algorithm>
#include <unordered_set>

#include "treelm/error.hpp"

namespace treelm {

namespace {

enum class Membership : uint8_t { Out, Visited, New };

}  // namespace

WindowingResult generate_subtrees(const DomTree& tree, const std::vector<int>& counts,
                                  const WindowConfig& cfg) {
  const int64_t M = cfg.max_tokens;
  const int64_t S = cfg.stride;
  if (M < 1) throw Error::budget_too_small("max_tokens must be >= 1");
  if (S < 1 || S > M) throw Error::invalid_stride("stride must satisfy 1 <= S <= M");
  const int n = static_cast<int>(tree.size());
  if (counts.size() != static_cast<size_t>(n))
    throw Error::missing_tokenization("counts size does not match tree size");

  WindowingResult result;
  std::vector<int64_t> c(counts.begin(), counts.end());
  for (int i = 0; i < n; ++i) {
    if (c[i] > M) {
      if (cfg.oversize == OversizePolicy::Error)
        throw Error::budget_too_small("node " + std::to_string(i) + " has " + std::to_string(c[i]) +
                                      " tokens, budget " + std::to_string(M));
      c[i] = M;
      result.truncated_nodes.push_back(i);
    }
  }
  if (n == 0) return result;

  std::vector<Membership> status(n, Membership::Out);
  std::vector<NodeId> fresh;  // the New list, in admission (preorder) order

  // First window: fill by preorder while the running total stays within M.
  int64_t length = 0;
  int next_pre = 0;
  while (next_pre < n && length + c[next_pre] <= M) {
    fresh.push_back(next_pre);
    status[next_pre] = Membership::New;
    length += c[next_pre];
    ++next_pre;
  }

  auto first_in_window = [&](NodeId upto) -> NodeId {
    for (NodeId i = 0; i <= upto; ++i)
      if (status[i] != Membership::Out) return i;
    return kNoNode;
  };

  while (!fresh.empty()) {
    NodeId last_admitted = fresh.back();

    // Prune visited nodes in postorder, stopping at the first new node or
    // once the window fits the budget (strict comparison, as in the
    // algorithm: an exactly-full window keeps pruning here).
    for (NodeId x : tree.postorder) {
      if (status[x] == Membership::New || length < M) break;
      if (status[x] == Membership::Visited) {
        status[x] = Membership::Out;
        length -= c[x];
      }
    }

    // Still over budget: drop the window root while it would not split the
    // tree, otherwise drop the most recently added node.
    while (length > M) {
      NodeId root = first_in_window(last_admitted);
      int in_window_children = 0;
      for (NodeId ch : tree.node(root).children)
        if (ch <= last_admitted && status[ch] != Membership::Out) ++in_window_children;
      if (in_window_children < 2) {
        if (status[root] == Membership::New)
          fresh.erase(std::find(fresh.begin(), fresh.end(), root));
        status[root] = Membership::Out;
        length -= c[root];
      } else if (!fresh.empty()) {
        NodeId last = fresh.back();
        fresh.pop_back();
        status[last] = Membership::Out;
        length -= c[last];
      } else {
        // Degenerate: no new nodes left and the root cannot be removed.
        // Continue the postorder leaf pruning to restore the budget.
        for (NodeId x : tree.postorder) {
          if (length <= M) break;
          if (status[x] == Membership::Visited) {
            status[x] = Membership::Out;
            length -= c[x];
          }
        }
        break;
      }
    }

    Subtree window;
    window.window_index = static_cast<int>(result.windows.size());
    window.token_total = length;
    for (NodeId i = 0; i <= last_admitted; ++i)
      if (status[i] != Membership::Out) window.node_ids.push_back(i);
    result.windows.push_back(std::move(window));

    // Slide: everything admitted so far becomes visited; nodes pruned from the
    // tail of the new list re-enter through the next fill.
    NodeId slide_from = fresh.empty() ? last_admitted : fresh.back();
    for (NodeId i = 0; i <= last_admitted; ++i)
      if (status[i] == Membership::New) status[i] = Membership::Visited;
    // Reset membership: the next window recomputes Visited as all preorder
    // predecessors of the next new block.
    for (NodeId i = 0; i <= slide_from; ++i)
      if (status[i] == Membership::Out) status[i] = Membership::Visited;

    fresh.clear();
    int64_t fresh_tokens = 0;
    next_pre = slide_from + 1;
    while (next_pre < n) {
      if (fresh_tokens > S) break;
      fresh.push_back(next_pre);
      status[next_pre] = Membership::New;
      fresh_tokens += c[next_pre];
      ++next_pre;
    }
    length = fresh_tokens;
    for (NodeId i = 0; i <= slide_from; ++i)
      if (status[i] == Membership::Visited) length += c[i];
  }

  return result;
}

bool is_connected_window(const DomTree& tree, const std::vector<NodeId>& node_ids) {
  if (node_ids.empty()) return false;
  std::unordered_set<NodeId> in_set(node_ids.begin(), node_ids.end());
  NodeId root = *std::min_element(node_ids.begin(), node_ids.end());
  for (NodeId v : node_ids) {
    if (v == root) continue;
    NodeId p = tree.node(v).parent;
    if (p == kNoNode || !in_set.count(p)) return false;
  }
  return true;
}

CoverageStats coverage_report(const DomTree& tree, const std::vector<Subtree>& windows,
                              int64_t max_tokens) {
  CoverageStats stats;
  stats.appearances.assign(tree.size(), 0);
  for (const Subtree& w : windows) {
    for (NodeId v : w.node_ids) ++stats.appearances[static_cast<size_t>(v)];
    stats.max_token_total = std::max(stats.max_token_total, w.token_total);
    if (w.token_total > max_tokens) stats.all_within_budget = false;
    if (!is_connected_window(tree, w.node_ids)) stats.all_connected = false;
  }
  for (size_t i = 0; i < stats.appearances.size(); ++i)
    if (stats.appearances[i] == 0) stats.uncovered.push_back(static_cast<NodeId>(i));
  return stats;
}

}  // namespace treelm
