#pragma once

#include <cstdint>
#include <vector>

#include "treelm/html.hpp"

namespace treelm {

struct Subtree {
  std::vector<NodeId> node_ids;  // strictly increasing (document preorder)
  int64_t token_total = 0;
  int window_index = 0;
};

enum class OversizePolicy {
  Truncate,  // nodes larger than the budget count as exactly the budget
  Error,     // throw BudgetTooSmall instead
};

struct WindowConfig {
  int64_t max_tokens = 512;  // M
  int64_t stride = 128;      // S
  OversizePolicy oversize = OversizePolicy::Truncate;
};

struct WindowingResult {
  std::vector<Subtree> windows;
  std::vector<NodeId> truncated_nodes;  // nodes whose counts were clamped to M
};

// Splits a tree into overlapping connected subtrees under the token budget.
//
// Window construction walks the preorder once: the first window admits nodes
// while the running total stays within M; every later step admits nodes until
// their token sum exceeds S (the node that crosses S is still admitted, which
// guarantees progress), then restores the budget by pruning. Pruning first
// removes previously visited nodes in postorder order, stopping at the first
// newly added node or once the window fits; if the window is still too large
// it removes the window root while that root has fewer than two in-window
// children, and otherwise removes the most recently added node.
//
// counts[i] is the token count of node i (from tokenize_node).
// Throws InvalidStride when S < 1 or S > M, BudgetTooSmall when M < 1 or an
// oversized node is found under the Error policy.
WindowingResult generate_subtrees(const DomTree& tree, const std::vector<int>& counts,
                                  const WindowConfig& cfg);

struct CoverageStats {
  std::vector<int> appearances;      // per node_id
  std::vector<NodeId> uncovered;     // nodes with zero appearances
  int64_t max_token_total = 0;
  bool all_connected = true;
  bool all_within_budget = true;
};

CoverageStats coverage_report(const DomTree& tree, const std::vector<Subtree>& windows,
                              int64_t max_tokens);

// True when the induced graph (parent links restricted to the set) is a single
// tree rooted at the minimum-preorder node.
bool is_connected_window(const DomTree& tree, const std::vector<NodeId>& node_ids);

}  // namespace treelm
