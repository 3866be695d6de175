#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace treelm {

using NodeId = int32_t;
constexpr NodeId kNoNode = -1;

// ---------------------------------------------------------------------------
// Raw parse tree: every element/text/comment node as found in the source,
// after HTML5-style error recovery (implied html/head/body, implied end tags,
// void elements). Script/style/comment content is preserved here; cleaning
// happens in a separate pass.
// ---------------------------------------------------------------------------

enum class RawKind { Element, Text, Comment };

struct RawNode {
  RawKind kind = RawKind::Element;
  std::string tag;   // lowercase; empty for text/comment
  std::string text;  // text or comment payload
  std::vector<std::pair<std::string, std::string>> attrs;
  int parent = -1;
  std::vector<int> children;
};

struct RawDom {
  std::vector<RawNode> nodes;  // nodes[0] is the document root element (html)
  int root = 0;
};

// Parses HTML bytes into a RawDom. Tolerates malformed markup: unmatched end
// tags are dropped, unterminated elements are closed at EOF, and the
// html/head/body scaffolding is synthesized when absent.
// Throws Error(Encoding) on invalid UTF-8.
RawDom parse_html(const std::string& raw);

// Convenience: read a file and parse it. Throws Error(Io) on unreadable input.
RawDom parse_html_file(const std::string& path);

// ---------------------------------------------------------------------------
// Cleaned DOM tree
// ---------------------------------------------------------------------------

struct CleanConfig {
  // Subtrees rooted at these tags are deleted entirely.
  std::vector<std::string> removed_tags = {"script", "style", "noscript", "iframe"};
  // Attribute names surviving the cleaning pass, in this priority order.
  std::vector<std::string> kept_attrs = {"class", "id"};
  // Attribute values are capped at this many whitespace-separated words.
  int max_attr_words = 64;
};

struct DomNode {
  NodeId node_id = 0;  // preorder rank in the cleaned tree
  std::string tag;
  std::vector<std::pair<std::string, std::string>> attrs;  // kept set only
  std::string text;  // direct text children, whitespace-normalized
  NodeId parent = kNoNode;
  std::vector<NodeId> children;
};

struct DomTree {
  std::vector<DomNode> nodes;  // indexed by node_id
  NodeId root = 0;
  std::vector<NodeId> preorder;   // preorder[i] == i by construction
  std::vector<NodeId> postorder;

  size_t size() const { return nodes.size(); }
  const DomNode& node(NodeId id) const { return nodes[static_cast<size_t>(id)]; }
  int depth(NodeId id) const;  // root depth 0
  // XPath-like absolute path, e.g. "/html/body/table/tr[2]/td"; the sibling
  // index counts same-tag siblings and is omitted when unambiguous.
  std::string tag_path(NodeId id) const;
};

// Removes configured tags and comments, drops non-kept attributes, normalizes
// whitespace, prunes fully contentless leaves, and renumbers nodes as preorder
// ranks. Throws Error(EmptyDocument) when nothing remains.
DomTree clean(const RawDom& raw, const CleanConfig& cfg = {});

// Serializes a cleaned tree back to HTML (used by round-trip tests).
std::string serialize(const DomTree& tree);

// Collapses whitespace runs to single spaces and trims the ends.
std::string normalize_ws(const std::string& s);

}  // namespace treelm
