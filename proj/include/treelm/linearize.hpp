#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "treelm/html.hpp"
#include "treelm/vocab.hpp"
#include "treelm/window.hpp"

namespace treelm {

// Column layout of the per-token position matrix.
enum PosFeature : int {
  kPosNode = 0,     // window-local node index, 1-based; 0 = non-DOM token
  kPosParent = 1,   // parent's node index, or 0 when absent / out of window
  kPosSibling = 2,  // 1-based rank among in-window siblings with the same parent
  kPosDepth = 3,    // depth in the document tree, root = 0
  kPosTag = 4,      // tag id from the vocab tag table; 0 = non-DOM / unknown
  kPosToken = 5,    // sequential token position
};

using PosRow = std::array<int32_t, 6>;

struct PositionTableSizes {
  int max_nodes = 512;  // caps P0, P1, P2
  int max_depth = 64;   // caps P3
  int num_tags = 1;     // caps P4; vocab-derived (observed tags + sentinel)
  int max_len = 1024;   // caps P5 and the assembled QA input length
};

struct PositionedSequence {
  std::vector<TokenId> tokens;
  std::vector<PosRow> pos;
  std::map<NodeId, int> node_anchor;                  // node -> index of its tag token
  std::map<NodeId, std::pair<int, int>> node_ranges;  // node -> [begin, end)
  std::string doc_id;
  int window_index = 0;
  // First index of the answerable region: document tokens plus the optional
  // YES/NO markers. 0 for plain (non-QA) sequences.
  int region_begin = 0;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Concatenates the window's nodes in preorder and fills the position matrix.
// Throws MissingTokenization when a window node has no tokenization entry.
PositionedSequence linearize(const Subtree& window, const DomTree& tree,
                             const std::vector<TokenizedNode>& toks, const Vocab& vocab,
                             const PositionTableSizes& sizes, const std::string& doc_id = "");

// Builds a QA input: question ++ [QSEP] ++ (optional [YES] [NO]) ++ document.
// Prefix tokens carry sentinel positions (P0..P4 = 0); P5 is renumbered over
// the result; node maps shift by the prefix length.
// Throws SequenceTooLong when the result exceeds sizes.max_len.
PositionedSequence assemble_qa_input(const std::vector<TokenId>& question,
                                     const PositionedSequence& seq, bool add_yes_no,
                                     const PositionTableSizes& sizes);

// JSON Lines persistence for preprocessed examples.
std::string to_jsonl(const PositionedSequence& seq);
PositionedSequence sequence_from_jsonl(const std::string& line);

}  // namespace treelm
