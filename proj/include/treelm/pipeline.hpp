#pragma once

#include <string>
#include <vector>

#include "treelm/corpus.hpp"
#include "treelm/heads.hpp"
#include "treelm/linearize.hpp"
#include "treelm/mask.hpp"
#include "treelm/vocab.hpp"
#include "treelm/window.hpp"

namespace treelm {

struct PipelineConfig {
  CleanConfig clean;
  WindowConfig window;
  PositionTableSizes tables;
};

// One document carried through clean -> tokenize -> window -> linearize.
struct ProcessedDoc {
  std::string doc_id;
  std::string website;
  std::string domain;
  std::string split;
  DomTree tree;
  std::vector<TokenizedNode> toks;
  std::vector<Subtree> windows;
  std::vector<PositionedSequence> seqs;  // one per window
};

ProcessedDoc process_doc(const std::string& html, const ManifestEntry& entry, const Vocab& vocab,
                         const PipelineConfig& cfg);

ProcessedDoc process_tree(DomTree tree, const ManifestEntry& entry, const Vocab& vocab,
                          const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Task examples
// ---------------------------------------------------------------------------

// Attribute extraction: every in-window node is classified (class 0 = None).
struct AttrExample {
  PositionedSequence seq;
  std::vector<NodeId> node_ids;
  std::vector<int> anchors;  // token index of each node's tag token
  std::vector<int> gold;     // class per node; empty when unlabeled
};

std::vector<AttrExample> build_attr_examples(const ProcessedDoc& doc, const GoldSet& gold);

// OpenIE: ordered pairs of distinct text-bearing nodes within one window.
struct PairCandidate {
  NodeId pred_node = 0, obj_node = 0;
  int pred_anchor = 0, obj_anchor = 0;
  OpenIETargets targets;
};

struct OpenIEExample {
  PositionedSequence seq;
  std::vector<PairCandidate> pairs;
};

struct OpenIEConfig {
  int max_pairs = 5000;        // deterministic preorder truncation
  int negative_ratio = 5;      // train-time negatives per positive
};

// Enumerates candidates and attaches targets; throws PairBudgetExceeded only
// when cap_error is set (the default policy truncates deterministically).
std::vector<OpenIEExample> build_openie_examples(const ProcessedDoc& doc, const GoldSet& gold,
                                                 const OpenIEConfig& cfg);

// QA: assembled question + window inputs with the gold span when present.
struct QAExample {
  PositionedSequence seq;  // question ++ QSEP ++ document window
  std::string question_id;
  std::string doc_id;
  int gold_start = -1, gold_end = -1;  // token indices; -1 when the window
                                       // does not contain the answer
};

std::vector<QAExample> build_qa_examples(const ProcessedDoc& doc, const GoldSet& gold,
                                         const Vocab& vocab, const PositionTableSizes& sizes);

// Detokenizes a token span back to text (word tokens joined with spaces).
std::string span_text(const PositionedSequence& seq, int start, int end, const Vocab& vocab);

}  // namespace treelm
