#pragma once

#include <map>
#include <string>
#include <vector>

#include "treelm/html.hpp"

namespace treelm {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Attribute extraction predictions / gold: attribute 0 is None and never
// appears in either set.
struct AttrTriple {
  std::string doc_id;
  NodeId node_id = 0;
  int attribute = 0;

  bool operator<(const AttrTriple& o) const {
    if (doc_id != o.doc_id) return doc_id < o.doc_id;
    if (node_id != o.node_id) return node_id < o.node_id;
    return attribute < o.attribute;
  }
  bool operator==(const AttrTriple& o) const {
    return doc_id == o.doc_id && node_id == o.node_id && attribute == o.attribute;
  }
};

// Micro-averaged F1 over extraction decisions. Duplicates are deduplicated.
// Empty/empty scores 1; one side empty scores 0.
PRF value_f1(std::vector<AttrTriple> preds, std::vector<AttrTriple> gold);

// Page-level score: a (doc, attribute) counts as a hit when any predicted
// node for it is in gold. Per-attribute precision/recall over pages,
// macro-averaged F1 over attributes.
struct PageF1Report {
  std::map<int, PRF> per_attribute;
  PRF macro;
};
PageF1Report page_f1(std::vector<AttrTriple> preds, std::vector<AttrTriple> gold);

struct PairPred {
  std::string doc_id;
  NodeId pred_node = 0;
  NodeId obj_node = 0;
  std::string pred_surface;  // predicate node text
  double score = 0.0;
};

struct PairGold {
  std::string doc_id;
  NodeId pred_node = 0;
  NodeId obj_node = 0;
  std::vector<std::string> acceptable;  // acceptable predicate surface forms
};

// Lenient pair scoring: a prediction is correct when its object node matches
// a gold pair and its predicate surface form matches (case-insensitive,
// whitespace-normalized) one of that pair's acceptable forms.
PRF pair_f1_lenient(std::vector<PairPred> preds, const std::vector<PairGold>& gold);

struct QAScore {
  double em = 0.0;
  double f1 = 0.0;
};

// Normalization: lowercase, strip punctuation, collapse whitespace. EM is
// exact match against any gold; F1 is the best token-bag overlap.
QAScore qa_em_f1(const std::string& pred, const std::vector<std::string>& golds);

// Shared with the lenient matcher and QA scoring.
std::string normalize_answer(const std::string& s);

}  // namespace treelm
