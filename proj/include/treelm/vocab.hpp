#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "treelm/html.hpp"

namespace treelm {

using TokenId = int32_t;

// Special token ids; fixed, always the first six vocabulary entries.
enum Special : TokenId {
  kPad = 0,
  kUnk = 1,
  kMask = 2,
  kYes = 3,
  kNo = 4,
  kQSep = 5,
  kNumSpecials = 6,
};

// Label value marking positions that carry no prediction target.
constexpr TokenId kIgnoreLabel = -1;

// Word-level vocabulary. Non-special entries are either "<tag>" tokens (one
// per HTML tag observed at build time) or normalized words, ordered by
// descending frequency then lexicographically, so two corpora with identical
// counts produce identical id assignments.
class Vocab {
 public:
  Vocab() = default;

  TokenId id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }
  const std::string& token(TokenId id) const { return id_to_token_.at(static_cast<size_t>(id)); }
  TokenId size() const { return static_cast<TokenId>(id_to_token_.size()); }

  TokenId tag_token_id(const std::string& tag) const { return id(tag_token(tag)); }
  static std::string tag_token(const std::string& tag) { return "<" + tag + ">"; }

  // Tag position-feature ids (the P4 table): 0 is the sentinel for non-DOM
  // tokens and unknown tags; observed tags get 1..num_tags in lexicographic
  // order. This id space is separate from the word-token ids above.
  int tag_position_id(const std::string& tag) const {
    auto it = tag_pos_.find(tag);
    return it == tag_pos_.end() ? 0 : it->second;
  }
  int num_tag_ids() const { return static_cast<int>(tag_pos_.size()) + 1; }  // +1 sentinel

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  // Used by the builder and loader.
  void set_entries(std::vector<std::string> tokens);

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> tag_pos_;
};

// Splits normalized text into word tokens: lowercased, whitespace-separated,
// punctuation emitted as single-character tokens.
std::vector<std::string> split_words(const std::string& text);

// Builds a vocabulary over cleaned trees. Words below min_freq are dropped
// (they map to UNK at tokenize time); "<tag>" entries are always kept.
// Throws Error(EmptyCorpus) when no tree yields any token.
Vocab build_vocab(const std::vector<const DomTree*>& corpus, int min_freq);

struct TokenizedNode {
  NodeId node_id = 0;
  std::vector<TokenId> tokens;  // [tag] ++ attr tokens ++ text tokens
  // Spans partition tokens: [tag_begin, tag_end) etc.; tag span is always [0,1).
  int attr_begin = 1, attr_end = 1;
  int text_begin = 1, text_end = 1;
  int count() const { return static_cast<int>(tokens.size()); }
};

TokenizedNode tokenize_node(const DomNode& node, const Vocab& vocab);

// Tokenizes every node of a tree; index in the result equals node_id.
std::vector<TokenizedNode> tokenize_tree(const DomTree& tree, const Vocab& vocab);

}  // namespace treelm
