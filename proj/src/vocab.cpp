#include "treelm/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "treelm/error.hpp"

namespace treelm {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && !std::isalnum(c)) {
      // ASCII punctuation becomes its own single-character token.
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

void Vocab::set_entries(std::vector<std::string> tokens) {
  id_to_token_ = std::move(tokens);
  token_to_id_.clear();
  tag_pos_.clear();
  for (size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_[id_to_token_[i]] = static_cast<TokenId>(i);

  // Derive the P4 tag-id table from the "<tag>" entries, lexicographic order.
  std::vector<std::string> tags;
  for (size_t i = kNumSpecials; i < id_to_token_.size(); ++i) {
    const std::string& t = id_to_token_[i];
    if (t.size() >= 3 && t.front() == '<' && t.back() == '>')
      tags.push_back(t.substr(1, t.size() - 2));
  }
  std::sort(tags.begin(), tags.end());
  for (size_t i = 0; i < tags.size(); ++i) tag_pos_[tags[i]] = static_cast<int>(i) + 1;
}

Vocab build_vocab(const std::vector<const DomTree*>& corpus, int min_freq) {
  if (min_freq < 1) throw Error::config_invalid("min_freq must be >= 1");
  std::unordered_map<std::string, int64_t> word_freq;
  std::unordered_map<std::string, int64_t> tag_freq;
  for (const DomTree* tree : corpus) {
    for (const DomNode& n : tree->nodes) {
      ++tag_freq[Vocab::tag_token(n.tag)];
      for (const auto& a : n.attrs) {
        for (const auto& w : split_words(a.first)) ++word_freq[w];
        for (const auto& w : split_words(a.second)) ++word_freq[w];
      }
      for (const auto& w : split_words(n.text)) ++word_freq[w];
    }
  }
  if (tag_freq.empty()) throw Error::empty_corpus("no nodes in corpus");

  struct Entry {
    std::string token;
    int64_t freq;
  };
  std::vector<Entry> entries;
  entries.reserve(tag_freq.size() + word_freq.size());
  for (auto& [t, f] : tag_freq) entries.push_back({t, f});
  for (auto& [w, f] : word_freq)
    if (f >= min_freq) entries.push_back({w, f});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    return a.token < b.token;
  });

  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[MASK]", "[YES]", "[NO]", "[QSEP]"};
  for (auto& e : entries) tokens.push_back(std::move(e.token));
  Vocab v;
  v.set_entries(std::move(tokens));
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error::io("cannot write " + path);
  f << "# one token per line; non-comment line number = token id\n";
  f << "# specials: 0=[PAD] 1=[UNK] 2=[MASK] 3=[YES] 4=[NO] 5=[QSEP]\n";
  for (const auto& t : id_to_token_) f << t << "\n";
  if (!f) throw Error::io("write failure on " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error::missing_file("cannot open vocab " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    tokens.push_back(line);
  }
  if (tokens.size() < kNumSpecials)
    throw Error::schema("vocab file too short: " + path);
  Vocab v;
  v.set_entries(std::move(tokens));
  return v;
}

TokenizedNode tokenize_node(const DomNode& node, const Vocab& vocab) {
  TokenizedNode out;
  out.node_id = node.node_id;
  out.tokens.push_back(vocab.tag_token_id(node.tag));
  out.attr_begin = 1;
  for (const auto& a : node.attrs) {
    for (const auto& w : split_words(a.first)) out.tokens.push_back(vocab.id(w));
    for (const auto& w : split_words(a.second)) out.tokens.push_back(vocab.id(w));
  }
  out.attr_end = static_cast<int>(out.tokens.size());
  out.text_begin = out.attr_end;
  for (const auto& w : split_words(node.text)) out.tokens.push_back(vocab.id(w));
  out.text_end = static_cast<int>(out.tokens.size());
  return out;
}

std::vector<TokenizedNode> tokenize_tree(const DomTree& tree, const Vocab& vocab) {
  std::vector<TokenizedNode> out;
  out.reserve(tree.size());
  for (const DomNode& n : tree.nodes) out.push_back(tokenize_node(n, vocab));
  return out;
}

}  // namespace treelm
