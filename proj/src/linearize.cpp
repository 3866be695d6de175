#include "treelm/linearize.hpp"

#include <algorithm>
#include <unordered_map>

#include <json.hpp>

#include "treelm/error.hpp"

namespace treelm {

namespace {

int32_t clip(int64_t value, int table_size) {
  if (value < 0) return 0;
  if (value >= table_size) return table_size - 1;
  return static_cast<int32_t>(value);
}

}  // namespace

PositionedSequence linearize(const Subtree& window, const DomTree& tree,
                             const std::vector<TokenizedNode>& toks, const Vocab& vocab,
                             const PositionTableSizes& sizes, const std::string& doc_id) {
  PositionedSequence out;
  out.doc_id = doc_id;
  out.window_index = window.window_index;
  out.region_begin = 0;

  // Window-local node index (P0), 1-based in preorder order.
  std::unordered_map<NodeId, int32_t> local_index;
  for (size_t i = 0; i < window.node_ids.size(); ++i)
    local_index[window.node_ids[i]] = static_cast<int32_t>(i) + 1;

  // Sibling rank (P2): 1-based rank among in-window nodes sharing the same
  // in-window parent; the window root forms its own group.
  std::unordered_map<NodeId, int32_t> sibling_rank;
  {
    std::unordered_map<NodeId, int32_t> group_counter;  // keyed by parent (kNoNode -> root group)
    for (NodeId v : window.node_ids) {
      NodeId p = tree.node(v).parent;
      if (p != kNoNode && !local_index.count(p)) p = kNoNode;
      sibling_rank[v] = ++group_counter[p];
    }
  }

  for (NodeId v : window.node_ids) {
    if (static_cast<size_t>(v) >= toks.size() || toks[static_cast<size_t>(v)].node_id != v)
      throw Error::missing_tokenization("node " + std::to_string(v) + " has no tokenization");
    const TokenizedNode& tn = toks[static_cast<size_t>(v)];
    const DomNode& dn = tree.node(v);

    NodeId parent = dn.parent;
    int32_t p0 = clip(local_index[v], sizes.max_nodes);
    int32_t p1 = 0;
    if (parent != kNoNode) {
      auto it = local_index.find(parent);
      if (it != local_index.end()) p1 = clip(it->second, sizes.max_nodes);
    }
    int32_t p2 = clip(sibling_rank[v], sizes.max_nodes);
    int32_t p3 = clip(tree.depth(v), sizes.max_depth);
    int32_t p4 = clip(vocab.tag_position_id(dn.tag), sizes.num_tags);

    int begin = out.length();
    for (TokenId t : tn.tokens) {
      PosRow row{p0, p1, p2, p3, p4, clip(out.length(), sizes.max_len)};
      out.tokens.push_back(t);
      out.pos.push_back(row);
    }
    int end = out.length();
    out.node_anchor[v] = begin;
    out.node_ranges[v] = {begin, end};
  }
  return out;
}

PositionedSequence assemble_qa_input(const std::vector<TokenId>& question,
                                     const PositionedSequence& seq, bool add_yes_no,
                                     const PositionTableSizes& sizes) {
  std::vector<TokenId> prefix(question);
  prefix.push_back(kQSep);
  if (add_yes_no) {
    prefix.push_back(kYes);
    prefix.push_back(kNo);
  }
  size_t total = prefix.size() + seq.tokens.size();
  if (total > static_cast<size_t>(sizes.max_len))
    throw Error::sequence_too_long("assembled input has " + std::to_string(total) +
                                   " tokens, max " + std::to_string(sizes.max_len));

  PositionedSequence out;
  out.doc_id = seq.doc_id;
  out.window_index = seq.window_index;
  const int shift = static_cast<int>(prefix.size());
  // YES/NO tokens belong to the answerable region; the question and QSEP do not.
  out.region_begin = add_yes_no ? shift - 2 : shift;

  out.tokens = std::move(prefix);
  out.tokens.insert(out.tokens.end(), seq.tokens.begin(), seq.tokens.end());
  out.pos.reserve(out.tokens.size());
  for (int i = 0; i < shift; ++i) out.pos.push_back(PosRow{0, 0, 0, 0, 0, 0});
  for (const PosRow& r : seq.pos) out.pos.push_back(r);
  for (size_t i = 0; i < out.pos.size(); ++i)
    out.pos[i][kPosToken] = clip(static_cast<int64_t>(i), sizes.max_len);

  for (const auto& [node, anchor] : seq.node_anchor) out.node_anchor[node] = anchor + shift;
  for (const auto& [node, range] : seq.node_ranges)
    out.node_ranges[node] = {range.first + shift, range.second + shift};
  return out;
}

std::string to_jsonl(const PositionedSequence& seq) {
  nlohmann::json j;
  j["doc_id"] = seq.doc_id;
  j["window_index"] = seq.window_index;
  j["tokens"] = seq.tokens;
  nlohmann::json pos = nlohmann::json::array();
  for (const PosRow& r : seq.pos) pos.push_back(std::vector<int32_t>(r.begin(), r.end()));
  j["pos"] = std::move(pos);
  nlohmann::json anchors = nlohmann::json::object();
  for (const auto& [node, idx] : seq.node_anchor) anchors[std::to_string(node)] = idx;
  j["anchors"] = std::move(anchors);
  nlohmann::json ranges = nlohmann::json::object();
  for (const auto& [node, range] : seq.node_ranges)
    ranges[std::to_string(node)] = std::vector<int>{range.first, range.second};
  j["ranges"] = std::move(ranges);
  if (seq.region_begin != 0) j["region_begin"] = seq.region_begin;
  return j.dump();
}

PositionedSequence sequence_from_jsonl(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error::schema(std::string("bad example line: ") + e.what());
  }
  PositionedSequence seq;
  try {
    seq.doc_id = j.at("doc_id").get<std::string>();
    seq.window_index = j.at("window_index").get<int>();
    seq.tokens = j.at("tokens").get<std::vector<TokenId>>();
    for (const auto& row : j.at("pos")) {
      auto v = row.get<std::vector<int32_t>>();
      if (v.size() != 6) throw Error::schema("pos row must have 6 entries");
      PosRow r;
      std::copy(v.begin(), v.end(), r.begin());
      seq.pos.push_back(r);
    }
    for (const auto& [key, value] : j.at("anchors").items())
      seq.node_anchor[static_cast<NodeId>(std::stol(key))] = value.get<int>();
    if (j.contains("ranges")) {
      for (const auto& [key, value] : j.at("ranges").items()) {
        auto v = value.get<std::vector<int>>();
        seq.node_ranges[static_cast<NodeId>(std::stol(key))] = {v[0], v[1]};
      }
    }
    seq.region_begin = j.value("region_begin", 0);
  } catch (const nlohmann::json::exception& e) {
    throw Error::schema(std::string("bad example line: ") + e.what());
  }
  if (seq.pos.size() != seq.tokens.size())
    throw Error::schema("tokens and pos length mismatch");
  return seq;
}

}  // namespace treelm
