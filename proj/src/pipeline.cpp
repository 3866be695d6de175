#include "treelm/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "treelm/error.hpp"

namespace treelm {

ProcessedDoc process_tree(DomTree tree, const ManifestEntry& entry, const Vocab& vocab,
                          const PipelineConfig& cfg) {
  ProcessedDoc doc;
  doc.doc_id = entry.doc_id;
  doc.website = entry.website;
  doc.domain = entry.domain;
  doc.split = entry.split;
  doc.tree = std::move(tree);
  doc.toks = tokenize_tree(doc.tree, vocab);

  // Oversized nodes are truncated for windowing; keep the token sequences in
  // agreement with the clamped counts so budgets hold on actual tokens.
  std::vector<int> counts(doc.toks.size());
  for (size_t i = 0; i < doc.toks.size(); ++i) {
    TokenizedNode& tn = doc.toks[i];
    const int m = static_cast<int>(cfg.window.max_tokens);
    if (cfg.window.oversize == OversizePolicy::Truncate && tn.count() > m) {
      tn.tokens.resize(static_cast<size_t>(m));
      tn.attr_end = std::min(tn.attr_end, m);
      tn.attr_begin = std::min(tn.attr_begin, tn.attr_end);
      tn.text_end = std::min(tn.text_end, m);
      tn.text_begin = std::min(tn.text_begin, tn.text_end);
    }
    counts[i] = tn.count();
  }

  WindowingResult wr = generate_subtrees(doc.tree, counts, cfg.window);
  doc.windows = std::move(wr.windows);
  doc.seqs.reserve(doc.windows.size());
  for (const Subtree& w : doc.windows)
    doc.seqs.push_back(linearize(w, doc.tree, doc.toks, vocab, cfg.tables, doc.doc_id));
  return doc;
}

ProcessedDoc process_doc(const std::string& html, const ManifestEntry& entry, const Vocab& vocab,
                         const PipelineConfig& cfg) {
  return process_tree(clean(parse_html(html), cfg.clean), entry, vocab, cfg);
}

std::vector<AttrExample> build_attr_examples(const ProcessedDoc& doc, const GoldSet& gold) {
  std::map<NodeId, int> gold_class;
  for (const auto& l : gold.attr)
    if (l.doc_id == doc.doc_id) gold_class[l.node_id] = gold.attribute_id(l.attribute);

  std::vector<AttrExample> out;
  for (const PositionedSequence& seq : doc.seqs) {
    AttrExample ex;
    ex.seq = seq;
    for (const auto& [node, anchor] : seq.node_anchor) {
      ex.node_ids.push_back(node);
      ex.anchors.push_back(anchor);
      auto it = gold_class.find(node);
      ex.gold.push_back(it == gold_class.end() ? 0 : it->second);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<OpenIEExample> build_openie_examples(const ProcessedDoc& doc, const GoldSet& gold,
                                                 const OpenIEConfig& cfg) {
  std::set<NodeId> pred_nodes, obj_nodes;
  std::set<std::pair<NodeId, NodeId>> gold_set;
  for (const auto& l : gold.pairs) {
    if (l.doc_id != doc.doc_id) continue;
    pred_nodes.insert(l.pred_node);
    obj_nodes.insert(l.obj_node);
    gold_set.insert({l.pred_node, l.obj_node});
  }

  std::vector<OpenIEExample> out;
  for (const PositionedSequence& seq : doc.seqs) {
    OpenIEExample ex;
    ex.seq = seq;
    // Text-bearing nodes in window preorder.
    std::vector<std::pair<NodeId, int>> text_nodes;
    for (const auto& [node, anchor] : seq.node_anchor)
      if (!doc.tree.node(node).text.empty()) text_nodes.emplace_back(node, anchor);

    for (const auto& [ni, ai] : text_nodes) {
      for (const auto& [nj, aj] : text_nodes) {
        if (ni == nj) continue;
        if (static_cast<int>(ex.pairs.size()) >= cfg.max_pairs) break;
        PairCandidate c;
        c.pred_node = ni;
        c.obj_node = nj;
        c.pred_anchor = ai;
        c.obj_anchor = aj;
        c.targets.is_pred = pred_nodes.count(ni) > 0;
        c.targets.is_obj = obj_nodes.count(nj) > 0;
        c.targets.is_pair = gold_set.count({ni, nj}) > 0;
        ex.pairs.push_back(c);
      }
      if (static_cast<int>(ex.pairs.size()) >= cfg.max_pairs) break;
    }
    if (!ex.pairs.empty()) out.push_back(std::move(ex));
  }
  return out;
}

std::vector<QAExample> build_qa_examples(const ProcessedDoc& doc, const GoldSet& gold,
                                         const Vocab& vocab, const PositionTableSizes& sizes) {
  std::vector<QAExample> out;
  for (const auto& q : gold.qa) {
    if (q.doc_id != doc.doc_id) continue;
    std::vector<TokenId> question_ids;
    for (const auto& w : split_words(q.question)) question_ids.push_back(vocab.id(w));

    for (size_t wi = 0; wi < doc.seqs.size(); ++wi) {
      const PositionedSequence& seq = doc.seqs[wi];
      QAExample ex;
      ex.seq = assemble_qa_input(question_ids, seq, /*add_yes_no=*/false, sizes);
      ex.question_id = q.question_id;
      ex.doc_id = doc.doc_id;
      auto range_it = ex.seq.node_ranges.find(q.answer_node);
      if (range_it != ex.seq.node_ranges.end()) {
        // Answer = the node's text tokens.
        const TokenizedNode& tn = doc.toks[static_cast<size_t>(q.answer_node)];
        if (tn.text_end > tn.text_begin) {
          ex.gold_start = range_it->second.first + tn.text_begin;
          ex.gold_end = range_it->second.first + tn.text_end - 1;
        }
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::string span_text(const PositionedSequence& seq, int start, int end, const Vocab& vocab) {
  std::string out;
  for (int i = start; i <= end && i < seq.length(); ++i) {
    const TokenId t = seq.tokens[static_cast<size_t>(i)];
    if (t < 0 || t >= vocab.size()) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(t);
  }
  return out;
}

}  // namespace treelm
