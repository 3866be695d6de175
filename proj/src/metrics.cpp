#include "treelm/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_map>

namespace treelm {

namespace {

PRF make_prf(int64_t tp, int64_t pred_count, int64_t gold_count) {
  PRF out;
  if (pred_count == 0 && gold_count == 0) {
    out.precision = out.recall = out.f1 = 1.0;
    return out;
  }
  out.precision = pred_count > 0 ? static_cast<double>(tp) / pred_count : 0.0;
  out.recall = gold_count > 0 ? static_cast<double>(tp) / gold_count : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

template <typename T>
void dedup(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

PRF value_f1(std::vector<AttrTriple> preds, std::vector<AttrTriple> gold) {
  dedup(preds);
  dedup(gold);
  std::set<AttrTriple> gold_set(gold.begin(), gold.end());
  int64_t tp = 0;
  for (const auto& p : preds)
    if (gold_set.count(p)) ++tp;
  return make_prf(tp, static_cast<int64_t>(preds.size()), static_cast<int64_t>(gold.size()));
}

PageF1Report page_f1(std::vector<AttrTriple> preds, std::vector<AttrTriple> gold) {
  dedup(preds);
  dedup(gold);
  // attribute -> page -> predicted nodes / gold nodes
  struct PageSets {
    std::set<std::pair<std::string, NodeId>> pred_nodes, gold_nodes;
    std::set<std::string> pred_pages, gold_pages;
  };
  std::map<int, PageSets> by_attr;
  for (const auto& p : preds) {
    by_attr[p.attribute].pred_nodes.insert({p.doc_id, p.node_id});
    by_attr[p.attribute].pred_pages.insert(p.doc_id);
  }
  for (const auto& g : gold) {
    by_attr[g.attribute].gold_nodes.insert({g.doc_id, g.node_id});
    by_attr[g.attribute].gold_pages.insert(g.doc_id);
  }

  PageF1Report report;
  double f1_sum = 0.0, p_sum = 0.0, r_sum = 0.0;
  for (auto& [attr, sets] : by_attr) {
    int64_t hits = 0;
    for (const auto& page : sets.pred_pages) {
      bool hit = false;
      for (const auto& [doc, node] : sets.pred_nodes) {
        if (doc != page) continue;
        if (sets.gold_nodes.count({doc, node})) {
          hit = true;
          break;
        }
      }
      if (hit) ++hits;
    }
    PRF prf = make_prf(hits, static_cast<int64_t>(sets.pred_pages.size()),
                       static_cast<int64_t>(sets.gold_pages.size()));
    report.per_attribute[attr] = prf;
    f1_sum += prf.f1;
    p_sum += prf.precision;
    r_sum += prf.recall;
  }
  const double n = static_cast<double>(report.per_attribute.size());
  if (n > 0) {
    report.macro.precision = p_sum / n;
    report.macro.recall = r_sum / n;
    report.macro.f1 = f1_sum / n;
  } else {
    report.macro = make_prf(0, 0, 0);
  }
  return report;
}

std::string normalize_answer(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
    } else if (c < 0x80 && std::ispunct(c)) {
      // stripped
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  return out;
}

PRF pair_f1_lenient(std::vector<PairPred> preds, const std::vector<PairGold>& gold) {
  // Dedup predictions on (doc, obj, normalized surface).
  {
    std::set<std::tuple<std::string, NodeId, std::string>> seen;
    std::vector<PairPred> unique;
    for (auto& p : preds) {
      auto key = std::make_tuple(p.doc_id, p.obj_node, normalize_answer(p.pred_surface));
      if (seen.insert(key).second) unique.push_back(std::move(p));
    }
    preds = std::move(unique);
  }

  auto matches = [](const PairPred& p, const PairGold& g) {
    if (p.doc_id != g.doc_id || p.obj_node != g.obj_node) return false;
    const std::string surface = normalize_answer(p.pred_surface);
    for (const auto& form : g.acceptable)
      if (normalize_answer(form) == surface) return true;
    return false;
  };

  int64_t tp = 0;
  std::vector<bool> gold_matched(gold.size(), false);
  for (const auto& p : preds) {
    bool found = false;
    for (size_t gi = 0; gi < gold.size(); ++gi) {
      if (matches(p, gold[gi])) {
        found = true;
        gold_matched[gi] = true;
      }
    }
    if (found) ++tp;
  }
  const int64_t recalled = std::count(gold_matched.begin(), gold_matched.end(), true);
  PRF out;
  if (preds.empty() && gold.empty()) {
    out.precision = out.recall = out.f1 = 1.0;
    return out;
  }
  out.precision = preds.empty() ? 0.0 : static_cast<double>(tp) / preds.size();
  out.recall = gold.empty() ? 0.0 : static_cast<double>(recalled) / gold.size();
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

QAScore qa_em_f1(const std::string& pred, const std::vector<std::string>& golds) {
  QAScore score;
  const std::string norm_pred = normalize_answer(pred);
  std::vector<std::string> pred_tokens;
  {
    std::istringstream ss(norm_pred);
    std::string tok;
    while (ss >> tok) pred_tokens.push_back(tok);
  }
  for (const auto& gold : golds) {
    const std::string norm_gold = normalize_answer(gold);
    if (norm_pred == norm_gold) score.em = 1.0;

    std::vector<std::string> gold_tokens;
    std::istringstream ss(norm_gold);
    std::string tok;
    while (ss >> tok) gold_tokens.push_back(tok);

    double f1;
    if (pred_tokens.empty() && gold_tokens.empty()) {
      f1 = 1.0;
    } else if (pred_tokens.empty() || gold_tokens.empty()) {
      f1 = 0.0;
    } else {
      std::unordered_map<std::string, int> counts;
      for (const auto& t : gold_tokens) ++counts[t];
      int64_t common = 0;
      for (const auto& t : pred_tokens) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
          --it->second;
          ++common;
        }
      }
      if (common == 0) {
        f1 = 0.0;
      } else {
        const double p = static_cast<double>(common) / pred_tokens.size();
        const double r = static_cast<double>(common) / gold_tokens.size();
        f1 = 2.0 * p * r / (p + r);
      }
    }
    score.f1 = std::max(score.f1, f1);
  }
  return score;
}

}  // namespace treelm
