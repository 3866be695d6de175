#include "treelm/mask.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "treelm/error.hpp"

namespace treelm {

MaskPlan plan_masks(const PositionedSequence& seq, const MaskConfig& cfg, uint64_t seed) {
  if (cfg.rate <= 0.0 || cfg.rate >= 1.0) throw Error::config_invalid("rate must be in (0,1)");
  if (cfg.node_share < 0.0 || cfg.node_share > 1.0)
    throw Error::config_invalid("node_share must be in [0,1]");

  MaskPlan plan;
  plan.seed = seed;
  SplitMix64 rng(seed);

  // Document tokens are the ones carrying a node index; question/QSEP/YES/NO
  // prefix tokens have the sentinel P0 = 0 and are never selected.
  std::vector<int> doc_positions;
  for (int i = 0; i < seq.length(); ++i)
    if (seq.pos[static_cast<size_t>(i)][kPosNode] != 0) doc_positions.push_back(i);
  const int64_t doc_tokens = static_cast<int64_t>(doc_positions.size());
  const int64_t budget = std::llround(cfg.rate * static_cast<double>(doc_tokens));
  if (budget <= 0) return plan;

  std::vector<char> selected(static_cast<size_t>(seq.length()), 0);

  // Whole-node phase.
  int64_t node_budget = std::llround(cfg.node_share * static_cast<double>(budget));
  if (node_budget > 0) {
    std::vector<NodeId> nodes;
    for (const auto& [node, range] : seq.node_ranges)
      if (range.second > range.first) nodes.push_back(node);
    rng.shuffle(nodes);
    int misfits = 0;
    for (NodeId node : nodes) {
      if (node_budget <= 0 || misfits >= cfg.misfit_limit) break;
      auto [begin, end] = seq.node_ranges.at(node);
      int64_t node_tokens = end - begin;
      if (node_tokens > node_budget) {
        ++misfits;
        continue;
      }
      misfits = 0;
      plan.node_masked.insert(node);
      for (int i = begin; i < end; ++i) selected[static_cast<size_t>(i)] = 1;
      node_budget -= node_tokens;
    }
  }

  // Individual phase: fill up to the budget from unselected document tokens.
  int64_t chosen = 0;
  for (char s : selected) chosen += s;
  if (chosen < budget) {
    std::vector<int> pool;
    for (int i : doc_positions)
      if (!selected[static_cast<size_t>(i)]) pool.push_back(i);
    rng.shuffle(pool);
    for (int i : pool) {
      if (chosen >= budget) break;
      selected[static_cast<size_t>(i)] = 1;
      ++chosen;
    }
  }

  for (int i = 0; i < seq.length(); ++i) {
    if (!selected[static_cast<size_t>(i)]) continue;
    plan.positions.push_back(i);
    plan.labels[i] = seq.tokens[static_cast<size_t>(i)];
  }
  // Corruption actions, drawn independently per selected position.
  for (int i : plan.positions) {
    double u = rng.uniform();
    plan.actions[i] = u < 0.8 ? MaskAction::Mask : (u < 0.9 ? MaskAction::Random : MaskAction::Keep);
  }
  return plan;
}

MaskedSequence apply_masks(const PositionedSequence& seq, const MaskPlan& plan, SplitMix64& rng,
                           TokenId vocab_size) {
  if (vocab_size <= kNumSpecials)
    throw Error::config_invalid("vocab has no non-special tokens");
  MaskedSequence out;
  out.seq = seq;
  out.plan = plan;
  out.labels.assign(static_cast<size_t>(seq.length()), kIgnoreLabel);
  for (int i : plan.positions) {
    if (i < 0 || i >= seq.length()) throw Error::plan_mismatch("position out of range");
    auto label_it = plan.labels.find(i);
    auto action_it = plan.actions.find(i);
    if (label_it == plan.labels.end() || action_it == plan.actions.end())
      throw Error::plan_mismatch("position missing label or action");
    if (label_it->second != seq.tokens[static_cast<size_t>(i)])
      throw Error::plan_mismatch("plan label disagrees with sequence token");
    out.labels[static_cast<size_t>(i)] = label_it->second;
    switch (action_it->second) {
      case MaskAction::Mask:
        out.seq.tokens[static_cast<size_t>(i)] = kMask;
        break;
      case MaskAction::Random:
        out.seq.tokens[static_cast<size_t>(i)] =
            kNumSpecials + static_cast<TokenId>(rng.below(
                               static_cast<uint64_t>(vocab_size - kNumSpecials)));
        break;
      case MaskAction::Keep:
        break;
    }
  }
  return out;
}

MaskedSequence mask_sequence(const PositionedSequence& seq, const MaskConfig& cfg,
                             uint64_t base_seed, TokenId vocab_size) {
  uint64_t seed = derive_seed(base_seed, seq.doc_id, static_cast<uint64_t>(seq.window_index));
  MaskPlan plan = plan_masks(seq, cfg, seed);
  // Separate stream for replacement draws so the plan stays stable under an
  // unchanged selection.
  SplitMix64 rng(SplitMix64(seed ^ 0xA5A5A5A5A5A5A5A5ULL).next());
  return apply_masks(seq, plan, rng, vocab_size);
}

namespace {

char action_code(MaskAction a) {
  switch (a) {
    case MaskAction::Mask: return 'M';
    case MaskAction::Random: return 'R';
    case MaskAction::Keep: return 'K';
  }
  return '?';
}

MaskAction action_from_code(const std::string& c) {
  if (c == "M") return MaskAction::Mask;
  if (c == "R") return MaskAction::Random;
  if (c == "K") return MaskAction::Keep;
  throw Error::schema("unknown mask action: " + c);
}

}  // namespace

std::string to_jsonl(const MaskedSequence& m) {
  // Extends the linearizer record; the original token ids are recoverable
  // from masked_tokens + (positions, labels).
  PositionedSequence original = m.seq;
  for (int i : m.plan.positions)
    original.tokens[static_cast<size_t>(i)] = m.plan.labels.at(i);
  nlohmann::json j = nlohmann::json::parse(to_jsonl(original));
  j["masked_tokens"] = m.seq.tokens;
  j["positions"] = m.plan.positions;
  std::vector<TokenId> labels;
  std::vector<std::string> actions;
  for (int i : m.plan.positions) {
    labels.push_back(m.plan.labels.at(i));
    actions.push_back(std::string(1, action_code(m.plan.actions.at(i))));
  }
  j["labels"] = labels;
  j["actions"] = actions;
  j["node_masked"] = std::vector<NodeId>(m.plan.node_masked.begin(), m.plan.node_masked.end());
  j["seed"] = m.plan.seed;
  j["rng"] = SplitMix64::algorithm_name();
  return j.dump();
}

MaskedSequence masked_from_jsonl(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error::schema(std::string("bad masked line: ") + e.what());
  }
  MaskedSequence m;
  m.seq = sequence_from_jsonl(line);
  try {
    auto masked_tokens = j.at("masked_tokens").get<std::vector<TokenId>>();
    auto positions = j.at("positions").get<std::vector<int>>();
    auto labels = j.at("labels").get<std::vector<TokenId>>();
    auto actions = j.at("actions").get<std::vector<std::string>>();
    if (masked_tokens.size() != m.seq.tokens.size() || positions.size() != labels.size() ||
        positions.size() != actions.size())
      throw Error::schema("masked record field lengths disagree");
    m.seq.tokens = std::move(masked_tokens);
    m.labels.assign(m.seq.tokens.size(), kIgnoreLabel);
    for (size_t k = 0; k < positions.size(); ++k) {
      m.plan.positions.push_back(positions[k]);
      m.plan.labels[positions[k]] = labels[k];
      m.plan.actions[positions[k]] = action_from_code(actions[k]);
      m.labels[static_cast<size_t>(positions[k])] = labels[k];
    }
    for (NodeId n : j.at("node_masked").get<std::vector<NodeId>>()) m.plan.node_masked.insert(n);
    m.plan.seed = j.at("seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error::schema(std::string("bad masked line: ") + e.what());
  }
  return m;
}

}  // namespace treelm
