#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "treelm/linearize.hpp"
#include "treelm/rng.hpp"

namespace treelm {

enum class MaskAction : uint8_t { Mask = 0, Random = 1, Keep = 2 };

struct MaskPlan {
  std::vector<int> positions;            // sorted token indices selected for prediction
  std::set<NodeId> node_masked;          // nodes selected whole
  std::map<int, TokenId> labels;         // position -> original token id
  std::map<int, MaskAction> actions;     // position -> corruption action
  uint64_t seed = 0;
};

struct MaskConfig {
  double rate = 0.15;
  double node_share = 0.5;  // fraction of the budget reserved for whole nodes
  int misfit_limit = 10;    // consecutive non-fitting node draws before giving up
};

// Selects ~rate*T document-token positions: a whole-node phase samples
// in-window nodes uniformly without replacement while they fit the node
// budget (node_share * B), then an individual phase fills the remainder from
// unselected document tokens. Non-DOM prefix tokens are never selected.
// Also fixes the 80/10/10 corruption action per position. Deterministic in
// the seed.
MaskPlan plan_masks(const PositionedSequence& seq, const MaskConfig& cfg, uint64_t seed);

struct MaskedSequence {
  PositionedSequence seq;        // tokens hold the corrupted ids
  std::vector<TokenId> labels;   // length T; kIgnoreLabel at unselected positions
  MaskPlan plan;
};

// Applies a plan: Mask -> [MASK], Random -> uniform non-special token (drawn
// from rng), Keep -> unchanged. Throws PlanMismatch when the plan does not
// belong to seq.
MaskedSequence apply_masks(const PositionedSequence& seq, const MaskPlan& plan, SplitMix64& rng,
                           TokenId vocab_size);

// plan_masks + apply_masks with the documented per-sequence seed derivation.
MaskedSequence mask_sequence(const PositionedSequence& seq, const MaskConfig& cfg,
                             uint64_t base_seed, TokenId vocab_size);

// JSON Lines persistence: the linearizer record extended with the mask fields.
std::string to_jsonl(const MaskedSequence& m);
MaskedSequence masked_from_jsonl(const std::string& line);

}  // namespace treelm
