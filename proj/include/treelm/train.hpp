#pragma once

#include <string>
#include <vector>

#include "treelm/encoder.hpp"
#include "treelm/heads.hpp"
#include "treelm/mask.hpp"
#include "treelm/metrics.hpp"
#include "treelm/optim.hpp"
#include "treelm/pipeline.hpp"

namespace treelm {

struct TrainTrace {
  std::vector<double> loss;  // one entry per optimizer step
  double final_loss() const { return loss.empty() ? 0.0 : loss.back(); }
};

// ---------------------------------------------------------------------------
// Pre-training
// ---------------------------------------------------------------------------

struct PretrainOptions {
  MaskConfig mask;
  OptimConfig optim;
  int steps = 500;
  uint64_t mask_seed = 11;  // per-epoch plans derive from this
};

// MLM pre-training over linearized windows. Mask plans are regenerated per
// epoch from epoch-derived seeds; when epoch0 is given (pre-materialized
// masked examples aligned with seqs), the first epoch uses those plans
// verbatim. Deterministic given the seeds; throws DivergenceDetected when the
// loss stops being finite.
TrainTrace pretrain(Params<float>& params, const std::vector<PositionedSequence>& seqs,
                    const PretrainOptions& opt,
                    const std::vector<MaskedSequence>* epoch0 = nullptr);

struct MlmEval {
  double mean_loss = 0.0;
  // Recovery accuracy over tokens of whole-masked nodes whose action was MASK.
  double node_recovery_accuracy = 0.0;
  int64_t node_positions = 0;
};

MlmEval evaluate_mlm(const Params<float>& params, const std::vector<PositionedSequence>& seqs,
                     const MaskConfig& mask_cfg, uint64_t mask_seed);

// ---------------------------------------------------------------------------
// Fine-tuning (heads train jointly with the encoder)
// ---------------------------------------------------------------------------

struct FinetuneOptions {
  OptimConfig optim;
  int steps = 300;
};

TrainTrace finetune_attr(Params<float>& params, HeadParams<float>& heads,
                         const std::vector<AttrExample>& examples, const FinetuneOptions& opt);

TrainTrace finetune_openie(Params<float>& params, HeadParams<float>& heads,
                           const std::vector<OpenIEExample>& examples, const OpenIEConfig& cfg,
                           const FinetuneOptions& opt);

TrainTrace finetune_qa(Params<float>& params, HeadParams<float>& heads,
                       const std::vector<QAExample>& examples, const FinetuneOptions& opt);

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

// Node predictions aggregated across windows by mean softmax probability;
// only non-None classes are returned.
std::vector<AttrTriple> predict_attr(const Params<float>& params, const HeadParams<float>& heads,
                                     const std::vector<ProcessedDoc>& docs);

std::vector<PairPred> predict_openie(const Params<float>& params, const HeadParams<float>& heads,
                                     const std::vector<ProcessedDoc>& docs, const OpenIEConfig& cfg,
                                     OpenIEGate gate = OpenIEGate::PredObjPair);

struct QAPrediction {
  std::string question_id;
  std::string doc_id;
  std::string answer_text;
  int window_index = 0;
  int start = -1, end = -1;
  double score = 0.0;
};

struct QAOptions {
  int max_answer_len = 30;
};

// Span prediction per question, best across all windows of the page.
std::vector<QAPrediction> predict_qa(const Params<float>& params, const HeadParams<float>& heads,
                                     const std::vector<ProcessedDoc>& docs, const GoldSet& gold,
                                     const Vocab& vocab, const PositionTableSizes& sizes,
                                     const QAOptions& opt = {});

}  // namespace treelm
