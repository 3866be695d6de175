#include "treelm/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "treelm/error.hpp"

namespace treelm {

namespace {

std::vector<std::vector<float>*> encoder_buffers(Params<float>& p) {
  std::vector<std::vector<float>*> out;
  for_each_tensor(p, [&](const std::string&, std::vector<float>& b) { out.push_back(&b); });
  return out;
}

void append_head_buffers(HeadParams<float>& h, const std::string& prefix,
                         std::vector<std::vector<float>*>& out) {
  for_each_tensor(h, [&](const std::string& name, std::vector<float>& b) {
    if (name.rfind(prefix, 0) == 0) out.push_back(&b);
  });
}

// Position-table gradients stay zero when positions are disabled, so the
// optimizer may own all buffers unconditionally.
struct GradHolder {
  Params<float> enc;
  HeadParams<float> heads;
  GradHolder(const EncoderConfig& cfg, const HeadParams<float>& h)
      : enc(zero_params<float>(cfg)),
        heads(zero_heads<float>(h.hidden, h.attr.w1.cols, h.attr.num_classes())) {}
  void zero() {
    for_each_tensor(enc, [](const std::string&, std::vector<float>& b) {
      std::fill(b.begin(), b.end(), 0.0f);
    });
    for_each_tensor(heads, [](const std::string&, std::vector<float>& b) {
      std::fill(b.begin(), b.end(), 0.0f);
    });
  }
};

std::vector<size_t> epoch_order(size_t n, uint64_t seed, int epoch) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  SplitMix64 rng(derive_seed(seed, "epoch-order", static_cast<uint64_t>(epoch)));
  rng.shuffle(order);
  return order;
}

}  // namespace

TrainTrace pretrain(Params<float>& params, const std::vector<PositionedSequence>& seqs,
                    const PretrainOptions& opt, const std::vector<MaskedSequence>* epoch0) {
  if (seqs.empty()) throw Error::empty_corpus("no sequences to pre-train on");
  if (epoch0 != nullptr && epoch0->size() != seqs.size())
    throw Error::plan_mismatch("epoch0 masked examples must align with seqs");
  TrainTrace trace;
  AdamOptimizer<float> adam(opt.optim);
  Params<float> grads = zero_params<float>(params.cfg);
  auto param_bufs = encoder_buffers(params);
  auto grad_bufs = encoder_buffers(grads);

  const int batch = std::max(1, opt.optim.batch_size);
  int epoch = 0;
  size_t cursor = 0;
  std::vector<size_t> order = epoch_order(seqs.size(), opt.optim.shuffle_seed, epoch);
  uint64_t epoch_mask_seed = derive_seed(opt.mask_seed, "mask-epoch", 0);

  for (int step = 0; step < opt.steps; ++step) {
    for_each_tensor(grads, [](const std::string&, std::vector<float>& b) {
      std::fill(b.begin(), b.end(), 0.0f);
    });
    double batch_loss = 0.0;
    int batch_count = 0;
    const float scale = 1.0f / static_cast<float>(batch);
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        ++epoch;
        cursor = 0;
        order = epoch_order(seqs.size(), opt.optim.shuffle_seed, epoch);
        epoch_mask_seed = derive_seed(opt.mask_seed, "mask-epoch", static_cast<uint64_t>(epoch));
      }
      const size_t index = order[cursor++];
      const PositionedSequence& seq = seqs[index];
      MaskedSequence masked;
      if (epoch == 0 && epoch0 != nullptr) {
        masked = (*epoch0)[index];
      } else {
        try {
          masked = mask_sequence(seq, opt.mask, epoch_mask_seed, params.cfg.vocab_size);
        } catch (const Error&) {
          continue;  // degenerate tiny sequence; nothing selected
        }
      }
      if (masked.plan.positions.empty()) continue;

      ForwardCache<float> cache;
      const Mat<float>& h = encode(masked.seq, params, cache);
      Mat<float> d_h;
      const float loss = mlm_loss_backward(h, masked.labels, params, grads, d_h, scale);
      encoder_backward(masked.seq, params, cache, d_h, grads);
      batch_loss += loss;
      ++batch_count;
    }
    if (batch_count == 0) continue;
    const double step_loss = batch_loss / batch_count;
    if (!std::isfinite(step_loss)) throw Error::divergence("pre-training loss is not finite");
    adam.step(param_bufs, grad_bufs);
    trace.loss.push_back(step_loss);
  }
  return trace;
}

MlmEval evaluate_mlm(const Params<float>& params, const std::vector<PositionedSequence>& seqs,
                     const MaskConfig& mask_cfg, uint64_t mask_seed) {
  MlmEval eval;
  double loss_sum = 0.0;
  int64_t loss_count = 0;
  int64_t correct = 0, total = 0;
  for (const PositionedSequence& seq : seqs) {
    MaskedSequence masked;
    try {
      masked = mask_sequence(seq, mask_cfg, mask_seed, params.cfg.vocab_size);
    } catch (const Error&) {
      continue;
    }
    if (masked.plan.positions.empty()) continue;
    Mat<float> h = encode(masked.seq, params);
    Mat<float> logits = mlm_logits(h, params);
    loss_sum += static_cast<double>(mlm_loss(logits, masked.labels));
    ++loss_count;

    for (NodeId node : masked.plan.node_masked) {
      const auto range = masked.seq.node_ranges.at(node);
      for (int i = range.first; i < range.second; ++i) {
        if (masked.plan.actions.at(i) != MaskAction::Mask) continue;
        const float* row = logits.row(i);
        int best = 0;
        for (int j = 1; j < logits.cols; ++j)
          if (row[j] > row[best]) best = j;
        if (best == masked.plan.labels.at(i)) ++correct;
        ++total;
      }
    }
  }
  eval.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
  eval.node_positions = total;
  eval.node_recovery_accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  return eval;
}

// ---------------------------------------------------------------------------
// Fine-tuning
// ---------------------------------------------------------------------------

TrainTrace finetune_attr(Params<float>& params, HeadParams<float>& heads,
                         const std::vector<AttrExample>& examples, const FinetuneOptions& opt) {
  if (examples.empty()) throw Error::empty_corpus("no attr examples");
  TrainTrace trace;
  AdamOptimizer<float> adam(opt.optim);
  GradHolder grads(params.cfg, heads);
  auto param_bufs = encoder_buffers(params);
  append_head_buffers(heads, "attr.", param_bufs);
  auto grad_bufs = encoder_buffers(grads.enc);
  append_head_buffers(grads.heads, "attr.", grad_bufs);

  const int batch = std::max(1, opt.optim.batch_size);
  int epoch = 0;
  size_t cursor = 0;
  std::vector<size_t> order = epoch_order(examples.size(), opt.optim.shuffle_seed, epoch);

  for (int step = 0; step < opt.steps; ++step) {
    grads.zero();
    double batch_loss = 0.0;
    int batch_count = 0;
    const float scale = 1.0f / static_cast<float>(batch);
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        ++epoch;
        cursor = 0;
        order = epoch_order(examples.size(), opt.optim.shuffle_seed, epoch);
      }
      const AttrExample& ex = examples[order[cursor++]];
      if (ex.anchors.empty()) continue;

      ForwardCache<float> cache;
      const Mat<float>& h = encode(ex.seq, params, cache);
      Mat<float> rows(static_cast<int>(ex.anchors.size()), h.cols);
      for (size_t r = 0; r < ex.anchors.size(); ++r)
        for (int c = 0; c < h.cols; ++c)
          rows.at(static_cast<int>(r), c) = h.at(ex.anchors[r], c);

      Mat<float> d_rows;
      const float loss =
          attr_loss_backward(rows, ex.gold, heads.attr, grads.heads.attr, d_rows, scale);
      Mat<float> d_h(h.rows, h.cols);
      for (size_t r = 0; r < ex.anchors.size(); ++r)
        for (int c = 0; c < h.cols; ++c)
          d_h.at(ex.anchors[r], c) += d_rows.at(static_cast<int>(r), c);
      encoder_backward(ex.seq, params, cache, d_h, grads.enc);
      batch_loss += loss;
      ++batch_count;
    }
    if (batch_count == 0) continue;
    const double step_loss = batch_loss / batch_count;
    if (!std::isfinite(step_loss)) throw Error::divergence("attr fine-tuning loss is not finite");
    adam.step(param_bufs, grad_bufs);
    trace.loss.push_back(step_loss);
  }
  return trace;
}

TrainTrace finetune_openie(Params<float>& params, HeadParams<float>& heads,
                           const std::vector<OpenIEExample>& examples, const OpenIEConfig& cfg,
                           const FinetuneOptions& opt) {
  if (examples.empty()) throw Error::empty_corpus("no openie examples");
  TrainTrace trace;
  AdamOptimizer<float> adam(opt.optim);
  GradHolder grads(params.cfg, heads);
  auto param_bufs = encoder_buffers(params);
  append_head_buffers(heads, "openie.", param_bufs);
  auto grad_bufs = encoder_buffers(grads.enc);
  append_head_buffers(grads.heads, "openie.", grad_bufs);

  const int batch = std::max(1, opt.optim.batch_size);
  int epoch = 0;
  size_t cursor = 0;
  std::vector<size_t> order = epoch_order(examples.size(), opt.optim.shuffle_seed, epoch);
  SplitMix64 sample_rng(derive_seed(opt.optim.shuffle_seed, "openie-neg", 0));

  for (int step = 0; step < opt.steps; ++step) {
    grads.zero();
    double batch_loss = 0.0;
    int batch_count = 0;
    const float scale = 1.0f / static_cast<float>(batch);
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        ++epoch;
        cursor = 0;
        order = epoch_order(examples.size(), opt.optim.shuffle_seed, epoch);
      }
      const OpenIEExample& ex = examples[order[cursor++]];

      // Negative sampling (negatives : positives = cfg.negative_ratio : 1).
      std::vector<const PairCandidate*> positives, negatives;
      for (const auto& p : ex.pairs)
        (p.targets.is_pair ? positives : negatives).push_back(&p);
      if (positives.empty()) continue;
      std::vector<const PairCandidate*> sampled = positives;
      {
        std::vector<const PairCandidate*> pool = negatives;
        sample_rng.shuffle(pool);
        const size_t want = positives.size() * static_cast<size_t>(cfg.negative_ratio);
        for (size_t i = 0; i < pool.size() && i < want; ++i) sampled.push_back(pool[i]);
      }

      ForwardCache<float> cache;
      const Mat<float>& h = encode(ex.seq, params, cache);
      Mat<float> d_h(h.rows, h.cols);
      double ex_loss = 0.0;
      const float pair_scale = scale / static_cast<float>(sampled.size());
      for (const PairCandidate* pc : sampled) {
        ex_loss += openie_loss_backward(h.row(pc->pred_anchor), h.row(pc->obj_anchor), pc->targets,
                                        heads.openie, grads.heads.openie, d_h.row(pc->pred_anchor),
                                        d_h.row(pc->obj_anchor), pair_scale);
      }
      encoder_backward(ex.seq, params, cache, d_h, grads.enc);
      batch_loss += ex_loss / static_cast<double>(sampled.size());
      ++batch_count;
    }
    if (batch_count == 0) continue;
    const double step_loss = batch_loss / batch_count;
    if (!std::isfinite(step_loss)) throw Error::divergence("openie fine-tuning loss is not finite");
    adam.step(param_bufs, grad_bufs);
    trace.loss.push_back(step_loss);
  }
  return trace;
}

TrainTrace finetune_qa(Params<float>& params, HeadParams<float>& heads,
                       const std::vector<QAExample>& examples, const FinetuneOptions& opt) {
  std::vector<const QAExample*> with_gold;
  for (const auto& ex : examples)
    if (ex.gold_start >= 0) with_gold.push_back(&ex);
  if (with_gold.empty()) throw Error::empty_corpus("no qa examples containing their answer span");

  TrainTrace trace;
  AdamOptimizer<float> adam(opt.optim);
  GradHolder grads(params.cfg, heads);
  auto param_bufs = encoder_buffers(params);
  append_head_buffers(heads, "qa.", param_bufs);
  auto grad_bufs = encoder_buffers(grads.enc);
  append_head_buffers(grads.heads, "qa.", grad_bufs);

  const int batch = std::max(1, opt.optim.batch_size);
  int epoch = 0;
  size_t cursor = 0;
  std::vector<size_t> order = epoch_order(with_gold.size(), opt.optim.shuffle_seed, epoch);

  for (int step = 0; step < opt.steps; ++step) {
    grads.zero();
    double batch_loss = 0.0;
    int batch_count = 0;
    const float scale = 1.0f / static_cast<float>(batch);
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        ++epoch;
        cursor = 0;
        order = epoch_order(with_gold.size(), opt.optim.shuffle_seed, epoch);
      }
      const QAExample& ex = *with_gold[order[cursor++]];
      ForwardCache<float> cache;
      const Mat<float>& h = encode(ex.seq, params, cache);
      Mat<float> d_h;
      const float loss = qa_loss_backward(h, heads.qa, ex.gold_start, ex.gold_end, grads.heads.qa,
                                          d_h, scale);
      encoder_backward(ex.seq, params, cache, d_h, grads.enc);
      batch_loss += loss;
      ++batch_count;
    }
    if (batch_count == 0) continue;
    const double step_loss = batch_loss / batch_count;
    if (!std::isfinite(step_loss)) throw Error::divergence("qa fine-tuning loss is not finite");
    adam.step(param_bufs, grad_bufs);
    trace.loss.push_back(step_loss);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

std::vector<AttrTriple> predict_attr(const Params<float>& params, const HeadParams<float>& heads,
                                     const std::vector<ProcessedDoc>& docs) {
  std::vector<AttrTriple> out;
  const int classes = heads.attr.num_classes();
  for (const ProcessedDoc& doc : docs) {
    // node -> accumulated softmax probabilities over the windows containing it
    std::map<NodeId, std::vector<double>> node_probs;
    std::map<NodeId, int> node_windows;
    for (const PositionedSequence& seq : doc.seqs) {
      if (seq.node_anchor.empty()) continue;
      Mat<float> h = encode(seq, params);
      Mat<float> rows(static_cast<int>(seq.node_anchor.size()), h.cols);
      std::vector<NodeId> nodes;
      int r = 0;
      for (const auto& [node, anchor] : seq.node_anchor) {
        for (int c = 0; c < h.cols; ++c) rows.at(r, c) = h.at(anchor, c);
        nodes.push_back(node);
        ++r;
      }
      Mat<float> scores = attr_forward(rows, heads.attr);
      for (int i = 0; i < scores.rows; ++i) {
        const float* row = scores.row(i);
        float mx = row[0];
        for (int j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
        double lse = 0.0;
        for (int j = 0; j < classes; ++j) lse += std::exp(static_cast<double>(row[j] - mx));
        auto& acc = node_probs[nodes[static_cast<size_t>(i)]];
        acc.resize(static_cast<size_t>(classes), 0.0);
        for (int j = 0; j < classes; ++j)
          acc[static_cast<size_t>(j)] += std::exp(static_cast<double>(row[j] - mx)) / lse;
        ++node_windows[nodes[static_cast<size_t>(i)]];
      }
    }
    for (const auto& [node, probs] : node_probs) {
      int best = 0;
      for (int j = 1; j < classes; ++j)
        if (probs[static_cast<size_t>(j)] > probs[static_cast<size_t>(best)]) best = j;
      if (best == 0) continue;  // None
      AttrTriple t;
      t.doc_id = doc.doc_id;
      t.node_id = node;
      t.attribute = best;
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<PairPred> predict_openie(const Params<float>& params, const HeadParams<float>& heads,
                                     const std::vector<ProcessedDoc>& docs, const OpenIEConfig& cfg,
                                     OpenIEGate gate) {
  std::vector<PairPred> out;
  GoldSet empty_gold;
  for (const ProcessedDoc& doc : docs) {
    std::vector<OpenIEExample> examples = build_openie_examples(doc, empty_gold, cfg);
    std::set<std::pair<NodeId, NodeId>> emitted;
    for (const OpenIEExample& ex : examples) {
      Mat<float> h = encode(ex.seq, params);
      for (const PairCandidate& pc : ex.pairs) {
        OpenIEScores<float> s =
            openie_forward(h.row(pc.pred_anchor), h.row(pc.obj_anchor), heads.openie);
        if (!openie_extract(s, gate)) continue;
        if (!emitted.insert({pc.pred_node, pc.obj_node}).second) continue;
        PairPred p;
        p.doc_id = doc.doc_id;
        p.pred_node = pc.pred_node;
        p.obj_node = pc.obj_node;
        p.pred_surface = doc.tree.node(pc.pred_node).text;
        p.score = static_cast<double>(sigmoid(s.s));
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

std::vector<QAPrediction> predict_qa(const Params<float>& params, const HeadParams<float>& heads,
                                     const std::vector<ProcessedDoc>& docs, const GoldSet& gold,
                                     const Vocab& vocab, const PositionTableSizes& sizes,
                                     const QAOptions& opt) {
  std::vector<QAPrediction> out;
  for (const ProcessedDoc& doc : docs) {
    std::vector<QAExample> examples = build_qa_examples(doc, gold, vocab, sizes);
    std::map<std::string, QAPrediction> best;
    for (const QAExample& ex : examples) {
      Mat<float> h = encode(ex.seq, params);
      std::vector<float> start_logits, end_logits;
      qa_forward(h, heads.qa, start_logits, end_logits);
      QASpan span;
      try {
        span = qa_predict(start_logits, end_logits, ex.seq.region_begin, opt.max_answer_len);
      } catch (const Error&) {
        continue;
      }
      auto it = best.find(ex.question_id);
      if (it == best.end() || span.score > it->second.score) {
        QAPrediction p;
        p.question_id = ex.question_id;
        p.doc_id = ex.doc_id;
        p.answer_text = span_text(ex.seq, span.start, span.end, vocab);
        p.window_index = ex.seq.window_index;
        p.start = span.start;
        p.end = span.end;
        p.score = span.score;
        best[ex.question_id] = std::move(p);
      }
    }
    for (auto& [qid, pred] : best) out.push_back(std::move(pred));
  }
  return out;
}

}  // namespace treelm
