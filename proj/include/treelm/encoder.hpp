#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "treelm/error.hpp"
#include "treelm/linearize.hpp"
#include "treelm/rng.hpp"
#include "treelm/tensor.hpp"

namespace treelm {

struct EncoderConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ffn = 256;
  int vocab_size = 0;
  PositionTableSizes tables;  // position table sizes; num_tags comes from the vocab
  double dropout = 0.0;
  uint64_t seed = 1;
  // Structure ablation switch: when false the position tables are never added
  // (equivalent to zeroing every phi table) and receive no gradient.
  bool use_positions = true;

  void validate() const {
    if (hidden % heads != 0) throw Error::config_invalid("hidden must be divisible by heads");
    if (vocab_size <= kNumSpecials) throw Error::config_invalid("vocab_size too small");
    if (layers < 0 || hidden < 1 || heads < 1 || ffn < 1)
      throw Error::config_invalid("bad encoder dimensions");
  }
  int head_dim() const { return hidden / heads; }
  int table_size(int feature) const {
    switch (feature) {
      case kPosNode:
      case kPosParent:
      case kPosSibling: return tables.max_nodes;
      case kPosDepth: return tables.max_depth;
      case kPosTag: return tables.num_tags;
      case kPosToken: return tables.max_len;
    }
    return 0;
  }
};

template <typename T>
struct LayerParams {
  Mat<T> wq, wk, wv, wo;  // hidden x hidden
  Mat<T> w1;              // hidden x ffn
  std::vector<T> b1;
  Mat<T> w2;              // ffn x hidden
  std::vector<T> b2;
  std::vector<T> ln1_g, ln1_b, ln2_g, ln2_b;
};

template <typename T>
struct Params {
  EncoderConfig cfg;
  Mat<T> word;                 // vocab_size x hidden, tied with the MLM output
  std::array<Mat<T>, 6> pos;   // per-feature lookup tables
  std::vector<LayerParams<T>> layers;
  Mat<T> mlm_w;                // hidden x hidden
  std::vector<T> mlm_b;
};

// Visits every parameter buffer in a fixed declared order. The same order is
// used by initialization, the optimizer, checkpoints, and the gradient check.
template <typename T, typename F>
void for_each_tensor(Params<T>& p, F&& f) {
  f("word", p.word.data);
  for (int k = 0; k < 6; ++k) f("pos" + std::to_string(k), p.pos[static_cast<size_t>(k)].data);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l) + ".";
    LayerParams<T>& lp = p.layers[l];
    f(base + "wq", lp.wq.data);
    f(base + "wk", lp.wk.data);
    f(base + "wv", lp.wv.data);
    f(base + "wo", lp.wo.data);
    f(base + "w1", lp.w1.data);
    f(base + "b1", lp.b1);
    f(base + "w2", lp.w2.data);
    f(base + "b2", lp.b2);
    f(base + "ln1_g", lp.ln1_g);
    f(base + "ln1_b", lp.ln1_b);
    f(base + "ln2_g", lp.ln2_g);
    f(base + "ln2_b", lp.ln2_b);
  }
  f("mlm_w", p.mlm_w.data);
  f("mlm_b", p.mlm_b);
}

template <typename T>
Params<T> zero_params(const EncoderConfig& cfg) {
  cfg.validate();
  Params<T> p;
  p.cfg = cfg;
  const int d = cfg.hidden;
  p.word = Mat<T>(cfg.vocab_size, d);
  for (int k = 0; k < 6; ++k) p.pos[static_cast<size_t>(k)] = Mat<T>(cfg.table_size(k), d);
  p.layers.resize(static_cast<size_t>(cfg.layers));
  for (auto& lp : p.layers) {
    lp.wq = Mat<T>(d, d);
    lp.wk = Mat<T>(d, d);
    lp.wv = Mat<T>(d, d);
    lp.wo = Mat<T>(d, d);
    lp.w1 = Mat<T>(d, cfg.ffn);
    lp.b1.assign(static_cast<size_t>(cfg.ffn), T(0));
    lp.w2 = Mat<T>(cfg.ffn, d);
    lp.b2.assign(static_cast<size_t>(d), T(0));
    lp.ln1_g.assign(static_cast<size_t>(d), T(0));
    lp.ln1_b.assign(static_cast<size_t>(d), T(0));
    lp.ln2_g.assign(static_cast<size_t>(d), T(0));
    lp.ln2_b.assign(static_cast<size_t>(d), T(0));
  }
  p.mlm_w = Mat<T>(d, d);
  p.mlm_b.assign(static_cast<size_t>(d), T(0));
  return p;
}

// Weight entries ~ Normal(0, 0.02^2); layer-norm gains 1, biases 0.
template <typename T>
Params<T> init_params(const EncoderConfig& cfg) {
  Params<T> p = zero_params<T>(cfg);
  SplitMix64 rng(cfg.seed);
  for_each_tensor(p, [&](const std::string& name, std::vector<T>& buf) {
    if (name.find("ln") != std::string::npos) {
      const T value = name.back() == 'g' ? T(1) : T(0);
      std::fill(buf.begin(), buf.end(), value);
    } else {
      for (T& v : buf) v = static_cast<T>(0.02 * rng.normal());
    }
  });
  return p;
}

template <typename To, typename From>
Params<To> params_cast(const Params<From>& src) {
  Params<To> dst = zero_params<To>(src.cfg);
  auto& from = const_cast<Params<From>&>(src);
  std::vector<std::vector<From>*> src_bufs;
  for_each_tensor(from, [&](const std::string&, std::vector<From>& buf) { src_bufs.push_back(&buf); });
  size_t i = 0;
  for_each_tensor(dst, [&](const std::string&, std::vector<To>& buf) {
    const std::vector<From>& s = *src_bufs[i++];
    for (size_t k = 0; k < buf.size(); ++k) buf[k] = static_cast<To>(s[k]);
  });
  return dst;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

// Input embedding: word vector plus the six position embeddings, per token.
template <typename T>
Mat<T> embed(const PositionedSequence& seq, const Params<T>& p) {
  const EncoderConfig& cfg = p.cfg;
  const int d = cfg.hidden;
  Mat<T> h(seq.length(), d);
  for (int i = 0; i < seq.length(); ++i) {
    const TokenId tok = seq.tokens[static_cast<size_t>(i)];
    if (tok < 0 || tok >= cfg.vocab_size)
      throw Error::index_out_of_table("token id " + std::to_string(tok));
    T* row = h.row(i);
    const T* w = p.word.row(tok);
    for (int j = 0; j < d; ++j) row[j] = w[j];
    if (!cfg.use_positions) continue;
    for (int k = 0; k < 6; ++k) {
      const int32_t idx = seq.pos[static_cast<size_t>(i)][static_cast<size_t>(k)];
      if (idx < 0 || idx >= cfg.table_size(k))
        throw Error::index_out_of_table("position feature " + std::to_string(k) + " value " +
                                        std::to_string(idx));
      const T* e = p.pos[static_cast<size_t>(k)].row(idx);
      for (int j = 0; j < d; ++j) row[j] += e[j];
    }
  }
  return h;
}

template <typename T>
struct DropoutMask {
  bool active = false;
  Mat<T> mask;  // inverted-dropout multipliers
  void apply(Mat<T>& m) const {
    if (!active) return;
    for (size_t i = 0; i < m.data.size(); ++i) m.data[i] *= mask.data[i];
  }
  void apply_grad(Mat<T>& g) const { apply(g); }
};

template <typename T>
DropoutMask<T> make_dropout(int rows, int cols, double rate, SplitMix64* rng) {
  DropoutMask<T> dm;
  if (rate <= 0.0 || rng == nullptr) return dm;
  dm.active = true;
  dm.mask = Mat<T>(rows, cols);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& v : dm.mask.data) v = rng->uniform() < rate ? T(0) : keep_scale;
  return dm;
}

template <typename T>
struct LayerCache {
  Mat<T> input;
  Mat<T> q, k, v;
  std::vector<Mat<T>> probs;  // per-head attention rows (softmaxed)
  Mat<T> concat;              // heads concatenated context
  Mat<T> res1;                // input + attention output (pre-LN)
  Mat<T> ln1_out;
  std::vector<T> ln1_mean, ln1_rstd;
  Mat<T> ffn_pre, ffn_act;
  Mat<T> res2;                // ln1_out + ffn output (pre-LN)
  Mat<T> ln2_out;
  std::vector<T> ln2_mean, ln2_rstd;
  DropoutMask<T> attn_drop, ffn_drop;
};

template <typename T>
struct ForwardCache {
  Mat<T> embedded;
  DropoutMask<T> embed_drop;
  std::vector<LayerCache<T>> layers;
  const Mat<T>& output() const { return layers.empty() ? embedded : layers.back().ln2_out; }
};

// Runs the full encoder stack. Pass dropout_rng only during training.
// Throws NonFiniteActivation when the output diverges.
template <typename T>
const Mat<T>& encode(const PositionedSequence& seq, const Params<T>& p, ForwardCache<T>& cache,
                     SplitMix64* dropout_rng = nullptr) {
  using namespace kernels;
  const EncoderConfig& cfg = p.cfg;
  const int d = cfg.hidden;
  const int dh = cfg.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  cache.embedded = embed(seq, p);
  cache.embed_drop = make_dropout<T>(cache.embedded.rows, d, cfg.dropout, dropout_rng);
  cache.embed_drop.apply(cache.embedded);
  cache.layers.assign(static_cast<size_t>(cfg.layers), {});

  const Mat<T>* h = &cache.embedded;
  for (int l = 0; l < cfg.layers; ++l) {
    LayerCache<T>& lc = cache.layers[static_cast<size_t>(l)];
    const LayerParams<T>& lp = p.layers[static_cast<size_t>(l)];
    lc.input = *h;

    matmul(lc.input, lp.wq, lc.q);
    matmul(lc.input, lp.wk, lc.k);
    matmul(lc.input, lp.wv, lc.v);

    lc.concat = Mat<T>(lc.input.rows, d);
    lc.probs.resize(static_cast<size_t>(cfg.heads));
    for (int a = 0; a < cfg.heads; ++a) {
      Mat<T> qa = col_block(lc.q, a * dh, (a + 1) * dh);
      Mat<T> ka = col_block(lc.k, a * dh, (a + 1) * dh);
      Mat<T> va = col_block(lc.v, a * dh, (a + 1) * dh);
      Mat<T>& probs = lc.probs[static_cast<size_t>(a)];
      matmul_nt(qa, ka, probs);
      kernels::scale(probs, scale);
      softmax_rows(probs);
      Mat<T> ctx;
      matmul(probs, va, ctx);
      set_col_block(lc.concat, ctx, a * dh);
    }

    Mat<T> attn_out;
    matmul(lc.concat, lp.wo, attn_out);
    lc.attn_drop = make_dropout<T>(attn_out.rows, d, cfg.dropout, dropout_rng);
    lc.attn_drop.apply(attn_out);

    lc.res1 = lc.input;
    add_inplace(lc.res1, attn_out);
    layer_norm(lc.res1, lp.ln1_g, lp.ln1_b, lc.ln1_out, lc.ln1_mean, lc.ln1_rstd);

    matmul(lc.ln1_out, lp.w1, lc.ffn_pre);
    add_bias(lc.ffn_pre, lp.b1);
    gelu(lc.ffn_pre, lc.ffn_act);
    Mat<T> ffn_out;
    matmul(lc.ffn_act, lp.w2, ffn_out);
    add_bias(ffn_out, lp.b2);
    lc.ffn_drop = make_dropout<T>(ffn_out.rows, d, cfg.dropout, dropout_rng);
    lc.ffn_drop.apply(ffn_out);

    lc.res2 = lc.ln1_out;
    add_inplace(lc.res2, ffn_out);
    layer_norm(lc.res2, lp.ln2_g, lp.ln2_b, lc.ln2_out, lc.ln2_mean, lc.ln2_rstd);
    h = &lc.ln2_out;
  }

  for (T v : h->data)
    if (!std::isfinite(v)) throw Error::non_finite("encoder output is not finite");
  return *h;
}

template <typename T>
Mat<T> encode(const PositionedSequence& seq, const Params<T>& p) {
  ForwardCache<T> cache;
  return encode(seq, p, cache);
}

// ---------------------------------------------------------------------------
// MLM head (tied output embeddings)
// ---------------------------------------------------------------------------

// h_w = mlm transform of the encoder output; logits = h_w . word_k over the
// vocabulary, reusing the input word table as output weights.
template <typename T>
Mat<T> mlm_logits(const Mat<T>& h, const Params<T>& p) {
  Mat<T> hw;
  kernels::matmul(h, p.mlm_w, hw);
  kernels::add_bias(hw, p.mlm_b);
  Mat<T> logits;
  kernels::matmul_nt(hw, p.word, logits);
  return logits;
}

// Mean negative log-likelihood over the selected positions (labels use
// kIgnoreLabel elsewhere). Throws NoSelectedPositions when nothing is labeled.
template <typename T>
T mlm_loss(const Mat<T>& logits, const std::vector<TokenId>& labels) {
  if (static_cast<size_t>(logits.rows) != labels.size())
    throw Error::plan_mismatch("labels length does not match logits rows");
  double total = 0.0;
  int n = 0;
  for (int i = 0; i < logits.rows; ++i) {
    const TokenId label = labels[static_cast<size_t>(i)];
    if (label < 0) continue;
    if (label >= logits.cols) throw Error::label_out_of_range("label " + std::to_string(label));
    const T* row = logits.row(i);
    T mx = row[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < logits.cols; ++j) lse += std::exp(static_cast<double>(row[j] - mx));
    total += std::log(lse) + static_cast<double>(mx) - static_cast<double>(row[label]);
    ++n;
  }
  if (n == 0) throw Error::no_selected_positions("no labeled positions in sequence");
  return static_cast<T>(total / n);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

// MLM loss + gradient w.r.t. the encoder output and parameters, computed on
// the selected rows only. Gradients accumulate into `g`; d_h is written
// (same shape as h). loss_scale multiplies the loss gradient (batch mean).
template <typename T>
T mlm_loss_backward(const Mat<T>& h, const std::vector<TokenId>& labels, const Params<T>& p,
                    Params<T>& g, Mat<T>& d_h, T loss_scale = T(1)) {
  using namespace kernels;
  std::vector<int> sel;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) sel.push_back(static_cast<int>(i));
  if (sel.empty()) throw Error::no_selected_positions("no labeled positions in sequence");

  Mat<T> h_sel(static_cast<int>(sel.size()), h.cols);
  for (size_t r = 0; r < sel.size(); ++r)
    for (int j = 0; j < h.cols; ++j) h_sel.at(static_cast<int>(r), j) = h.at(sel[r], j);

  Mat<T> hw;
  matmul(h_sel, p.mlm_w, hw);
  add_bias(hw, p.mlm_b);
  Mat<T> logits;
  matmul_nt(hw, p.word, logits);

  const T inv_n = T(1) / static_cast<T>(sel.size());
  double total = 0.0;
  Mat<T> d_logits(logits.rows, logits.cols);
  for (int r = 0; r < logits.rows; ++r) {
    const TokenId label = labels[static_cast<size_t>(sel[static_cast<size_t>(r)])];
    if (label >= logits.cols) throw Error::label_out_of_range("label " + std::to_string(label));
    T* row = logits.row(r);
    T mx = row[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < logits.cols; ++j) lse += std::exp(static_cast<double>(row[j] - mx));
    total += std::log(lse) + static_cast<double>(mx) - static_cast<double>(row[label]);
    const T inv_lse = static_cast<T>(1.0 / lse);
    T* drow = d_logits.row(r);
    for (int j = 0; j < logits.cols; ++j)
      drow[j] = std::exp(row[j] - mx) * inv_lse * inv_n * loss_scale;
    drow[label] -= inv_n * loss_scale;
  }

  // logits = hw . word^T: d_hw = d_logits . word; d_word += d_logits^T . hw
  Mat<T> d_hw;
  matmul(d_logits, p.word, d_hw);
  matmul_tn_acc(d_logits, hw, g.word);
  // hw = h_sel . mlm_w + b
  matmul_tn_acc(h_sel, d_hw, g.mlm_w);
  for (int r = 0; r < d_hw.rows; ++r)
    for (int j = 0; j < d_hw.cols; ++j) g.mlm_b[static_cast<size_t>(j)] += d_hw.at(r, j);
  Mat<T> d_h_sel;
  matmul_nt(d_hw, p.mlm_w, d_h_sel);

  d_h = Mat<T>(h.rows, h.cols);
  for (size_t r = 0; r < sel.size(); ++r)
    for (int j = 0; j < h.cols; ++j) d_h.at(sel[r], j) = d_h_sel.at(static_cast<int>(r), j);
  return static_cast<T>(total / static_cast<double>(sel.size()));
}

// Backpropagates d_output through the encoder stack; parameter gradients
// accumulate into g.
template <typename T>
void encoder_backward(const PositionedSequence& seq, const Params<T>& p,
                      const ForwardCache<T>& cache, const Mat<T>& d_output, Params<T>& g) {
  using namespace kernels;
  const EncoderConfig& cfg = p.cfg;
  const int d = cfg.hidden;
  const int dh = cfg.head_dim();
  const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  Mat<T> d_h = d_output;
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const LayerCache<T>& lc = cache.layers[static_cast<size_t>(l)];
    const LayerParams<T>& lp = p.layers[static_cast<size_t>(l)];
    LayerParams<T>& lg = g.layers[static_cast<size_t>(l)];

    // ln2
    Mat<T> d_res2;
    layer_norm_backward(lc.res2, lp.ln2_g, lc.ln2_mean, lc.ln2_rstd, d_h, d_res2, lg.ln2_g,
                        lg.ln2_b);
    // res2 = ln1_out + ffn_out
    Mat<T> d_ffn_out = d_res2;
    lc.ffn_drop.apply_grad(d_ffn_out);
    Mat<T> d_ln1_out = d_res2;

    // ffn_out = gelu(ln1_out.w1 + b1).w2 + b2
    Mat<T> d_act;
    matmul_nt(d_ffn_out, lp.w2, d_act);
    matmul_tn_acc(lc.ffn_act, d_ffn_out, lg.w2);
    for (int r = 0; r < d_ffn_out.rows; ++r)
      for (int j = 0; j < d_ffn_out.cols; ++j) lg.b2[static_cast<size_t>(j)] += d_ffn_out.at(r, j);
    Mat<T> d_pre;
    gelu_backward(lc.ffn_pre, d_act, d_pre);
    Mat<T> d_ln1_from_ffn;
    matmul_nt(d_pre, lp.w1, d_ln1_from_ffn);
    matmul_tn_acc(lc.ln1_out, d_pre, lg.w1);
    for (int r = 0; r < d_pre.rows; ++r)
      for (int j = 0; j < d_pre.cols; ++j) lg.b1[static_cast<size_t>(j)] += d_pre.at(r, j);
    add_inplace(d_ln1_out, d_ln1_from_ffn);

    // ln1
    Mat<T> d_res1;
    layer_norm_backward(lc.res1, lp.ln1_g, lc.ln1_mean, lc.ln1_rstd, d_ln1_out, d_res1, lg.ln1_g,
                        lg.ln1_b);
    // res1 = input + attn_out
    Mat<T> d_attn_out = d_res1;
    lc.attn_drop.apply_grad(d_attn_out);
    Mat<T> d_input = d_res1;

    // attn_out = concat.wo
    Mat<T> d_concat;
    matmul_nt(d_attn_out, lp.wo, d_concat);
    matmul_tn_acc(lc.concat, d_attn_out, lg.wo);

    Mat<T> d_q(lc.q.rows, d), d_k(lc.k.rows, d), d_v(lc.v.rows, d);
    for (int a = 0; a < cfg.heads; ++a) {
      Mat<T> d_ctx = col_block(d_concat, a * dh, (a + 1) * dh);
      Mat<T> va = col_block(lc.v, a * dh, (a + 1) * dh);
      Mat<T> qa = col_block(lc.q, a * dh, (a + 1) * dh);
      Mat<T> ka = col_block(lc.k, a * dh, (a + 1) * dh);
      const Mat<T>& probs = lc.probs[static_cast<size_t>(a)];

      Mat<T> d_probs;
      matmul_nt(d_ctx, va, d_probs);
      Mat<T> d_va;
      matmul_tn(probs, d_ctx, d_va);
      Mat<T> d_scores;
      softmax_rows_backward(probs, d_probs, d_scores);
      kernels::scale(d_scores, att_scale);
      Mat<T> d_qa;
      matmul(d_scores, ka, d_qa);
      Mat<T> d_ka;
      matmul_tn(d_scores, qa, d_ka);
      set_col_block(d_q, d_qa, a * dh);
      set_col_block(d_k, d_ka, a * dh);
      set_col_block(d_v, d_va, a * dh);
    }

    Mat<T> tmp;
    matmul_nt(d_q, lp.wq, tmp);
    add_inplace(d_input, tmp);
    matmul_nt(d_k, lp.wk, tmp);
    add_inplace(d_input, tmp);
    matmul_nt(d_v, lp.wv, tmp);
    add_inplace(d_input, tmp);
    matmul_tn_acc(lc.input, d_q, lg.wq);
    matmul_tn_acc(lc.input, d_k, lg.wk);
    matmul_tn_acc(lc.input, d_v, lg.wv);

    d_h = std::move(d_input);
  }

  cache.embed_drop.apply_grad(d_h);
  // Embedding scatter.
  for (int i = 0; i < d_h.rows; ++i) {
    const TokenId tok = seq.tokens[static_cast<size_t>(i)];
    T* wrow = g.word.row(tok);
    const T* drow = d_h.row(i);
    for (int j = 0; j < d; ++j) wrow[j] += drow[j];
    if (!cfg.use_positions) continue;
    for (int k = 0; k < 6; ++k) {
      const int32_t idx = seq.pos[static_cast<size_t>(i)][static_cast<size_t>(k)];
      T* prow = g.pos[static_cast<size_t>(k)].row(idx);
      for (int j = 0; j < d; ++j) prow[j] += drow[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

// Central finite differences against the analytic gradients of the MLM loss,
// every parameter tensor, 64-bit arithmetic. labels must select >= 1 position.
inline GradCheckReport grad_check(Params<double>& p, const PositionedSequence& seq,
                                  const std::vector<TokenId>& labels, double step = 1e-5) {
  Params<double> g = zero_params<double>(p.cfg);
  {
    ForwardCache<double> cache;
    const Mat<double>& h = encode(seq, p, cache);
    Mat<double> d_h;
    mlm_loss_backward(h, labels, p, g, d_h);
    encoder_backward(seq, p, cache, d_h, g);
  }

  auto loss_at = [&]() {
    ForwardCache<double> cache;
    const Mat<double>& h = encode(seq, p, cache);
    Mat<double> logits = mlm_logits(h, p);
    return static_cast<double>(mlm_loss(logits, labels));
  };

  GradCheckReport report;
  std::vector<std::pair<std::string, std::vector<double>*>> param_bufs, grad_bufs;
  for_each_tensor(p, [&](const std::string& n, std::vector<double>& b) { param_bufs.emplace_back(n, &b); });
  for_each_tensor(g, [&](const std::string& n, std::vector<double>& b) { grad_bufs.emplace_back(n, &b); });

  for (size_t t = 0; t < param_bufs.size(); ++t) {
    std::vector<double>& buf = *param_bufs[t].second;
    const std::vector<double>& analytic = *grad_bufs[t].second;
    for (size_t i = 0; i < buf.size(); ++i) {
      const double saved = buf[i];
      buf[i] = saved + step;
      const double plus = loss_at();
      buf[i] = saved - step;
      const double minus = loss_at();
      buf[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-6);
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = param_bufs[t].first;
      }
    }
  }
  return report;
}

}  // namespace treelm
