#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "treelm/encoder.hpp"
#include "treelm/error.hpp"
#include "treelm/tensor.hpp"

namespace treelm {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <typename T>
struct AttrHead {  // two-layer perceptron: hidden -> mlp_hidden -> K+1
  Mat<T> w1;
  std::vector<T> b1;
  Mat<T> w2;
  std::vector<T> b2;
  int num_classes() const { return w2.cols; }  // K+1, class 0 = None
};

template <typename T>
struct OpenIEHead {
  std::vector<T> pred_w;  // hidden -> 1 (node is an attribute name)
  std::vector<T> pred_b;  // [1]
  std::vector<T> obj_w;   // hidden -> 1 (node is a value)
  std::vector<T> obj_b;   // [1]
  Mat<T> w_p, w_o;        // hidden x hidden pair-compatibility transforms
  std::vector<T> pair_w;  // 3 -> 1 over [s_p; s_o; s_m]
  std::vector<T> pair_b;  // [1]
};

template <typename T>
struct QAHead {
  std::vector<T> start_w;  // hidden -> 1
  std::vector<T> start_b;
  std::vector<T> end_w;
  std::vector<T> end_b;
};

template <typename T>
struct HeadParams {
  AttrHead<T> attr;
  OpenIEHead<T> openie;
  QAHead<T> qa;
  int hidden = 0;
};

template <typename T, typename F>
void for_each_tensor(HeadParams<T>& h, F&& f) {
  f("attr.w1", h.attr.w1.data);
  f("attr.b1", h.attr.b1);
  f("attr.w2", h.attr.w2.data);
  f("attr.b2", h.attr.b2);
  f("openie.pred_w", h.openie.pred_w);
  f("openie.pred_b", h.openie.pred_b);
  f("openie.obj_w", h.openie.obj_w);
  f("openie.obj_b", h.openie.obj_b);
  f("openie.w_p", h.openie.w_p.data);
  f("openie.w_o", h.openie.w_o.data);
  f("openie.pair_w", h.openie.pair_w);
  f("openie.pair_b", h.openie.pair_b);
  f("qa.start_w", h.qa.start_w);
  f("qa.start_b", h.qa.start_b);
  f("qa.end_w", h.qa.end_w);
  f("qa.end_b", h.qa.end_b);
}

// attr_classes = K+1 (None plus K attribute types); mlp_hidden scales with the
// encoder width.
template <typename T>
HeadParams<T> zero_heads(int hidden, int mlp_hidden, int attr_classes) {
  HeadParams<T> h;
  h.hidden = hidden;
  h.attr.w1 = Mat<T>(hidden, mlp_hidden);
  h.attr.b1.assign(static_cast<size_t>(mlp_hidden), T(0));
  h.attr.w2 = Mat<T>(mlp_hidden, attr_classes);
  h.attr.b2.assign(static_cast<size_t>(attr_classes), T(0));
  h.openie.pred_w.assign(static_cast<size_t>(hidden), T(0));
  h.openie.pred_b.assign(1, T(0));
  h.openie.obj_w.assign(static_cast<size_t>(hidden), T(0));
  h.openie.obj_b.assign(1, T(0));
  h.openie.w_p = Mat<T>(hidden, hidden);
  h.openie.w_o = Mat<T>(hidden, hidden);
  h.openie.pair_w.assign(3, T(0));
  h.openie.pair_b.assign(1, T(0));
  h.qa.start_w.assign(static_cast<size_t>(hidden), T(0));
  h.qa.start_b.assign(1, T(0));
  h.qa.end_w.assign(static_cast<size_t>(hidden), T(0));
  h.qa.end_b.assign(1, T(0));
  return h;
}

template <typename T>
HeadParams<T> init_heads(int hidden, int mlp_hidden, int attr_classes, uint64_t seed) {
  HeadParams<T> h = zero_heads<T>(hidden, mlp_hidden, attr_classes);
  SplitMix64 rng(seed);
  for_each_tensor(h, [&](const std::string&, std::vector<T>& buf) {
    for (T& v : buf) v = static_cast<T>(0.02 * rng.normal());
  });
  return h;
}

// ---------------------------------------------------------------------------
// Attribute extraction: node classification over anchor representations
// ---------------------------------------------------------------------------

// rows = encoder outputs at the nodes' tag-token anchors, one row per node.
template <typename T>
Mat<T> attr_forward(const Mat<T>& rows, const AttrHead<T>& head) {
  Mat<T> pre, act, scores;
  kernels::matmul(rows, head.w1, pre);
  kernels::add_bias(pre, head.b1);
  kernels::gelu(pre, act);
  kernels::matmul(act, head.w2, scores);
  kernels::add_bias(scores, head.b2);
  return scores;
}

// Mean cross-entropy; gold[i] in [0, K].
template <typename T>
T attr_loss(const Mat<T>& scores, const std::vector<int>& gold) {
  if (static_cast<size_t>(scores.rows) != gold.size())
    throw Error::label_out_of_range("gold size mismatch");
  double total = 0.0;
  for (int i = 0; i < scores.rows; ++i) {
    const int label = gold[static_cast<size_t>(i)];
    if (label < 0 || label >= scores.cols)
      throw Error::label_out_of_range("attr label " + std::to_string(label));
    const T* row = scores.row(i);
    T mx = row[0];
    for (int j = 1; j < scores.cols; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < scores.cols; ++j) lse += std::exp(static_cast<double>(row[j] - mx));
    total += std::log(lse) + static_cast<double>(mx) - static_cast<double>(row[label]);
  }
  return scores.rows == 0 ? T(0) : static_cast<T>(total / scores.rows);
}

// Argmax with lowest-class-id tie break (softmax is monotone, so the argmax
// over scores equals the argmax over probabilities).
template <typename T>
std::vector<int> attr_predict(const Mat<T>& scores) {
  std::vector<int> out(static_cast<size_t>(scores.rows), 0);
  for (int i = 0; i < scores.rows; ++i) {
    const T* row = scores.row(i);
    int best = 0;
    for (int j = 1; j < scores.cols; ++j)
      if (row[j] > row[best]) best = j;
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

// Gradients of attr_loss w.r.t. head parameters and the anchor rows.
// loss uses mean reduction; loss_scale multiplies the gradient.
template <typename T>
T attr_loss_backward(const Mat<T>& rows, const std::vector<int>& gold, const AttrHead<T>& head,
                     AttrHead<T>& grad, Mat<T>& d_rows, T loss_scale = T(1)) {
  using namespace kernels;
  Mat<T> pre, act, scores;
  matmul(rows, head.w1, pre);
  add_bias(pre, head.b1);
  gelu(pre, act);
  matmul(act, head.w2, scores);
  add_bias(scores, head.b2);

  const T inv_n = scores.rows > 0 ? T(1) / static_cast<T>(scores.rows) : T(0);
  double total = 0.0;
  Mat<T> d_scores(scores.rows, scores.cols);
  for (int i = 0; i < scores.rows; ++i) {
    const int label = gold[static_cast<size_t>(i)];
    if (label < 0 || label >= scores.cols)
      throw Error::label_out_of_range("attr label " + std::to_string(label));
    const T* row = scores.row(i);
    T mx = row[0];
    for (int j = 1; j < scores.cols; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < scores.cols; ++j) lse += std::exp(static_cast<double>(row[j] - mx));
    total += std::log(lse) + static_cast<double>(mx) - static_cast<double>(row[label]);
    const T inv_lse = static_cast<T>(1.0 / lse);
    T* drow = d_scores.row(i);
    for (int j = 0; j < scores.cols; ++j)
      drow[j] = std::exp(row[j] - mx) * inv_lse * inv_n * loss_scale;
    drow[label] -= inv_n * loss_scale;
  }

  matmul_tn_acc(act, d_scores, grad.w2);
  for (int i = 0; i < d_scores.rows; ++i)
    for (int j = 0; j < d_scores.cols; ++j) grad.b2[static_cast<size_t>(j)] += d_scores.at(i, j);
  Mat<T> d_act;
  matmul_nt(d_scores, head.w2, d_act);
  Mat<T> d_pre;
  gelu_backward(pre, d_act, d_pre);
  matmul_tn_acc(rows, d_pre, grad.w1);
  for (int i = 0; i < d_pre.rows; ++i)
    for (int j = 0; j < d_pre.cols; ++j) grad.b1[static_cast<size_t>(j)] += d_pre.at(i, j);
  matmul_nt(d_pre, head.w1, d_rows);
  return scores.rows == 0 ? T(0) : static_cast<T>(total / scores.rows);
}

// ---------------------------------------------------------------------------
// OpenIE: node-pair scoring
// ---------------------------------------------------------------------------

template <typename T>
struct OpenIEScores {
  T s_p, s_o, s_m, s;
};

template <typename T>
inline T dot(const std::vector<T>& w, const T* x, int n) {
  T acc = T(0);
  for (int i = 0; i < n; ++i) acc += w[static_cast<size_t>(i)] * x[i];
  return acc;
}

// s_p scores node i as an attribute name, s_o scores node j as a value,
// s_m = (W_p h_i) . (W_o h_j), s = pair score over [s_p; s_o; s_m].
template <typename T>
OpenIEScores<T> openie_forward(const T* h_i, const T* h_j, const OpenIEHead<T>& head) {
  const int d = static_cast<int>(head.pred_w.size());
  OpenIEScores<T> s;
  s.s_p = dot(head.pred_w, h_i, d) + head.pred_b[0];
  s.s_o = dot(head.obj_w, h_j, d) + head.obj_b[0];
  s.s_m = T(0);
  for (int r = 0; r < d; ++r) {
    T pi = T(0), oj = T(0);
    const T* wp = head.w_p.row(r);
    const T* wo = head.w_o.row(r);
    for (int c = 0; c < d; ++c) {
      pi += wp[c] * h_i[c];
      oj += wo[c] * h_j[c];
    }
    s.s_m += pi * oj;
  }
  s.s = head.pair_w[0] * s.s_p + head.pair_w[1] * s.s_o + head.pair_w[2] * s.s_m + head.pair_b[0];
  return s;
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Numerically stable binary cross-entropy on a logit.
template <typename T>
inline T bce_logit(T logit, T target) {
  const T mx = std::max(logit, T(0));
  return mx - logit * target + std::log(T(1) + std::exp(-std::abs(logit)));
}

struct OpenIETargets {
  bool is_pred = false;  // node i is an attribute-name node in some gold pair
  bool is_obj = false;   // node j is a value node in some gold pair
  bool is_pair = false;  // (i, j) is a gold pair
};

// Joint binary cross-entropy on the three classifiers.
template <typename T>
T openie_loss(const OpenIEScores<T>& s, const OpenIETargets& t) {
  return bce_logit(s.s_p, T(t.is_pred)) + bce_logit(s.s_o, T(t.is_obj)) +
         bce_logit(s.s, T(t.is_pair));
}

enum class OpenIEGate {
  PredObjPair,  // sigmoid(s_p), sigmoid(s_o), sigmoid(s) all >= 0.5
  PredMidPair,  // literal reading: sigmoid(s_p), sigmoid(s_m), sigmoid(s)
};

template <typename T>
bool openie_extract(const OpenIEScores<T>& s, OpenIEGate gate = OpenIEGate::PredObjPair) {
  const T half = T(0.5);
  if (gate == OpenIEGate::PredObjPair)
    return sigmoid(s.s_p) >= half && sigmoid(s.s_o) >= half && sigmoid(s.s) >= half;
  return sigmoid(s.s_p) >= half && sigmoid(s.s_m) >= half && sigmoid(s.s) >= half;
}

// Backward of openie_loss for one pair; accumulates parameter gradients and
// the gradients w.r.t. both node representations.
template <typename T>
T openie_loss_backward(const T* h_i, const T* h_j, const OpenIETargets& t,
                       const OpenIEHead<T>& head, OpenIEHead<T>& grad, T* d_h_i, T* d_h_j,
                       T loss_scale = T(1)) {
  const int d = static_cast<int>(head.pred_w.size());
  OpenIEScores<T> s = openie_forward(h_i, h_j, head);
  const T loss = openie_loss(s, t);

  // d loss / d logit for BCE = sigmoid(logit) - target.
  const T g_sp_direct = sigmoid(s.s_p) - T(t.is_pred);
  const T g_so_direct = sigmoid(s.s_o) - T(t.is_obj);
  const T g_s = (sigmoid(s.s) - T(t.is_pair)) * loss_scale;
  // s = pair_w . [s_p, s_o, s_m] + b feeds back into the component scores.
  const T g_sp = g_sp_direct * loss_scale + g_s * head.pair_w[0];
  const T g_so = g_so_direct * loss_scale + g_s * head.pair_w[1];
  const T g_sm = g_s * head.pair_w[2];

  grad.pair_w[0] += g_s * s.s_p;
  grad.pair_w[1] += g_s * s.s_o;
  grad.pair_w[2] += g_s * s.s_m;
  grad.pair_b[0] += g_s;

  grad.pred_b[0] += g_sp;
  grad.obj_b[0] += g_so;
  for (int c = 0; c < d; ++c) {
    grad.pred_w[static_cast<size_t>(c)] += g_sp * h_i[c];
    grad.obj_w[static_cast<size_t>(c)] += g_so * h_j[c];
    d_h_i[c] += g_sp * head.pred_w[static_cast<size_t>(c)];
    d_h_j[c] += g_so * head.obj_w[static_cast<size_t>(c)];
  }

  // s_m = sum_r (w_p[r].h_i)(w_o[r].h_j)
  for (int r = 0; r < d; ++r) {
    T pi = T(0), oj = T(0);
    const T* wp = head.w_p.row(r);
    const T* wo = head.w_o.row(r);
    for (int c = 0; c < d; ++c) {
      pi += wp[c] * h_i[c];
      oj += wo[c] * h_j[c];
    }
    T* gwp = grad.w_p.row(r);
    T* gwo = grad.w_o.row(r);
    for (int c = 0; c < d; ++c) {
      gwp[c] += g_sm * oj * h_i[c];
      gwo[c] += g_sm * pi * h_j[c];
      d_h_i[c] += g_sm * oj * wp[c];
      d_h_j[c] += g_sm * pi * wo[c];
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// QA: span extraction
// ---------------------------------------------------------------------------

template <typename T>
void qa_forward(const Mat<T>& h, const QAHead<T>& head, std::vector<T>& start_logits,
                std::vector<T>& end_logits) {
  const int d = h.cols;
  start_logits.assign(static_cast<size_t>(h.rows), T(0));
  end_logits.assign(static_cast<size_t>(h.rows), T(0));
  for (int i = 0; i < h.rows; ++i) {
    start_logits[static_cast<size_t>(i)] = dot(head.start_w, h.row(i), d) + head.start_b[0];
    end_logits[static_cast<size_t>(i)] = dot(head.end_w, h.row(i), d) + head.end_b[0];
  }
}

template <typename T>
T softmax_nll(const std::vector<T>& logits, int label) {
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  double lse = 0.0;
  for (T v : logits) lse += std::exp(static_cast<double>(v - mx));
  return static_cast<T>(std::log(lse) + static_cast<double>(mx) -
                        static_cast<double>(logits[static_cast<size_t>(label)]));
}

// Cross-entropy of the start plus cross-entropy of the end position.
template <typename T>
T qa_loss(const std::vector<T>& start_logits, const std::vector<T>& end_logits, int gold_start,
          int gold_end) {
  const int n = static_cast<int>(start_logits.size());
  if (gold_start < 0 || gold_start >= n || gold_end < 0 || gold_end >= n)
    throw Error::label_out_of_range("gold span out of range");
  return softmax_nll(start_logits, gold_start) + softmax_nll(end_logits, gold_end);
}

struct QASpan {
  int start = -1;
  int end = -1;
  double score = -1e300;
  bool valid() const { return start >= 0; }
};

// Best (i, j) with i <= j <= i + max_answer_len, restricted to
// [region_begin, T). Throws NoValidSpan when the region is empty.
template <typename T>
QASpan qa_predict(const std::vector<T>& start_logits, const std::vector<T>& end_logits,
                  int region_begin, int max_answer_len) {
  const int n = static_cast<int>(start_logits.size());
  if (region_begin < 0 || region_begin >= n) throw Error::no_valid_span("empty answer region");
  QASpan best;
  for (int i = region_begin; i < n; ++i) {
    const int j_hi = std::min(n - 1, i + max_answer_len);
    for (int j = i; j <= j_hi; ++j) {
      const double score =
          static_cast<double>(start_logits[static_cast<size_t>(i)]) +
          static_cast<double>(end_logits[static_cast<size_t>(j)]);
      if (score > best.score) {
        best.score = score;
        best.start = i;
        best.end = j;
      }
    }
  }
  if (!best.valid()) throw Error::no_valid_span("no feasible span");
  return best;
}

template <typename T>
T qa_loss_backward(const Mat<T>& h, const QAHead<T>& head, int gold_start, int gold_end,
                   QAHead<T>& grad, Mat<T>& d_h, T loss_scale = T(1)) {
  std::vector<T> start_logits, end_logits;
  qa_forward(h, head, start_logits, end_logits);
  const T loss = qa_loss(start_logits, end_logits, gold_start, gold_end);

  auto backprop_one = [&](const std::vector<T>& logits, int gold, const std::vector<T>& w,
                          std::vector<T>& gw, std::vector<T>& gb) {
    T mx = logits[0];
    for (T v : logits) mx = std::max(mx, v);
    double lse = 0.0;
    for (T v : logits) lse += std::exp(static_cast<double>(v - mx));
    for (int i = 0; i < h.rows; ++i) {
      T p = static_cast<T>(std::exp(static_cast<double>(logits[static_cast<size_t>(i)] - mx)) / lse);
      T g = (p - (i == gold ? T(1) : T(0))) * loss_scale;
      gb[0] += g;
      const T* row = h.row(i);
      T* drow = d_h.row(i);
      for (int c = 0; c < h.cols; ++c) {
        gw[static_cast<size_t>(c)] += g * row[c];
        drow[c] += g * w[static_cast<size_t>(c)];
      }
    }
  };
  d_h = Mat<T>(h.rows, h.cols);
  backprop_one(start_logits, gold_start, head.start_w, grad.start_w, grad.start_b);
  backprop_one(end_logits, gold_end, head.end_w, grad.end_w, grad.end_b);
  return loss;
}

}  // namespace treelm
