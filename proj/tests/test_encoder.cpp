#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "treelm/encoder.hpp"
#include "treelm/optim.hpp"
#include "treelm/rng.hpp"

using namespace treelm;

namespace {

EncoderConfig tiny_config(int vocab = 31, int layers = 1, uint64_t seed = 7) {
  EncoderConfig cfg;
  cfg.layers = layers;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.ffn = 24;
  cfg.vocab_size = vocab;
  cfg.tables.max_nodes = 12;
  cfg.tables.max_depth = 6;
  cfg.tables.num_tags = 5;
  cfg.tables.max_len = 16;
  cfg.seed = seed;
  return cfg;
}

PositionedSequence make_seq(const EncoderConfig& cfg, int T, uint64_t seed) {
  SplitMix64 rng(seed);
  PositionedSequence seq;
  seq.doc_id = "t";
  for (int i = 0; i < T; ++i) {
    seq.tokens.push_back(static_cast<TokenId>(rng.below(static_cast<uint64_t>(cfg.vocab_size))));
    PosRow row;
    row[kPosNode] = static_cast<int32_t>(1 + rng.below(static_cast<uint64_t>(cfg.tables.max_nodes - 1)));
    row[kPosParent] = static_cast<int32_t>(rng.below(static_cast<uint64_t>(cfg.tables.max_nodes)));
    row[kPosSibling] = static_cast<int32_t>(1 + rng.below(4));
    row[kPosDepth] = static_cast<int32_t>(rng.below(static_cast<uint64_t>(cfg.tables.max_depth)));
    row[kPosTag] = static_cast<int32_t>(rng.below(static_cast<uint64_t>(cfg.tables.num_tags)));
    row[kPosToken] = i;
    seq.pos.push_back(row);
  }
  // two-node ranges so MLM node bookkeeping has something to hold on to
  seq.node_anchor[0] = 0;
  seq.node_ranges[0] = {0, T / 2};
  seq.node_anchor[1] = T / 2;
  seq.node_ranges[1] = {T / 2, T};
  return seq;
}

std::vector<TokenId> some_labels(const PositionedSequence& seq, int every, uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<TokenId> labels(static_cast<size_t>(seq.length()), kIgnoreLabel);
  for (int i = 0; i < seq.length(); i += every)
    labels[static_cast<size_t>(i)] = seq.tokens[static_cast<size_t>(i)];
  (void)rng;
  return labels;
}

// ---------------------------------------------------------------------------
// Straight-line double-precision reimplementation of the forward pass,
// written directly from the layer equations with plain loops. Shares no code
// with the library implementation.
// ---------------------------------------------------------------------------

using Grid = std::vector<std::vector<double>>;

Grid naive_forward(const PositionedSequence& seq, const Params<double>& p) {
  const EncoderConfig& cfg = p.cfg;
  const int T = seq.length();
  const int d = cfg.hidden;
  const int A = cfg.heads;
  const int dh = d / A;

  Grid h(static_cast<size_t>(T), std::vector<double>(static_cast<size_t>(d), 0.0));
  for (int i = 0; i < T; ++i) {
    for (int c = 0; c < d; ++c)
      h[i][c] = p.word.at(seq.tokens[static_cast<size_t>(i)], c);
    if (cfg.use_positions)
      for (int k = 0; k < 6; ++k)
        for (int c = 0; c < d; ++c)
          h[i][c] += p.pos[static_cast<size_t>(k)].at(
              seq.pos[static_cast<size_t>(i)][static_cast<size_t>(k)], c);
  }

  auto layer_norm_row = [&](const std::vector<double>& x, const std::vector<double>& g,
                            const std::vector<double>& b) {
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= x.size();
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= x.size();
    std::vector<double> y(x.size());
    for (size_t c = 0; c < x.size(); ++c)
      y[c] = g[c] * (x[c] - mu) / std::sqrt(var + 1e-5) + b[c];
    return y;
  };

  for (int l = 0; l < cfg.layers; ++l) {
    const LayerParams<double>& lp = p.layers[static_cast<size_t>(l)];
    Grid q(h.size(), std::vector<double>(static_cast<size_t>(d), 0.0)), k = q, v = q;
    for (int i = 0; i < T; ++i)
      for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) {
          q[i][c] += h[i][r] * lp.wq.at(r, c);
          k[i][c] += h[i][r] * lp.wk.at(r, c);
          v[i][c] += h[i][r] * lp.wv.at(r, c);
        }
    Grid ctx(h.size(), std::vector<double>(static_cast<size_t>(d), 0.0));
    for (int a = 0; a < A; ++a) {
      for (int i = 0; i < T; ++i) {
        std::vector<double> score(static_cast<size_t>(T), 0.0);
        for (int j = 0; j < T; ++j) {
          for (int c = a * dh; c < (a + 1) * dh; ++c) score[static_cast<size_t>(j)] += q[i][c] * k[j][c];
          score[static_cast<size_t>(j)] /= std::sqrt(static_cast<double>(dh));
        }
        double total = 0.0;
        std::vector<double> prob(static_cast<size_t>(T));
        for (int j = 0; j < T; ++j) total += std::exp(score[static_cast<size_t>(j)]);
        for (int j = 0; j < T; ++j) prob[static_cast<size_t>(j)] = std::exp(score[static_cast<size_t>(j)]) / total;
        for (int c = a * dh; c < (a + 1) * dh; ++c)
          for (int j = 0; j < T; ++j) ctx[i][c] += prob[static_cast<size_t>(j)] * v[j][c];
      }
    }
    Grid attn(h.size(), std::vector<double>(static_cast<size_t>(d), 0.0));
    for (int i = 0; i < T; ++i)
      for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) attn[i][c] += ctx[i][r] * lp.wo.at(r, c);

    Grid u(h.size(), std::vector<double>(static_cast<size_t>(d), 0.0));
    for (int i = 0; i < T; ++i) {
      std::vector<double> res(static_cast<size_t>(d));
      for (int c = 0; c < d; ++c) res[static_cast<size_t>(c)] = h[i][c] + attn[i][c];
      u[i] = layer_norm_row(res, lp.ln1_g, lp.ln1_b);
    }
    for (int i = 0; i < T; ++i) {
      std::vector<double> pre(static_cast<size_t>(cfg.ffn), 0.0);
      for (int f = 0; f < cfg.ffn; ++f) {
        for (int c = 0; c < d; ++c) pre[static_cast<size_t>(f)] += u[i][c] * lp.w1.at(c, f);
        pre[static_cast<size_t>(f)] += lp.b1[static_cast<size_t>(f)];
      }
      std::vector<double> act(static_cast<size_t>(cfg.ffn));
      for (int f = 0; f < cfg.ffn; ++f)
        act[static_cast<size_t>(f)] =
            0.5 * pre[static_cast<size_t>(f)] *
            (1.0 + std::erf(pre[static_cast<size_t>(f)] / std::sqrt(2.0)));
      std::vector<double> out(static_cast<size_t>(d), 0.0);
      for (int c = 0; c < d; ++c) {
        for (int f = 0; f < cfg.ffn; ++f) out[static_cast<size_t>(c)] += act[static_cast<size_t>(f)] * lp.w2.at(f, c);
        out[static_cast<size_t>(c)] += lp.b2[static_cast<size_t>(c)];
      }
      std::vector<double> res(static_cast<size_t>(d));
      for (int c = 0; c < d; ++c) res[static_cast<size_t>(c)] = u[i][c] + out[static_cast<size_t>(c)];
      h[i] = layer_norm_row(res, lp.ln2_g, lp.ln2_b);
    }
  }
  return h;
}

}  // namespace

TEST_CASE("init: deterministic per seed, layer-norm gains all ones") {
  EncoderConfig cfg = tiny_config();
  Params<float> a = init_params<float>(cfg);
  Params<float> b = init_params<float>(cfg);
  bool identical = true;
  for_each_tensor(a, [&](const std::string& name, std::vector<float>& buf) {
    std::vector<float>* other = nullptr;
    for_each_tensor(b, [&](const std::string& n2, std::vector<float>& buf2) {
      if (n2 == name) other = &buf2;
    });
    if (*other != buf) identical = false;
  });
  CHECK(identical);
  for (const auto& lp : a.layers) {
    for (float g : lp.ln1_g) CHECK(g == 1.0f);
    for (float g : lp.ln2_g) CHECK(g == 1.0f);
    for (float b2 : lp.ln1_b) CHECK(b2 == 0.0f);
  }
}

TEST_CASE("init: empirical stddev of the word table near 0.02") {
  EncoderConfig cfg = tiny_config();
  cfg.vocab_size = 7000;  // 7000 x 16 > 1e5 samples
  Params<float> p = init_params<float>(cfg);
  double sum = 0.0, sq = 0.0;
  for (float v : p.word.data) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(p.word.data.size());
  const double stddev = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(stddev > 0.018);
  CHECK(stddev < 0.022);
}

TEST_CASE("embed: zeroed position tables leave pure word embeddings") {
  EncoderConfig cfg = tiny_config();
  Params<float> p = init_params<float>(cfg);
  for (auto& table : p.pos) table.zero();
  PositionedSequence seq = make_seq(cfg, 6, 3);
  Mat<float> h = embed(seq, p);
  for (int i = 0; i < h.rows; ++i)
    for (int c = 0; c < h.cols; ++c)
      CHECK(h.at(i, c) == p.word.at(seq.tokens[static_cast<size_t>(i)], c));
}

TEST_CASE("embed: identical token and position rows embed identically") {
  EncoderConfig cfg = tiny_config();
  Params<float> p = init_params<float>(cfg);
  PositionedSequence seq = make_seq(cfg, 4, 5);
  seq.tokens[2] = seq.tokens[0];
  seq.pos[2] = seq.pos[0];
  seq.pos[2][kPosToken] = seq.pos[0][kPosToken];  // same seven indices
  Mat<float> h = embed(seq, p);
  for (int c = 0; c < h.cols; ++c) CHECK(h.at(0, c) == h.at(2, c));
}

TEST_CASE("embed: matches a direct seven-term sum") {
  EncoderConfig cfg = tiny_config();
  Params<double> p = init_params<double>(cfg);
  PositionedSequence seq = make_seq(cfg, 5, 9);
  Mat<double> h = embed(seq, p);
  for (int i = 0; i < h.rows; ++i) {
    for (int c = 0; c < h.cols; ++c) {
      double expect = p.word.at(seq.tokens[static_cast<size_t>(i)], c);
      for (int k = 0; k < 6; ++k)
        expect += p.pos[static_cast<size_t>(k)].at(
            seq.pos[static_cast<size_t>(i)][static_cast<size_t>(k)], c);
      CHECK(h.at(i, c) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("embed: out-of-table index raises") {
  EncoderConfig cfg = tiny_config();
  Params<float> p = init_params<float>(cfg);
  PositionedSequence seq = make_seq(cfg, 4, 5);
  seq.tokens[1] = cfg.vocab_size;  // out of range
  CHECK_THROWS_AS(embed(seq, p), Error);
}

TEST_CASE("encode: zero layers equals embed") {
  EncoderConfig cfg = tiny_config(31, 0);
  Params<float> p = init_params<float>(cfg);
  PositionedSequence seq = make_seq(cfg, 6, 1);
  Mat<float> h = encode(seq, p);
  Mat<float> e = embed(seq, p);
  REQUIRE(h.rows == e.rows);
  for (size_t i = 0; i < h.data.size(); ++i) CHECK(h.data[i] == e.data[i]);
}

TEST_CASE("encode: matches the straight-line oracle on a tiny instance") {
  EncoderConfig cfg = tiny_config(31, 1, 7);
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.ffn = 12;
  Params<double> p = init_params<double>(cfg);
  PositionedSequence seq = make_seq(cfg, 4, 7);
  Mat<double> h = encode(seq, p);
  Grid expect = naive_forward(seq, p);
  for (int i = 0; i < h.rows; ++i)
    for (int c = 0; c < h.cols; ++c)
      CHECK(h.at(i, c) == doctest::Approx(expect[static_cast<size_t>(i)][static_cast<size_t>(c)])
                              .epsilon(1e-9));
}

TEST_CASE("encode: two-layer oracle agreement") {
  EncoderConfig cfg = tiny_config(23, 2, 13);
  Params<double> p = init_params<double>(cfg);
  PositionedSequence seq = make_seq(cfg, 6, 21);
  Mat<double> h = encode(seq, p);
  Grid expect = naive_forward(seq, p);
  for (int i = 0; i < h.rows; ++i)
    for (int c = 0; c < h.cols; ++c)
      CHECK(h.at(i, c) == doctest::Approx(expect[static_cast<size_t>(i)][static_cast<size_t>(c)])
                              .epsilon(1e-9));
}

TEST_CASE("encode: permuting tokens with their position rows permutes outputs") {
  EncoderConfig cfg = tiny_config(31, 2);
  Params<float> p = init_params<float>(cfg);
  PositionedSequence seq = make_seq(cfg, 8, 17);
  Mat<float> h = encode(seq, p);

  const std::vector<int> perm = {3, 0, 7, 1, 5, 2, 6, 4};
  PositionedSequence shuffled = seq;
  for (int i = 0; i < 8; ++i) {
    shuffled.tokens[static_cast<size_t>(i)] = seq.tokens[static_cast<size_t>(perm[static_cast<size_t>(i)])];
    shuffled.pos[static_cast<size_t>(i)] = seq.pos[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  }
  Mat<float> hs = encode(shuffled, p);
  double max_dev = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int c = 0; c < h.cols; ++c)
      max_dev = std::max(max_dev,
                         std::abs(static_cast<double>(hs.at(i, c)) -
                                  static_cast<double>(h.at(perm[static_cast<size_t>(i)], c))));
  CHECK(max_dev < 1e-6);
}

TEST_CASE("encode: zeroed position tables equal the positions-disabled path exactly") {
  EncoderConfig cfg = tiny_config(31, 2);
  Params<float> zeroed = init_params<float>(cfg);
  for (auto& table : zeroed.pos) table.zero();

  EncoderConfig ablated_cfg = cfg;
  ablated_cfg.use_positions = false;
  Params<float> ablated = zero_params<float>(ablated_cfg);
  // copy the non-position tensors
  std::vector<std::vector<float>*> src;
  for_each_tensor(zeroed, [&](const std::string&, std::vector<float>& b) { src.push_back(&b); });
  size_t idx = 0;
  for_each_tensor(ablated, [&](const std::string&, std::vector<float>& b) {
    b = *src[idx++];
  });

  PositionedSequence seq = make_seq(cfg, 7, 23);
  Mat<float> a = encode(seq, zeroed);
  Mat<float> b = encode(seq, ablated);
  REQUIRE(a.data.size() == b.data.size());
  for (size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("mlm: uniform logits give ln(vocab) loss") {
  Mat<float> logits(3, 100);  // all zeros = uniform
  std::vector<TokenId> labels = {5, kIgnoreLabel, 17};
  const float loss = mlm_loss(logits, labels);
  CHECK(loss == doctest::Approx(std::log(100.0)).epsilon(1e-6));
}

TEST_CASE("mlm: loss decreases monotonically with the true-class margin") {
  std::vector<TokenId> labels = {3};
  double prev = 1e9;
  for (double margin = 0.0; margin <= 8.0; margin += 1.0) {
    Mat<float> logits(1, 10);
    logits.at(0, 3) = static_cast<float>(margin);
    const double loss = mlm_loss(logits, labels);
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("mlm: fixed tiny instance equals an independent softmax/NLL computation") {
  EncoderConfig cfg = tiny_config(13, 1);
  Params<double> p = init_params<double>(cfg);
  PositionedSequence seq = make_seq(cfg, 5, 3);
  std::vector<TokenId> labels = some_labels(seq, 2, 0);
  Mat<double> h = encode(seq, p);
  Mat<double> logits = mlm_logits(h, p);
  const double loss = mlm_loss(logits, labels);

  // independent: h_w = mlm_w^T-free direct transcription, logits row = h_w . word_k
  double expect = 0.0;
  int n = 0;
  for (int i = 0; i < seq.length(); ++i) {
    if (labels[static_cast<size_t>(i)] < 0) continue;
    std::vector<double> hw(static_cast<size_t>(cfg.hidden), 0.0);
    for (int c = 0; c < cfg.hidden; ++c) {
      for (int r = 0; r < cfg.hidden; ++r) hw[static_cast<size_t>(c)] += h.at(i, r) * p.mlm_w.at(r, c);
      hw[static_cast<size_t>(c)] += p.mlm_b[static_cast<size_t>(c)];
    }
    std::vector<double> row(static_cast<size_t>(cfg.vocab_size), 0.0);
    for (int w = 0; w < cfg.vocab_size; ++w)
      for (int c = 0; c < cfg.hidden; ++c) row[static_cast<size_t>(w)] += hw[static_cast<size_t>(c)] * p.word.at(w, c);
    double denom = 0.0;
    for (double v : row) denom += std::exp(v);
    expect += -std::log(std::exp(row[static_cast<size_t>(labels[static_cast<size_t>(i)])]) / denom);
    ++n;
  }
  expect /= n;
  CHECK(loss == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("mlm: no selected positions is an error, not NaN") {
  Mat<float> logits(4, 10);
  std::vector<TokenId> labels(4, kIgnoreLabel);
  CHECK_THROWS_AS(mlm_loss(logits, labels), Error);
}

TEST_CASE("tied embeddings: word row feeds both input and output") {
  EncoderConfig cfg = tiny_config(17, 1);
  Params<float> p = init_params<float>(cfg);
  PositionedSequence seq = make_seq(cfg, 4, 11);
  const TokenId target = seq.tokens[0];
  Mat<float> h0 = encode(seq, p);
  Mat<float> logits0 = mlm_logits(h0, p);

  for (int c = 0; c < cfg.hidden; ++c) p.word.at(target, c) += 0.5f;
  Mat<float> h1 = encode(seq, p);
  Mat<float> logits1 = mlm_logits(h1, p);
  // input side: embedding of token 0 changed
  bool embed_changed = false;
  for (int c = 0; c < cfg.hidden; ++c)
    if (h0.at(0, c) != h1.at(0, c)) embed_changed = true;
  CHECK(embed_changed);
  // output side: the target column changed even for rows whose inputs changed
  bool col_changed = false;
  for (int i = 0; i < logits0.rows; ++i)
    if (logits0.at(i, target) != logits1.at(i, target)) col_changed = true;
  CHECK(col_changed);
}

TEST_CASE("gradient check: analytic vs central differences under 1e-4") {
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    EncoderConfig cfg = tiny_config(19, 1, seed);
    Params<double> p = init_params<double>(cfg);
    PositionedSequence seq = make_seq(cfg, 6, seed * 100 + 1);
    std::vector<TokenId> labels = some_labels(seq, 2, seed);
    GradCheckReport report = grad_check(p, seq, labels);
    INFO("worst tensor: ", report.worst_tensor);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradient check: all-ignored labels surface the error path") {
  EncoderConfig cfg = tiny_config(19, 1);
  Params<double> p = init_params<double>(cfg);
  PositionedSequence seq = make_seq(cfg, 4, 5);
  std::vector<TokenId> labels(4, kIgnoreLabel);
  CHECK_THROWS_AS(grad_check(p, seq, labels), Error);
}

TEST_CASE("gradients: absent word rows receive zero gradient") {
  EncoderConfig cfg = tiny_config(29, 1);
  Params<double> p = init_params<double>(cfg);
  PositionedSequence seq = make_seq(cfg, 5, 31);
  std::vector<TokenId> labels = some_labels(seq, 2, 0);
  Params<double> g = zero_params<double>(cfg);
  ForwardCache<double> cache;
  const Mat<double>& h = encode(seq, p, cache);
  Mat<double> d_h;
  mlm_loss_backward(h, labels, p, g, d_h);
  encoder_backward(seq, p, cache, d_h, g);

  std::set<TokenId> used(seq.tokens.begin(), seq.tokens.end());
  // tied output embeddings touch every row; only rows absent from the input
  // AND beyond the softmax竞争... every logit column gets gradient through the
  // normalizer, so restrict the check to the input-side scatter by zeroing
  // the output tie: verify instead via a run without any selected logits.
  (void)used;
  // Direct check: word rows not in the input receive gradient only from the
  // output tie. Rerun with the MLM backward skipped.
  Params<double> g2 = zero_params<double>(cfg);
  ForwardCache<double> cache2;
  encode(seq, p, cache2);
  Mat<double> d_out(h.rows, h.cols);
  for (auto& v : d_out.data) v = 0.25;
  encoder_backward(seq, p, cache2, d_out, g2);
  for (TokenId w = 0; w < cfg.vocab_size; ++w) {
    if (used.count(w)) continue;
    for (int c = 0; c < cfg.hidden; ++c) CHECK(g2.word.at(w, c) == 0.0);
  }
}

TEST_CASE("softmax attention rows sum to one inside the encoder") {
  EncoderConfig cfg = tiny_config(17, 1);
  Params<float> p = init_params<float>(cfg);
  PositionedSequence seq = make_seq(cfg, 6, 2);
  ForwardCache<float> cache;
  encode(seq, p, cache);
  for (const auto& probs : cache.layers[0].probs) {
    for (int i = 0; i < probs.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < probs.cols; ++j) sum += probs.at(i, j);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("adam: lr 0 leaves parameters unchanged; schedules ramp and decay") {
  OptimConfig oc;
  oc.lr = 0.0;
  AdamOptimizer<float> adam(oc);
  std::vector<float> param = {1.0f, -2.0f};
  std::vector<float> grad = {0.5f, 0.5f};
  adam.step({&param}, {&grad});
  CHECK(param[0] == 1.0f);
  CHECK(param[1] == -2.0f);

  OptimConfig sched;
  sched.lr = 1.0;
  sched.warmup_steps = 10;
  sched.total_steps = 100;
  AdamOptimizer<float> s(sched);
  CHECK(s.lr_at(1) == doctest::Approx(0.1));
  CHECK(s.lr_at(10) == doctest::Approx(1.0));
  CHECK(s.lr_at(55) == doctest::Approx(0.5));
  CHECK(s.lr_at(100) == doctest::Approx(0.0));
}
