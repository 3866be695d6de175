// treelm: batch pipeline for structure-aware HTML language modeling.
// Subcommands cover corpus generation, vocabulary building, preprocessing,
// masking, pre-training, fine-tuning, prediction, and evaluation.

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "treelm/checkpoint.hpp"
#include "treelm/config.hpp"
#include "treelm/corpus.hpp"
#include "treelm/error.hpp"
#include "treelm/metrics.hpp"
#include "treelm/pipeline.hpp"
#include "treelm/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace treelm;

namespace {

int error_exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::InvalidStride:
    case ErrorKind::BudgetTooSmall:
      return 2;
    case ErrorKind::Schema:
    case ErrorKind::MissingFile:
    case ErrorKind::Io:
    case ErrorKind::Encoding:
    case ErrorKind::EmptyDocument:
    case ErrorKind::EmptyCorpus:
    case ErrorKind::LabelNodeMismatch:
    case ErrorKind::PlanMismatch:
    case ErrorKind::LabelOutOfRange:
    case ErrorKind::SequenceTooLong:
      return 3;
    default:
      return 4;
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error::missing_file("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error::io("cannot write " + path);
  for (const auto& l : lines) f << l << "\n";
  if (!f) throw Error::io("write failure on " + path);
}

struct CommonArgs {
  std::string config_path;
  int jobs = 0;
  uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_run_config(args.config_path);
  if (args.jobs > 0) cfg.jobs = args.jobs;
  if (args.seed_set) cfg.seed = args.seed;
  if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
  return cfg;
}

// Manifest path or corpus directory (uses manifest_zeroshot.jsonl).
std::string resolve_manifest(const std::string& in) {
  if (fs::is_directory(in)) {
    const fs::path p = fs::path(in) / "manifest_zeroshot.jsonl";
    if (!fs::exists(p)) throw Error::missing_file("no manifest_zeroshot.jsonl under " + in);
    return p.string();
  }
  return in;
}

std::vector<ProcessedDoc> process_manifest(const std::string& manifest_path, const Vocab& vocab,
                                           const PipelineConfig& pipe,
                                           const std::string& split_filter = "") {
  const auto entries = load_manifest(manifest_path);
  std::vector<const ManifestEntry*> selected;
  for (const auto& e : entries)
    if (split_filter.empty() || e.split == split_filter) selected.push_back(&e);

  std::vector<ProcessedDoc> docs(selected.size());
  std::vector<std::string> errors(selected.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < selected.size(); ++i) {
    try {
      const ManifestEntry& e = *selected[i];
      docs[i] = process_tree(clean(parse_html_file(e.path), pipe.clean), e, vocab, pipe);
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  }
  for (size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw Error::schema("while processing " + selected[i]->doc_id + ": " + errors[i]);
  return docs;
}

PipelineConfig pipeline_config(const RunConfig& cfg, const Vocab& vocab) {
  PipelineConfig pipe;
  pipe.clean = cfg.clean;
  pipe.window = cfg.window;
  pipe.tables = cfg.tables;
  pipe.tables.num_tags = vocab.num_tag_ids();
  return pipe;
}

EncoderConfig encoder_config(const RunConfig& cfg, const Vocab& vocab) {
  EncoderConfig enc = cfg.encoder;
  enc.vocab_size = vocab.size();
  enc.tables = cfg.tables;
  enc.tables.num_tags = vocab.num_tag_ids();
  return enc;
}

OpenIEGate gate_of(const RunConfig& cfg) {
  return cfg.openie_gate == "pred_mid_pair" ? OpenIEGate::PredMidPair : OpenIEGate::PredObjPair;
}

int attr_class_count(const GoldSet& gold) {
  return static_cast<int>(gold.attribute_names.size()) + 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"treelm: structure-aware language modeling over HTML DOM trees"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "run configuration file (JSON)");
  app.add_option("--jobs", common.jobs, "worker thread cap");
  auto* seed_opt = app.add_option("--seed", common.seed, "master seed override");

  // --- gen-synthetic ---
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic labeled corpus");
  std::string gen_out;
  int gen_sites = -1, gen_templates = -1, gen_pages = -1;
  double gen_noise = -1.0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--sites", gen_sites, "number of sites");
  gen->add_option("--templates", gen_templates, "templates per site");
  gen->add_option("--pages", gen_pages, "pages per template");
  gen->add_option("--noise", gen_noise, "noise knob in [0,1]");

  // --- build-vocab ---
  auto* bv = app.add_subcommand("build-vocab", "build the word/tag vocabulary");
  std::string bv_in, bv_out;
  int bv_min_freq = 1;
  bv->add_option("--in", bv_in, "corpus dir or manifest")->required();
  bv->add_option("--min-freq", bv_min_freq, "minimum word frequency");
  bv->add_option("--out", bv_out, "vocab file")->required();

  // --- preprocess ---
  auto* pp = app.add_subcommand("preprocess", "clean, window, and linearize pages");
  std::string pp_in, pp_vocab, pp_out;
  int64_t pp_window = -1, pp_stride = -1;
  pp->add_option("--in", pp_in, "corpus dir or manifest")->required();
  pp->add_option("--vocab", pp_vocab, "vocab file")->required();
  pp->add_option("--window", pp_window, "token budget M");
  pp->add_option("--stride", pp_stride, "stride S");
  pp->add_option("--out", pp_out, "examples JSONL")->required();

  // --- mask ---
  auto* mk = app.add_subcommand("mask", "plan and apply MLM corruption");
  std::string mk_in, mk_vocab, mk_out;
  double mk_rate = -1.0, mk_node_share = -1.0;
  uint64_t mk_seed = 0;
  bool mk_seed_set = false;
  mk->add_option("--in", mk_in, "examples JSONL")->required();
  mk->add_option("--vocab", mk_vocab, "vocab file")->required();
  mk->add_option("--rate", mk_rate, "mask rate (default 0.15)");
  mk->add_option("--node-share", mk_node_share, "whole-node budget share (default 0.5)");
  mk->add_option("--seed", mk_seed, "mask seed")->each([&](const std::string&) { mk_seed_set = true; });
  mk->add_option("--out", mk_out, "masked JSONL")->required();

  // --- pretrain ---
  auto* pt = app.add_subcommand("pretrain", "MLM pre-training");
  std::string pt_in, pt_vocab, pt_out;
  int pt_steps = -1;
  pt->add_option("--in", pt_in, "masked or plain examples JSONL")->required();
  pt->add_option("--vocab", pt_vocab, "vocab file")->required();
  pt->add_option("--steps", pt_steps, "optimizer steps");
  pt->add_option("--out", pt_out, "checkpoint path")->required();

  // --- finetune ---
  auto* ft = app.add_subcommand("finetune", "fine-tune a task head jointly with the encoder");
  std::string ft_task, ft_ckpt, ft_train, ft_dev, ft_gold, ft_vocab, ft_out;
  int ft_steps = -1;
  ft->add_option("--task", ft_task, "attr | openie | qa")->required();
  ft->add_option("--ckpt", ft_ckpt, "input checkpoint")->required();
  ft->add_option("--train", ft_train, "training manifest (or corpus dir)")->required();
  ft->add_option("--dev", ft_dev, "dev manifest (or corpus dir)");
  ft->add_option("--gold", ft_gold, "gold directory (labels + attributes.json)")->required();
  ft->add_option("--vocab", ft_vocab, "vocab file")->required();
  ft->add_option("--steps", ft_steps, "optimizer steps");
  ft->add_option("--out", ft_out, "output checkpoint")->required();

  // --- predict ---
  auto* pr = app.add_subcommand("predict", "run a fine-tuned model over pages");
  std::string pr_task, pr_ckpt, pr_in, pr_vocab, pr_gold, pr_out;
  pr->add_option("--task", pr_task, "attr | openie | qa")->required();
  pr->add_option("--ckpt", pr_ckpt, "checkpoint with heads")->required();
  pr->add_option("--in", pr_in, "manifest (or corpus dir)")->required();
  pr->add_option("--vocab", pr_vocab, "vocab file")->required();
  pr->add_option("--gold", pr_gold, "gold dir (attribute names; QA questions)")->required();
  pr->add_option("--out", pr_out, "predictions JSONL")->required();

  // --- eval ---
  auto* ev = app.add_subcommand("eval", "score predictions against gold");
  std::string ev_task, ev_pred, ev_gold, ev_manifest, ev_split, ev_out;
  ev->add_option("--task", ev_task, "attr | openie | qa")->required();
  ev->add_option("--pred", ev_pred, "predictions JSONL")->required();
  ev->add_option("--gold", ev_gold, "gold directory")->required();
  ev->add_option("--manifest", ev_manifest, "manifest for per-domain grouping");
  ev->add_option("--split", ev_split, "restrict scoring to this split");
  ev->add_option("--out", ev_out, "report JSON")->required();

  // --- inspect-windows ---
  auto* iw = app.add_subcommand("inspect-windows", "dump windows as JSON Lines");
  std::string iw_in, iw_vocab, iw_out;
  int64_t iw_window = -1, iw_stride = -1;
  iw->add_option("--in", iw_in, "corpus dir or manifest")->required();
  iw->add_option("--vocab", iw_vocab, "vocab file")->required();
  iw->add_option("--window", iw_window, "token budget M");
  iw->add_option("--stride", iw_stride, "stride S");
  iw->add_option("--out", iw_out, "output file (default stdout)");

  // --- mask-preview ---
  auto* mp = app.add_subcommand("mask-preview", "human-readable mask dump");
  std::string mp_in, mp_vocab;
  double mp_rate = -1.0, mp_node_share = -1.0;
  uint64_t mp_seed = 0;
  bool mp_seed_set = false;
  int mp_limit = 3;
  mp->add_option("--in", mp_in, "examples JSONL")->required();
  mp->add_option("--vocab", mp_vocab, "vocab file")->required();
  mp->add_option("--rate", mp_rate, "mask rate");
  mp->add_option("--node-share", mp_node_share, "whole-node budget share");
  mp->add_option("--seed", mp_seed, "mask seed")->each([&](const std::string&) { mp_seed_set = true; });
  mp->add_option("--limit", mp_limit, "sequences to show");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  common.seed_set = seed_opt->count() > 0;

  try {
    RunConfig cfg = resolve_config(common);

    if (*gen) {
      if (gen_sites > 0) cfg.gen.num_sites = gen_sites;
      if (gen_templates > 0) cfg.gen.templates_per_site = gen_templates;
      if (gen_pages > 0) cfg.gen.pages_per_template = gen_pages;
      if (gen_noise >= 0.0) cfg.gen.noise = gen_noise;
      if (common.seed_set) cfg.gen.seed = common.seed;
      SyntheticCorpus corpus = generate_synthetic(cfg.gen);
      write_corpus(corpus, gen_out);
      write_resolved_config(cfg, (fs::path(gen_out) / "resolved_config.json").string());
      std::cout << "wrote " << corpus.pages.size() << " pages, " << corpus.gold.attr.size()
                << " attr labels, " << corpus.gold.pairs.size() << " pairs, "
                << corpus.gold.qa.size() << " qa items to " << gen_out << "\n";
      return 0;
    }

    if (*bv) {
      const auto entries = load_manifest(resolve_manifest(bv_in));
      std::vector<DomTree> trees;
      trees.reserve(entries.size());
      for (const auto& e : entries) trees.push_back(clean(parse_html_file(e.path), cfg.clean));
      std::vector<const DomTree*> ptrs;
      for (const auto& t : trees) ptrs.push_back(&t);
      Vocab vocab = build_vocab(ptrs, bv_min_freq);
      vocab.save(bv_out);
      write_resolved_config(cfg, bv_out + ".config.json");
      std::cout << "vocab size " << vocab.size() << " (" << vocab.num_tag_ids() - 1
                << " tags) -> " << bv_out << "\n";
      return 0;
    }

    if (*pp) {
      if (pp_window > 0) cfg.window.max_tokens = pp_window;
      if (pp_stride > 0) cfg.window.stride = pp_stride;
      Vocab vocab = Vocab::load(pp_vocab);
      PipelineConfig pipe = pipeline_config(cfg, vocab);
      auto docs = process_manifest(resolve_manifest(pp_in), vocab, pipe);
      std::vector<std::string> lines;
      for (const auto& doc : docs)
        for (const auto& seq : doc.seqs) lines.push_back(to_jsonl(seq));
      write_lines(pp_out, lines);
      write_resolved_config(cfg, pp_out + ".config.json");
      std::cout << "wrote " << lines.size() << " windows from " << docs.size() << " docs to "
                << pp_out << "\n";
      return 0;
    }

    if (*mk) {
      if (mk_rate > 0.0) cfg.mask.rate = mk_rate;
      if (mk_node_share >= 0.0) cfg.mask.node_share = mk_node_share;
      if (mk_seed_set) cfg.mask_seed = mk_seed;
      Vocab vocab = Vocab::load(mk_vocab);
      std::vector<std::string> out;
      for (const auto& line : read_lines(mk_in)) {
        PositionedSequence seq = sequence_from_jsonl(line);
        MaskedSequence masked = mask_sequence(seq, cfg.mask, cfg.mask_seed, vocab.size());
        out.push_back(to_jsonl(masked));
      }
      write_lines(mk_out, out);
      write_resolved_config(cfg, mk_out + ".config.json");
      std::cout << "masked " << out.size() << " sequences -> " << mk_out << "\n";
      return 0;
    }

    if (*pt) {
      if (pt_steps > 0) cfg.pretrain_steps = pt_steps;
      Vocab vocab = Vocab::load(pt_vocab);
      std::vector<PositionedSequence> seqs;
      std::vector<MaskedSequence> masked;
      bool have_masks = true;
      for (const auto& line : read_lines(pt_in)) {
        if (line.find("\"masked_tokens\"") != std::string::npos) {
          MaskedSequence m = masked_from_jsonl(line);
          PositionedSequence orig = m.seq;
          for (int i : m.plan.positions) orig.tokens[static_cast<size_t>(i)] = m.plan.labels.at(i);
          seqs.push_back(std::move(orig));
          masked.push_back(std::move(m));
        } else {
          have_masks = false;
          seqs.push_back(sequence_from_jsonl(line));
        }
      }
      EncoderConfig enc = encoder_config(cfg, vocab);
      Params<float> params = init_params<float>(enc);
      PretrainOptions opt;
      opt.mask = cfg.mask;
      opt.optim = cfg.optim;
      opt.steps = cfg.pretrain_steps;
      opt.mask_seed = cfg.mask_seed;
      if (opt.optim.total_steps == 0) opt.optim.total_steps = opt.steps;
      if (opt.optim.warmup_steps == 0) opt.optim.warmup_steps = std::max(1, opt.steps / 10);
      TrainTrace trace =
          pretrain(params, seqs, opt, have_masks && !masked.empty() ? &masked : nullptr);

      CheckpointMeta meta;
      meta.seed = cfg.seed;
      meta.steps = static_cast<int64_t>(trace.loss.size());
      meta.final_loss = trace.final_loss();
      meta.note = "pretrain";
      save_checkpoint(pt_out, params, nullptr, meta);
      write_resolved_config(cfg, pt_out + ".config.json");
      {
        std::ofstream lf(pt_out + ".loss.txt");
        for (size_t i = 0; i < trace.loss.size(); ++i) lf << i << "\t" << trace.loss[i] << "\n";
      }
      for (size_t i = 0; i < trace.loss.size(); ++i)
        if (i == 0 || (i + 1) % 50 == 0 || i + 1 == trace.loss.size())
          std::cout << "step " << (i + 1) << " loss " << trace.loss[i] << "\n";
      return 0;
    }

    if (*ft) {
      if (ft_steps > 0) cfg.finetune_steps = ft_steps;
      Vocab vocab = Vocab::load(ft_vocab);
      Checkpoint ck = load_checkpoint(ft_ckpt);
      if (ck.params.cfg.vocab_size != vocab.size())
        throw Error::schema("vocab size disagrees with checkpoint");
      GoldSet gold = load_gold(ft_gold);
      PipelineConfig pipe = pipeline_config(cfg, vocab);
      pipe.tables = ck.params.cfg.tables;
      auto train_docs = process_manifest(resolve_manifest(ft_train), vocab, pipe, "train");

      HeadParams<float> heads =
          ck.has_heads ? ck.heads
                       : init_heads<float>(ck.params.cfg.hidden, ck.params.cfg.hidden,
                                           attr_class_count(gold), cfg.seed);
      FinetuneOptions opt;
      opt.optim = cfg.finetune_optim;
      opt.steps = cfg.finetune_steps;
      if (opt.optim.total_steps == 0) opt.optim.total_steps = opt.steps;
      if (opt.optim.warmup_steps == 0) opt.optim.warmup_steps = std::max(1, opt.steps / 10);

      TrainTrace trace;
      if (ft_task == "attr") {
        std::vector<AttrExample> examples;
        for (const auto& doc : train_docs) {
          auto ex = build_attr_examples(doc, gold);
          examples.insert(examples.end(), ex.begin(), ex.end());
        }
        trace = finetune_attr(ck.params, heads, examples, opt);
      } else if (ft_task == "openie") {
        std::vector<OpenIEExample> examples;
        for (const auto& doc : train_docs) {
          auto ex = build_openie_examples(doc, gold, cfg.openie);
          examples.insert(examples.end(), ex.begin(), ex.end());
        }
        trace = finetune_openie(ck.params, heads, examples, cfg.openie, opt);
      } else if (ft_task == "qa") {
        std::vector<QAExample> examples;
        for (const auto& doc : train_docs) {
          auto ex = build_qa_examples(doc, gold, vocab, pipe.tables);
          examples.insert(examples.end(), ex.begin(), ex.end());
        }
        trace = finetune_qa(ck.params, heads, examples, opt);
      } else {
        throw Error::config_invalid("unknown task '" + ft_task + "'");
      }

      CheckpointMeta meta;
      meta.seed = cfg.seed;
      meta.steps = static_cast<int64_t>(trace.loss.size());
      meta.final_loss = trace.final_loss();
      meta.note = "finetune:" + ft_task;
      save_checkpoint(ft_out, ck.params, &heads, meta);
      write_resolved_config(cfg, ft_out + ".config.json");
      std::cout << "finetuned " << ft_task << " for " << trace.loss.size() << " steps, final loss "
                << trace.final_loss() << "\n";

      if (!ft_dev.empty()) {
        auto dev_docs = process_manifest(resolve_manifest(ft_dev), vocab, pipe, "dev");
        if (ft_task == "attr") {
          auto preds = predict_attr(ck.params, heads, dev_docs);
          std::set<std::string> dev_ids;
          for (const auto& d : dev_docs) dev_ids.insert(d.doc_id);
          std::vector<AttrTriple> dev_gold;
          for (const auto& t : gold_attr_triples(gold))
            if (dev_ids.count(t.doc_id)) dev_gold.push_back(t);
          PRF prf = value_f1(preds, dev_gold);
          std::cout << "dev value-F1 " << prf.f1 << " (P " << prf.precision << " R " << prf.recall
                    << ")\n";
        }
      }
      return 0;
    }

    if (*pr) {
      Vocab vocab = Vocab::load(pr_vocab);
      Checkpoint ck = load_checkpoint(pr_ckpt);
      if (!ck.has_heads) throw Error::schema("checkpoint has no task heads; run finetune first");
      if (ck.params.cfg.vocab_size != vocab.size())
        throw Error::schema("vocab size disagrees with checkpoint");
      GoldSet gold = load_gold(pr_gold);
      PipelineConfig pipe = pipeline_config(cfg, vocab);
      pipe.tables = ck.params.cfg.tables;
      auto docs = process_manifest(resolve_manifest(pr_in), vocab, pipe);

      std::vector<std::string> lines;
      if (pr_task == "attr") {
        for (const auto& t : predict_attr(ck.params, ck.heads, docs)) {
          json j;
          j["doc_id"] = t.doc_id;
          j["node_id"] = t.node_id;
          j["attribute"] = t.attribute <= static_cast<int>(gold.attribute_names.size())
                               ? gold.attribute_names[static_cast<size_t>(t.attribute - 1)]
                               : std::to_string(t.attribute);
          lines.push_back(j.dump());
        }
      } else if (pr_task == "openie") {
        for (const auto& p : predict_openie(ck.params, ck.heads, docs, cfg.openie, gate_of(cfg))) {
          json j;
          j["doc_id"] = p.doc_id;
          j["pred_node"] = p.pred_node;
          j["obj_node"] = p.obj_node;
          j["pred_surface"] = p.pred_surface;
          j["s"] = p.score;
          lines.push_back(j.dump());
        }
      } else if (pr_task == "qa") {
        for (const auto& p :
             predict_qa(ck.params, ck.heads, docs, gold, vocab, pipe.tables, cfg.qa)) {
          json j;
          j["doc_id"] = p.doc_id;
          j["question_id"] = p.question_id;
          j["answer_text"] = p.answer_text;
          j["start"] = p.start;
          j["end"] = p.end;
          lines.push_back(j.dump());
        }
      } else {
        throw Error::config_invalid("unknown task '" + pr_task + "'");
      }
      write_lines(pr_out, lines);
      write_resolved_config(cfg, pr_out + ".config.json");
      std::cout << "wrote " << lines.size() << " predictions to " << pr_out << "\n";
      return 0;
    }

    if (*ev) {
      GoldSet gold = load_gold(ev_gold);
      std::map<std::string, std::string> doc_domain, doc_split;
      if (!ev_manifest.empty()) {
        for (const auto& e : load_manifest(resolve_manifest(ev_manifest))) {
          doc_domain[e.doc_id] = e.domain;
          doc_split[e.doc_id] = e.split;
        }
      }
      auto in_scope = [&](const std::string& doc_id) {
        if (ev_split.empty()) return true;
        auto it = doc_split.find(doc_id);
        return it != doc_split.end() && it->second == ev_split;
      };

      json report;
      report["task"] = ev_task;
      report["split"] = ev_split.empty() ? "all" : ev_split;

      const auto pred_lines = read_lines(ev_pred);
      auto parse_pred = [&](size_t i) -> json {
        try {
          return json::parse(pred_lines[i]);
        } catch (const json::exception& e) {
          throw Error::schema(ev_pred + ":" + std::to_string(i + 1) + ": " + e.what());
        }
      };

      if (ev_task == "attr") {
        std::vector<AttrTriple> preds;
        for (size_t i = 0; i < pred_lines.size(); ++i) {
          json j = parse_pred(i);
          try {
            AttrTriple t;
            t.doc_id = j.at("doc_id").get<std::string>();
            t.node_id = j.at("node_id").get<NodeId>();
            t.attribute = gold.attribute_id(j.at("attribute").get<std::string>());
            if (t.attribute == 0)
              throw Error::schema(ev_pred + ":" + std::to_string(i + 1) + ": unknown attribute");
            if (in_scope(t.doc_id)) preds.push_back(std::move(t));
          } catch (const json::exception& e) {
            throw Error::schema(ev_pred + ":" + std::to_string(i + 1) + ": " + e.what());
          }
        }
        std::vector<AttrTriple> gold_triples;
        for (const auto& t : gold_attr_triples(gold))
          if (in_scope(t.doc_id)) gold_triples.push_back(t);

        PRF micro = value_f1(preds, gold_triples);
        PageF1Report page = page_f1(preds, gold_triples);
        report["aggregate"]["value_f1"] = {{"precision", micro.precision},
                                           {"recall", micro.recall},
                                           {"f1", micro.f1}};
        report["aggregate"]["page_f1_macro"] = {{"precision", page.macro.precision},
                                                {"recall", page.macro.recall},
                                                {"f1", page.macro.f1}};
        json per_domain = json::object();
        if (!doc_domain.empty()) {
          std::set<std::string> domains;
          for (const auto& [doc, dom] : doc_domain) domains.insert(dom);
          for (const auto& dom : domains) {
            std::vector<AttrTriple> dp, dg;
            for (const auto& t : preds)
              if (doc_domain.count(t.doc_id) && doc_domain[t.doc_id] == dom) dp.push_back(t);
            for (const auto& t : gold_triples)
              if (doc_domain.count(t.doc_id) && doc_domain[t.doc_id] == dom) dg.push_back(t);
            PRF prf = value_f1(dp, dg);
            per_domain[dom] = {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1}};
          }
        }
        report["per_domain"] = per_domain;
        report["metric"] = "value_f1";
      } else if (ev_task == "openie") {
        std::vector<PairPred> preds;
        for (size_t i = 0; i < pred_lines.size(); ++i) {
          json j = parse_pred(i);
          try {
            PairPred p;
            p.doc_id = j.at("doc_id").get<std::string>();
            p.pred_node = j.at("pred_node").get<NodeId>();
            p.obj_node = j.at("obj_node").get<NodeId>();
            p.pred_surface = j.at("pred_surface").get<std::string>();
            p.score = j.value("s", 0.0);
            if (in_scope(p.doc_id)) preds.push_back(std::move(p));
          } catch (const json::exception& e) {
            throw Error::schema(ev_pred + ":" + std::to_string(i + 1) + ": " + e.what());
          }
        }
        std::vector<PairGold> gp;
        for (const auto& g : gold_pairs(gold))
          if (in_scope(g.doc_id)) gp.push_back(g);
        PRF prf = pair_f1_lenient(preds, gp);
        report["aggregate"]["pair_f1_lenient"] = {{"precision", prf.precision},
                                                  {"recall", prf.recall},
                                                  {"f1", prf.f1}};
        report["per_domain"] = json::object();
        report["metric"] = "pair_f1_lenient";
      } else if (ev_task == "qa") {
        std::map<std::string, std::string> answers;
        for (size_t i = 0; i < pred_lines.size(); ++i) {
          json j = parse_pred(i);
          try {
            answers[j.at("question_id").get<std::string>()] =
                j.at("answer_text").get<std::string>();
          } catch (const json::exception& e) {
            throw Error::schema(ev_pred + ":" + std::to_string(i + 1) + ": " + e.what());
          }
        }
        double em_sum = 0.0, f1_sum = 0.0;
        int64_t n = 0;
        for (const auto& q : gold.qa) {
          if (!in_scope(q.doc_id)) continue;
          auto it = answers.find(q.question_id);
          QAScore s = it == answers.end() ? QAScore{} : qa_em_f1(it->second, q.answers);
          em_sum += s.em;
          f1_sum += s.f1;
          ++n;
        }
        report["aggregate"]["em"] = n > 0 ? em_sum / n : 0.0;
        report["aggregate"]["f1"] = n > 0 ? f1_sum / n : 0.0;
        report["aggregate"]["questions"] = n;
        report["per_domain"] = json::object();
        report["metric"] = "qa_em_f1";
      } else {
        throw Error::config_invalid("unknown task '" + ev_task + "'");
      }

      std::ofstream out(ev_out);
      if (!out) throw Error::io("cannot write " + ev_out);
      out << report.dump(2) << "\n";
      std::cout << report.dump(2) << "\n";
      return 0;
    }

    if (*iw) {
      if (iw_window > 0) cfg.window.max_tokens = iw_window;
      if (iw_stride > 0) cfg.window.stride = iw_stride;
      Vocab vocab = Vocab::load(iw_vocab);
      PipelineConfig pipe = pipeline_config(cfg, vocab);
      auto docs = process_manifest(resolve_manifest(iw_in), vocab, pipe);
      std::vector<std::string> lines;
      for (const auto& doc : docs) {
        for (const auto& w : doc.windows) {
          json j;
          j["doc_id"] = doc.doc_id;
          j["window_index"] = w.window_index;
          j["node_ids"] = w.node_ids;
          j["token_total"] = w.token_total;
          lines.push_back(j.dump());
        }
      }
      if (iw_out.empty())
        for (const auto& l : lines) std::cout << l << "\n";
      else
        write_lines(iw_out, lines);
      return 0;
    }

    if (*mp) {
      if (mp_rate > 0.0) cfg.mask.rate = mp_rate;
      if (mp_node_share >= 0.0) cfg.mask.node_share = mp_node_share;
      if (mp_seed_set) cfg.mask_seed = mp_seed;
      Vocab vocab = Vocab::load(mp_vocab);
      int shown = 0;
      for (const auto& line : read_lines(mp_in)) {
        if (shown >= mp_limit) break;
        PositionedSequence seq = sequence_from_jsonl(line);
        MaskedSequence masked = mask_sequence(seq, cfg.mask, cfg.mask_seed, vocab.size());
        std::cout << "== " << seq.doc_id << " window " << seq.window_index << " ("
                  << seq.length() << " tokens, " << masked.plan.positions.size()
                  << " selected, nodes:";
        for (NodeId n : masked.plan.node_masked) std::cout << " " << n;
        std::cout << ")\n";
        for (int i = 0; i < seq.length(); ++i) {
          const TokenId orig = seq.tokens[static_cast<size_t>(i)];
          const TokenId got = masked.seq.tokens[static_cast<size_t>(i)];
          std::cout << (i == 0 ? "" : " ");
          if (masked.labels[static_cast<size_t>(i)] == kIgnoreLabel) {
            std::cout << vocab.token(orig);
          } else if (got == kMask) {
            std::cout << "[" << vocab.token(orig) << "->MASK]";
          } else if (got != orig) {
            std::cout << "[" << vocab.token(orig) << "->" << vocab.token(got) << "]";
          } else {
            std::cout << "[" << vocab.token(orig) << "=KEEP]";
          }
        }
        std::cout << "\n";
        ++shown;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return error_exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
