#pragma once

#include <string>
#include <vector>

#include "treelm/html.hpp"
#include "treelm/metrics.hpp"

namespace treelm {

struct ManifestEntry {
  std::string doc_id;
  std::string path;
  std::string website;
  std::string domain;
  std::string split;  // train | dev | test
};

struct AttrLabel {
  std::string doc_id;
  NodeId node_id = 0;
  std::string tag_path;
  std::string attribute;  // attribute name; ids come from the ontology order
};

struct PairLabel {
  std::string doc_id;
  NodeId pred_node = 0;
  NodeId obj_node = 0;
  std::string pred_tag_path;
  std::string obj_tag_path;
  std::vector<std::string> acceptable;
};

struct QALabel {
  std::string doc_id;
  std::string question_id;
  std::string question;
  std::vector<std::string> answers;
  NodeId answer_node = 0;
  std::string answer_tag_path;
};

struct GoldSet {
  std::vector<std::string> attribute_names;  // class id = index + 1; 0 is None
  std::vector<AttrLabel> attr;
  std::vector<PairLabel> pairs;
  std::vector<QALabel> qa;

  int attribute_id(const std::string& name) const {
    for (size_t i = 0; i < attribute_names.size(); ++i)
      if (attribute_names[i] == name) return static_cast<int>(i) + 1;
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Synthetic templated-website generator
// ---------------------------------------------------------------------------

enum class ValuePool { Person, Number, Word };

struct AttributeSpec {
  std::string name;
  ValuePool pool = ValuePool::Word;
};

struct SyntheticSiteConfig {
  int num_sites = 8;
  int templates_per_site = 3;
  int pages_per_template = 20;
  // Attribute pairs share value pools on purpose: a value string alone does
  // not identify its attribute, only the neighboring name node does.
  std::vector<AttributeSpec> attributes = {
      {"director", ValuePool::Person},
      {"writer", ValuePool::Person},
      {"year", ValuePool::Number},
      {"votes", ValuePool::Number},
  };
  std::vector<std::string> layouts = {"key_value_table", "definition_list", "header_paragraph"};
  double noise = 0.25;  // scales boilerplate nodes, row reordering, distractor rows
  uint64_t seed = 7;
  std::string domain = "film";
};

struct GeneratedPage {
  std::string doc_id;
  std::string website;
  std::string domain;
  std::string html;
  std::string split_fewshot;  // page-granularity split
  std::string split_zeroshot; // site-granularity split
};

struct SyntheticCorpus {
  std::vector<GeneratedPage> pages;
  GoldSet gold;
};

// Deterministic in cfg.seed. Gold node ids refer to the cleaned tree produced
// by clean(parse_html(html)) with the default CleanConfig.
SyntheticCorpus generate_synthetic(const SyntheticSiteConfig& cfg);

// Writes pages plus manifests (manifest_fewshot.jsonl / manifest_zeroshot.jsonl),
// label files, and attributes.json under out_dir.
void write_corpus(const SyntheticCorpus& corpus, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

GoldSet load_gold(const std::string& dir);  // attributes.json + labels_*.jsonl

struct LoadedDoc {
  ManifestEntry entry;
  DomTree tree;
};

// Parses and cleans every manifest page; verifies each label's node id and
// tag path against the cleaned tree (LabelNodeMismatch on disagreement).
std::vector<LoadedDoc> load_dataset(const std::vector<ManifestEntry>& manifest,
                                    const GoldSet& gold, const CleanConfig& clean_cfg = {});

// Gold conversions for the metrics module.
std::vector<AttrTriple> gold_attr_triples(const GoldSet& gold);
std::vector<PairGold> gold_pairs(const GoldSet& gold);

}  // namespace treelm
