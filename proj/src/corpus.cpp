#include "treelm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "treelm/error.hpp"
#include "treelm/rng.hpp"

namespace treelm {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string>& first_names() {
  static const std::vector<std::string> v = {"alan", "beth", "carl", "dana", "emma", "finn",
                                             "gina", "hugo", "iris", "jack", "kara", "liam",
                                             "mona", "noel", "omar", "pia"};
  return v;
}

const std::vector<std::string>& last_names() {
  static const std::vector<std::string> v = {"archer", "bloom",    "castle", "dorsey",
                                             "ellis",  "fontaine", "graves", "holt",
                                             "ivers",  "jennings", "keller", "lowell",
                                             "mercer", "norwood",  "osborne", "porter"};
  return v;
}

const std::vector<std::string>& title_adjectives() {
  static const std::vector<std::string> v = {"silent", "crimson",  "golden",   "hidden",
                                             "broken", "distant",  "electric", "frozen",
                                             "midnight", "savage", "velvet",   "wandering"};
  return v;
}

const std::vector<std::string>& title_nouns() {
  static const std::vector<std::string> v = {"river",   "empire", "garden", "signal",
                                             "harbor",  "mirror", "kingdom", "voyage",
                                             "shadow",  "canyon", "orchid",  "beacon"};
  return v;
}

const std::vector<std::string>& boilerplate_words() {
  static const std::vector<std::string> v = {
      "stream",    "reviews",  "ratings",   "newsletter", "contact",  "terms",
      "privacy",   "trending", "popular",   "archive",    "editorial", "spotlight",
      "weekly",    "digest",   "critics",   "choice",     "awards",   "classics",
      "premieres", "releases", "tickets",   "member",     "login",    "search",
      "discover",  "explore",  "featured",  "trailers",   "interviews", "charts"};
  return v;
}

const std::vector<std::string>& word_values() {
  static const std::vector<std::string> v = {"drama",   "comedy",  "thriller", "romance",
                                             "mystery", "horror",  "western",  "noir",
                                             "fantasy", "crime",   "musical",  "war"};
  return v;
}

const std::vector<std::string>& distractor_keys() {
  static const std::vector<std::string> v = {"runtime", "status", "region", "format",
                                             "budget",  "studio", "revenue", "grade"};
  return v;
}

std::string pick(const std::vector<std::string>& pool, SplitMix64& rng) {
  return pool[static_cast<size_t>(rng.below(pool.size()))];
}

std::string make_value(ValuePool pool, SplitMix64& rng) {
  switch (pool) {
    case ValuePool::Person: return pick(first_names(), rng) + " " + pick(last_names(), rng);
    case ValuePool::Number: return std::to_string(1950 + rng.below(71));
    case ValuePool::Word: return pick(word_values(), rng);
  }
  return "";
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::vector<std::string> draw_words(int n, SplitMix64& rng) {
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(pick(boilerplate_words(), rng));
  return out;
}

struct Row {
  bool is_attribute = false;
  int attr_index = -1;  // into cfg.attributes when is_attribute
  std::string key;
  std::string value;
};

struct SiteProfile {
  std::string website;
  std::string layout;
  std::string slogan;
  std::string footer;
  std::vector<int> base_order;  // attribute order used by the site's templates
};

std::string render_rows(const std::string& layout, const std::vector<Row>& rows) {
  std::ostringstream ss;
  if (layout == "key_value_table") {
    ss << "<table class=\"info\">";
    for (const auto& r : rows)
      ss << "<tr><th>" << r.key << "</th><td>" << r.value << "</td></tr>";
    ss << "</table>";
  } else if (layout == "definition_list") {
    ss << "<dl class=\"info\">";
    for (const auto& r : rows) ss << "<dt>" << r.key << "</dt><dd>" << r.value << "</dd>";
    ss << "</dl>";
  } else {  // header_paragraph
    ss << "<div class=\"info\">";
    for (const auto& r : rows)
      ss << "<div class=\"block\"><h3>" << r.key << "</h3><p>" << r.value << "</p></div>";
    ss << "</div>";
  }
  return ss.str();
}

struct ValueTags {
  std::string key_tag, value_tag;
};

ValueTags layout_tags(const std::string& layout) {
  if (layout == "key_value_table") return {"th", "td"};
  if (layout == "definition_list") return {"dt", "dd"};
  return {"h3", "p"};
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSiteConfig& cfg) {
  if (cfg.num_sites < 1 || cfg.templates_per_site < 1 || cfg.pages_per_template < 1)
    throw Error::config_invalid("site/template/page counts must be >= 1");
  if (cfg.attributes.empty()) throw Error::config_invalid("at least one attribute required");
  if (cfg.layouts.empty()) throw Error::config_invalid("at least one layout required");
  for (const auto& a : cfg.attributes) {
    if (a.name.empty()) throw Error::config_invalid("empty attribute name");
    for (const auto& d : distractor_keys())
      if (d == a.name) throw Error::config_invalid("attribute name collides with distractor key: " + a.name);
  }

  SyntheticCorpus corpus;
  for (const auto& a : cfg.attributes) corpus.gold.attribute_names.push_back(a.name);

  const int K = static_cast<int>(cfg.attributes.size());
  const int boiler_divs = static_cast<int>(std::llround(cfg.noise * 4.0));
  const int distractors = static_cast<int>(std::llround(cfg.noise * 2.0));

  // Zero-shot split over sites.
  std::vector<int> site_order(static_cast<size_t>(cfg.num_sites));
  for (int i = 0; i < cfg.num_sites; ++i) site_order[static_cast<size_t>(i)] = i;
  {
    SplitMix64 rng(derive_seed(cfg.seed, "site-split", 0));
    rng.shuffle(site_order);
  }
  std::vector<std::string> site_split(static_cast<size_t>(cfg.num_sites), "train");
  {
    const int n = cfg.num_sites;
    const int n_test = std::max(1, n / 4);
    const int n_dev = n > 2 ? std::max(1, n / 8) : 0;
    for (int i = 0; i < n; ++i) {
      const int rank = static_cast<int>(std::find(site_order.begin(), site_order.end(), i) -
                                        site_order.begin());
      if (rank < n_test) site_split[static_cast<size_t>(i)] = "test";
      else if (rank < n_test + n_dev) site_split[static_cast<size_t>(i)] = "dev";
    }
  }

  for (int s = 0; s < cfg.num_sites; ++s) {
    SplitMix64 site_rng(derive_seed(cfg.seed, "site", static_cast<uint64_t>(s)));
    SiteProfile site;
    {
      std::ostringstream name;
      name << "site" << (s < 10 ? "0" : "") << s << ".example";
      site.website = name.str();
    }
    site.layout = cfg.layouts[static_cast<size_t>(s) % cfg.layouts.size()];
    site.slogan = join(draw_words(4 + static_cast<int>(site_rng.below(4)), site_rng));
    site.footer = join(draw_words(8 + static_cast<int>(site_rng.below(5)), site_rng));
    site.base_order.resize(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) site.base_order[static_cast<size_t>(k)] = k;
    site_rng.shuffle(site.base_order);

    for (int t = 0; t < cfg.templates_per_site; ++t) {
      SplitMix64 tmpl_rng(
          derive_seed(cfg.seed, "template", (static_cast<uint64_t>(s) << 16) | static_cast<uint64_t>(t)));
      // Template-fixed distractor keys and row insertion points.
      std::vector<std::string> tmpl_distractors;
      for (int i = 0; i < distractors; ++i) tmpl_distractors.push_back(pick(distractor_keys(), tmpl_rng));

      // Few-shot split over this template's pages.
      std::vector<int> page_order(static_cast<size_t>(cfg.pages_per_template));
      for (int i = 0; i < cfg.pages_per_template; ++i) page_order[static_cast<size_t>(i)] = i;
      tmpl_rng.shuffle(page_order);
      const int n_train = std::max(1, cfg.pages_per_template / 10);
      const int n_dev = (cfg.pages_per_template - n_train) / 2;

      for (int pg = 0; pg < cfg.pages_per_template; ++pg) {
        std::ostringstream idss;
        idss << "s" << s << "_t" << t << "_p" << pg;
        const std::string doc_id = idss.str();
        SplitMix64 value_rng(derive_seed(cfg.seed, doc_id + "/values", 0));
        SplitMix64 noise_rng(derive_seed(cfg.seed, doc_id + "/noise", 0));

        const std::string entity =
            "the " + pick(title_adjectives(), value_rng) + " " + pick(title_nouns(), value_rng);

        // Attribute rows in site order, then distractors, then optional swap.
        std::vector<Row> rows;
        std::vector<std::string> values(static_cast<size_t>(K));
        for (int k : site.base_order) {
          Row r;
          r.is_attribute = true;
          r.attr_index = k;
          r.key = cfg.attributes[static_cast<size_t>(k)].name;
          r.value = make_value(cfg.attributes[static_cast<size_t>(k)].pool, value_rng);
          values[static_cast<size_t>(k)] = r.value;
          rows.push_back(std::move(r));
        }
        for (const auto& dk : tmpl_distractors) {
          Row r;
          r.key = dk;
          // Distractor values come from the same pools as real values.
          r.value = make_value(noise_rng.below(2) == 0 ? ValuePool::Person : ValuePool::Number,
                               noise_rng);
          rows.insert(rows.begin() + static_cast<long>(noise_rng.below(rows.size() + 1)),
                      std::move(r));
        }
        if (cfg.noise > 0.0 && noise_rng.uniform() < cfg.noise && rows.size() >= 2) {
          const size_t a = static_cast<size_t>(noise_rng.below(rows.size()));
          const size_t b = static_cast<size_t>(noise_rng.below(rows.size()));
          std::swap(rows[a], rows[b]);
        }

        std::ostringstream html;
        html << "<html><head><title>" << entity << " - " << site.website << "</title></head>";
        html << "<body>";
        html << "<div class=\"nav\"><a>home</a> <a>browse</a> <a>about</a> <span>" << site.slogan
             << "</span></div>";
        for (int b = 0; b < boiler_divs; ++b)
          html << "<div class=\"promo\">" << join(draw_words(3 + static_cast<int>(noise_rng.below(4)),
                                                              noise_rng))
               << "</div>";
        html << "<h1>" << entity << "</h1>";
        html << render_rows(site.layout, rows);
        html << "<div class=\"footer\">" << site.footer << "</div>";
        html << "</body></html>";

        GeneratedPage page;
        page.doc_id = doc_id;
        page.website = site.website;
        page.domain = cfg.domain;
        page.html = html.str();
        const int rank = static_cast<int>(std::find(page_order.begin(), page_order.end(), pg) -
                                          page_order.begin());
        page.split_fewshot = rank < n_train ? "train" : (rank < n_train + n_dev ? "dev" : "test");
        page.split_zeroshot = site_split[static_cast<size_t>(s)];

        // Locate gold nodes on the cleaned tree. Key/value nodes of the info
        // block are exactly the key_tag/value_tag nodes, in row order.
        DomTree tree = clean(parse_html(page.html));
        const ValueTags tags = layout_tags(site.layout);
        std::vector<NodeId> key_nodes, value_nodes;
        for (const DomNode& n : tree.nodes) {
          if (n.tag == tags.key_tag) key_nodes.push_back(n.node_id);
          if (n.tag == tags.value_tag) value_nodes.push_back(n.node_id);
        }
        if (key_nodes.size() != rows.size() || value_nodes.size() != rows.size())
          throw Error::schema("generator internal error: row/node count mismatch in " + doc_id);

        for (size_t r = 0; r < rows.size(); ++r) {
          const Row& row = rows[r];
          const NodeId key_node = key_nodes[r];
          const NodeId value_node = value_nodes[r];
          if (tree.node(key_node).text != row.key || tree.node(value_node).text != row.value)
            throw Error::schema("generator internal error: gold text mismatch in " + doc_id);
          if (!row.is_attribute) continue;
          const std::string& attr_name = cfg.attributes[static_cast<size_t>(row.attr_index)].name;

          AttrLabel al;
          al.doc_id = doc_id;
          al.node_id = value_node;
          al.tag_path = tree.tag_path(value_node);
          al.attribute = attr_name;
          corpus.gold.attr.push_back(std::move(al));

          PairLabel pl;
          pl.doc_id = doc_id;
          pl.pred_node = key_node;
          pl.obj_node = value_node;
          pl.pred_tag_path = tree.tag_path(key_node);
          pl.obj_tag_path = tree.tag_path(value_node);
          pl.acceptable = {row.key, row.key + ":"};
          corpus.gold.pairs.push_back(std::move(pl));

          QALabel ql;
          ql.doc_id = doc_id;
          ql.question_id = doc_id + "#" + attr_name;
          ql.question = "what is the " + attr_name + " of " + entity + " ?";
          ql.answers = {row.value};
          ql.answer_node = value_node;
          ql.answer_tag_path = tree.tag_path(value_node);
          corpus.gold.qa.push_back(std::move(ql));
        }
        corpus.pages.push_back(std::move(page));
      }
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error::io("cannot write " + path);
  for (const auto& l : lines) f << l << "\n";
  if (!f) throw Error::io("write failure on " + path);
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

nlohmann::json parse_line(const std::string& line, const std::string& file, size_t line_no) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error::schema(file + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace

void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& e : entries) {
    nlohmann::json j;
    j["doc_id"] = e.doc_id;
    j["path"] = e.path;
    j["website"] = e.website;
    j["domain"] = e.domain;
    j["split"] = e.split;
    lines.push_back(j.dump());
  }
  write_lines(path, lines);
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::vector<ManifestEntry> out;
  const auto lines = read_lines(path);
  const fs::path base = fs::path(path).parent_path();
  for (size_t i = 0; i < lines.size(); ++i) {
    nlohmann::json j = parse_line(lines[i], path, i + 1);
    try {
      ManifestEntry e;
      e.doc_id = j.at("doc_id").get<std::string>();
      e.path = j.at("path").get<std::string>();
      if (fs::path(e.path).is_relative()) e.path = (base / e.path).string();
      e.website = j.at("website").get<std::string>();
      e.domain = j.at("domain").get<std::string>();
      e.split = j.at("split").get<std::string>();
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error::schema(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  std::set<std::string> ids;
  for (const auto& e : out)
    if (!ids.insert(e.doc_id).second)
      throw Error::schema(path + ": duplicate doc_id " + e.doc_id);
  return out;
}

void write_corpus(const SyntheticCorpus& corpus, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "pages");

  std::vector<ManifestEntry> fewshot, zeroshot;
  for (const auto& page : corpus.pages) {
    const fs::path site_dir = fs::path(out_dir) / "pages" / page.website;
    fs::create_directories(site_dir);
    const fs::path file = site_dir / (page.doc_id + ".html");
    std::ofstream f(file, std::ios::binary);
    if (!f) throw Error::io("cannot write " + file.string());
    f << page.html;
    if (!f) throw Error::io("write failure on " + file.string());

    ManifestEntry e;
    e.doc_id = page.doc_id;
    e.path = fs::relative(file, out_dir).string();
    e.website = page.website;
    e.domain = page.domain;
    e.split = page.split_fewshot;
    fewshot.push_back(e);
    e.split = page.split_zeroshot;
    zeroshot.push_back(e);
  }
  save_manifest(fewshot, (fs::path(out_dir) / "manifest_fewshot.jsonl").string());
  save_manifest(zeroshot, (fs::path(out_dir) / "manifest_zeroshot.jsonl").string());

  {
    nlohmann::json j = corpus.gold.attribute_names;
    std::ofstream f(fs::path(out_dir) / "attributes.json");
    f << j.dump(2) << "\n";
  }
  {
    std::vector<std::string> lines;
    for (const auto& l : corpus.gold.attr) {
      nlohmann::json j;
      j["doc_id"] = l.doc_id;
      j["node_id"] = l.node_id;
      j["tag_path"] = l.tag_path;
      j["attribute"] = l.attribute;
      lines.push_back(j.dump());
    }
    write_lines((fs::path(out_dir) / "labels_attr.jsonl").string(), lines);
  }
  {
    std::vector<std::string> lines;
    for (const auto& l : corpus.gold.pairs) {
      nlohmann::json j;
      j["doc_id"] = l.doc_id;
      j["pred_node"] = l.pred_node;
      j["obj_node"] = l.obj_node;
      j["pred_tag_path"] = l.pred_tag_path;
      j["obj_tag_path"] = l.obj_tag_path;
      j["acceptable"] = l.acceptable;
      lines.push_back(j.dump());
    }
    write_lines((fs::path(out_dir) / "labels_pairs.jsonl").string(), lines);
  }
  {
    std::vector<std::string> lines;
    for (const auto& l : corpus.gold.qa) {
      nlohmann::json j;
      j["doc_id"] = l.doc_id;
      j["question_id"] = l.question_id;
      j["question"] = l.question;
      j["answers"] = l.answers;
      j["answer_node"] = l.answer_node;
      j["answer_tag_path"] = l.answer_tag_path;
      lines.push_back(j.dump());
    }
    write_lines((fs::path(out_dir) / "labels_qa.jsonl").string(), lines);
  }
}

GoldSet load_gold(const std::string& dir) {
  GoldSet gold;
  {
    const fs::path p = fs::path(dir) / "attributes.json";
    std::ifstream f(p);
    if (!f) throw Error::missing_file("cannot open " + p.string());
    nlohmann::json j;
    try {
      f >> j;
      gold.attribute_names = j.get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error::schema(p.string() + ": " + e.what());
    }
  }
  {
    const std::string p = (fs::path(dir) / "labels_attr.jsonl").string();
    const auto lines = read_lines(p);
    for (size_t i = 0; i < lines.size(); ++i) {
      nlohmann::json j = parse_line(lines[i], p, i + 1);
      try {
        AttrLabel l;
        l.doc_id = j.at("doc_id").get<std::string>();
        l.node_id = j.at("node_id").get<NodeId>();
        l.tag_path = j.at("tag_path").get<std::string>();
        l.attribute = j.at("attribute").get<std::string>();
        gold.attr.push_back(std::move(l));
      } catch (const nlohmann::json::exception& e) {
        throw Error::schema(p + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  {
    const std::string p = (fs::path(dir) / "labels_pairs.jsonl").string();
    const auto lines = read_lines(p);
    for (size_t i = 0; i < lines.size(); ++i) {
      nlohmann::json j = parse_line(lines[i], p, i + 1);
      try {
        PairLabel l;
        l.doc_id = j.at("doc_id").get<std::string>();
        l.pred_node = j.at("pred_node").get<NodeId>();
        l.obj_node = j.at("obj_node").get<NodeId>();
        l.pred_tag_path = j.at("pred_tag_path").get<std::string>();
        l.obj_tag_path = j.at("obj_tag_path").get<std::string>();
        l.acceptable = j.at("acceptable").get<std::vector<std::string>>();
        gold.pairs.push_back(std::move(l));
      } catch (const nlohmann::json::exception& e) {
        throw Error::schema(p + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  {
    const std::string p = (fs::path(dir) / "labels_qa.jsonl").string();
    const auto lines = read_lines(p);
    for (size_t i = 0; i < lines.size(); ++i) {
      nlohmann::json j = parse_line(lines[i], p, i + 1);
      try {
        QALabel l;
        l.doc_id = j.at("doc_id").get<std::string>();
        l.question_id = j.at("question_id").get<std::string>();
        l.question = j.at("question").get<std::string>();
        l.answers = j.at("answers").get<std::vector<std::string>>();
        l.answer_node = j.at("answer_node").get<NodeId>();
        l.answer_tag_path = j.at("answer_tag_path").get<std::string>();
        gold.qa.push_back(std::move(l));
      } catch (const nlohmann::json::exception& e) {
        throw Error::schema(p + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  return gold;
}

std::vector<LoadedDoc> load_dataset(const std::vector<ManifestEntry>& manifest,
                                    const GoldSet& gold, const CleanConfig& clean_cfg) {
  std::vector<LoadedDoc> docs;
  docs.reserve(manifest.size());
  for (const auto& entry : manifest) {
    LoadedDoc doc;
    doc.entry = entry;
    doc.tree = clean(parse_html_file(entry.path), clean_cfg);
    docs.push_back(std::move(doc));
  }

  std::map<std::string, const LoadedDoc*> by_id;
  for (const auto& d : docs) by_id[d.entry.doc_id] = &d;
  auto check = [&](const std::string& doc_id, NodeId node, const std::string& tag_path,
                   const char* what) {
    auto it = by_id.find(doc_id);
    if (it == by_id.end()) return;  // label for a page outside this manifest
    const LoadedDoc& d = *it->second;
    if (node < 0 || static_cast<size_t>(node) >= d.tree.size())
      throw Error::label_node_mismatch(std::string(what) + " label in " + doc_id + ": node_id " +
                                       std::to_string(node) + " out of range");
    const std::string actual = d.tree.tag_path(node);
    if (actual != tag_path)
      throw Error::label_node_mismatch(std::string(what) + " label in " + doc_id + ": tag path " +
                                       tag_path + " != " + actual);
  };
  for (const auto& l : gold.attr) check(l.doc_id, l.node_id, l.tag_path, "attr");
  for (const auto& l : gold.pairs) {
    check(l.doc_id, l.pred_node, l.pred_tag_path, "pair");
    check(l.doc_id, l.obj_node, l.obj_tag_path, "pair");
  }
  for (const auto& l : gold.qa) check(l.doc_id, l.answer_node, l.answer_tag_path, "qa");
  return docs;
}

std::vector<AttrTriple> gold_attr_triples(const GoldSet& gold) {
  std::vector<AttrTriple> out;
  for (const auto& l : gold.attr) {
    AttrTriple t;
    t.doc_id = l.doc_id;
    t.node_id = l.node_id;
    t.attribute = gold.attribute_id(l.attribute);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<PairGold> gold_pairs(const GoldSet& gold) {
  std::vector<PairGold> out;
  for (const auto& l : gold.pairs) {
    PairGold g;
    g.doc_id = l.doc_id;
    g.pred_node = l.pred_node;
    g.obj_node = l.obj_node;
    g.acceptable = l.acceptable;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace treelm
