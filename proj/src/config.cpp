#include "treelm/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "treelm/error.hpp"

namespace treelm {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw Error::config_invalid("unknown config key '" + where + key + "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ValuePool pool_from_string(const std::string& s) {
  if (s == "person") return ValuePool::Person;
  if (s == "number") return ValuePool::Number;
  if (s == "word") return ValuePool::Word;
  throw Error::config_invalid("unknown value pool '" + s + "'");
}

std::string pool_to_string(ValuePool p) {
  switch (p) {
    case ValuePool::Person: return "person";
    case ValuePool::Number: return "number";
    case ValuePool::Word: return "word";
  }
  return "word";
}

void parse_optim(const json& j, OptimConfig& o, const std::string& where) {
  reject_unknown(j, {"lr", "beta1", "beta2", "eps", "warmup_steps", "total_steps", "batch_size",
                     "shuffle_seed"},
                 where);
  get_if(j, "lr", o.lr);
  get_if(j, "beta1", o.beta1);
  get_if(j, "beta2", o.beta2);
  get_if(j, "eps", o.eps);
  get_if(j, "warmup_steps", o.warmup_steps);
  get_if(j, "total_steps", o.total_steps);
  get_if(j, "batch_size", o.batch_size);
  get_if(j, "shuffle_seed", o.shuffle_seed);
}

json optim_to_json(const OptimConfig& o) {
  json j;
  j["lr"] = o.lr;
  j["beta1"] = o.beta1;
  j["beta2"] = o.beta2;
  j["eps"] = o.eps;
  j["warmup_steps"] = o.warmup_steps;
  j["total_steps"] = o.total_steps;
  j["batch_size"] = o.batch_size;
  j["shuffle_seed"] = o.shuffle_seed;
  return j;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error::missing_file("cannot open config " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw Error::config_invalid(path + ": " + e.what());
  }

  RunConfig cfg;
  reject_unknown(j, {"clean", "window", "tables", "mask", "encoder", "optim", "finetune",
                     "openie", "qa", "gen", "seed", "jobs"},
                 "");

  if (j.contains("clean")) {
    const json& c = j.at("clean");
    reject_unknown(c, {"removed_tags", "kept_attrs", "max_attr_words"}, "clean.");
    get_if(c, "removed_tags", cfg.clean.removed_tags);
    get_if(c, "kept_attrs", cfg.clean.kept_attrs);
    get_if(c, "max_attr_words", cfg.clean.max_attr_words);
  }
  if (j.contains("window")) {
    const json& w = j.at("window");
    reject_unknown(w, {"max_tokens", "stride", "oversize"}, "window.");
    get_if(w, "max_tokens", cfg.window.max_tokens);
    get_if(w, "stride", cfg.window.stride);
    if (w.contains("oversize")) {
      const std::string o = w.at("oversize").get<std::string>();
      if (o == "truncate") cfg.window.oversize = OversizePolicy::Truncate;
      else if (o == "error") cfg.window.oversize = OversizePolicy::Error;
      else throw Error::config_invalid("window.oversize must be 'truncate' or 'error'");
    }
  }
  if (j.contains("tables")) {
    const json& t = j.at("tables");
    reject_unknown(t, {"max_nodes", "max_depth", "max_len"}, "tables.");
    get_if(t, "max_nodes", cfg.tables.max_nodes);
    get_if(t, "max_depth", cfg.tables.max_depth);
    get_if(t, "max_len", cfg.tables.max_len);
  }
  if (j.contains("mask")) {
    const json& m = j.at("mask");
    reject_unknown(m, {"rate", "node_share", "misfit_limit", "seed"}, "mask.");
    get_if(m, "rate", cfg.mask.rate);
    get_if(m, "node_share", cfg.mask.node_share);
    get_if(m, "misfit_limit", cfg.mask.misfit_limit);
    get_if(m, "seed", cfg.mask_seed);
  }
  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    reject_unknown(e, {"layers", "hidden", "heads", "ffn", "dropout", "use_positions", "seed"},
                   "encoder.");
    get_if(e, "layers", cfg.encoder.layers);
    get_if(e, "hidden", cfg.encoder.hidden);
    get_if(e, "heads", cfg.encoder.heads);
    get_if(e, "ffn", cfg.encoder.ffn);
    get_if(e, "dropout", cfg.encoder.dropout);
    get_if(e, "use_positions", cfg.encoder.use_positions);
    get_if(e, "seed", cfg.encoder.seed);
  }
  if (j.contains("optim")) parse_optim(j.at("optim"), cfg.optim, "optim.");
  if (j.contains("finetune")) {
    const json& ft = j.at("finetune");
    reject_unknown(ft, {"steps", "lr", "beta1", "beta2", "eps", "warmup_steps", "total_steps",
                        "batch_size", "shuffle_seed"},
                   "finetune.");
    get_if(ft, "steps", cfg.finetune_steps);
    json rest = ft;
    rest.erase("steps");
    parse_optim(rest, cfg.finetune_optim, "finetune.");
  }
  if (j.contains("openie")) {
    const json& o = j.at("openie");
    reject_unknown(o, {"max_pairs", "negative_ratio", "gate"}, "openie.");
    get_if(o, "max_pairs", cfg.openie.max_pairs);
    get_if(o, "negative_ratio", cfg.openie.negative_ratio);
    get_if(o, "gate", cfg.openie_gate);
    if (cfg.openie_gate != "pred_obj_pair" && cfg.openie_gate != "pred_mid_pair")
      throw Error::config_invalid("openie.gate must be 'pred_obj_pair' or 'pred_mid_pair'");
  }
  if (j.contains("qa")) {
    const json& q = j.at("qa");
    reject_unknown(q, {"max_answer_len"}, "qa.");
    get_if(q, "max_answer_len", cfg.qa.max_answer_len);
  }
  if (j.contains("gen")) {
    const json& g = j.at("gen");
    reject_unknown(g,
                   {"num_sites", "templates_per_site", "pages_per_template", "attributes",
                    "layouts", "noise", "seed", "domain"},
                   "gen.");
    get_if(g, "num_sites", cfg.gen.num_sites);
    get_if(g, "templates_per_site", cfg.gen.templates_per_site);
    get_if(g, "pages_per_template", cfg.gen.pages_per_template);
    get_if(g, "layouts", cfg.gen.layouts);
    get_if(g, "noise", cfg.gen.noise);
    get_if(g, "seed", cfg.gen.seed);
    get_if(g, "domain", cfg.gen.domain);
    if (g.contains("attributes")) {
      cfg.gen.attributes.clear();
      for (const auto& a : g.at("attributes")) {
        reject_unknown(a, {"name", "pool"}, "gen.attributes.");
        AttributeSpec spec;
        spec.name = a.at("name").get<std::string>();
        spec.pool = pool_from_string(a.at("pool").get<std::string>());
        cfg.gen.attributes.push_back(std::move(spec));
      }
    }
  }
  get_if(j, "seed", cfg.seed);
  get_if(j, "jobs", cfg.jobs);
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["clean"]["removed_tags"] = cfg.clean.removed_tags;
  j["clean"]["kept_attrs"] = cfg.clean.kept_attrs;
  j["clean"]["max_attr_words"] = cfg.clean.max_attr_words;
  j["window"]["max_tokens"] = cfg.window.max_tokens;
  j["window"]["stride"] = cfg.window.stride;
  j["window"]["oversize"] =
      cfg.window.oversize == OversizePolicy::Truncate ? "truncate" : "error";
  j["tables"]["max_nodes"] = cfg.tables.max_nodes;
  j["tables"]["max_depth"] = cfg.tables.max_depth;
  j["tables"]["max_len"] = cfg.tables.max_len;
  j["mask"]["rate"] = cfg.mask.rate;
  j["mask"]["node_share"] = cfg.mask.node_share;
  j["mask"]["misfit_limit"] = cfg.mask.misfit_limit;
  j["mask"]["seed"] = cfg.mask_seed;
  j["encoder"]["layers"] = cfg.encoder.layers;
  j["encoder"]["hidden"] = cfg.encoder.hidden;
  j["encoder"]["heads"] = cfg.encoder.heads;
  j["encoder"]["ffn"] = cfg.encoder.ffn;
  j["encoder"]["dropout"] = cfg.encoder.dropout;
  j["encoder"]["use_positions"] = cfg.encoder.use_positions;
  j["encoder"]["seed"] = cfg.encoder.seed;
  j["optim"] = optim_to_json(cfg.optim);
  j["finetune"] = optim_to_json(cfg.finetune_optim);
  j["finetune"]["steps"] = cfg.finetune_steps;
  j["openie"]["max_pairs"] = cfg.openie.max_pairs;
  j["openie"]["negative_ratio"] = cfg.openie.negative_ratio;
  j["openie"]["gate"] = cfg.openie_gate;
  j["qa"]["max_answer_len"] = cfg.qa.max_answer_len;
  j["gen"]["num_sites"] = cfg.gen.num_sites;
  j["gen"]["templates_per_site"] = cfg.gen.templates_per_site;
  j["gen"]["pages_per_template"] = cfg.gen.pages_per_template;
  j["gen"]["noise"] = cfg.gen.noise;
  j["gen"]["seed"] = cfg.gen.seed;
  j["gen"]["domain"] = cfg.gen.domain;
  j["gen"]["layouts"] = cfg.gen.layouts;
  {
    json attrs = json::array();
    for (const auto& a : cfg.gen.attributes) {
      json aj;
      aj["name"] = a.name;
      aj["pool"] = pool_to_string(a.pool);
      attrs.push_back(aj);
    }
    j["gen"]["attributes"] = attrs;
  }
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  return j.dump(2);
}

void write_resolved_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error::io("cannot write " + path);
  f << run_config_to_json(cfg) << "\n";
}

}  // namespace treelm
