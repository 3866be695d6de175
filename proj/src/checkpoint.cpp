#include "treelm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "treelm/error.hpp"

namespace treelm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace {

constexpr char kMagic[4] = {'T', 'L', 'M', 'C'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, T value) {
  f.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
  T value{};
  f.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!f) throw Error::schema("truncated checkpoint");
  return value;
}

nlohmann::json config_to_json(const EncoderConfig& cfg) {
  nlohmann::json j;
  j["layers"] = cfg.layers;
  j["hidden"] = cfg.hidden;
  j["heads"] = cfg.heads;
  j["ffn"] = cfg.ffn;
  j["vocab_size"] = cfg.vocab_size;
  j["dropout"] = cfg.dropout;
  j["seed"] = cfg.seed;
  j["use_positions"] = cfg.use_positions;
  j["max_nodes"] = cfg.tables.max_nodes;
  j["max_depth"] = cfg.tables.max_depth;
  j["num_tags"] = cfg.tables.num_tags;
  j["max_len"] = cfg.tables.max_len;
  return j;
}

EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.layers = j.at("layers").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.ffn = j.at("ffn").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.use_positions = j.at("use_positions").get<bool>();
  cfg.tables.max_nodes = j.at("max_nodes").get<int>();
  cfg.tables.max_depth = j.at("max_depth").get<int>();
  cfg.tables.num_tags = j.at("num_tags").get<int>();
  cfg.tables.max_len = j.at("max_len").get<int>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const Params<float>& params,
                     const HeadParams<float>* heads, const CheckpointMeta& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error::io("cannot write " + path);

  nlohmann::json cfg = config_to_json(params.cfg);
  if (heads != nullptr) {
    cfg["head_mlp_hidden"] = heads->attr.w1.cols;
    cfg["attr_classes"] = heads->attr.num_classes();
  }
  const std::string cfg_str = cfg.dump();

  f.write(kMagic, 4);
  write_pod(f, kVersion);
  write_pod(f, static_cast<uint64_t>(cfg_str.size()));
  f.write(cfg_str.data(), static_cast<std::streamsize>(cfg_str.size()));

  std::vector<std::pair<std::string, const std::vector<float>*>> tensors;
  auto& p = const_cast<Params<float>&>(params);
  for_each_tensor(p, [&](const std::string& name, std::vector<float>& buf) {
    tensors.emplace_back("enc." + name, &buf);
  });
  if (heads != nullptr) {
    auto& h = const_cast<HeadParams<float>&>(*heads);
    for_each_tensor(h, [&](const std::string& name, std::vector<float>& buf) {
      tensors.emplace_back("head." + name, &buf);
    });
  }
  write_pod(f, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, buf] : tensors) {
    write_pod(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(f, static_cast<uint64_t>(buf->size()));
    f.write(reinterpret_cast<const char*>(buf->data()),
            static_cast<std::streamsize>(buf->size() * sizeof(float)));
  }
  if (!f) throw Error::io("write failure on " + path);

  nlohmann::json side;
  side["rng"] = meta.rng;
  side["seed"] = meta.seed;
  side["steps"] = meta.steps;
  side["final_loss"] = meta.final_loss;
  side["note"] = meta.note;
  side["format_version"] = kVersion;
  side["endianness"] = "little";
  std::ofstream sf(path + ".meta.json");
  if (!sf) throw Error::io("cannot write " + path + ".meta.json");
  sf << side.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error::missing_file("cannot open checkpoint " + path);

  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw Error::schema("bad checkpoint magic in " + path);
  const uint32_t version = read_pod<uint32_t>(f);
  if (version != kVersion)
    throw Error::schema("unsupported checkpoint version " + std::to_string(version));
  const uint64_t cfg_len = read_pod<uint64_t>(f);
  std::string cfg_str(cfg_len, '\0');
  f.read(cfg_str.data(), static_cast<std::streamsize>(cfg_len));
  if (!f) throw Error::schema("truncated checkpoint config");

  nlohmann::json cfg_json;
  try {
    cfg_json = nlohmann::json::parse(cfg_str);
  } catch (const nlohmann::json::exception& e) {
    throw Error::schema(std::string("bad checkpoint config: ") + e.what());
  }

  Checkpoint ck;
  EncoderConfig cfg = config_from_json(cfg_json);
  ck.params = zero_params<float>(cfg);
  ck.has_heads = cfg_json.contains("attr_classes");
  if (ck.has_heads)
    ck.heads = zero_heads<float>(cfg.hidden, cfg_json.at("head_mlp_hidden").get<int>(),
                                 cfg_json.at("attr_classes").get<int>());

  std::map<std::string, std::vector<float>*> by_name;
  for_each_tensor(ck.params, [&](const std::string& name, std::vector<float>& buf) {
    by_name["enc." + name] = &buf;
  });
  if (ck.has_heads)
    for_each_tensor(ck.heads, [&](const std::string& name, std::vector<float>& buf) {
      by_name["head." + name] = &buf;
    });

  const uint32_t count = read_pod<uint32_t>(f);
  for (uint32_t t = 0; t < count; ++t) {
    const uint32_t name_len = read_pod<uint32_t>(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint64_t elems = read_pod<uint64_t>(f);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error::schema("unknown tensor in checkpoint: " + name);
    if (it->second->size() != elems)
      throw Error::schema("tensor size mismatch for " + name + ": file has " +
                          std::to_string(elems) + ", config expects " +
                          std::to_string(it->second->size()));
    f.read(reinterpret_cast<char*>(it->second->data()),
           static_cast<std::streamsize>(elems * sizeof(float)));
    if (!f) throw Error::schema("truncated tensor data for " + name);
  }

  std::ifstream sf(path + ".meta.json");
  if (sf) {
    try {
      nlohmann::json side;
      sf >> side;
      ck.meta.rng = side.value("rng", "splitmix64");
      ck.meta.seed = side.value("seed", uint64_t{0});
      ck.meta.steps = side.value("steps", int64_t{0});
      ck.meta.final_loss = side.value("final_loss", 0.0);
      ck.meta.note = side.value("note", "");
    } catch (const nlohmann::json::exception&) {
      // Sidecar is informational; a damaged one does not block loading.
    }
  }
  return ck;
}

}  // namespace treelm
