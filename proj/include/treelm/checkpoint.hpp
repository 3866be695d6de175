#pragma once

#include <string>

#include "treelm/encoder.hpp"
#include "treelm/heads.hpp"

namespace treelm {

// Binary checkpoint container, little-endian throughout:
//   magic "TLMC" | u32 version | u64 config-json length | config json |
//   u32 tensor count | per tensor: u32 name length, name, u64 element count,
//   raw float32 data.
// A JSON sidecar (<path>.meta.json) carries training metadata.
//
// The config json stores the EncoderConfig plus, when heads are present,
// the head dimensions (mlp hidden width and attribute class count).

struct CheckpointMeta {
  std::string rng = "splitmix64";
  uint64_t seed = 0;
  int64_t steps = 0;
  double final_loss = 0.0;
  std::string note;
};

void save_checkpoint(const std::string& path, const Params<float>& params,
                     const HeadParams<float>* heads, const CheckpointMeta& meta);

struct Checkpoint {
  Params<float> params;
  HeadParams<float> heads;
  bool has_heads = false;
  CheckpointMeta meta;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace treelm
